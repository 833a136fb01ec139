//! Property tests for the invariants of each module.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64 as C64;
use proptest::prelude::*;

use dqed::coupling::{CouplingOperator, CouplingOptions};
use dqed::geometry::meshgen::{cone_ball, cube_block, cylinder, disk};
use dqed::geometry::vec3::*;
use dqed::geometry::{build_loop_basis, parse_mesh_str, write_msh22, MeshFormat, VolumeMesh};
use dqed::greens::{
    green_longitudinal, green_total, green_transverse, green_transverse_dynamic, green_transverse_static, max_abs,
    max_abs_diff, Dyad3,
};
use dqed::material::DrudeLorentz;
use dqed::modes::{ModeOptions, ModeSelection, ModeSet};
use dqed::quantum::{
    expectation_polarization, two_time_correlation_from_fields, CorrelationKernel, DrivingStatistics,
};
use dqed::response::{reciprocity_defect, DirectCoupling, ImpulseResponse, ResponseSolver, Window};

// ---------------------------------------------------------------------------
// helpers

fn rotation(axis: Vec3, angle: f64) -> [[f64; 3]; 3] {
    let n = norm(axis);
    let [x, y, z] = scale(axis, 1.0 / n);
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    [
        [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
        [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
        [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
    ]
}

fn apply(r: &[[f64; 3]; 3], v: Vec3) -> Vec3 {
    [0, 1, 2].map(|i| r[i][0] * v[0] + r[i][1] * v[1] + r[i][2] * v[2])
}

/// `R G Rᵀ`.
fn conjugate(r: &[[f64; 3]; 3], g: &Dyad3) -> Dyad3 {
    let mut out = [[C64::new(0.0, 0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    out[i][j] += g[k][l] * (r[i][k] * r[j][l]);
                }
            }
        }
    }
    out
}

fn transpose(g: &Dyad3) -> Dyad3 {
    [0, 1, 2].map(|i| [0, 1, 2].map(|j| g[j][i]))
}

fn vec3() -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-1.0f64..1.0).prop_filter("not at the origin", |v| norm(*v) > 0.05)
}

fn tiny_modes() -> &'static ModeSet {
    static CELL: OnceLock<ModeSet> = OnceLock::new();
    CELL.get_or_init(|| {
        let opts = ModeOptions { longitudinal: 3, transverse: 3, ..Default::default() };
        ModeSet::compute(cone_ball(2, 1.0), &opts).unwrap()
    })
}

fn tiny_operator() -> &'static CouplingOperator {
    static CELL: OnceLock<CouplingOperator> = OnceLock::new();
    CELL.get_or_init(|| {
        let sel = ModeSelection::leading(3, 3).unwrap();
        CouplingOperator::new(tiny_modes(), &sel, &CouplingOptions { c0: 1.0, ..Default::default() }).unwrap()
    })
}

fn generated_mesh(kind: u8, n: usize) -> VolumeMesh {
    match kind % 4 {
        0 => cone_ball(n, 1.0),
        1 => cube_block(n, 2.0),
        2 => cylinder(1.0, 0.7, n, 2),
        _ => disk(1.0, 0.2, n, 1),
    }
}

// ---------------------------------------------------------------------------
// geometry

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Every loop function is divergence-free: fluxes cancel across interior
    /// faces and vanish through boundary faces.
    #[test]
    fn loop_functions_are_solenoidal(kind in 0u8..4, n in 1usize..3) {
        let mesh = generated_mesh(kind, n);
        let basis = build_loop_basis(&mesh).unwrap();
        let faces = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];
        for f in &basis.functions {
            let mut flux: HashMap<[usize; 3], f64> = HashMap::new();
            let mut big = 0.0f64;
            for &(t, v) in &f.pieces {
                let verts = mesh.vertices(t);
                for (opp, local) in faces.iter().enumerate() {
                    let [a, b, c] = local.map(|k| verts[k]);
                    let mut area = scale(cross(sub(b, a), sub(c, a)), 0.5);
                    if dot(area, sub(verts[opp], a)) > 0.0 {
                        area = scale(area, -1.0);
                    }
                    let mut key = local.map(|k| mesh.tets[t][k]);
                    key.sort_unstable();
                    let q = dot(v, area);
                    big = big.max(q.abs());
                    *flux.entry(key).or_default() += q;
                }
            }
            for (_, q) in flux {
                prop_assert!(q.abs() <= 1e-10 * big.max(1e-300));
            }
        }
    }

    /// The boundary is closed: `Σ A_j n̂_j = 0`.
    #[test]
    fn boundary_area_vectors_cancel(kind in 0u8..4, n in 1usize..4) {
        let mesh = generated_mesh(kind, n);
        let total: f64 = mesh.boundary.areas.iter().sum();
        prop_assert!(norm(mesh.boundary.area_vector_sum()) <= 1e-12 * total);
    }

    /// Writing and re-reading a mesh reproduces it exactly.
    #[test]
    fn mesh_round_trip(kind in 0u8..4, n in 1usize..4) {
        let mesh = generated_mesh(kind, n);
        let again = parse_mesh_str(&write_msh22(&mesh), MeshFormat::Msh22).unwrap();
        prop_assert_eq!(&again.tets, &mesh.tets);
        prop_assert_eq!(again.hash(), mesh.hash());
    }
}

// ---------------------------------------------------------------------------
// material

proptest! {
    /// Passive media absorb at every positive frequency.
    #[test]
    fn passivity(wp in 0.01f64..10.0, w0 in 0.0f64..10.0, g in 0.0f64..5.0, w in 0.0f64..100.0) {
        let m = DrudeLorentz::new(wp, w0, g).unwrap();
        prop_assert!(m.sigma(w) >= 0.0);
    }

    /// `|χ̃(iω)| ω² → ω_P²` far above every material frequency.
    #[test]
    fn susceptibility_decays_as_inverse_square(wp in 0.01f64..10.0, w0 in 0.0f64..10.0, g in 0.0f64..5.0) {
        let m = DrudeLorentz::new(wp, w0, g).unwrap();
        let w = 1e4 * (wp + w0 + g);
        let chi = m.chi(C64::new(0.0, w)).unwrap();
        prop_assert!((chi.norm() * w * w / (wp * wp) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn alpha_squared_is_two_sigma_over_pi(wp in 0.01f64..10.0, w0 in 0.0f64..10.0, g in 0.0f64..5.0, nu in 0.0f64..30.0) {
        let m = DrudeLorentz::new(wp, w0, g).unwrap();
        let (a, s) = (m.alpha(nu), m.sigma(nu));
        prop_assert!((a * a - 2.0 * s / PI).abs() <= 1e-14 * s.max(1e-300));
    }
}

// ---------------------------------------------------------------------------
// greens

fn complex_s() -> impl Strategy<Value = C64> {
    (0.0f64..2.0, -5.0f64..5.0).prop_map(|(re, im)| C64::new(re, im)).prop_filter("nonzero", |s| s.norm() > 1e-3)
}

proptest! {
    /// Every kernel is symmetric, even in `r`, and rotation-equivariant.
    #[test]
    fn kernels_are_symmetric_and_equivariant(r in vec3(), s in complex_s(), axis in vec3(), angle in 0.0f64..6.3) {
        let rot = rotation(axis, angle);
        let kernels: [fn(Vec3, C64) -> Dyad3; 5] = [
            |r, s| green_total(r, s, 1.0).unwrap(),
            |r, s| green_longitudinal(r, s, 1.0).unwrap(),
            |r, s| green_transverse(r, s, 1.0).unwrap(),
            |r, _| green_transverse_static(r).unwrap(),
            |r, s| green_transverse_dynamic(r, s, 1.0),
        ];
        for k in kernels {
            let g = k(r, s);
            let tol = 1e-12 * max_abs(&g).max(1e-300);
            prop_assert!(max_abs_diff(&g, &transpose(&g)) <= tol);
            prop_assert!(max_abs_diff(&g, &transpose(&k(scale(r, -1.0), s))) <= tol);
            prop_assert!(max_abs_diff(&k(apply(&rot, r), s), &conjugate(&rot, &g)) <= 1e-10 * max_abs(&g).max(1e-300));
        }
    }

    /// `G⊥ = G⊥_static + G⊥_dyn` and `G⊥ = G − G∥`, relative to the largest term.
    #[test]
    fn transverse_decomposition(r in vec3(), s in complex_s()) {
        let gt = green_transverse(r, s, 1.0).unwrap();
        let gs = green_transverse_static(r).unwrap();
        let gd = green_transverse_dynamic(r, s, 1.0);
        let g = green_total(r, s, 1.0).unwrap();
        let gl = green_longitudinal(r, s, 1.0).unwrap();
        let big = [&gt, &gs, &gd, &g, &gl].iter().map(|m| max_abs(m)).fold(0.0, f64::max);
        let sum: Dyad3 = [0, 1, 2].map(|i| [0, 1, 2].map(|j| gs[i][j] + gd[i][j]));
        let diff: Dyad3 = [0, 1, 2].map(|i| [0, 1, 2].map(|j| g[i][j] - gl[i][j]));
        prop_assert!(max_abs_diff(&gt, &sum) <= 1e-12 * big);
        prop_assert!(max_abs_diff(&gt, &diff) <= 1e-12 * big);
    }
}

// ---------------------------------------------------------------------------
// modes

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    /// Spectra depend on shape only: rigid motions and uniform scaling leave them unchanged.
    #[test]
    fn spectra_are_shape_only(axis in vec3(), angle in 0.0f64..6.3, factor in 0.01f64..100.0, shift in vec3()) {
        let base = tiny_modes();
        let rot = rotation(axis, angle);
        let moved = base.mesh.mapped(|p| add(scale(apply(&rot, p), factor), shift)).unwrap();
        let modes = ModeSet::compute(moved, &base.options).unwrap();
        for (a, b) in modes.longitudinal.kappa.iter().zip(&base.longitudinal.kappa) {
            prop_assert!((a - b).abs() <= 1e-8 * b);
        }
        for (a, b) in modes.transverse.kappa.iter().zip(&base.transverse.kappa) {
            prop_assert!((a - b).abs() <= 1e-8 * b);
        }
    }
}

proptest! {
    /// Projections of a solenoidal tangential field onto more transverse
    /// modes capture a non-decreasing share of its norm, never more than all of it.
    #[test]
    fn transverse_projection_is_monotone(axis in vec3()) {
        let modes = tiny_modes();
        let mesh = &modes.mesh;
        // u = axis × r is divergence-free and tangential on a sphere about the origin.
        let field = |p: Vec3| cross(axis, sub(p, mesh.center));
        let total: f64 = (0..mesh.len())
            .map(|h| {
                // |u|² is quadratic: the 4-point rule is exact.
                dqed::quadrature::tet_rule(mesh.vertices(h), &dqed::quadrature::TET4)
                    .iter()
                    .map(|&(x, w)| w * dot(field(x), field(x)))
                    .sum::<f64>()
            })
            .sum();
        let mut captured = 0.0;
        for m in 0..modes.transverse.len() {
            let c: f64 = (0..mesh.len())
                .map(|h| mesh.volumes[h] * dot(modes.transverse.tet_values[m][h], field(mesh.centroid(h))))
                .sum();
            let next = captured + c * c;
            prop_assert!(next >= captured);
            captured = next;
        }
        prop_assert!(captured <= total * (1.0 + 1e-9));
    }
}

// ---------------------------------------------------------------------------
// coupling and response

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// `S(iω + ε) = conj S(−iω + ε)`: real time-domain kernels.
    #[test]
    fn coupling_conjugate_symmetry(w in 0.01f64..4.0, eps in 0.0f64..0.5) {
        let op = tiny_operator();
        let a = op.coupling(C64::new(eps, w)).unwrap().full();
        let b = op.coupling(C64::new(eps, -w)).unwrap().full();
        let big = a.max_abs();
        for (x, y) in a.data.iter().zip(&b.data) {
            prop_assert!((x - y.conj()).norm() <= 1e-12 * big);
        }
    }

    /// Identical inputs give bit-identical coupling blocks.
    #[test]
    fn coupling_is_deterministic(w in 0.01f64..4.0) {
        let sel = ModeSelection::leading(3, 3).unwrap();
        let opts = CouplingOptions { c0: 1.0, ..Default::default() };
        let fresh = CouplingOperator::new(tiny_modes(), &sel, &opts).unwrap();
        let s = C64::new(0.0, w);
        prop_assert_eq!(fresh.coupling(s).unwrap().full().data, tiny_operator().coupling(s).unwrap().full().data);
    }

    /// `H` is symmetric for a symmetric coupling matrix.
    #[test]
    fn transfer_is_reciprocal(w in 0.01f64..4.0, eps in 1e-3f64..0.5, g in 0.0f64..0.3) {
        let model = DirectCoupling(tiny_operator());
        let solver = ResponseSolver::new(DrudeLorentz::new(1.0, 0.0, g).unwrap(), &model).unwrap();
        let p = solver.transfer_at(w, eps).unwrap();
        prop_assert!(reciprocity_defect(&p.h) < 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    /// Results depend on `ω_P` and `a` only through `β = ω_P a/c₀`: doubling
    /// `ω_P` and halving `a` reproduces `H` on the scaled grid.
    #[test]
    fn transfer_depends_on_beta_only(x in 0.05f64..3.0, g in 0.0f64..0.3, factor in 0.1f64..10.0) {
        let base = tiny_modes();
        let scaled = ModeSet::compute(base.mesh.mapped(|p| scale(p, 1.0 / factor)).unwrap(), &base.options).unwrap();
        let sel = ModeSelection::leading(3, 3).unwrap();
        let opts = CouplingOptions { c0: 1.0, ..Default::default() };
        let op1 = tiny_operator();
        let op2 = CouplingOperator::new(&scaled, &sel, &opts).unwrap();
        let (m1, m2) = (DirectCoupling(op1), DirectCoupling(&op2));
        let s1 = ResponseSolver::new(DrudeLorentz::new(1.0, 0.0, g).unwrap(), &m1).unwrap();
        let s2 = ResponseSolver::new(DrudeLorentz::new(factor, 0.0, g * factor).unwrap(), &m2).unwrap();
        let h1 = s1.transfer_at(x, 1e-2).unwrap().h;
        let h2 = s2.transfer_at(x * factor, 1e-2 * factor).unwrap().h;
        prop_assert!(h1.max_abs_diff(&h2) <= 1e-7 * h1.max_abs());
    }
}

// ---------------------------------------------------------------------------
// quantum

fn toy_sample(q: usize, n: usize) -> dqed::response::TransferSample {
    let model = DirectCoupling(tiny_operator());
    let solver = ResponseSolver::new(DrudeLorentz::new(1.0, 0.0, 0.1).unwrap(), &model).unwrap();
    let plan = dqed::response::SweepPlan { omega_max: 3.0, n_f: n, eps: 0.05, decay_point: None, clamped: false };
    let s = solver.sweep(&plan, 1e12).unwrap();
    assert_eq!(s.q(), q);
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    /// Mean polarization is linear in the mean drive.
    #[test]
    fn polarization_is_linear(a in -2.0f64..2.0, b in -2.0f64..2.0, k1 in 0usize..16, k2 in 0usize..16, q1 in 0usize..6, q2 in 0usize..6) {
        static SAMPLE: OnceLock<dqed::response::TransferSample> = OnceLock::new();
        let sample = SAMPLE.get_or_init(|| toy_sample(6, 16));
        let modes = tiny_modes();
        let sel = ModeSelection::leading(3, 3).unwrap();
        let labels = sel.labels();
        let w = sample.omega.clone();
        let f1 = DrivingStatistics::single_mode(labels.clone(), w.clone(), q1, w[k1], C64::new(1.0, 0.5));
        let f2 = DrivingStatistics::single_mode(labels.clone(), w.clone(), q2, w[k2], C64::new(-0.3, 1.0));
        let mut mix = f1.clone();
        for (k, row) in mix.mean.iter_mut().enumerate() {
            for (q, v) in row.iter_mut().enumerate() {
                *v = *v * a + f2.mean[k][q] * b;
            }
        }
        let pts = [[0.1, 0.05, -0.1], [-0.2, 0.1, 0.15]];
        let p1 = expectation_polarization(&f1, sample, modes, &sel, &pts).unwrap();
        let p2 = expectation_polarization(&f2, sample, modes, &sel, &pts).unwrap();
        let pm = expectation_polarization(&mix, sample, modes, &sel, &pts).unwrap();
        let mut big = 0.0f64;
        let mut err = 0.0f64;
        for k in 0..w.len() {
            for p in 0..pts.len() {
                for d in 0..3 {
                    let want = p1.values[k][p][d] * a + p2.values[k][p][d] * b;
                    big = big.max(want.norm()).max(p1.values[k][p][d].norm()).max(p2.values[k][p][d].norm());
                    err = err.max((pm.values[k][p][d] - want).norm());
                }
            }
        }
        prop_assert!(err <= 1e-12 * big.max(1e-300));
    }

    /// A positive semidefinite drive correlation gives `⟨P(r,t)·P(r,t)⟩ ≥ 0`.
    #[test]
    fn equal_point_correlation_is_nonnegative(
        seed in prop::collection::vec(-1.0f64..1.0, 2 * 2 * 8 + 2 * 3 + 2 * 2 * 16),
        t in 0.0f64..0.7,
    ) {
        let (q, n, nt) = (2usize, 8usize, 16usize);
        let mut it = seed.into_iter();
        // Rank-two real kernel F_ab(k1, k2) = Σ_r v_r[a][k1] v_r[b][k2].
        let v: Vec<Vec<f64>> = (0..2).map(|_| (0..q * n).map(|_| it.next().unwrap()).collect()).collect();
        let mut kernel = CorrelationKernel::zeros(q, n, 0.1);
        for a in 0..q {
            for b in 0..q {
                for k1 in 0..n {
                    for k2 in 0..n {
                        let f: f64 = v.iter().map(|r| r[a * n + k1] * r[b * n + k2]).sum();
                        kernel.set(q, a, b, k1, k2, C64::new(f, 0.0));
                    }
                }
            }
        }
        let u: Vec<Vec3> = (0..q).map(|_| [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()]).collect();
        let dt = 0.1;
        let times: Vec<f64> = (0..2 * nt).map(|k| (k as f64 - nt as f64) * dt).collect();
        let values: Vec<Vec<f64>> = (0..q * q)
            .map(|_| {
                let vals: Vec<f64> = (0..nt).map(|_| it.next().unwrap()).collect();
                (0..2 * nt).map(|k| if k < nt { 0.0 } else { vals[k - nt] }).collect()
            })
            .collect();
        let h = ImpulseResponse {
            labels: vec!["par1".into(), "perp1".into()],
            t: times,
            values,
            omega_max: PI / dt,
            n_f: nt,
            eps: 0.0,
            window: Window::None,
            imag_residue: 0.0,
            anticausal_energy: 0.0,
            anticausal_peak: 0.0,
        };
        let c = two_time_correlation_from_fields(&kernel, &h, &u, t, &u, t).unwrap();
        let scale: f64 = kernel.values.iter().flatten().map(|z| z.norm()).sum::<f64>() * 16.0;
        prop_assert!(c.re >= -1e-12 * scale.max(1.0));
        prop_assert!(c.im.abs() <= 1e-12 * scale.max(1.0));
    }
}

#[test]
fn zero_drive_gives_zero_polarization() {
    let sample = toy_sample(6, 8);
    let sel = ModeSelection::leading(3, 3).unwrap();
    let zero = DrivingStatistics::single_mode(sel.labels(), sample.omega.clone(), 0, 1.0, C64::new(0.0, 0.0));
    let p = expectation_polarization(&zero, &sample, tiny_modes(), &sel, &[[0.0, 0.0, 0.1]]).unwrap();
    assert!(p.values.iter().flatten().flatten().all(|z| z.norm() == 0.0));
}
