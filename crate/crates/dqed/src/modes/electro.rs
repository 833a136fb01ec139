//! Electrostatic (longitudinal) modes from piecewise-constant surface charges.
//!
//! With charges `I_j` on the boundary triangles, the total field energy is
//! `Iᵀ S I` (Galerkin single layer) and the energy inside the body is
//! `Iᵀ (S/2 − S R⁻¹ K) I` (double-layer adjoint `K`). Their ratio is `1/κ∥`,
//! so the modes solve a symmetric generalized eigenproblem on the neutral
//! subspace, and the interior energy norm equals the volume norm of the field.

use std::f64::consts::PI;

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::vec3::*;
use crate::geometry::SurfaceMesh;
use crate::linalg::sym_generalized_eigen;
use crate::quadrature::{adaptive_tri_rule, tri_integrals, tri_rule, tri_rule_subdivided, Rule, TRI6};
use crate::{Error, Result};

use super::{group_degenerate, Normalization};

/// Outer-quadrature controls for the surface double integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurfaceQuadrature {
    /// Observation leaves are split until `diam ≤ eta · distance to the source`.
    pub eta: f64,
    pub max_depth: u32,
    /// Pairs with centroid distance below `near_factor · max diameter` are refined.
    pub near_factor: f64,
    /// Uniform subdivision levels for the self term of the single layer.
    pub self_levels: u32,
}

impl Default for SurfaceQuadrature {
    fn default() -> Self {
        SurfaceQuadrature { eta: 1.0, max_depth: 5, near_factor: 3.0, self_levels: 3 }
    }
}

/// Discrete surface operators.
#[derive(Debug, Clone)]
pub struct ElectrostaticSystem {
    /// `R_jj = 1/A_j`.
    pub r: Vec<f64>,
    /// `C_ij = (1/A_iA_j) ∬ (r − r′)·n̂(r)/(2π|r − r′|³)`, zero on the diagonal.
    pub c: Mat<f64>,
    /// `S_ij = (1/A_iA_j) ∬ 1/(4π|r − r′|)`, symmetrized.
    pub single_layer: Mat<f64>,
    /// Poorly shaped triangles, as `(triangle, aspect ratio)`.
    pub warnings: Vec<(usize, f64)>,
}

/// Aspect ratio normalized to 1 for an equilateral triangle.
pub fn aspect_ratio(t: [Vec3; 3]) -> f64 {
    let area = norm(tri_area_vector(t[0], t[1], t[2]));
    let lmax = crate::quadrature::tri_diameter(t);
    lmax * lmax * 3f64.sqrt() / (4.0 * area)
}

pub const ASPECT_WARNING: f64 = 20.0;

pub fn assemble_electrostatic(surface: &SurfaceMesh) -> Result<ElectrostaticSystem> {
    assemble_electrostatic_with(surface, &SurfaceQuadrature::default())
}

pub fn assemble_electrostatic_with(surface: &SurfaceMesh, q: &SurfaceQuadrature) -> Result<ElectrostaticSystem> {
    let n = surface.len();
    let tris: Vec<[Vec3; 3]> = (0..n).map(|t| surface.vertices(t)).collect();
    let diam: Vec<f64> = tris.iter().map(|t| crate::quadrature::tri_diameter(*t)).collect();
    let plain: Vec<Rule> = tris.iter().map(|t| tri_rule(*t, &TRI6)).collect();
    let warnings: Vec<(usize, f64)> = tris
        .iter()
        .enumerate()
        .map(|(i, t)| (i, aspect_ratio(*t)))
        .filter(|&(_, a)| a > ASPECT_WARNING)
        .collect();

    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut srow = vec![0.0; n];
            let mut krow = vec![0.0; n];
            let ni = surface.normals[i];
            for j in 0..n {
                let near = dist(surface.centroids[i], surface.centroids[j]) < q.near_factor * diam[i].max(diam[j]);
                let adaptive;
                let rule: &Rule = if i == j {
                    adaptive = tri_rule_subdivided(tris[i], &TRI6, q.self_levels);
                    &adaptive
                } else if near {
                    adaptive = adaptive_tri_rule(tris[i], tris[j], q.eta, q.max_depth);
                    &adaptive
                } else {
                    &plain[i]
                };
                let (mut s, mut k) = (0.0, 0.0);
                for &(x, w) in rule {
                    let (pot, field) = tri_integrals(x, tris[j]);
                    s += w * pot;
                    if i != j {
                        k += w * dot(ni, field);
                    }
                }
                srow[j] = s / (4.0 * PI);
                krow[j] = k / (4.0 * PI);
            }
            (srow, krow)
        })
        .collect();

    let a = &surface.areas;
    let mut single_layer = Mat::<f64>::zeros(n, n);
    let mut c = Mat::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            single_layer[(i, j)] = 0.5 * (rows[i].0[j] + rows[j].0[i]) / (a[i] * a[j]);
            c[(i, j)] = 2.0 * rows[i].1[j] / (a[i] * a[j]);
        }
    }
    Ok(ElectrostaticSystem { r: a.iter().map(|x| 1.0 / x).collect(), c, single_layer, warnings })
}

/// Longitudinal spectrum: per-mode triangle charges `I_j` and eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongitudinalSpectrum {
    /// `κ∥`, descending.
    pub kappa: Vec<f64>,
    /// Triangle charges per mode (`σ_j = I_j / A_j`), scaled to unit volume norm.
    pub charges: Vec<Vec<f64>>,
    pub areas: Vec<f64>,
    /// Degenerate multiplets as half-open index ranges.
    pub groups: Vec<(usize, usize)>,
    pub normalization: Normalization,
    /// `max |Iₘᵀ W Iₘ′ − δ|` with `W` the discrete interior-energy matrix,
    /// evaluated before any volume-quadrature rescaling.
    pub energy_orthonormality: f64,
}

impl LongitudinalSpectrum {
    pub fn len(&self) -> usize {
        self.kappa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kappa.is_empty()
    }

    /// Surface charge density of mode `m` per triangle.
    pub fn sigma(&self, m: usize) -> Vec<f64> {
        self.charges[m].iter().zip(&self.areas).map(|(i, a)| i / a).collect()
    }

    pub fn total_charge(&self, m: usize) -> f64 {
        self.charges[m].iter().sum()
    }
}

/// Householder reflector `H = I − 2uuᵀ/uᵀu` mapping `e₀` to the normalized ones vector.
struct Deflation {
    u: Vec<f64>,
    beta: f64,
}

impl Deflation {
    fn new(n: usize) -> Self {
        let mut u = vec![1.0 / (n as f64).sqrt(); n];
        u[0] -= 1.0;
        let uu: f64 = u.iter().map(|x| x * x).sum();
        Deflation { u, beta: 2.0 / uu }
    }

    /// `H M H` with the first row and column dropped.
    fn reduce(&self, m: &Mat<f64>) -> Mat<f64> {
        let n = m.nrows();
        let u = &self.u;
        let mu: Vec<f64> = (0..n).map(|i| (0..n).map(|j| m[(i, j)] * u[j]).sum()).collect();
        let um: Vec<f64> = (0..n).map(|j| (0..n).map(|i| u[i] * m[(i, j)]).sum()).collect();
        let umu: f64 = (0..n).map(|i| u[i] * mu[i]).sum();
        let b = self.beta;
        Mat::from_fn(n - 1, n - 1, |i, j| {
            let (i, j) = (i + 1, j + 1);
            m[(i, j)] - b * u[i] * um[j] - b * mu[i] * u[j] + b * b * u[i] * umu * u[j]
        })
    }

    /// `H [0; y]`.
    fn expand(&self, y: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0];
        x.extend_from_slice(y);
        let ux: f64 = x.iter().zip(&self.u).map(|(a, b)| a * b).sum();
        x.iter().zip(&self.u).map(|(xi, ui)| xi - self.beta * ux * ui).collect()
    }
}

/// Interior-energy matrix `W = S/2 − S R⁻¹ K`, symmetrized, with `K = C/2`.
pub fn interior_energy_matrix(sys: &ElectrostaticSystem) -> Mat<f64> {
    let n = sys.r.len();
    let s = &sys.single_layer;
    let scaled_k = Mat::from_fn(n, n, |i, j| 0.5 * sys.c[(i, j)] / sys.r[i]);
    let sk = s * &scaled_k;
    Mat::from_fn(n, n, |i, j| 0.5 * s[(i, j)] - 0.5 * (sk[(i, j)] + sk[(j, i)]))
}

/// Solves for the `count` largest `κ∥` on `surface`.
pub fn solve_longitudinal(surface: &SurfaceMesh, count: usize) -> Result<LongitudinalSpectrum> {
    let sys = assemble_electrostatic(surface)?;
    solve_longitudinal_system(surface, &sys, count)
}

pub fn solve_longitudinal_system(
    surface: &SurfaceMesh,
    sys: &ElectrostaticSystem,
    count: usize,
) -> Result<LongitudinalSpectrum> {
    let n = surface.len();
    if count == 0 {
        return Err(Error::Invalid("requested zero longitudinal modes".into()));
    }
    if count > n - 1 {
        return Err(Error::Invalid(format!("requested {count} modes but the neutral subspace has dimension {}", n - 1)));
    }
    let w = interior_energy_matrix(sys);
    let defl = Deflation::new(n);
    let (lambda, y) = sym_generalized_eigen(defl.reduce(&w).as_ref(), defl.reduce(&sys.single_layer).as_ref())?;
    let usable: Vec<usize> = (0..lambda.len()).filter(|&k| lambda[k] > 0.0).take(count).collect();
    if usable.len() < count {
        return Err(Error::Eigen(format!("only {} positive energy ratios available, {count} requested", usable.len())));
    }
    let mut kappa = Vec::with_capacity(count);
    let mut charges = Vec::with_capacity(count);
    for &k in &usable {
        let col: Vec<f64> = (0..n - 1).map(|i| y[(i, k)]).collect();
        let scale = 1.0 / lambda[k].sqrt();
        charges.push(defl.expand(&col).into_iter().map(|v| v * scale).collect::<Vec<f64>>());
        kappa.push(1.0 / lambda[k]);
    }
    let groups = group_degenerate(&kappa, super::DEGENERACY_GAP);
    align_by_moments(&mut charges, &groups, |q| dipole_moment(surface, q));
    let energy_orthonormality = gram_residual(&charges, &w);
    Ok(LongitudinalSpectrum {
        kappa,
        charges,
        areas: surface.areas.clone(),
        groups,
        normalization: Normalization::Energy,
        energy_orthonormality,
    })
}

fn gram_residual(vecs: &[Vec<f64>], m: &Mat<f64>) -> f64 {
    let n = m.nrows();
    let mv: Vec<Vec<f64>> = vecs.iter().map(|v| (0..n).map(|i| (0..n).map(|j| m[(i, j)] * v[j]).sum()).collect()).collect();
    let mut worst = 0.0f64;
    for (a, va) in vecs.iter().enumerate() {
        for (b, mvb) in mv.iter().enumerate() {
            let g: f64 = va.iter().zip(mvb).map(|(x, y)| x * y).sum();
            worst = worst.max((g - if a == b { 1.0 } else { 0.0 }).abs());
        }
    }
    worst
}

/// `Σ_j I_j c_j`, the charge dipole moment.
pub fn dipole_moment(surface: &SurfaceMesh, charges: &[f64]) -> Vec3 {
    charges.iter().zip(&surface.centroids).fold([0.0; 3], |acc, (q, c)| add(acc, scale(*c, *q)))
}

/// Rotates every 3-dimensional multiplet so that the given vector moments of
/// its members point along +x, +y, +z, then fixes the sign of the remaining
/// modes by their largest coefficient.
pub(crate) fn align_by_moments(vecs: &mut [Vec<f64>], groups: &[(usize, usize)], moment: impl Fn(&[f64]) -> Vec3) {
    for &(start, end) in groups {
        if end - start == 3 {
            let m: [[f64; 3]; 3] = [0, 1, 2].map(|k| moment(&vecs[start + k]));
            if let Some(q) = crate::linalg::polar3(m) {
                let old: Vec<Vec<f64>> = vecs[start..end].to_vec();
                for k in 0..3 {
                    for (i, v) in vecs[start + k].iter_mut().enumerate() {
                        *v = (0..3).map(|l| q[l][k] * old[l][i]).sum();
                    }
                }
                continue;
            }
        }
        for v in vecs[start..end].iter_mut() {
            fix_sign(v);
        }
    }
}

pub(crate) fn fix_sign(v: &mut [f64]) {
    let big = v.iter().map(|x| x.abs()).fold(0.0, f64::max);
    if let Some(first) = v.iter().find(|x| x.abs() > 0.5 * big) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Field of piecewise-constant charges: `Σ_j σ_j ∫_{T_j} (r − r′)/(4π|r − r′|³)`,
/// for several charge vectors at once. Returns `[mode][point]`.
pub fn charge_fields(surface: &SurfaceMesh, charges: &[&[f64]], points: &[Vec3]) -> Vec<Vec<Vec3>> {
    let tris: Vec<[Vec3; 3]> = (0..surface.len()).map(|t| surface.vertices(t)).collect();
    let per_point: Vec<Vec<Vec3>> = points
        .par_iter()
        .map(|&x| {
            let mut out = vec![[0.0; 3]; charges.len()];
            for (j, t) in tris.iter().enumerate() {
                let f = scale(crate::quadrature::tri_field(x, *t), 1.0 / (4.0 * PI * surface.areas[j]));
                for (m, q) in charges.iter().enumerate() {
                    out[m] = add(out[m], scale(f, q[j]));
                }
            }
            out
        })
        .collect();
    (0..charges.len()).map(|m| per_point.iter().map(|p| p[m]).collect()).collect()
}
