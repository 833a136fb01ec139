//! Transport of driving-field statistics through the classical kernels:
//! the `Θ` dyad, mean polarization, two-time correlations and the electric
//! field inside and outside the body.
//!
//! Only c-number kernels appear here. `ħ` enters the commutators of the
//! driving operators, not the kernels, so no constant is dropped by working
//! with user-supplied statistics.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{EPS0, MU0};
use crate::geometry::vec3::*;
use crate::greens::{total_coeffs, Dyad3};
use crate::linalg::CMat;
use crate::material::DrudeLorentz;
use crate::modes::{Family, ModeSelection, ModeSet};
use crate::quadrature::{point_triangle_distance, tet_rule, TET4};
use crate::response::{ImpulseResponse, SynthesisGrid, TransferSample};
use crate::{Error, Result};

/// Points closer to the boundary than this fraction of the nearest boundary
/// triangle's longest edge are rejected.
pub const GUARD_FRACTION: f64 = 0.5;

pub type CVec3 = [C64; 3];

fn czero() -> CVec3 {
    [C64::new(0.0, 0.0); 3]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Inside,
    Outside,
}

/// Region of `p`, or an error inside the guard band.
pub fn classify(modes: &ModeSet, p: Vec3) -> Result<Region> {
    let s = &modes.mesh.boundary;
    let (mut best, mut edge) = (f64::INFINITY, 0.0);
    for t in 0..s.len() {
        let v = s.vertices(t);
        let d = point_triangle_distance(p, v);
        if d < best {
            best = d;
            edge = dist(v[0], v[1]).max(dist(v[1], v[2])).max(dist(v[2], v[0]));
        }
    }
    if best < GUARD_FRACTION * edge {
        return Err(Error::Singular(format!(
            "{p:?} lies {best:.3e} from the boundary, inside the guard band {:.3e}",
            GUARD_FRACTION * edge
        )));
    }
    Ok(if modes.is_inside(p) { Region::Inside } else { Region::Outside })
}

fn require(modes: &ModeSet, points: &[Vec3], want: Region) -> Result<()> {
    for (k, p) in points.iter().enumerate() {
        let r = classify(modes, *p).map_err(|e| Error::Singular(format!("point {k}: {e}")))?;
        if r != want {
            return Err(Error::Invalid(format!("point {k} at {p:?} is not {want:?}")));
        }
    }
    Ok(())
}

/// Mode fields of the selection at interior points, `[q][point]`.
pub fn mode_fields(modes: &ModeSet, selection: &ModeSelection, points: &[Vec3]) -> Result<Vec<Vec<Vec3>>> {
    selection.check(modes)?;
    require(modes, points, Region::Inside)?;
    modes.eval_modes(&selection.entries, points)
}

/// `Θ(r, r′) = Σ H_qq′ U_q(r) U_q′(r′)ᵀ` from fields already evaluated at the
/// two points.
pub fn theta_from_fields(h: &CMat, u_r: &[Vec3], u_rp: &[Vec3]) -> Dyad3 {
    let mut out = [[C64::new(0.0, 0.0); 3]; 3];
    for (i, a) in u_r.iter().enumerate() {
        for (j, b) in u_rp.iter().enumerate() {
            let hij = h[(i, j)];
            for k in 0..3 {
                for l in 0..3 {
                    out[k][l] += hij * (a[k] * b[l]);
                }
            }
        }
    }
    out
}

/// `Θ(r, r′)` at one frequency.
pub fn theta_kernel(h: &CMat, modes: &ModeSet, selection: &ModeSelection, r: Vec3, rp: Vec3) -> Result<Dyad3> {
    if h.n != selection.len() {
        return Err(Error::Invalid("transfer matrix and selection differ in size".into()));
    }
    let f = mode_fields(modes, selection, &[r, rp])?;
    let u_r: Vec<Vec3> = f.iter().map(|c| c[0]).collect();
    let u_rp: Vec<Vec3> = f.iter().map(|c| c[1]).collect();
    Ok(theta_from_fields(h, &u_r, &u_rp))
}

/// Two-time correlation of driving coordinates, `F_{q₁q₂}(τ₁, τ₂)` on a
/// uniform grid `τ = k dτ`, `k = 0..n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationKernel {
    pub dtau: f64,
    pub n: usize,
    /// `values[q₁·Q + q₂][k₁·n + k₂]`.
    pub values: Vec<Vec<C64>>,
}

impl CorrelationKernel {
    pub fn zeros(q: usize, n: usize, dtau: f64) -> Self {
        CorrelationKernel { dtau, n, values: vec![vec![C64::new(0.0, 0.0); n * n]; q * q] }
    }

    pub fn at(&self, q: usize, a: usize, b: usize, k1: usize, k2: usize) -> C64 {
        self.values[a * q + b][k1 * self.n + k2]
    }

    pub fn set(&mut self, q: usize, a: usize, b: usize, k1: usize, k2: usize, v: C64) {
        self.values[a * q + b][k1 * self.n + k2] = v;
    }

    pub fn end(&self) -> f64 {
        (self.n - 1) as f64 * self.dtau
    }
}

/// Mean driving coordinates on the sweep grid and optional correlations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrivingStatistics {
    pub labels: Vec<String>,
    pub omega: Vec<f64>,
    /// `mean[k][q] = F̄_q(ω_k)`.
    pub mean: Vec<Vec<C64>>,
    /// `F̄_q` at zero frequency, used by time-domain synthesis.
    pub mean_dc: Option<Vec<C64>>,
    pub correlation: Option<CorrelationKernel>,
}

impl DrivingStatistics {
    /// Monochromatic-in-band drive of one coordinate: `F̄ = amplitude` on the
    /// grid point nearest `omega0`, zero elsewhere.
    pub fn single_mode(labels: Vec<String>, omega: Vec<f64>, q: usize, omega0: f64, amplitude: C64) -> Self {
        let nq = labels.len();
        let k0 = (0..omega.len())
            .min_by(|&a, &b| (omega[a] - omega0).abs().total_cmp(&(omega[b] - omega0).abs()))
            .unwrap_or(0);
        let mean = (0..omega.len())
            .map(|k| (0..nq).map(|j| if k == k0 && j == q { amplitude } else { C64::new(0.0, 0.0) }).collect())
            .collect();
        DrivingStatistics { labels, omega, mean, mean_dc: None, correlation: None }
    }

    /// Flat mean drive on `[lo, hi]` for every coordinate.
    pub fn white_band(labels: Vec<String>, omega: Vec<f64>, lo: f64, hi: f64, amplitude: C64) -> Self {
        let nq = labels.len();
        let mean = omega
            .iter()
            .map(|&w| vec![if w >= lo && w <= hi { amplitude } else { C64::new(0.0, 0.0) }; nq])
            .collect();
        let dc = if lo <= 0.0 { Some(vec![amplitude; nq]) } else { Some(vec![C64::new(0.0, 0.0); nq]) };
        DrivingStatistics { labels, omega, mean, mean_dc: dc, correlation: None }
    }

    fn check_grid(&self, sample: &TransferSample) -> Result<()> {
        if self.labels != sample.labels {
            return Err(Error::Invalid("statistics and transfer matrix use different mode selections".into()));
        }
        if self.omega.len() != sample.omega.len()
            || self.omega.iter().zip(&sample.omega).any(|(a, b)| (a - b).abs() > 1e-12 * b.abs().max(1.0))
        {
            return Err(Error::Invalid("statistics grid differs from the sweep grid".into()));
        }
        if self.mean.iter().any(|m| m.len() != self.labels.len()) {
            return Err(Error::Invalid("mean coordinates have the wrong length".into()));
        }
        Ok(())
    }
}

/// Complex 3-vectors per frequency per point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub points: Vec<Vec3>,
    pub region: Region,
    pub omega: Vec<f64>,
    /// `values[k][p]`.
    pub values: Vec<Vec<CVec3>>,
    /// Indices of frequencies where the evaluation was not defined.
    pub flagged: Vec<usize>,
}

fn synthesize_fields(coords: &[Vec<C64>], fields: &[Vec<Vec3>]) -> Vec<Vec<CVec3>> {
    let np = fields.first().map_or(0, |f| f.len());
    coords
        .iter()
        .map(|c| {
            (0..np)
                .map(|p| {
                    let mut v = czero();
                    for (q, cq) in c.iter().enumerate() {
                        let u = fields[q][p];
                        for d in 0..3 {
                            v[d] += cq * u[d];
                        }
                    }
                    v
                })
                .collect()
        })
        .collect()
}

/// `⟨P⟩_q(ω) = Σ H_qq′(ω) F̄_q′(ω)` per frequency.
pub fn mean_coordinates(stats: &DrivingStatistics, sample: &TransferSample) -> Result<Vec<Vec<C64>>> {
    stats.check_grid(sample)?;
    Ok(sample
        .h
        .iter()
        .zip(&stats.mean)
        .map(|(h, f)| (0..h.n).map(|i| (0..h.n).map(|j| h[(i, j)] * f[j]).sum()).collect())
        .collect())
}

/// Mean polarization at interior points over the sweep grid.
pub fn expectation_polarization(
    stats: &DrivingStatistics,
    sample: &TransferSample,
    modes: &ModeSet,
    selection: &ModeSelection,
    points: &[Vec3],
) -> Result<FieldSample> {
    let coords = mean_coordinates(stats, sample)?;
    let fields = mode_fields(modes, selection, points)?;
    Ok(FieldSample {
        points: points.to_vec(),
        region: Region::Inside,
        omega: sample.omega.clone(),
        values: synthesize_fields(&coords, &fields),
        flagged: vec![],
    })
}

/// Time-domain mean coordinates `⟨P⟩_q(t)` through the response synthesis.
pub fn mean_coordinates_time(
    stats: &DrivingStatistics,
    sample: &TransferSample,
    grid: &SynthesisGrid,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let coords = mean_coordinates(stats, sample)?;
    let q = sample.q();
    let dc: Vec<f64> = match (&stats.mean_dc, &sample.dc) {
        (Some(f), Some(h)) => (0..q).map(|i| (0..q).map(|j| h[(i, j)] * f[j]).sum::<C64>().re).collect(),
        _ => vec![0.0; q],
    };
    let series = (0..q).map(|i| grid.synthesize(dc[i], |k| coords[k][i]).0).collect();
    Ok((grid.times(), series))
}

/// `⟨P(r₁,t₁)·P(r₂,t₂)⟩` from the driving correlation kernel:
/// `Σ Z_{q₁q₂} ∬ h_{q₁q₁′}(t₁−τ₁) h_{q₂q₂′}(t₂−τ₂) F_{q₁′q₂′}(τ₁,τ₂)`, with
/// `Z_{q₁q₂} = U_{q₁}(r₁)·U_{q₂}(r₂)` and trapezoid weights on the `F` grid.
pub fn two_time_correlation_from_fields(
    kernel: &CorrelationKernel,
    impulse: &ImpulseResponse,
    u1: &[Vec3],
    t1: f64,
    u2: &[Vec3],
    t2: f64,
) -> Result<C64> {
    let q = impulse.q();
    if u1.len() != q || u2.len() != q || kernel.values.len() != q * q {
        return Err(Error::Invalid("correlation kernel, impulse response and fields differ in size".into()));
    }
    if kernel.n < 2 || kernel.end() < t1.max(t2) - 1e-12 * kernel.end().max(1.0) {
        return Err(Error::Invalid(format!(
            "correlation grid ends at {:e}, before max(t1, t2) = {:e}",
            kernel.end(),
            t1.max(t2)
        )));
    }
    let n = kernel.n;
    let w = |k: usize| if k == 0 || k == n - 1 { 0.5 * kernel.dtau } else { kernel.dtau };
    // g_{q₁q₁′}(k) = h(t₁ − τ_k) w_k, likewise for t₂.
    let g = |t: f64| -> Vec<Vec<f64>> {
        (0..q * q)
            .map(|e| (0..n).map(|k| impulse.sample(e / q, e % q, t - k as f64 * kernel.dtau) * w(k)).collect())
            .collect()
    };
    let (g1, g2) = (g(t1), g(t2));
    let mut total = C64::new(0.0, 0.0);
    for a in 0..q {
        for b in 0..q {
            let z = dot(u1[a], u2[b]);
            if z == 0.0 {
                continue;
            }
            let mut acc = C64::new(0.0, 0.0);
            for ap in 0..q {
                for bp in 0..q {
                    let f = &kernel.values[ap * q + bp];
                    let (ga, gb) = (&g1[a * q + ap], &g2[b * q + bp]);
                    for k1 in 0..n {
                        if ga[k1] == 0.0 {
                            continue;
                        }
                        let row = &f[k1 * n..(k1 + 1) * n];
                        let inner: C64 = row.iter().zip(gb).map(|(x, y)| x * *y).sum();
                        acc += inner * ga[k1];
                    }
                }
            }
            total += acc * z;
        }
    }
    Ok(total)
}

pub fn two_time_correlation(
    stats: &DrivingStatistics,
    impulse: &ImpulseResponse,
    modes: &ModeSet,
    selection: &ModeSelection,
    (r1, t1): (Vec3, f64),
    (r2, t2): (Vec3, f64),
) -> Result<C64> {
    let kernel = stats
        .correlation
        .as_ref()
        .ok_or_else(|| Error::Invalid("statistics carry no correlation kernel".into()))?;
    let f = mode_fields(modes, selection, &[r1, r2])?;
    let u1: Vec<Vec3> = f.iter().map(|c| c[0]).collect();
    let u2: Vec<Vec3> = f.iter().map(|c| c[1]).collect();
    two_time_correlation_from_fields(kernel, impulse, &u1, t1, &u2, t2)
}

/// Electric-field coordinates `(P − P_free)/(ε₀ χ̃(s))` per frequency, with
/// flagged frequencies where `χ̃` is not usable.
pub fn efield_coordinates(
    p: &[Vec<C64>],
    p_free: &[Vec<C64>],
    material: &DrudeLorentz,
    omega: &[f64],
    eps: f64,
) -> Result<(Vec<Vec<C64>>, Vec<usize>)> {
    if p.len() != omega.len() || p_free.len() != omega.len() {
        return Err(Error::Invalid("coordinate arrays do not match the grid".into()));
    }
    let mut flagged = vec![];
    let out = omega
        .iter()
        .enumerate()
        .map(|(k, &w)| {
            let s = C64::new(eps, w);
            match material.chi(s) {
                Ok(chi) if chi.norm() > 1e-300 => {
                    p[k].iter().zip(&p_free[k]).map(|(a, b)| (a - b) / (EPS0 * chi)).collect()
                }
                _ => {
                    flagged.push(k);
                    vec![C64::new(0.0, 0.0); p[k].len()]
                }
            }
        })
        .collect();
    Ok((out, flagged))
}

/// Field inside the body through the constitutive relation.
#[allow(clippy::too_many_arguments)]
pub fn efield_inside(
    p: &[Vec<C64>],
    p_free: &[Vec<C64>],
    material: &DrudeLorentz,
    omega: &[f64],
    eps: f64,
    modes: &ModeSet,
    selection: &ModeSelection,
    points: &[Vec3],
) -> Result<FieldSample> {
    let (coords, flagged) = efield_coordinates(p, p_free, material, omega, eps)?;
    let fields = mode_fields(modes, selection, points)?;
    Ok(FieldSample {
        points: points.to_vec(),
        region: Region::Inside,
        omega: omega.to_vec(),
        values: synthesize_fields(&coords, &fields),
        flagged,
    })
}

/// Volume quadrature of the body with the selected mode fields at each node:
/// longitudinal fields are evaluated pointwise, transverse ones are constant
/// per tet. Tets touching the boundary use a subdivided rule.
#[derive(Debug, Clone)]
pub struct PolarizationSources {
    pub points: Vec<(Vec3, f64)>,
    /// `[q][point]`.
    pub fields: Vec<Vec<Vec3>>,
}

impl PolarizationSources {
    pub fn new(modes: &ModeSet, selection: &ModeSelection, boundary_levels: u32) -> Result<Self> {
        selection.check(modes)?;
        let mesh = &modes.mesh;
        let mut owner = Vec::new();
        let mut points = Vec::new();
        for h in 0..mesh.len() {
            let touches = mesh.tets[h].iter().any(|&i| mesh.boundary_node[i]);
            let rule = if touches && boundary_levels > 0 {
                crate::quadrature::tet_rule_subdivided(mesh.vertices(h), &TET4, boundary_levels)
            } else {
                tet_rule(mesh.vertices(h), &TET4)
            };
            for p in rule {
                owner.push(h);
                points.push(p);
            }
        }
        let xs: Vec<Vec3> = points.iter().map(|p| p.0).collect();
        let par: Vec<usize> = selection.entries.iter().filter(|e| e.0 == Family::Parallel).map(|e| e.1).collect();
        let mut par_fields = modes.longitudinal_fields(&par, &xs).into_iter();
        let fields = selection
            .entries
            .iter()
            .map(|&(f, m)| match f {
                Family::Parallel => par_fields.next().expect("one field per longitudinal mode"),
                Family::Perpendicular => owner.iter().map(|&h| modes.transverse.tet_values[m][h]).collect(),
            })
            .collect();
        Ok(PolarizationSources { points, fields })
    }
}

/// Scattered field outside the body, `−μ₀ s² ∫ G(r − r′; s) P(r′) dV′`.
/// `p[q]` are the coordinates at `s`.
pub fn efield_outside_at(
    p: &[C64],
    s: C64,
    c0: f64,
    modes: &ModeSet,
    sources: &PolarizationSources,
    points: &[Vec3],
) -> Result<Vec<CVec3>> {
    if s.norm() == 0.0 {
        return Err(Error::Singular("the scattered-field kernel needs s ≠ 0".into()));
    }
    if p.len() != sources.fields.len() {
        return Err(Error::Invalid("coordinates and mode fields differ in size".into()));
    }
    require(modes, points, Region::Outside)?;
    let pol: Vec<CVec3> = (0..sources.points.len())
        .map(|k| {
            let mut v = czero();
            for (q, pq) in p.iter().enumerate() {
                let u = sources.fields[q][k];
                for d in 0..3 {
                    v[d] += pq * u[d];
                }
            }
            v
        })
        .collect();
    let pre = -MU0 * s * s;
    Ok(points
        .par_iter()
        .map(|&x| {
            let mut e = czero();
            for (k, &(y, w)) in sources.points.iter().enumerate() {
                let r = sub(x, y);
                let d = norm(r);
                let dir = scale(r, 1.0 / d);
                let g = total_coeffs(d, s, c0);
                let ep: C64 = (0..3).map(|i| pol[k][i] * dir[i]).sum();
                for i in 0..3 {
                    e[i] += (g.iso * pol[k][i] + g.radial * ep * dir[i]) * (w * pre);
                }
            }
            e
        })
        .collect())
}

/// Scattered field outside the body over a sweep.
pub fn efield_outside(
    p: &[Vec<C64>],
    omega: &[f64],
    eps: f64,
    c0: f64,
    modes: &ModeSet,
    selection: &ModeSelection,
    points: &[Vec3],
) -> Result<FieldSample> {
    let src = PolarizationSources::new(modes, selection, 1)?;
    let values = omega
        .iter()
        .zip(p)
        .map(|(&w, pk)| efield_outside_at(pk, C64::new(eps, w), c0, modes, &src, points))
        .collect::<Result<Vec<_>>>()?;
    Ok(FieldSample { points: points.to_vec(), region: Region::Outside, omega: omega.to_vec(), values, flagged: vec![] })
}

/// Coulomb field of the bound surface charge `P·n`, evaluated from the
/// interior trace of the mode fields at boundary-triangle quadrature points:
/// `E = (1/4πε₀) ∮ (P·n) (r − r′)/|r − r′|³ dS′`. A static reference for
/// [`efield_outside_at`].
pub fn coulomb_field_of_trace(
    modes: &ModeSet,
    selection: &ModeSelection,
    p: &[f64],
    points: &[Vec3],
    levels: u32,
) -> Result<Vec<Vec3>> {
    selection.check(modes)?;
    let s = &modes.mesh.boundary;
    let mut src: Vec<(Vec3, f64)> = Vec::new();
    let mut normals = Vec::new();
    for t in 0..s.len() {
        let v = s.vertices(t);
        let n = s.normals[t];
        let h = dist(v[0], v[1]).max(dist(v[1], v[2])).max(dist(v[2], v[0]));
        for (x, w) in crate::quadrature::tri_rule_subdivided(v, &crate::quadrature::TRI6, levels) {
            src.push((sub(x, scale(n, 1e-7 * h)), w));
            normals.push(n);
        }
    }
    let pts: Vec<Vec3> = src.iter().map(|p| p.0).collect();
    let fields = modes.eval_modes(&selection.entries, &pts)?;
    let density: Vec<f64> = (0..pts.len())
        .map(|k| (0..p.len()).map(|q| p[q] * dot(fields[q][k], normals[k])).sum::<f64>() * src[k].1)
        .collect();
    Ok(points
        .par_iter()
        .map(|&x| {
            let mut e = [0.0; 3];
            for (k, &(y, _)) in src.iter().enumerate() {
                let r = sub(x, y);
                let d = norm(r);
                e = add(e, scale(r, density[k] / (4.0 * std::f64::consts::PI * EPS0 * d * d * d)));
            }
            e
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::Family;
    use crate::response::{impulse_from_transfer, ResponseSolver, SweepOptions, SynthesisOptions, Uncoupled, Window};

    #[test]
    fn theta_identity_gives_closure_kernel() {
        let u_r = vec![[1.0, 0.0, 0.0], [0.0, 2.0, 0.0]];
        let u_rp = vec![[0.0, 0.0, 3.0], [1.0, 1.0, 0.0]];
        let t = theta_from_fields(&CMat::identity(2), &u_r, &u_rp);
        assert_eq!(t[0][2], C64::new(3.0, 0.0));
        assert_eq!(t[1][0], C64::new(2.0, 0.0));
        assert_eq!(t[1][1], C64::new(2.0, 0.0));
        assert_eq!(t[2][2], C64::new(0.0, 0.0));
    }

    #[test]
    fn theta_transpose_identity() {
        let h = CMat::from_fn(2, |i, j| C64::new((i + 2 * j) as f64, (i * j) as f64 + 0.5));
        let u_r = vec![[1.0, -0.5, 0.0], [0.2, 2.0, 0.3]];
        let u_rp = vec![[0.0, 0.7, 3.0], [1.0, 1.0, -1.0]];
        let a = theta_from_fields(&h, &u_r, &u_rp);
        let b = theta_from_fields(&h.transpose(), &u_rp, &u_r);
        for k in 0..3 {
            for l in 0..3 {
                assert!((a[k][l] - b[l][k]).norm() < 1e-14);
            }
        }
    }

    fn small_sample(gamma: f64) -> (TransferSample, DrudeLorentz) {
        let mat = DrudeLorentz::new(1.0, 0.0, gamma).unwrap();
        let model = Uncoupled { families: vec![Family::Parallel], kappa: vec![3.0], radius: 1.0, c0: 100.0 };
        let solver = ResponseSolver::new(mat, &model).unwrap();
        (solver.frequency_sweep(&SweepOptions { n_f: 2048, ..Default::default() }).unwrap(), mat)
    }

    #[test]
    fn delta_correlation_reproduces_impulse_product() {
        let (sample, _) = small_sample(0.1);
        let h = impulse_from_transfer(&sample, &SynthesisOptions::default()).unwrap();
        let dtau = 0.05;
        let mut k = CorrelationKernel::zeros(1, 200, dtau);
        k.set(1, 0, 0, 0, 0, C64::new(4.0 / (dtau * dtau), 0.0));
        let u = [[1.0, 0.0, 0.0]];
        let (t1, t2) = (3.0, 5.5);
        let v = two_time_correlation_from_fields(&k, &h, &u, t1, &u, t2).unwrap();
        let expected = h.sample(0, 0, t1) * h.sample(0, 0, t2);
        assert!((v.re - expected).abs() < 1e-12 * expected.abs().max(1.0));
        let zero = CorrelationKernel::zeros(1, 200, dtau);
        assert_eq!(two_time_correlation_from_fields(&zero, &h, &u, t1, &u, t2).unwrap(), C64::new(0.0, 0.0));
        let short = CorrelationKernel::zeros(1, 10, dtau);
        assert!(two_time_correlation_from_fields(&short, &h, &u, t1, &u, t2).is_err());
    }

    #[test]
    fn white_band_mean_decays_with_material_time() {
        let gamma = 0.1;
        let (sample, _) = small_sample(gamma);
        let stats = DrivingStatistics::white_band(sample.labels.clone(), sample.omega.clone(), 0.0, 1e9, C64::new(1.0, 0.0));
        let grid = SynthesisGrid { omega_max: sample.plan.omega_max, n_f: sample.len(), eps: sample.plan.eps, window: Window::default() };
        let (t, series) = mean_coordinates_time(&stats, &sample, &grid).unwrap();
        // A flat drive makes ⟨P⟩ the impulse response itself; fit its envelope.
        let p = &series[0];
        let mut peaks = vec![];
        for k in 1..p.len() - 1 {
            if t[k] > 0.0 && t[k] < 60.0 && p[k] > p[k - 1] && p[k] >= p[k + 1] && p[k] > 0.0 {
                peaks.push((t[k], p[k].ln()));
            }
        }
        let n = peaks.len() as f64;
        let (sx, sy) = peaks.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
        let (mx, my) = (sx / n, sy / n);
        let slope = peaks.iter().map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / peaks.iter().map(|(x, _)| (x - mx).powi(2)).sum::<f64>();
        assert!((-1.0 / slope - 2.0 / gamma).abs() < 0.03 * 2.0 / gamma, "tau {}", -1.0 / slope);
    }

    #[test]
    fn efield_coordinates_vanish_for_free_polarization() {
        let mat = DrudeLorentz::new(1.0, 0.3, 0.1).unwrap();
        let p = vec![vec![C64::new(1.0, 2.0)]; 3];
        let (e, flagged) = efield_coordinates(&p, &p, &mat, &[0.1, 0.2, 0.3], 0.0).unwrap();
        assert!(flagged.is_empty());
        assert!(e.iter().all(|v| v[0].norm() == 0.0));
        let zero = vec![vec![C64::new(0.0, 0.0)]; 3];
        let (e, _) = efield_coordinates(&p, &zero, &mat, &[0.1, 0.2, 0.3], 0.0).unwrap();
        let chi = mat.chi(C64::new(0.0, 0.2)).unwrap();
        assert!((e[1][0] - p[1][0] / (EPS0 * chi)).norm() < 1e-9 * e[1][0].norm());
        let (ec, _) = efield_coordinates(&[vec![p[1][0].conj()]], &[vec![C64::new(0.0, 0.0)]], &mat, &[-0.2], 0.0).unwrap();
        assert!((ec[0][0] - e[1][0].conj()).norm() < 1e-9 * e[1][0].norm());
    }
}
