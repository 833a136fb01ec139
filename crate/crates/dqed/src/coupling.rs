//! Radiative coupling coefficients `S^{ab}_{mm′}(s)` between static modes and
//! their small-size constants `Σ`.
//!
//! Every selected mode is carried as one constant vector per tet: transverse
//! modes are piecewise constant already, longitudinal ones are replaced by
//! their tet averages. The coefficients then split into
//!
//! * an `s`-independent part, `∬ U·U′/(4πR)` through the tet-pair matrix of
//!   the mode solve plus, for ∥∥ pairs, the boundary term
//!   `(1/8π)∮∮ (U·n) R (U′·n′)`;
//! * the regular dynamic part `∬ U G_d⊥ U′`, evaluated per `s` with a fixed
//!   tensor-product rule.
//!
//! The ⊥⊥ singular part is the closed form `a² s/(c₀² κ⊥)`; only `δS⊥⊥`
//! is assembled.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::geometry::vec3::*;
use crate::greens::transverse_dynamic_coeffs;
use crate::linalg::CMat;
use crate::modes::{Family, ModeSelection, ModeSet};
use crate::quadrature::{tet_potential, tet_rule, tet_rule_subdivided, tri_rule, Rule, TET4, TRI6};
use crate::{Error, Result};

/// Points per tet used for the regular dynamic kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DynamicRule {
    Centroid,
    Gauss4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CouplingOptions {
    pub dynamic_rule: DynamicRule,
    /// Subdivision levels for tet averages of longitudinal modes in tets that
    /// touch the boundary.
    pub boundary_levels: u32,
    /// Speed of light; change only for nondimensional runs.
    pub c0: f64,
}

impl Default for CouplingOptions {
    fn default() -> Self {
        CouplingOptions { dynamic_rule: DynamicRule::Centroid, boundary_levels: 1, c0: crate::constants::C0 }
    }
}

/// Coupling coefficients at one `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingMatrix {
    pub s: C64,
    /// `|s| a / c₀`.
    pub gamma: f64,
    pub families: Vec<Family>,
    /// `S` for ∥∥, ∥⊥, ⊥∥ pairs and `δS` for ⊥⊥ pairs.
    pub regular: CMat,
    /// `a² s/(c₀² κ⊥)` on transverse diagonal entries, zero elsewhere.
    pub quasistatic_perp: Vec<C64>,
}

impl CouplingMatrix {
    /// The full `S`, singular ⊥⊥ diagonal included.
    pub fn full(&self) -> CMat {
        let mut m = self.regular.clone();
        for (i, d) in self.quasistatic_perp.iter().enumerate() {
            m[(i, i)] += *d;
        }
        m
    }

    /// Entries whose row and column families match `(a, b)`, in selection order.
    pub fn block(&self, a: Family, b: Family) -> Vec<Vec<C64>> {
        let rows: Vec<usize> = (0..self.families.len()).filter(|&i| self.families[i] == a).collect();
        let cols: Vec<usize> = (0..self.families.len()).filter(|&i| self.families[i] == b).collect();
        rows.iter().map(|&i| cols.iter().map(|&j| self.regular[(i, j)]).collect()).collect()
    }
}

/// Shape-only constants of the small-size expansion, in selection order within
/// each family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallSizeConstants {
    pub par_par: Vec<Vec<f64>>,
    pub par_perp: Vec<Vec<f64>>,
    pub perp_perp: Vec<Vec<f64>>,
    pub inv_kappa_perp: Vec<f64>,
}

/// Per-tet representation of the selected modes and the `s`-independent parts.
#[derive(Debug, Clone)]
pub struct CouplingOperator {
    pub selection: ModeSelection,
    pub radius: f64,
    pub options: CouplingOptions,
    pub kappa: Vec<f64>,
    families: Vec<Family>,
    /// `[q][tet]`.
    pub tet_values: Vec<Vec<Vec3>>,
    /// `∬ U·U′/(4πR)`.
    pub volume_part: Vec<Vec<f64>>,
    /// `(1/8π)∮∮ (U·n) R (U′·n′)`, nonzero for ∥∥ pairs only.
    pub surface_part: Vec<Vec<f64>>,
    volumes: Vec<f64>,
    points: Vec<(usize, Vec3, f64)>,
    tets: Vec<[Vec3; 4]>,
    mesh_hash: String,
}

/// Tet averages of longitudinal mode fields.
pub fn longitudinal_tet_averages(modes: &ModeSet, indices: &[usize], boundary_levels: u32) -> Vec<Vec<Vec3>> {
    let mesh = &modes.mesh;
    let mut owner = Vec::new();
    let mut pts = Vec::new();
    let mut wts = Vec::new();
    for h in 0..mesh.len() {
        let touches = mesh.tets[h].iter().any(|&i| mesh.boundary_node[i]);
        let rule = if touches && boundary_levels > 0 {
            tet_rule_subdivided(mesh.vertices(h), &TET4, boundary_levels)
        } else {
            tet_rule(mesh.vertices(h), &TET4)
        };
        for (x, w) in rule {
            owner.push(h);
            pts.push(x);
            wts.push(w);
        }
    }
    let fields = modes.longitudinal_fields(indices, &pts);
    fields
        .iter()
        .map(|f| {
            let mut acc = vec![[0.0; 3]; mesh.len()];
            for (k, v) in f.iter().enumerate() {
                acc[owner[k]] = add(acc[owner[k]], scale(*v, wts[k]));
            }
            acc.iter().zip(&mesh.volumes).map(|(a, v)| scale(*a, 1.0 / v)).collect()
        })
        .collect()
}

/// `∬_{T_j × T_k} |r − r′| dS dS′` over boundary triangles, 6×6 Gauss.
pub fn boundary_distance_matrix(modes: &ModeSet) -> Vec<Vec<f64>> {
    let s = &modes.mesh.boundary;
    let rules: Vec<Rule> = (0..s.len()).map(|t| tri_rule(s.vertices(t), &TRI6)).collect();
    (0..s.len())
        .into_par_iter()
        .map(|j| {
            (0..s.len())
                .map(|k| {
                    let mut acc = 0.0;
                    for &(x, w) in &rules[j] {
                        for &(y, v) in &rules[k] {
                            acc += w * v * dist(x, y);
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

fn contract_tet_pairs(j: &faer::Mat<f64>, a: &[Vec3], b: &[Vec3]) -> f64 {
    let n = a.len();
    let mut total = 0.0;
    for h in 0..n {
        let mut row = [0.0; 3];
        for g in 0..n {
            let jv = j[(h, g)];
            row[0] += jv * b[g][0];
            row[1] += jv * b[g][1];
            row[2] += jv * b[g][2];
        }
        total += dot(a[h], row);
    }
    total
}

impl CouplingOperator {
    pub fn new(modes: &ModeSet, selection: &ModeSelection, options: &CouplingOptions) -> Result<Self> {
        selection.check(modes)?;
        if !(options.c0 > 0.0) {
            return Err(Error::Invalid("c0 must be positive".into()));
        }
        let mesh = &modes.mesh;
        let q = selection.len();
        let families: Vec<Family> = selection.entries.iter().map(|e| e.0).collect();
        let par_idx: Vec<usize> =
            selection.entries.iter().filter(|e| e.0 == Family::Parallel).map(|e| e.1).collect();
        let mut par_avg = longitudinal_tet_averages(modes, &par_idx, options.boundary_levels).into_iter();
        let mut tet_values = Vec::with_capacity(q);
        let mut kappa = Vec::with_capacity(q);
        let mut normal_trace: Vec<Option<Vec<f64>>> = Vec::with_capacity(q);
        for &(f, m) in &selection.entries {
            kappa.push(modes.kappa(f, m));
            match f {
                Family::Parallel => {
                    tet_values.push(par_avg.next().expect("one average per longitudinal mode"));
                    let k = modes.longitudinal.kappa[m];
                    let sig = modes.longitudinal.sigma(m);
                    normal_trace.push(Some(sig.iter().map(|x| -x / k).collect()));
                }
                Family::Perpendicular => {
                    tet_values.push(modes.transverse.tet_values[m].clone());
                    normal_trace.push(None);
                }
            }
        }
        let mut volume_part = vec![vec![0.0; q]; q];
        for a in 0..q {
            for b in a..q {
                let v = contract_tet_pairs(modes.tet_pairs(), &tet_values[a], &tet_values[b]);
                volume_part[a][b] = v;
                volume_part[b][a] = v;
            }
        }
        let mut surface_part = vec![vec![0.0; q]; q];
        if normal_trace.iter().filter(|t| t.is_some()).count() > 0 {
            let d = boundary_distance_matrix(modes);
            let dt: Vec<Option<Vec<f64>>> = normal_trace
                .iter()
                .map(|t| t.as_ref().map(|t| d.iter().map(|row| row.iter().zip(t).map(|(x, y)| x * y).sum()).collect()))
                .collect();
            for a in 0..q {
                for b in 0..q {
                    if let (Some(ta), Some(db)) = (&normal_trace[a], &dt[b]) {
                        let v: f64 = ta.iter().zip(db).map(|(x, y)| x * y).sum();
                        surface_part[a][b] = v / (8.0 * PI);
                    }
                }
            }
            for a in 0..q {
                for b in 0..a {
                    let v = 0.5 * (surface_part[a][b] + surface_part[b][a]);
                    surface_part[a][b] = v;
                    surface_part[b][a] = v;
                }
            }
        }
        let tets: Vec<[Vec3; 4]> = (0..mesh.len()).map(|h| mesh.vertices(h)).collect();
        let points: Vec<(usize, Vec3, f64)> = match options.dynamic_rule {
            DynamicRule::Centroid => (0..mesh.len()).map(|h| (h, mesh.centroid(h), mesh.volumes[h])).collect(),
            DynamicRule::Gauss4 => crate::modes::volume_rule(mesh),
        };
        Ok(CouplingOperator {
            selection: selection.clone(),
            radius: mesh.radius,
            options: *options,
            kappa,
            families,
            tet_values,
            volume_part,
            surface_part,
            volumes: mesh.volumes.clone(),
            points,
            tets,
            mesh_hash: mesh.hash(),
        })
    }

    pub fn len(&self) -> usize {
        self.selection.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selection.is_empty()
    }

    pub fn families(&self) -> &[Family] {
        &self.families
    }

    pub fn gamma(&self, s: C64) -> f64 {
        s.norm() * self.radius / self.options.c0
    }

    /// `∬ U_q G_d⊥(r − r′; s) U_q′ dV dV′` for every selected pair.
    pub fn dynamic(&self, s: C64) -> CMat {
        let q = self.len();
        let c0 = self.options.c0;
        let pts = &self.points;
        let vals: Vec<Vec<Vec3>> = pts.iter().map(|&(h, _, _)| (0..q).map(|k| self.tet_values[k][h]).collect()).collect();
        const CHUNK: usize = 32;
        let partial: Vec<Vec<C64>> = (0..pts.len().div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut acc = vec![C64::new(0.0, 0.0); q * q];
                let mut w = vec![[C64::new(0.0, 0.0); 3]; q];
                for p in c * CHUNK..((c + 1) * CHUNK).min(pts.len()) {
                    let (_, x, wx) = pts[p];
                    w.iter_mut().for_each(|v| *v = [C64::new(0.0, 0.0); 3]);
                    for (pp, &(_, y, wy)) in pts.iter().enumerate() {
                        let r = sub(x, y);
                        let d = norm(r);
                        let e = if d > 0.0 { scale(r, 1.0 / d) } else { [0.0; 3] };
                        let k = transverse_dynamic_coeffs(d, s, c0);
                        let (iso, rad) = (k.iso * wy, k.radial * wy);
                        for (b, wb) in w.iter_mut().enumerate() {
                            let u = vals[pp][b];
                            let eu = rad * dot(e, u);
                            for i in 0..3 {
                                wb[i] += iso * u[i] + eu * e[i];
                            }
                        }
                    }
                    for a in 0..q {
                        let u = vals[p][a];
                        for b in 0..q {
                            let wb = w[b];
                            acc[a * q + b] += (wb[0] * u[0] + wb[1] * u[1] + wb[2] * u[2]) * wx;
                        }
                    }
                }
                acc
            })
            .collect();
        let mut out = CMat::zeros(q);
        for part in &partial {
            for (o, v) in out.data.iter_mut().zip(part) {
                *o += v;
            }
        }
        out
    }

    /// Coupling matrix from a precomputed dynamic part.
    pub fn coupling_with_dynamic(&self, s: C64, dynamic: &CMat) -> CouplingMatrix {
        let q = self.len();
        let c0 = self.options.c0;
        let pre = s / (c0 * c0);
        let fam = &self.families;
        let regular = CMat::from_fn(q, |a, b| {
            let both_perp = fam[a] == Family::Perpendicular && fam[b] == Family::Perpendicular;
            let stat = if both_perp { 0.0 } else { self.volume_part[a][b] + self.surface_part[a][b] };
            pre * (dynamic[(a, b)] + stat)
        });
        let a2 = self.radius * self.radius;
        let quasistatic_perp = (0..q)
            .map(|k| if fam[k] == Family::Perpendicular { pre * (a2 / self.kappa[k]) } else { C64::new(0.0, 0.0) })
            .collect();
        CouplingMatrix { s, gamma: self.gamma(s), families: fam.clone(), regular, quasistatic_perp }
    }

    pub fn coupling(&self, s: C64) -> Result<CouplingMatrix> {
        let dynamic = self.dynamic(s);
        if !dynamic.is_finite() {
            return Err(Error::Singular(format!("non-finite coupling coefficients at s = {s}")));
        }
        Ok(self.coupling_with_dynamic(s, &dynamic))
    }

    /// Shape-only small-size constants.
    pub fn small_size_constants(&self) -> SmallSizeConstants {
        let a2 = self.radius * self.radius;
        let par: Vec<usize> = (0..self.len()).filter(|&i| self.families[i] == Family::Parallel).collect();
        let perp: Vec<usize> = (0..self.len()).filter(|&i| self.families[i] == Family::Perpendicular).collect();
        let par_par = par
            .iter()
            .map(|&i| par.iter().map(|&j| (self.volume_part[i][j] + self.surface_part[i][j]) / a2).collect())
            .collect();
        let par_perp = par.iter().map(|&i| perp.iter().map(|&j| self.volume_part[i][j] / a2).collect()).collect();
        let perp_vals: Vec<&[Vec3]> = perp.iter().map(|&i| self.tet_values[i].as_slice()).collect();
        let dist_part = distance_kernel_contractions(&self.tets, &perp_vals);
        let perp_perp = dist_part.iter().map(|row| row.iter().map(|v| v / (8.0 * PI * a2 * a2)).collect()).collect();
        SmallSizeConstants {
            par_par,
            par_perp,
            perp_perp,
            inv_kappa_perp: perp.iter().map(|&i| 1.0 / self.kappa[i]).collect(),
        }
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    /// Cache key over mesh, selection and options.
    pub fn cache_key(&self) -> String {
        format!(
            "{}|{}|{:?}|{}|{:x}",
            self.mesh_hash,
            self.selection.labels().join(","),
            self.options.dynamic_rule,
            self.options.boundary_levels,
            self.options.c0.to_bits()
        )
    }

    /// Dynamic parts at each `s`, through the cache when one is given.
    pub fn sample_dynamic(&self, grid: &[C64], cache: Option<&CouplingCache>) -> Result<Vec<CMat>> {
        if let Some(c) = cache {
            if let Some(hit) = c.load(&self.cache_key(), grid)? {
                return Ok(hit);
            }
        }
        let out: Vec<CMat> = grid.iter().map(|&s| self.dynamic(s)).collect();
        if out.iter().any(|m| !m.is_finite()) {
            return Err(Error::Singular("non-finite coupling coefficients".into()));
        }
        if let Some(c) = cache {
            c.store(&self.cache_key(), grid, &out)?;
        }
        Ok(out)
    }

    /// Chebyshev table of the dynamic part along `s = iω + ε`, `ω ∈ [0, ω_max]`.
    pub fn chebyshev_table(&self, omega_max: f64, eps: f64, nodes: usize, cache: Option<&CouplingCache>) -> Result<ChebyshevTable> {
        if !(omega_max > 0.0) || nodes < 2 {
            return Err(Error::Invalid("Chebyshev table needs ω_max > 0 and at least two nodes".into()));
        }
        let xs: Vec<f64> = (0..nodes).map(|k| (PI * (k as f64 + 0.5) / nodes as f64).cos()).collect();
        let grid: Vec<C64> = xs.iter().map(|&x| C64::new(eps, 0.5 * omega_max * (x + 1.0))).collect();
        let samples = self.sample_dynamic(&grid, cache)?;
        let q = self.len();
        let n = nodes as f64;
        let coeffs = (0..nodes)
            .map(|j| {
                let mut c = CMat::zeros(q);
                for (k, smp) in samples.iter().enumerate() {
                    let t = (PI * j as f64 * (k as f64 + 0.5) / n).cos();
                    for (o, v) in c.data.iter_mut().zip(&smp.data) {
                        *o += v * t;
                    }
                }
                let f = if j == 0 { 1.0 / n } else { 2.0 / n };
                c.data.iter_mut().for_each(|z| *z *= f);
                c
            })
            .collect();
        Ok(ChebyshevTable { omega_max, eps, coeffs })
    }

    /// Node count that resolves the phase variation `ω_max · 2a / c₀`.
    pub fn suggested_nodes(&self, omega_max: f64) -> usize {
        let phase = omega_max * 2.0 * self.radius / self.options.c0;
        (16 + (2.0 * phase).ceil() as usize).min(256)
    }
}

/// `Σ_hh′ u_h · u′_h′ ∬ |r − r′| dV dV′` for every pair of the given per-tet fields.
fn distance_kernel_contractions(tets: &[[Vec3; 4]], fields: &[&[Vec3]]) -> Vec<Vec<f64>> {
    let q = fields.len();
    if q == 0 {
        return vec![];
    }
    let rules: Vec<Rule> = tets.iter().map(|t| tet_rule(*t, &TET4)).collect();
    let fine: Vec<Rule> = tets.iter().map(|t| tet_rule_subdivided(*t, &TET4, 1)).collect();
    let n = tets.len();
    let partial: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|h| {
            let mut w = vec![[0.0; 3]; q];
            for g in 0..n {
                let (ra, rb) = if g == h { (&fine[h], &fine[g]) } else { (&rules[h], &rules[g]) };
                let mut k = 0.0;
                for &(x, wx) in ra {
                    for &(y, wy) in rb {
                        k += wx * wy * dist(x, y);
                    }
                }
                for (b, wb) in w.iter_mut().enumerate() {
                    *wb = add(*wb, scale(fields[b][g], k));
                }
            }
            let mut acc = vec![0.0; q * q];
            for a in 0..q {
                for b in 0..q {
                    acc[a * q + b] = dot(fields[a][h], w[b]);
                }
            }
            acc
        })
        .collect();
    let mut out = vec![vec![0.0; q]; q];
    for p in &partial {
        for a in 0..q {
            for b in 0..q {
                out[a][b] += p[a * q + b];
            }
        }
    }
    for a in 0..q {
        for b in 0..a {
            let v = 0.5 * (out[a][b] + out[b][a]);
            out[a][b] = v;
            out[b][a] = v;
        }
    }
    out
}

/// Chebyshev expansion of the dynamic coupling part in `ω`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChebyshevTable {
    pub omega_max: f64,
    pub eps: f64,
    pub coeffs: Vec<CMat>,
}

impl ChebyshevTable {
    pub fn eval(&self, omega: f64) -> CMat {
        self.eval_at(C64::new(self.eps, omega))
    }

    /// Value at a general `s` near the tabulated line, by analytic continuation
    /// of the polynomial: `ω → −i(s − ε_table)`. Accurate for shifts small
    /// against `ω_max`.
    pub fn eval_at(&self, s: C64) -> CMat {
        let w = (s - self.eps) * C64::new(0.0, -1.0);
        let x = w * (2.0 / self.omega_max) - 1.0;
        let q = self.coeffs[0].n;
        let mut b1 = CMat::zeros(q);
        let mut b2 = CMat::zeros(q);
        for c in self.coeffs.iter().skip(1).rev() {
            let mut b0 = c.clone();
            for i in 0..b0.data.len() {
                b0.data[i] += 2.0 * x * b1.data[i] - b2.data[i];
            }
            b2 = b1;
            b1 = b0;
        }
        let mut out = self.coeffs[0].clone();
        for i in 0..out.data.len() {
            out.data[i] += x * b1.data[i] - b2.data[i];
        }
        out
    }

    /// Magnitude of the last two coefficients relative to the largest, a cheap
    /// convergence indicator.
    pub fn tail(&self) -> f64 {
        let big = self.coeffs.iter().map(|c| c.max_abs()).fold(0.0, f64::max);
        let n = self.coeffs.len();
        let last = self.coeffs[n - 1].max_abs().max(self.coeffs[n - 2].max_abs());
        if big > 0.0 {
            last / big
        } else {
            0.0
        }
    }
}

/// On-disk store of dynamic-part samples keyed by mesh hash, selection,
/// options and the exact `s` grid.
#[derive(Debug, Clone)]
pub struct CouplingCache {
    pub dir: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    key: String,
    grid: Vec<C64>,
    samples: Vec<CMat>,
}

impl CouplingCache {
    pub fn new(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(CouplingCache { dir })
    }

    fn path(&self, key: &str, grid: &[C64]) -> (String, PathBuf) {
        let mut h = Sha256::new();
        h.update(key.as_bytes());
        for s in grid {
            h.update(s.re.to_le_bytes());
            h.update(s.im.to_le_bytes());
        }
        let digest: String = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
        let p = self.dir.join(format!("coupling-{}.json", &digest[..32]));
        (digest, p)
    }

    pub fn load(&self, key: &str, grid: &[C64]) -> Result<Option<Vec<CMat>>> {
        let (digest, p) = self.path(key, grid);
        if !p.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        let entry: CacheEntry = match serde_json::from_str(&text) {
            Ok(e) => e,
            Err(_) => return Ok(None),
        };
        if entry.key != digest || entry.grid != grid {
            return Ok(None);
        }
        Ok(Some(entry.samples))
    }

    pub fn store(&self, key: &str, grid: &[C64], samples: &[CMat]) -> Result<()> {
        let (digest, p) = self.path(key, grid);
        let entry = CacheEntry { key: digest, grid: grid.to_vec(), samples: samples.to_vec() };
        let text = serde_json::to_string(&entry).map_err(|e| Error::Invalid(e.to_string()))?;
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
    }
}

/// Residuals of the two volume-to-surface integral identities, evaluated on
/// transverse modes (zero normal trace, so the surface terms vanish).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    /// `|∬U(RR/R³)U′ − ∬U·U′/R| / scale`.
    pub first: f64,
    /// Residual against `∬U(RR/R)U′ = −∬R U·U′`.
    pub second: f64,
    /// Residual against the variant with `−½∬R U·U′`.
    pub second_half_variant: f64,
}

/// `∫_T (r − r′)/|r − r′| dS′` by subdivided Gauss (bounded integrand).
fn face_unit_vector_integral(x: Vec3, t: [Vec3; 3], levels: u32) -> Vec3 {
    crate::quadrature::tri_rule_subdivided(t, &TRI6, levels)
        .iter()
        .fold([0.0; 3], |acc, &(y, w)| {
            let r = sub(x, y);
            let d = norm(r);
            if d > 0.0 {
                add(acc, scale(r, w / d))
            } else {
                acc
            }
        })
}

/// Checks both identities for the listed transverse modes.
///
/// The `RR/R³` side uses, per source tet, `∫ RR/R³ dV′ = I∫dV′/R + ∮ (R/|R|) n′ dS′`
/// with the `1/R` part in closed form; the `RR/R` and `R` sides use plain
/// tensor Gauss rules. The inputs never pass through the global identity, so
/// the comparison is between independent assemblies.
pub fn identity_report(modes: &ModeSet, perp: &[usize]) -> Result<IdentityReport> {
    let mesh = &modes.mesh;
    for &m in perp {
        if m >= modes.transverse.len() {
            return Err(Error::Invalid(format!("transverse mode {} not computed", m + 1)));
        }
    }
    let u: Vec<&[Vec3]> = perp.iter().map(|&m| modes.transverse.tet_values[m].as_slice()).collect();
    let q = u.len();
    let n = mesh.len();
    let tets: Vec<[Vec3; 4]> = (0..n).map(|h| mesh.vertices(h)).collect();
    let outer: Vec<Rule> = tets.iter().map(|t| tet_rule_subdivided(*t, &TET4, 1)).collect();
    let faces: Vec<[[Vec3; 3]; 4]> = tets
        .iter()
        .map(|t| crate::geometry::TET_FACE_LOCAL.map(|f| f.map(|i| t[i])))
        .collect();
    let rows: Vec<[Vec<f64>; 4]> = (0..n)
        .into_par_iter()
        .map(|h| {
            let mut cubic = vec![0.0; q * q];
            let mut inv = vec![0.0; q * q];
            let mut lin_dyad = vec![0.0; q * q];
            let mut lin = vec![0.0; q * q];
            for g in 0..n {
                let near = tets[h].iter().any(|p| tets[g].iter().any(|r| dist(*p, *r) < 1e-14));
                let mut t3 = [[0.0; 3]; 3];
                let mut t1 = [[0.0; 3]; 3];
                let mut pot = 0.0;
                let mut rr = 0.0;
                for &(x, w) in &outer[h] {
                    let p = tet_potential(x, tets[g]);
                    pot += w * p;
                    for face in &faces[g] {
                        let nrm = normalize(tri_area_vector(face[0], face[1], face[2]));
                        let iv = face_unit_vector_integral(x, *face, if near { 3 } else { 1 });
                        for i in 0..3 {
                            for j in 0..3 {
                                t3[i][j] += w * iv[i] * nrm[j];
                            }
                        }
                    }
                    for i in 0..3 {
                        t3[i][i] += w * p;
                    }
                }
                for &(x, w) in &outer[h] {
                    for &(y, v) in &outer[g] {
                        let r = sub(x, y);
                        let d = norm(r);
                        rr += w * v * d;
                        if d > 0.0 {
                            for i in 0..3 {
                                for j in 0..3 {
                                    t1[i][j] += w * v * r[i] * r[j] / d;
                                }
                            }
                        }
                    }
                }
                for a in 0..q {
                    for b in 0..q {
                        let (ua, ub) = (u[a][h], u[b][g]);
                        let mut c3 = 0.0;
                        let mut c1 = 0.0;
                        for i in 0..3 {
                            for j in 0..3 {
                                c3 += ua[i] * t3[i][j] * ub[j];
                                c1 += ua[i] * t1[i][j] * ub[j];
                            }
                        }
                        cubic[a * q + b] += c3;
                        inv[a * q + b] += pot * dot(ua, ub);
                        lin_dyad[a * q + b] += c1;
                        lin[a * q + b] += rr * dot(ua, ub);
                    }
                }
            }
            [cubic, inv, lin_dyad, lin]
        })
        .collect();
    let mut sums = [vec![0.0; q * q], vec![0.0; q * q], vec![0.0; q * q], vec![0.0; q * q]];
    for r in &rows {
        for k in 0..4 {
            for (s, v) in sums[k].iter_mut().zip(&r[k]) {
                *s += v;
            }
        }
    }
    let scale1 = sums[1].iter().map(|x| x.abs()).fold(0.0, f64::max);
    let scale2 = sums[3].iter().map(|x| x.abs()).fold(0.0, f64::max);
    let mut rep = IdentityReport { first: 0.0, second: 0.0, second_half_variant: 0.0 };
    for i in 0..q * q {
        rep.first = rep.first.max((sums[0][i] - sums[1][i]).abs() / scale1);
        rep.second = rep.second.max((sums[2][i] + sums[3][i]).abs() / scale2);
        rep.second_half_variant = rep.second_half_variant.max((sums[2][i] + 0.5 * sums[3][i]).abs() / scale2);
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::ModeOptions;

    fn ball(f: usize) -> ModeSet {
        let mesh = crate::geometry::meshgen::shell_ball(f, 1.0, 0.5);
        ModeSet::compute(mesh, &ModeOptions { longitudinal: 3, transverse: 6, ..Default::default() }).unwrap()
    }

    #[test]
    fn zero_at_origin_and_conjugate_symmetric() {
        let set = ball(1);
        let sel = ModeSelection::leading(3, 6).unwrap();
        let op = CouplingOperator::new(&set, &sel, &CouplingOptions::default()).unwrap();
        let z = op.coupling(C64::new(0.0, 0.0)).unwrap();
        assert!(z.full().max_abs() == 0.0);
        let s = C64::new(1e7, 3e8);
        let a = op.coupling(s).unwrap().full();
        let b = op.coupling(s.conj()).unwrap().full();
        assert!(a.max_abs_diff(&b.conj()) <= 1e-14 * a.max_abs());
        assert!(a.max_abs_diff(&a.transpose()) <= 1e-10 * a.max_abs());
    }

    #[test]
    fn chebyshev_table_reproduces_direct_samples() {
        let set = ball(1);
        let sel = ModeSelection::leading(1, 3).unwrap();
        let op = CouplingOperator::new(&set, &sel, &CouplingOptions { c0: 1.0, ..Default::default() }).unwrap();
        let wmax = 4.0;
        let table = op.chebyshev_table(wmax, 0.0, op.suggested_nodes(wmax), None).unwrap();
        for w in [0.1, 1.3, 3.9] {
            let d = op.dynamic(C64::new(0.0, w));
            assert!(table.eval(w).max_abs_diff(&d) < 1e-10 * d.max_abs(), "{w}");
        }
    }
}
