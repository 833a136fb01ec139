//! Magnetostatic (transverse) modes on the solenoidal loop basis.

use std::f64::consts::PI;

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::vec3::*;
use crate::geometry::{LoopBasis, VolumeMesh};
use crate::linalg::sym_generalized_eigen;
use crate::quadrature::{tet_potential, tet_rule, tet_rule_subdivided, Rule, TET4};
use crate::{Error, Result};

use super::electro::align_by_moments;
use super::{group_degenerate, Normalization};

/// Controls for the tet-pair integrals of `1/(4πR)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VolumeQuadrature {
    /// Pairs with centroid distance below `near_factor · max diameter` use an
    /// analytic inner integral.
    pub near_factor: f64,
    /// Uniform subdivision levels of the outer rule for touching pairs.
    pub touching_levels: u32,
}

impl Default for VolumeQuadrature {
    fn default() -> Self {
        VolumeQuadrature { near_factor: 2.0, touching_levels: 1 }
    }
}

/// `J_hh′ = ∬_{K_h × K_h′} dV dV′ / (4π|r − r′|)`.
pub fn tet_pair_matrix(mesh: &VolumeMesh, q: &VolumeQuadrature) -> Mat<f64> {
    let n = mesh.len();
    let verts: Vec<[Vec3; 4]> = (0..n).map(|h| mesh.vertices(h)).collect();
    let cents: Vec<Vec3> = (0..n).map(|h| mesh.centroid(h)).collect();
    let diam: Vec<f64> = (0..n).map(|h| mesh.diameter(h)).collect();
    let rules: Vec<Rule> = verts.iter().map(|t| tet_rule(*t, &TET4)).collect();
    let fine: Vec<Rule> = verts.iter().map(|t| tet_rule_subdivided(*t, &TET4, q.touching_levels)).collect();
    let touching = |a: usize, b: usize| mesh.tets[a].iter().any(|i| mesh.tets[b].contains(i));
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|h| {
            let mut row = vec![0.0; n];
            for g in 0..n {
                let near = dist(cents[h], cents[g]) < q.near_factor * diam[h].max(diam[g]);
                let v = if near {
                    let outer = if touching(h, g) { &fine[h] } else { &rules[h] };
                    outer.iter().map(|&(x, w)| w * tet_potential(x, verts[g])).sum::<f64>()
                } else {
                    let mut s = 0.0;
                    for &(x, w) in &rules[h] {
                        for &(y, w2) in &rules[g] {
                            s += w * w2 / dist(x, y);
                        }
                    }
                    s
                };
                row[g] = v / (4.0 * PI);
            }
            row
        })
        .collect();
    Mat::from_fn(n, n, |i, j| 0.5 * (rows[i][j] + rows[j][i]))
}

/// Loop functions as a per-tet table: `values[p]` lists `(tet, vector)`.
fn loop_table(basis: &LoopBasis) -> Vec<&[(usize, Vec3)]> {
    basis.functions.iter().map(|f| f.pieces.as_slice()).collect()
}

#[derive(Debug, Clone)]
pub struct MagnetostaticSystem {
    /// `R_pq = ∫ u_p·u_q dV`.
    pub r: Mat<f64>,
    /// `L_pq = ∬ u_p(r)·u_q(r′)/(4π|r − r′|) dV dV′`.
    pub l: Mat<f64>,
}

pub fn assemble_magnetostatic(mesh: &VolumeMesh, basis: &LoopBasis) -> Result<MagnetostaticSystem> {
    let j = tet_pair_matrix(mesh, &VolumeQuadrature::default());
    assemble_magnetostatic_with(mesh, basis, &j)
}

pub fn assemble_magnetostatic_with(mesh: &VolumeMesh, basis: &LoopBasis, j: &Mat<f64>) -> Result<MagnetostaticSystem> {
    let nl = basis.len();
    let nt = mesh.len();
    let table = loop_table(basis);
    let mut by_tet: Vec<Vec<(usize, Vec3)>> = vec![Vec::new(); nt];
    for (p, pieces) in table.iter().enumerate() {
        for &(h, v) in pieces.iter() {
            by_tet[h].push((p, v));
        }
    }
    let mut r = Mat::<f64>::zeros(nl, nl);
    for (h, list) in by_tet.iter().enumerate() {
        for &(p, vp) in list {
            for &(q, vq) in list {
                r[(p, q)] += mesh.volumes[h] * dot(vp, vq);
            }
        }
    }
    // L = Σ_d C_dᵀ J C_d with sparse C_d (tet × loop).
    let mut l = Mat::<f64>::zeros(nl, nl);
    for d in 0..3 {
        let jc: Vec<Vec<f64>> = (0..nl)
            .into_par_iter()
            .map(|q| {
                let mut col = vec![0.0; nt];
                for &(g, v) in table[q] {
                    let c = v[d];
                    if c != 0.0 {
                        for (h, x) in col.iter_mut().enumerate() {
                            *x += j[(h, g)] * c;
                        }
                    }
                }
                col
            })
            .collect();
        for p in 0..nl {
            for &(h, v) in table[p] {
                let c = v[d];
                if c != 0.0 {
                    for q in 0..nl {
                        l[(p, q)] += c * jc[q][h];
                    }
                }
            }
        }
    }
    let ls = Mat::from_fn(nl, nl, |p, q| 0.5 * (l[(p, q)] + l[(q, p)]));
    if !ls.as_ref().col_iter().all(|c| c.iter().all(|x| x.is_finite())) {
        return Err(Error::Quality("non-finite entries in the magnetostatic operator".into()));
    }
    Ok(MagnetostaticSystem { r, l: ls })
}

/// Transverse spectrum: loop coefficients and per-tet constant field values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransverseSpectrum {
    /// `κ⊥`, ascending.
    pub kappa: Vec<f64>,
    /// Coefficients over the loop basis, unit volume norm.
    pub coeffs: Vec<Vec<f64>>,
    /// Constant field value of each mode in each tet.
    pub tet_values: Vec<Vec<Vec3>>,
    pub groups: Vec<(usize, usize)>,
    pub normalization: Normalization,
    /// `max |Iₘᵀ R Iₘ′ − δ|`.
    pub orthonormality: f64,
}

impl TransverseSpectrum {
    pub fn len(&self) -> usize {
        self.kappa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kappa.is_empty()
    }

    pub fn empty() -> Self {
        TransverseSpectrum {
            kappa: vec![],
            coeffs: vec![],
            tet_values: vec![],
            groups: vec![],
            normalization: Normalization::Exact,
            orthonormality: 0.0,
        }
    }
}

/// Per-tet values of a loop-coefficient vector.
pub fn tet_field(mesh: &VolumeMesh, basis: &LoopBasis, coeffs: &[f64]) -> Vec<Vec3> {
    let mut out = vec![[0.0; 3]; mesh.len()];
    for (f, &c) in basis.functions.iter().zip(coeffs) {
        for &(h, v) in &f.pieces {
            out[h] = add(out[h], scale(v, c));
        }
    }
    out
}

/// Solves `L I = (a²/κ⊥) R I` for the `count` smallest `κ⊥`.
pub fn solve_transverse(mesh: &VolumeMesh, basis: &LoopBasis, count: usize) -> Result<TransverseSpectrum> {
    let sys = assemble_magnetostatic(mesh, basis)?;
    solve_transverse_system(mesh, basis, &sys, count)
}

pub fn solve_transverse_system(
    mesh: &VolumeMesh,
    basis: &LoopBasis,
    sys: &MagnetostaticSystem,
    count: usize,
) -> Result<TransverseSpectrum> {
    let nl = basis.len();
    if count == 0 {
        return Ok(TransverseSpectrum::empty());
    }
    if count > nl {
        return Err(Error::Invalid(format!("requested {count} transverse modes but the loop basis has {nl} functions")));
    }
    let (mu, x) = sym_generalized_eigen(sys.l.as_ref(), sys.r.as_ref())?;
    let a2 = mesh.radius * mesh.radius;
    let mut kappa = Vec::with_capacity(count);
    let mut coeffs = Vec::with_capacity(count);
    for k in (0..nl).rev().take(count) {
        if !(mu[k] > 0.0) {
            return Err(Error::Eigen(format!("non-positive magnetostatic eigenvalue {:e}", mu[k])));
        }
        kappa.push(a2 / mu[k]);
        coeffs.push((0..nl).map(|i| x[(i, k)]).collect::<Vec<f64>>());
    }
    let groups = group_degenerate(&kappa, super::DEGENERACY_GAP);
    let center = mesh.center;
    let moment = |c: &[f64]| -> Vec3 {
        let vals = tet_field(mesh, basis, c);
        let (mut pol, mut tor) = ([0.0; 3], [0.0; 3]);
        for (h, v) in vals.iter().enumerate() {
            let rel = sub(mesh.centroid(h), center);
            let w = mesh.volumes[h];
            pol = add(pol, scale(*v, w * (a2 - dot(rel, rel))));
            tor = add(tor, scale(cross(rel, *v), w));
        }
        if norm(pol) / a2 >= norm(tor) / mesh.radius {
            pol
        } else {
            tor
        }
    };
    align_by_moments(&mut coeffs, &groups, moment);
    let tet_values: Vec<Vec<Vec3>> = coeffs.iter().map(|c| tet_field(mesh, basis, c)).collect();
    let mut worst = 0.0f64;
    for (a, va) in tet_values.iter().enumerate() {
        for (b, vb) in tet_values.iter().enumerate() {
            let g: f64 = (0..mesh.len()).map(|h| mesh.volumes[h] * dot(va[h], vb[h])).sum();
            worst = worst.max((g - if a == b { 1.0 } else { 0.0 }).abs());
        }
    }
    Ok(TransverseSpectrum { kappa, coeffs, tet_values, groups, normalization: Normalization::Exact, orthonormality: worst })
}
