//! Static longitudinal and transverse mode sets of a meshed body.

pub mod electro;
pub mod magneto;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geometry::vec3::*;
use crate::geometry::{build_loop_basis, LoopBasis, VolumeMesh};
use crate::quadrature::{point_triangle_distance, solid_angle, tet_rule, TET4};
use crate::{Error, Result};

pub use electro::{
    assemble_electrostatic, assemble_electrostatic_with, solve_longitudinal, ElectrostaticSystem, LongitudinalSpectrum,
    SurfaceQuadrature,
};
pub use magneto::{
    assemble_magnetostatic, solve_transverse, tet_pair_matrix, MagnetostaticSystem, TransverseSpectrum, VolumeQuadrature,
};

/// Relative eigenvalue gap below which neighbouring modes form one multiplet.
pub const DEGENERACY_GAP: f64 = 1e-3;

/// How mode amplitudes were fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Discrete interior-energy norm (exact volume norm of the charge field).
    Energy,
    /// Rescaled by a tet-mesh volume quadrature of `|U|²`.
    VolumeQuadrature,
    /// Piecewise-constant fields, volume norm computed exactly.
    Exact,
}

/// Groups sorted eigenvalues whose consecutive relative gap is below `gap`.
pub fn group_degenerate(values: &[f64], gap: f64) -> Vec<(usize, usize)> {
    let mut groups = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        if i == values.len() || (values[i] - values[i - 1]).abs() > gap * values[i - 1].abs() {
            groups.push((start, i));
            start = i;
        }
    }
    groups
}

/// Which family a mode belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    #[serde(alias = "par", alias = "longitudinal")]
    Parallel,
    #[serde(alias = "perp", alias = "transverse")]
    Perpendicular,
}

impl Family {
    pub fn symbol(&self) -> &'static str {
        match self {
            Family::Parallel => "par",
            Family::Perpendicular => "perp",
        }
    }
}

/// Ordered list of modes kept in the response problem.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModeSelection {
    pub entries: Vec<(Family, usize)>,
}

impl ModeSelection {
    pub fn new(entries: Vec<(Family, usize)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Invalid("empty mode selection".into()));
        }
        for (i, e) in entries.iter().enumerate() {
            if entries[..i].contains(e) {
                return Err(Error::Invalid(format!("mode {}{} selected twice", e.0.symbol(), e.1 + 1)));
            }
        }
        Ok(ModeSelection { entries })
    }

    /// The first `n_par` longitudinal modes followed by the first `n_perp` transverse ones.
    pub fn leading(n_par: usize, n_perp: usize) -> Result<Self> {
        let mut e: Vec<(Family, usize)> = (0..n_par).map(|m| (Family::Parallel, m)).collect();
        e.extend((0..n_perp).map(|m| (Family::Perpendicular, m)));
        Self::new(e)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Position of a mode in the selection.
    pub fn position(&self, family: Family, m: usize) -> Option<usize> {
        self.entries.iter().position(|&e| e == (family, m))
    }

    /// Checks indices against the computed spectra.
    pub fn check(&self, modes: &ModeSet) -> Result<()> {
        for &(f, m) in &self.entries {
            if m >= modes.count(f) {
                return Err(Error::Invalid(format!(
                    "mode {}{} requested but only {} were computed",
                    f.symbol(),
                    m + 1,
                    modes.count(f)
                )));
            }
        }
        Ok(())
    }

    /// Labels such as `par1`, `perp2` (one-based, as printed in tables).
    pub fn labels(&self) -> Vec<String> {
        self.entries.iter().map(|(f, m)| format!("{}{}", f.symbol(), m + 1)).collect()
    }

    /// Parses a label produced by [`labels`](Self::labels).
    pub fn parse_label(label: &str) -> Result<(Family, usize)> {
        let (fam, rest) = if let Some(r) = label.strip_prefix("perp") {
            (Family::Perpendicular, r)
        } else if let Some(r) = label.strip_prefix("par") {
            (Family::Parallel, r)
        } else {
            return Err(Error::Invalid(format!("bad mode label {label:?}")));
        };
        match rest.parse::<usize>() {
            Ok(k) if k >= 1 => Ok((fam, k - 1)),
            _ => Err(Error::Invalid(format!("bad mode label {label:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModeOptions {
    pub longitudinal: usize,
    pub transverse: usize,
    pub surface_quadrature: SurfaceQuadrature,
    pub volume_quadrature: VolumeQuadrature,
    /// Rescale longitudinal modes by volume quadrature instead of the energy norm.
    pub volume_normalization: bool,
}

impl Default for ModeOptions {
    fn default() -> Self {
        ModeOptions {
            longitudinal: 12,
            transverse: 12,
            surface_quadrature: SurfaceQuadrature::default(),
            volume_quadrature: VolumeQuadrature::default(),
            volume_normalization: false,
        }
    }
}

/// Both spectra of one body plus the mesh they live on.
#[derive(Debug, Clone)]
pub struct ModeSet {
    pub mesh: VolumeMesh,
    pub loops: LoopBasis,
    pub longitudinal: LongitudinalSpectrum,
    pub transverse: TransverseSpectrum,
    /// Tet-pair matrix of `1/(4πR)`, built on first use.
    tet_pairs: std::sync::OnceLock<faer::Mat<f64>>,
    pub options: ModeOptions,
}

/// Serialized form: eigenvalues and coefficients keyed by mesh hash.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSetFile {
    pub format: String,
    pub mesh_hash: String,
    pub radius: f64,
    pub options: ModeOptions,
    pub longitudinal: LongitudinalSpectrum,
    pub transverse: TransverseSpectrum,
}

pub const MODESET_FORMAT: &str = "dqed-modes/1";

impl ModeSet {
    pub fn compute(mesh: VolumeMesh, options: &ModeOptions) -> Result<Self> {
        let loops = build_loop_basis(&mesh)?;
        let tet_pairs = std::sync::OnceLock::new();
        let esys = assemble_electrostatic_with(&mesh.boundary, &options.surface_quadrature)?;
        let mut longitudinal = electro::solve_longitudinal_system(&mesh.boundary, &esys, options.longitudinal)?;
        let transverse = if options.transverse > 0 {
            let j = tet_pairs.get_or_init(|| tet_pair_matrix(&mesh, &options.volume_quadrature));
            let msys = magneto::assemble_magnetostatic_with(&mesh, &loops, j)?;
            magneto::solve_transverse_system(&mesh, &loops, &msys, options.transverse)?
        } else {
            TransverseSpectrum::empty()
        };
        if options.volume_normalization {
            let gram = longitudinal_gram(&mesh, &longitudinal);
            for (m, q) in longitudinal.charges.iter_mut().enumerate() {
                let s = 1.0 / gram[m][m].sqrt();
                q.iter_mut().for_each(|x| *x *= s);
            }
            longitudinal.normalization = Normalization::VolumeQuadrature;
        }
        Ok(ModeSet { mesh, loops, longitudinal, transverse, tet_pairs, options: *options })
    }

    pub fn radius(&self) -> f64 {
        self.mesh.radius
    }

    /// `J_hh′ = ∬ 1/(4πR)` over tet pairs, shared with the coupling assembly.
    pub fn tet_pairs(&self) -> &faer::Mat<f64> {
        self.tet_pairs.get_or_init(|| tet_pair_matrix(&self.mesh, &self.options.volume_quadrature))
    }

    pub fn mesh_hash(&self) -> String {
        self.mesh.hash()
    }

    pub fn count(&self, family: Family) -> usize {
        match family {
            Family::Parallel => self.longitudinal.len(),
            Family::Perpendicular => self.transverse.len(),
        }
    }

    pub fn kappa(&self, family: Family, m: usize) -> f64 {
        match family {
            Family::Parallel => self.longitudinal.kappa[m],
            Family::Perpendicular => self.transverse.kappa[m],
        }
    }

    pub fn to_file(&self) -> ModeSetFile {
        ModeSetFile {
            format: MODESET_FORMAT.into(),
            mesh_hash: self.mesh_hash(),
            radius: self.radius(),
            options: self.options,
            longitudinal: self.longitudinal.clone(),
            transverse: self.transverse.clone(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string(&self.to_file()).map_err(|e| Error::Invalid(e.to_string()))?;
        std::fs::write(path.as_ref(), text).map_err(|e| Error::io(path.as_ref(), e))
    }

    /// Rebuilds a mode set from its file and the mesh it was computed on.
    pub fn load(path: impl AsRef<Path>, mesh: VolumeMesh) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        let file: ModeSetFile = serde_json::from_str(&text).map_err(|e| Error::Invalid(format!("mode file: {e}")))?;
        Self::from_file(file, mesh)
    }

    pub fn from_file(file: ModeSetFile, mesh: VolumeMesh) -> Result<Self> {
        if file.format != MODESET_FORMAT {
            return Err(Error::Invalid(format!("unknown mode file format {:?}", file.format)));
        }
        if file.mesh_hash != mesh.hash() {
            return Err(Error::Invalid("mode file was computed on a different mesh".into()));
        }
        let loops = build_loop_basis(&mesh)?;
        Ok(ModeSet {
            mesh,
            loops,
            longitudinal: file.longitudinal,
            transverse: file.transverse,
            tet_pairs: std::sync::OnceLock::new(),
            options: file.options,
        })
    }

    /// Longitudinal fields at arbitrary points (no guard check). `[mode][point]`.
    pub fn longitudinal_fields(&self, modes: &[usize], points: &[Vec3]) -> Vec<Vec<Vec3>> {
        let q: Vec<&[f64]> = modes.iter().map(|&m| self.longitudinal.charges[m].as_slice()).collect();
        electro::charge_fields(&self.mesh.boundary, &q, points)
    }

    /// Longitudinal mode `m` at interior points at least `guard` from the boundary.
    pub fn eval_longitudinal_mode(&self, m: usize, points: &[Vec3], guard: f64) -> Result<Vec<Vec3>> {
        if m >= self.longitudinal.len() {
            return Err(Error::Invalid(format!("longitudinal mode {m} not computed")));
        }
        for (k, p) in points.iter().enumerate() {
            self.check_interior(*p, guard).map_err(|e| Error::Singular(format!("point {k}: {e}")))?;
        }
        Ok(self.longitudinal_fields(&[m], points).remove(0))
    }

    /// Transverse mode `m` at interior points (piecewise constant).
    pub fn eval_transverse_mode(&self, m: usize, points: &[Vec3], guard: f64) -> Result<Vec<Vec3>> {
        if m >= self.transverse.len() {
            return Err(Error::Invalid(format!("transverse mode {m} not computed")));
        }
        points
            .iter()
            .enumerate()
            .map(|(k, p)| {
                self.check_interior(*p, guard).map_err(|e| Error::Singular(format!("point {k}: {e}")))?;
                let h = self.locate(*p).ok_or_else(|| Error::Singular(format!("point {k} not inside any tet")))?;
                Ok(self.transverse.tet_values[m][h])
            })
            .collect()
    }

    /// Field of any selected mode at interior points. `[selection][point]`.
    pub fn eval_modes(&self, selection: &[(Family, usize)], points: &[Vec3]) -> Result<Vec<Vec<Vec3>>> {
        let par: Vec<usize> = selection.iter().filter(|s| s.0 == Family::Parallel).map(|s| s.1).collect();
        let par_fields = self.longitudinal_fields(&par, points);
        let tets: Vec<Option<usize>> = points.iter().map(|p| self.locate(*p)).collect();
        let mut out = Vec::with_capacity(selection.len());
        let mut k = 0;
        for &(fam, m) in selection {
            match fam {
                Family::Parallel => {
                    out.push(par_fields[k].clone());
                    k += 1;
                }
                Family::Perpendicular => {
                    let col = tets
                        .iter()
                        .enumerate()
                        .map(|(i, h)| {
                            h.map(|h| self.transverse.tet_values[m][h])
                                .ok_or_else(|| Error::Singular(format!("point {i} not inside the body")))
                        })
                        .collect::<Result<Vec<Vec3>>>()?;
                    out.push(col);
                }
            }
        }
        Ok(out)
    }

    /// Winding-number inside test.
    pub fn is_inside(&self, p: Vec3) -> bool {
        let s = &self.mesh.boundary;
        let w: f64 = (0..s.len()).map(|t| solid_angle(p, s.vertices(t))).sum();
        w > 2.0 * std::f64::consts::PI
    }

    pub fn boundary_distance(&self, p: Vec3) -> f64 {
        let s = &self.mesh.boundary;
        (0..s.len()).map(|t| point_triangle_distance(p, s.vertices(t))).fold(f64::INFINITY, f64::min)
    }

    fn check_interior(&self, p: Vec3, guard: f64) -> Result<()> {
        if !self.is_inside(p) {
            return Err(Error::Invalid(format!("{p:?} is outside the body")));
        }
        let d = self.boundary_distance(p);
        if d < guard {
            return Err(Error::Singular(format!("{p:?} lies {d:e} from the boundary, inside the guard band {guard:e}")));
        }
        Ok(())
    }

    /// Tet containing `p`, by barycentric test.
    pub fn locate(&self, p: Vec3) -> Option<usize> {
        let tol = -1e-12;
        (0..self.mesh.len()).find(|&h| {
            let [a, b, c, d] = self.mesh.vertices(h);
            let v = tet_signed_volume(a, b, c, d);
            let l = [
                tet_signed_volume(p, b, c, d),
                tet_signed_volume(a, p, c, d),
                tet_signed_volume(a, b, p, d),
                tet_signed_volume(a, b, c, p),
            ];
            l.iter().all(|x| x / v >= tol)
        })
    }

    /// Gram matrix of all longitudinal modes under tet quadrature.
    pub fn longitudinal_gram(&self) -> Vec<Vec<f64>> {
        longitudinal_gram(&self.mesh, &self.longitudinal)
    }

    /// Largest off-diagonal and diagonal deviation of both Gram matrices.
    pub fn orthonormality_report(&self) -> OrthonormalityReport {
        let g = self.longitudinal_gram();
        let mut off = 0.0f64;
        let mut diag = 0.0f64;
        for (i, row) in g.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if i == j {
                    diag = diag.max((v - 1.0).abs());
                } else {
                    off = off.max(v.abs());
                }
            }
        }
        OrthonormalityReport {
            longitudinal_quadrature_offdiag: off,
            longitudinal_quadrature_diag: diag,
            longitudinal_energy: self.longitudinal.energy_orthonormality,
            transverse_exact: self.transverse.orthonormality,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrthonormalityReport {
    pub longitudinal_quadrature_offdiag: f64,
    pub longitudinal_quadrature_diag: f64,
    /// Eigenvector-level residual in the discrete energy metric.
    pub longitudinal_energy: f64,
    /// Eigenvector-level residual in the loop Gram metric.
    pub transverse_exact: f64,
}

/// Quadrature points of the whole tet mesh.
pub fn volume_rule(mesh: &VolumeMesh) -> Vec<(usize, Vec3, f64)> {
    (0..mesh.len()).flat_map(|h| tet_rule(mesh.vertices(h), &TET4).into_iter().map(move |(x, w)| (h, x, w))).collect()
}

fn longitudinal_gram(mesh: &VolumeMesh, spec: &LongitudinalSpectrum) -> Vec<Vec<f64>> {
    let rule = volume_rule(mesh);
    let pts: Vec<Vec3> = rule.iter().map(|r| r.1).collect();
    let q: Vec<&[f64]> = spec.charges.iter().map(|c| c.as_slice()).collect();
    let fields = electro::charge_fields(&mesh.boundary, &q, &pts);
    let n = spec.len();
    let mut g = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in a..n {
            let v: f64 = rule.iter().enumerate().map(|(k, r)| r.2 * dot(fields[a][k], fields[b][k])).sum();
            g[a][b] = v;
            g[b][a] = v;
        }
    }
    g
}
