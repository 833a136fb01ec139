//! Run configuration: one JSON file with a schema version. Unknown keys are
//! rejected everywhere, and keys holding physical quantities carry their SI
//! unit as a suffix.

use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::coupling::{CouplingOptions, DynamicRule};
use crate::geometry::{meshgen, parse_mesh, MeshFormat, Vec3, VolumeMesh};
use crate::material::DrudeLorentz;
use crate::modes::{Family, ModeOptions, ModeSelection};
use crate::quantum::DrivingStatistics;
use crate::response::{OmegaMaxPolicy, SweepOptions, SynthesisOptions, Window};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub mesh: MeshSource,
    pub material: MaterialConfig,
    #[serde(default)]
    pub modes: ModeOptions,
    #[serde(default)]
    pub selection: SelectionConfig,
    #[serde(default)]
    pub coupling: CouplingConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub synthesis: SynthesisConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drive: Option<DriveConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldConfig>,
    #[serde(default)]
    pub validate: ValidateConfig,
}

/// Where the body comes from: a mesh file or one of the built-in generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshSource {
    /// Relative paths are resolved against the config file's directory.
    File {
        path: PathBuf,
        #[serde(default = "auto_format")]
        format: MeshFormat,
    },
    /// Ball of cone tets over a geodesic sphere.
    Ball { subdivisions: usize, radius_m: f64 },
    /// Ball with a cone core and one prism shell starting at `inner_fraction`.
    ShellBall { subdivisions: usize, radius_m: f64, inner_fraction: f64 },
    /// Disk of thickness `aspect · 2 radius`.
    Disk { radius_m: f64, aspect: f64, rings: usize, layers: usize },
    Cylinder { radius_m: f64, height_m: f64, rings: usize, layers: usize },
    Cube { cells: usize, side_m: f64 },
}

fn auto_format() -> MeshFormat {
    MeshFormat::Auto
}

impl MeshSource {
    pub fn load(&self, base: &Path) -> Result<VolumeMesh> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("mesh.{name} must be positive, got {v}")))
            }
        };
        let count = |name: &str, v: usize| {
            if v >= 1 {
                Ok(())
            } else {
                Err(Error::Config(format!("mesh.{name} must be at least 1")))
            }
        };
        match self {
            MeshSource::File { path, format } => {
                let p = if path.is_absolute() { path.clone() } else { base.join(path) };
                parse_mesh(&p, *format)
            }
            MeshSource::Ball { subdivisions, radius_m } => {
                count("subdivisions", *subdivisions)?;
                positive("radius_m", *radius_m)?;
                Ok(meshgen::cone_ball(*subdivisions, *radius_m))
            }
            MeshSource::ShellBall { subdivisions, radius_m, inner_fraction } => {
                count("subdivisions", *subdivisions)?;
                positive("radius_m", *radius_m)?;
                if !(*inner_fraction > 0.0 && *inner_fraction < 1.0) {
                    return Err(Error::Config("mesh.inner_fraction must lie in (0, 1)".into()));
                }
                Ok(meshgen::shell_ball(*subdivisions, *radius_m, inner_fraction * radius_m))
            }
            MeshSource::Disk { radius_m, aspect, rings, layers } => {
                positive("radius_m", *radius_m)?;
                positive("aspect", *aspect)?;
                count("rings", *rings)?;
                count("layers", *layers)?;
                Ok(meshgen::disk(*radius_m, *aspect, *rings, *layers))
            }
            MeshSource::Cylinder { radius_m, height_m, rings, layers } => {
                positive("radius_m", *radius_m)?;
                positive("height_m", *height_m)?;
                count("rings", *rings)?;
                count("layers", *layers)?;
                Ok(meshgen::cylinder(*radius_m, *height_m, *rings, *layers))
            }
            MeshSource::Cube { cells, side_m } => {
                count("cells", *cells)?;
                positive("side_m", *side_m)?;
                Ok(meshgen::cube_block(*cells, *side_m))
            }
        }
    }

    /// Generated balls have the closed-form sphere eigenvalues as an oracle.
    pub fn is_ball(&self) -> bool {
        matches!(self, MeshSource::Ball { .. } | MeshSource::ShellBall { .. })
    }
}

/// Drude–Lorentz parameters in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    pub omega_p_rad_s: f64,
    #[serde(default)]
    pub omega_0_rad_s: f64,
    #[serde(default)]
    pub gamma_rad_s: f64,
}

impl MaterialConfig {
    pub fn build(&self) -> Result<DrudeLorentz> {
        DrudeLorentz::new(self.omega_p_rad_s, self.omega_0_rad_s, self.gamma_rad_s)
            .map_err(|e| Error::Config(format!("material: {e}")))
    }
}

/// Either the leading modes of each family or explicit labels (`par1`, `perp3`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionConfig {
    pub longitudinal: usize,
    pub transverse: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig { longitudinal: 3, transverse: 3, labels: None }
    }
}

impl SelectionConfig {
    pub fn build(&self) -> Result<ModeSelection> {
        let sel = match &self.labels {
            Some(labels) => {
                let entries = labels
                    .iter()
                    .map(|l| ModeSelection::parse_label(l))
                    .collect::<Result<Vec<(Family, usize)>>>()
                    .map_err(|e| Error::Config(format!("selection: {e}")))?;
                ModeSelection::new(entries)
            }
            None => ModeSelection::leading(self.longitudinal, self.transverse),
        };
        sel.map_err(|e| Error::Config(format!("selection: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingModelKind {
    /// Dynamic part interpolated from a Chebyshev table over the band.
    Tabulated,
    /// Full quadrature at every frequency.
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CouplingConfig {
    pub model: CouplingModelKind,
    pub dynamic_rule: DynamicRule,
    pub boundary_levels: u32,
    pub c0_m_s: f64,
    /// Chebyshev nodes; the node count is derived from the band when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chebyshev_nodes: Option<usize>,
}

impl Default for CouplingConfig {
    fn default() -> Self {
        let d = CouplingOptions::default();
        CouplingConfig {
            model: CouplingModelKind::Tabulated,
            dynamic_rule: d.dynamic_rule,
            boundary_levels: d.boundary_levels,
            c0_m_s: d.c0,
            chebyshev_nodes: None,
        }
    }
}

impl CouplingConfig {
    pub fn options(&self) -> Result<CouplingOptions> {
        if !(self.c0_m_s > 0.0 && self.c0_m_s.is_finite()) {
            return Err(Error::Config("coupling.c0_m_s must be positive".into()));
        }
        if self.chebyshev_nodes.is_some_and(|n| n < 2) {
            return Err(Error::Config("coupling.chebyshev_nodes must be at least 2".into()));
        }
        Ok(CouplingOptions { dynamic_rule: self.dynamic_rule, boundary_levels: self.boundary_levels, c0: self.c0_m_s })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OmegaMaxConfig {
    /// Pre-sweep rule; factors are relative to `max(ω_P, ω₀)`.
    Auto { presweep_points: usize, search_factor: f64, floor_factor: f64, threshold: f64 },
    Fixed { value_rad_s: f64 },
}

impl Default for OmegaMaxConfig {
    fn default() -> Self {
        match OmegaMaxPolicy::default() {
            OmegaMaxPolicy::Auto { presweep_points, search_factor, floor_factor, threshold } => {
                OmegaMaxConfig::Auto { presweep_points, search_factor, floor_factor, threshold }
            }
            OmegaMaxPolicy::Fixed { value } => OmegaMaxConfig::Fixed { value_rad_s: value },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub n_f: usize,
    pub omega_max: OmegaMaxConfig,
    pub window: Window,
    pub shift_factor: f64,
    pub condition_limit: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let d = SweepOptions::default();
        SweepConfig {
            n_f: d.n_f,
            omega_max: OmegaMaxConfig::default(),
            window: d.window,
            shift_factor: d.shift_factor,
            condition_limit: d.condition_limit,
        }
    }
}

impl SweepConfig {
    pub fn options(&self) -> Result<SweepOptions> {
        if self.n_f < 2 {
            return Err(Error::Config("sweep.n_f must be at least 2".into()));
        }
        if let Window::RaisedCosine { fraction } = self.window {
            if !(fraction > 0.0 && fraction <= 1.0) {
                return Err(Error::Config("sweep.window.fraction must lie in (0, 1]".into()));
            }
        }
        let omega_max = match self.omega_max {
            OmegaMaxConfig::Auto { presweep_points, search_factor, floor_factor, threshold } => {
                if presweep_points < 2 || !(search_factor > 0.0) || !(threshold > 0.0 && threshold < 1.0) {
                    return Err(Error::Config("sweep.omega_max: bad auto-rule parameters".into()));
                }
                OmegaMaxPolicy::Auto { presweep_points, search_factor, floor_factor, threshold }
            }
            OmegaMaxConfig::Fixed { value_rad_s } => {
                if !(value_rad_s > 0.0 && value_rad_s.is_finite()) {
                    return Err(Error::Config("sweep.omega_max.value_rad_s must be positive".into()));
                }
                OmegaMaxPolicy::Fixed { value: value_rad_s }
            }
        };
        Ok(SweepOptions {
            n_f: self.n_f,
            omega_max,
            window: self.window,
            shift_factor: self.shift_factor,
            condition_limit: self.condition_limit,
        })
    }
}

/// Quality limits of the impulse synthesis; the window is the sweep's.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthesisConfig {
    pub realness_limit: f64,
    pub causality_limit: f64,
    pub enforce: bool,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        let d = SynthesisOptions::default();
        SynthesisConfig { realness_limit: d.realness_limit, causality_limit: d.causality_limit, enforce: d.enforce }
    }
}

impl SynthesisConfig {
    pub fn options(&self, window: Window) -> SynthesisOptions {
        SynthesisOptions {
            window,
            realness_limit: self.realness_limit,
            causality_limit: self.causality_limit,
            enforce: self.enforce,
        }
    }
}

/// Mean driving coordinates `F̄` for the field command. Amplitudes are in the
/// units of the mode coordinates (C·m⁻² · m^{3/2} for unit-norm modes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriveConfig {
    /// Drives one selected mode at the grid point nearest `omega_rad_s`.
    SingleMode {
        label: String,
        omega_rad_s: f64,
        amplitude_re: f64,
        #[serde(default)]
        amplitude_im: f64,
    },
    /// Flat drive of every selected mode on `[lo, hi]`.
    WhiteBand {
        lo_rad_s: f64,
        hi_rad_s: f64,
        amplitude_re: f64,
        #[serde(default)]
        amplitude_im: f64,
    },
    /// A JSON [`DrivingStatistics`] document on the sweep grid.
    File { path: PathBuf },
}

impl DriveConfig {
    pub fn build(&self, base: &Path, selection: &ModeSelection, omega: &[f64]) -> Result<DrivingStatistics> {
        let labels = selection.labels();
        match self {
            DriveConfig::SingleMode { label, omega_rad_s, amplitude_re, amplitude_im } => {
                let q = labels
                    .iter()
                    .position(|l| l == label)
                    .ok_or_else(|| Error::Config(format!("drive.label {label:?} is not in the selection")))?;
                Ok(DrivingStatistics::single_mode(
                    labels,
                    omega.to_vec(),
                    q,
                    *omega_rad_s,
                    C64::new(*amplitude_re, *amplitude_im),
                ))
            }
            DriveConfig::WhiteBand { lo_rad_s, hi_rad_s, amplitude_re, amplitude_im } => {
                if hi_rad_s < lo_rad_s {
                    return Err(Error::Config("drive: hi_rad_s below lo_rad_s".into()));
                }
                Ok(DrivingStatistics::white_band(
                    labels,
                    omega.to_vec(),
                    *lo_rad_s,
                    *hi_rad_s,
                    C64::new(*amplitude_re, *amplitude_im),
                ))
            }
            DriveConfig::File { path } => {
                let p = if path.is_absolute() { path.clone() } else { base.join(path) };
                let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("drive file {}: {e}", p.display())))
            }
        }
    }
}

/// Observation points for the field command, split into inside and outside
/// sets by the guard-band classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    pub points_m: Vec<Vec3>,
}

/// Sizes of the self-contained validation battery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateConfig {
    /// Geodesic subdivision of the unit sphere (`20 f²` triangles).
    pub sphere_subdivisions: usize,
    pub slab_cutoff: usize,
    /// Frequencies in the slab truncation and decoupling checks.
    pub slab_points: usize,
    /// Points per decade of `γ` in the scaling fit.
    pub scaling_points: usize,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        ValidateConfig { sphere_subdivisions: 11, slab_cutoff: 8, slab_points: 64, scaling_points: 4 }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        cfg.material.build()?;
        cfg.selection.build()?;
        cfg.coupling.options()?;
        cfg.sweep.options()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "schema_version": 1,
        "mesh": {"kind": "ball", "subdivisions": 2, "radius_m": 1e-8},
        "material": {"omega_p_rad_s": 1e16}
    }"#;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.sweep.n_f, 4096);
        assert_eq!(cfg.selection.build().unwrap().labels(), ["par1", "par2", "par3", "perp1", "perp2", "perp3"]);
        assert_eq!(cfg.coupling.c0_m_s, crate::constants::C0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = MINIMAL.replace("\"omega_p_rad_s\"", "\"omega_p\"");
        assert!(matches!(RunConfig::from_json(&bad), Err(Error::Config(_))));
        let extra = MINIMAL.replace("\"schema_version\": 1,", "\"schema_version\": 1, \"colour\": 3,");
        assert!(matches!(RunConfig::from_json(&extra), Err(Error::Config(_))));
        let nested = MINIMAL.replace("\"radius_m\": 1e-8", "\"radius_m\": 1e-8, \"rings\": 2");
        assert!(matches!(RunConfig::from_json(&nested), Err(Error::Config(_))));
    }

    #[test]
    fn wrong_schema_version_is_rejected() {
        let bad = MINIMAL.replace("\"schema_version\": 1", "\"schema_version\": 2");
        assert!(matches!(RunConfig::from_json(&bad), Err(Error::Config(_))));
    }

    #[test]
    fn labels_override_counts() {
        let text = MINIMAL.replace(
            "\"material\"",
            "\"selection\": {\"labels\": [\"perp2\", \"par1\"]}, \"material\"",
        );
        let cfg = RunConfig::from_json(&text).unwrap();
        assert_eq!(cfg.selection.build().unwrap().labels(), ["perp2", "par1"]);
    }

    #[test]
    fn config_round_trips() {
        let cfg = RunConfig::from_json(MINIMAL).unwrap();
        let again = RunConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, again);
    }
}
