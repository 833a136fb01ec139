//! Batch front end: runs one command of the pipeline from a [`RunConfig`] and
//! writes CSV tables plus a `metadata.json` sidecar into the output directory.
//!
//! Every command is a pure function of the configuration and the mesh bytes;
//! the sidecar carries no timestamps or host information.

pub mod config;
mod output;
pub mod validate;

use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::coupling::{CouplingCache, CouplingOperator, CouplingOptions, SmallSizeConstants};
use crate::geometry::Vec3;
use crate::greens::SERIES_SWITCH;
use crate::material::DrudeLorentz;
use crate::modes::{Family, ModeSelection, ModeSet, DEGENERACY_GAP};
use crate::quantum::{
    classify, efield_inside, efield_outside, expectation_polarization, mean_coordinates, mean_coordinates_time, Region,
    GUARD_FRACTION,
};
use crate::response::{
    impulse_from_transfer, CouplingModel, DirectCoupling, OmegaMaxPolicy, ResponseSolver, SweepOptions, SweepPlan,
    SynthesisGrid, TabulatedCoupling, TransferSample, Window,
};
use crate::{Error, Result};

pub use config::RunConfig;
pub use validate::Check;

use config::CouplingModelKind;
use output::{entry_name, hex_digest, num, Writer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Modes,
    Coupling,
    Response,
    Impulse,
    Field,
    Validate,
}

impl FromStr for Command {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "modes" => Command::Modes,
            "coupling" => Command::Coupling,
            "response" => Command::Response,
            "impulse" => Command::Impulse,
            "field" => Command::Field,
            "validate" => Command::Validate,
            _ => return Err(Error::Config(format!("unknown command {s:?}"))),
        })
    }
}

/// Process exit code for an error: 1 for configuration and input problems,
/// 2 for numerical failures, 3 for failed validation.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Io { .. } | Error::Parse { .. } | Error::Topology { .. } | Error::Orientation(_) => 1,
        Error::Validation(_) => 3,
        Error::Unsupported(_) | Error::Singular(_) | Error::Invalid(_) | Error::Eigen(_) | Error::Quality(_) => 2,
    }
}

/// Sets the size of the global worker pool; call once before any command.
pub fn set_threads(n: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

#[derive(Debug, Clone)]
pub struct RunPaths {
    /// Directory that relative paths in the config are resolved against.
    pub base: PathBuf,
    pub out: PathBuf,
    pub cache: Option<PathBuf>,
    /// Print progress lines to stderr.
    pub verbose: bool,
}

#[derive(Debug, Clone, Default)]
pub struct RunReport {
    /// Files written, relative to the output directory.
    pub files: Vec<String>,
    pub log: Vec<String>,
    pub mode_cache_hit: bool,
    pub checks: Vec<Check>,
}

struct Ctx<'a> {
    paths: &'a RunPaths,
    report: RunReport,
}

impl Ctx<'_> {
    fn log(&mut self, line: String) {
        if self.paths.verbose {
            eprintln!("{line}");
        }
        self.report.log.push(line);
    }
}

/// Runs `command` and writes its outputs. A failed validation writes its
/// report first and then returns [`Error::Validation`].
pub fn run(command: Command, cfg: &RunConfig, paths: &RunPaths) -> Result<RunReport> {
    let mut ctx = Ctx { paths, report: RunReport::default() };
    let mut w = Writer::new(&paths.out)?;
    let material = cfg.material.build()?;
    let selection = cfg.selection.build()?;
    let coupling_opts = cfg.coupling.options()?;
    let sweep_opts = cfg.sweep.options()?;
    let modes = load_modes(cfg, &mut ctx)?;
    selection.check(&modes).map_err(|e| Error::Config(format!("selection: {e}")))?;
    let mut meta = Metadata::new(command, cfg, &modes, &selection, &material, &coupling_opts, &sweep_opts);

    match command {
        Command::Modes => write_modes(cfg, &modes, &mut w)?,
        Command::Validate => {
            let checks = run_validation(cfg, &modes, &selection, &coupling_opts, &material, &mut ctx)?;
            let header = ["check", "measured", "expected", "tolerance", "pass"].map(String::from);
            let rows = checks.iter().map(|c| {
                vec![c.name.clone(), num(c.measured), num(c.expected), num(c.tolerance), c.pass.to_string()]
            });
            w.csv("validate.csv", &header, rows)?;
            meta.validation = Some(checks.clone());
            ctx.report.checks = checks;
        }
        Command::Coupling | Command::Response | Command::Impulse | Command::Field => {
            let op = CouplingOperator::new(&modes, &selection, &coupling_opts)?;
            meta.small_size = Some(op.small_size_constants());
            let cache = match &paths.cache {
                Some(dir) => Some(CouplingCache::new(dir.join("coupling"))?),
                None => None,
            };
            let tabulated;
            let direct;
            let model: &dyn CouplingModel = match cfg.coupling.model {
                CouplingModelKind::Tabulated => {
                    let top = band_limit(&sweep_opts, &material);
                    ctx.log(format!("tabulating the dynamic coupling on [0, {top:e}] rad/s"));
                    tabulated = TabulatedCoupling::new(op, top, cfg.coupling.chebyshev_nodes, cache.as_ref())?;
                    meta.coupling.chebyshev_nodes = Some(tabulated.table.coeffs.len());
                    meta.coupling.chebyshev_tail = Some(tabulated.table.tail());
                    &tabulated
                }
                CouplingModelKind::Direct => {
                    direct = DirectCoupling(&op);
                    &direct
                }
            };
            let solver = ResponseSolver::new(material, model)?;
            let plan = solver.plan(&sweep_opts)?;
            ctx.log(format!("band (0, {:e}] rad/s, N_F = {}, eps = {:e}", plan.omega_max, plan.n_f, plan.eps));
            meta.set_plan(&plan, &material, modes.radius(), coupling_opts.c0);
            if command == Command::Coupling {
                write_coupling(model, &plan, &mut w)?;
            } else {
                let sample = solver.sweep(&plan, sweep_opts.condition_limit)?;
                meta.set_sample(&sample);
                match command {
                    Command::Response => write_response(&sample, &mut w)?,
                    Command::Impulse => {
                        let synth = cfg.synthesis.options(sweep_opts.window);
                        let h = impulse_from_transfer(&sample, &synth)?;
                        meta.synthesis = Some(SynthesisMeta {
                            dt_s: h.dt(),
                            n_t: h.t.len(),
                            t_first_s: h.t[0],
                            imag_residue: h.imag_residue,
                            anticausal_energy: h.anticausal_energy,
                            anticausal_peak: h.anticausal_peak,
                            realness_limit: synth.realness_limit,
                            causality_limit: synth.causality_limit,
                            enforce: synth.enforce,
                        });
                        for (i, a) in h.labels.iter().enumerate() {
                            for (j, b) in h.labels.iter().enumerate() {
                                w.real_entry(&format!("impulse/{}", entry_name("h", a, b)), "t_s", &h.t, h.entry(i, j))?;
                            }
                        }
                    }
                    _ => {
                        let flagged =
                            write_fields(cfg, &paths.base, &modes, &selection, &material, &coupling_opts, &sample, &mut w)?;
                        meta.field_flagged = Some(flagged);
                    }
                }
            }
        }
    }
    ctx.report.files = w.files.clone();
    meta.files = w.files.clone();
    w.json("metadata.json", &meta)?;
    ctx.report.files.push("metadata.json".into());
    let failed: Vec<&str> = ctx.report.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    if !failed.is_empty() {
        return Err(Error::Validation(format!("failed checks: {}", failed.join(", "))));
    }
    Ok(ctx.report)
}

/// Mode sets are cached by mesh hash and mode options.
fn load_modes(cfg: &RunConfig, ctx: &mut Ctx) -> Result<ModeSet> {
    let mesh = cfg.mesh.load(&ctx.paths.base)?;
    let opts_json = serde_json::to_string(&cfg.modes).map_err(|e| Error::Invalid(e.to_string()))?;
    let key = hex_digest(format!("{}|{opts_json}", mesh.hash()).as_bytes());
    let path = ctx.paths.cache.as_ref().map(|d| d.join("modes").join(format!("modes-{}.json", &key[..32])));
    if let Some(p) = &path {
        if p.exists() {
            match ModeSet::load(p, mesh.clone()) {
                Ok(m) if m.options == cfg.modes => {
                    ctx.report.mode_cache_hit = true;
                    ctx.log(format!("mode cache hit: {}", p.display()));
                    return Ok(m);
                }
                _ => ctx.log(format!("ignoring stale mode cache entry {}", p.display())),
            }
        }
    }
    ctx.log(format!("computing modes on {} tets", mesh.len()));
    let modes = ModeSet::compute(mesh, &cfg.modes)?;
    if let Some(p) = &path {
        let dir = p.parent().expect("cache path has a parent");
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        modes.save(p)?;
        ctx.log(format!("mode cache stored: {}", p.display()));
    }
    Ok(modes)
}

/// Upper end of the band the coupling table must cover.
fn band_limit(opts: &SweepOptions, material: &DrudeLorentz) -> f64 {
    match opts.omega_max {
        OmegaMaxPolicy::Auto { search_factor, .. } => search_factor * material.omega_p.max(material.omega_0),
        OmegaMaxPolicy::Fixed { value } => value,
    }
}

fn write_modes(cfg: &RunConfig, modes: &ModeSet, w: &mut Writer) -> Result<()> {
    w.json("modes.json", &modes.to_file())?;
    let header = ["family", "index", "kappa", "multiplet", "multiplet_size", "sphere_kappa", "rel_error"]
        .map(String::from);
    let mut rows = vec![];
    let groups = [
        (Family::Parallel, &modes.longitudinal.kappa, &modes.longitudinal.groups),
        (Family::Perpendicular, &modes.transverse.kappa, &modes.transverse.groups),
    ];
    for (fam, kappa, groups) in groups {
        for (g, &(lo, hi)) in groups.iter().enumerate() {
            // Longitudinal multiplet l of a ball sits at (2l+1)/l.
            let oracle = (fam == Family::Parallel && cfg.mesh.is_ball())
                .then(|| crate::analytic::sphere_kappa_longitudinal(g as u32 + 1).ok().map(|o| o.0))
                .flatten();
            for (k, kap) in kappa.iter().enumerate().take(hi).skip(lo) {
                rows.push(vec![
                    fam.symbol().to_string(),
                    (k + 1).to_string(),
                    num(*kap),
                    (g + 1).to_string(),
                    (hi - lo).to_string(),
                    oracle.map(num).unwrap_or_default(),
                    oracle.map(|o| num((kap - o) / o)).unwrap_or_default(),
                ]);
            }
        }
    }
    w.csv("kappa.csv", &header, rows)
}

fn grid(plan: &SweepPlan) -> Vec<f64> {
    (1..=plan.n_f).map(|k| plan.omega_max * k as f64 / plan.n_f as f64).collect()
}

fn write_coupling(model: &dyn CouplingModel, plan: &SweepPlan, w: &mut Writer) -> Result<()> {
    use rayon::prelude::*;
    let omega = grid(plan);
    let mats = omega
        .par_iter()
        .map(|&x| model.coupling_at(C64::new(plan.eps, x)).map(|c| c.full()))
        .collect::<Result<Vec<_>>>()?;
    let labels = model.labels();
    for (i, a) in labels.iter().enumerate() {
        for (j, b) in labels.iter().enumerate() {
            let vals: Vec<C64> = mats.iter().map(|m| m[(i, j)]).collect();
            w.complex_entry(&format!("coupling/{}", entry_name("S", a, b)), "omega_rad_s", &omega, &vals)?;
        }
    }
    Ok(())
}

fn write_response(sample: &TransferSample, w: &mut Writer) -> Result<()> {
    for (i, a) in sample.labels.iter().enumerate() {
        for (j, b) in sample.labels.iter().enumerate() {
            w.complex_entry(
                &format!("response/{}", entry_name("H", a, b)),
                "omega_rad_s",
                &sample.omega,
                &sample.entry(i, j),
            )?;
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn write_fields(
    cfg: &RunConfig,
    base: &Path,
    modes: &ModeSet,
    selection: &ModeSelection,
    material: &DrudeLorentz,
    coupling: &CouplingOptions,
    sample: &TransferSample,
    w: &mut Writer,
) -> Result<Vec<usize>> {
    let drive = cfg.drive.as_ref().ok_or_else(|| Error::Config("the field command needs a drive section".into()))?;
    let stats = drive.build(base, selection, &sample.omega)?;
    let coords = mean_coordinates(&stats, sample)?;
    let labels = selection.labels();
    let mut header = vec!["omega_rad_s".to_string()];
    for l in &labels {
        header.push(format!("{l}_re"));
        header.push(format!("{l}_im"));
    }
    let rows = sample.omega.iter().zip(&coords).map(|(x, c)| {
        let mut r = vec![num(*x)];
        for v in c {
            r.push(num(v.re));
            r.push(num(v.im));
        }
        r
    });
    w.csv("field/coordinates.csv", &header, rows)?;

    let plan = sample.plan;
    let sgrid = SynthesisGrid { omega_max: plan.omega_max, n_f: plan.n_f, eps: plan.eps, window: cfg.sweep.window };
    let (t, series) = mean_coordinates_time(&stats, sample, &sgrid)?;
    let mut header = vec!["t_s".to_string()];
    header.extend(labels.iter().cloned());
    let rows = t.iter().enumerate().map(|(k, tk)| {
        let mut r = vec![num(*tk)];
        r.extend(series.iter().map(|s| num(s[k])));
        r
    });
    w.csv("field/coordinates_time.csv", &header, rows)?;

    let points = cfg.field.as_ref().map(|f| f.points_m.clone()).unwrap_or_default();
    let (mut inside, mut outside): (Vec<Vec3>, Vec<Vec3>) = (vec![], vec![]);
    for (k, p) in points.iter().enumerate() {
        match classify(modes, *p).map_err(|e| Error::Config(format!("field.points_m[{k}]: {e}")))? {
            Region::Inside => inside.push(*p),
            Region::Outside => outside.push(*p),
        }
    }
    let mut flagged = vec![];
    if !inside.is_empty() {
        let pol = expectation_polarization(&stats, sample, modes, selection, &inside)?;
        w.field("field/polarization_inside.csv", &pol)?;
        let zero = vec![vec![C64::new(0.0, 0.0); labels.len()]; coords.len()];
        let e = efield_inside(&coords, &zero, material, &sample.omega, plan.eps, modes, selection, &inside)?;
        flagged = e.flagged.clone();
        w.field("field/efield_inside.csv", &e)?;
    }
    if !outside.is_empty() {
        let e = efield_outside(&coords, &sample.omega, plan.eps, coupling.c0, modes, selection, &outside)?;
        w.field("field/efield_outside.csv", &e)?;
    }
    Ok(flagged)
}

fn run_validation(
    cfg: &RunConfig,
    modes: &ModeSet,
    selection: &ModeSelection,
    coupling: &CouplingOptions,
    material: &DrudeLorentz,
    ctx: &mut Ctx,
) -> Result<Vec<Check>> {
    let v = &cfg.validate;
    let mut checks = vec![];
    ctx.log("validate: sphere eigenvalues".into());
    checks.extend(validate::sphere_battery(v.sphere_subdivisions)?);
    ctx.log("validate: lossless slab".into());
    checks.extend(validate::slab_battery(material.omega_p, coupling.c0, v, cfg.sweep.n_f)?);
    ctx.log("validate: infinite medium".into());
    checks.extend(validate::infinite_medium_battery(material)?);
    ctx.log("validate: configured body".into());
    checks.extend(validate::body_battery(modes, selection, coupling, material, v)?);
    for c in &checks {
        ctx.log(format!(
            "{:<36} {:>12.4e} (expected {:e} ± {:e}) {}",
            c.name,
            c.measured,
            c.expected,
            c.tolerance,
            if c.pass { "PASS" } else { "FAIL" }
        ));
    }
    Ok(checks)
}

// ---------------------------------------------------------------------------
// Metadata sidecar

#[derive(Serialize)]
struct MeshMeta {
    hash: String,
    tets: usize,
    boundary_triangles: usize,
    radius_m: f64,
}

#[derive(Serialize)]
struct ModesMeta {
    hash: String,
    kappa_parallel: Vec<f64>,
    kappa_perpendicular: Vec<f64>,
    normalization_parallel: crate::modes::Normalization,
    normalization_perpendicular: crate::modes::Normalization,
}

/// Fixed numerical choices of the pipeline, recorded with every run.
#[derive(Serialize)]
struct DesignMeta {
    laplace_convention: &'static str,
    epsilon_rule: &'static str,
    material_epsilon: f64,
    degeneracy_gap: f64,
    guard_fraction: f64,
    series_switch: f64,
    spanning_tree: &'static str,
    radius_rule: &'static str,
    normalization: &'static str,
    mode_options: crate::modes::ModeOptions,
    coupling_model: CouplingModelKind,
    coupling_options: CouplingOptions,
    omega_max_policy: OmegaMaxPolicy,
    omega_max_rule: &'static str,
    window: Window,
    n_f: usize,
    shift_factor: f64,
    condition_limit: f64,
    flagged_sample_rule: &'static str,
}

#[derive(Serialize, Default)]
struct CouplingMeta {
    #[serde(skip_serializing_if = "Option::is_none")]
    chebyshev_nodes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    chebyshev_tail: Option<f64>,
}

#[derive(Serialize)]
struct SweepMeta {
    omega_max_rad_s: f64,
    n_f: usize,
    d_omega_rad_s: f64,
    eps_rad_s: f64,
    decay_point_rad_s: Option<f64>,
    clamped: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<SampleMeta>,
}

#[derive(Serialize)]
struct SampleMeta {
    flagged: Vec<usize>,
    flagged_count: usize,
    max_residual: f64,
    max_condition: f64,
    max_reciprocity_defect: f64,
}

#[derive(Serialize)]
struct SynthesisMeta {
    dt_s: f64,
    n_t: usize,
    t_first_s: f64,
    imag_residue: f64,
    anticausal_energy: f64,
    anticausal_peak: f64,
    realness_limit: f64,
    causality_limit: f64,
    enforce: bool,
}

/// `β = ω_P a/c₀`, damping and band edges relative to `ω_P`.
#[derive(Serialize)]
struct Nondimensional {
    beta: f64,
    gamma_over_omega_p: f64,
    omega_0_over_omega_p: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    omega_max_over_omega_p: Option<f64>,
    /// `γ = ω a/c₀` at the top of the band.
    #[serde(skip_serializing_if = "Option::is_none")]
    size_parameter_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eps_over_omega_p: Option<f64>,
}

#[derive(Serialize)]
struct Metadata {
    tool: &'static str,
    version: &'static str,
    command: Command,
    schema_version: u32,
    config: RunConfig,
    mesh: MeshMeta,
    modes: ModesMeta,
    selection: Vec<String>,
    design: DesignMeta,
    coupling: CouplingMeta,
    #[serde(skip_serializing_if = "Option::is_none")]
    small_size: Option<SmallSizeConstants>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep: Option<SweepMeta>,
    #[serde(skip_serializing_if = "Option::is_none")]
    synthesis: Option<SynthesisMeta>,
    #[serde(skip_serializing_if = "Option::is_none")]
    field_flagged: Option<Vec<usize>>,
    nondimensional: Nondimensional,
    #[serde(skip_serializing_if = "Option::is_none")]
    validation: Option<Vec<Check>>,
    files: Vec<String>,
}

impl Metadata {
    fn new(
        command: Command,
        cfg: &RunConfig,
        modes: &ModeSet,
        selection: &ModeSelection,
        material: &DrudeLorentz,
        coupling: &CouplingOptions,
        sweep: &SweepOptions,
    ) -> Self {
        let mode_json = serde_json::to_string(&modes.to_file()).unwrap_or_default();
        let wp = material.omega_p;
        Metadata {
            tool: "dqed",
            version: env!("CARGO_PKG_VERSION"),
            command,
            schema_version: cfg.schema_version,
            config: cfg.clone(),
            mesh: MeshMeta {
                hash: modes.mesh_hash(),
                tets: modes.mesh.len(),
                boundary_triangles: modes.mesh.boundary.len(),
                radius_m: modes.radius(),
            },
            modes: ModesMeta {
                hash: hex_digest(mode_json.as_bytes()),
                kappa_parallel: modes.longitudinal.kappa.clone(),
                kappa_perpendicular: modes.transverse.kappa.clone(),
                normalization_parallel: modes.longitudinal.normalization,
                normalization_perpendicular: modes.transverse.normalization,
            },
            selection: selection.labels(),
            design: DesignMeta {
                laplace_convention: crate::material::SusceptibilitySample::CONVENTION,
                epsilon_rule: "eps = max(material eps, shift_factor * d_omega / 2pi); material eps = 1e-9 omega_p if lossless, else 0",
                material_epsilon: material.epsilon(),
                degeneracy_gap: DEGENERACY_GAP,
                guard_fraction: GUARD_FRACTION,
                series_switch: SERIES_SWITCH,
                spanning_tree: "breadth-first, boundary subgraph first, ties by ascending edge index",
                radius_rule: "minimal enclosing sphere",
                normalization: "unit volume norm",
                mode_options: cfg.modes,
                coupling_model: cfg.coupling.model,
                coupling_options: *coupling,
                omega_max_policy: sweep.omega_max,
                omega_max_rule: "first pre-sweep point where max|H| stays below threshold of its global max, floored at floor_factor * max(omega_p, omega_0), divided by the window taper start",
                window: sweep.window,
                n_f: sweep.n_f,
                shift_factor: sweep.shift_factor,
                condition_limit: sweep.condition_limit,
                flagged_sample_rule: "linear interpolation from unflagged neighbours",
            },
            coupling: CouplingMeta::default(),
            small_size: None,
            sweep: None,
            synthesis: None,
            field_flagged: None,
            nondimensional: Nondimensional {
                beta: wp * modes.radius() / coupling.c0,
                gamma_over_omega_p: material.gamma / wp,
                omega_0_over_omega_p: material.omega_0 / wp,
                omega_max_over_omega_p: None,
                size_parameter_max: None,
                eps_over_omega_p: None,
            },
            validation: None,
            files: vec![],
        }
    }

    fn set_plan(&mut self, plan: &SweepPlan, material: &DrudeLorentz, radius: f64, c0: f64) {
        self.sweep = Some(SweepMeta {
            omega_max_rad_s: plan.omega_max,
            n_f: plan.n_f,
            d_omega_rad_s: plan.omega_max / plan.n_f as f64,
            eps_rad_s: plan.eps,
            decay_point_rad_s: plan.decay_point,
            clamped: plan.clamped,
            samples: None,
        });
        self.nondimensional.omega_max_over_omega_p = Some(plan.omega_max / material.omega_p);
        self.nondimensional.size_parameter_max = Some(plan.omega_max * radius / c0);
        self.nondimensional.eps_over_omega_p = Some(plan.eps / material.omega_p);
    }

    fn set_sample(&mut self, sample: &TransferSample) {
        if let Some(s) = &mut self.sweep {
            s.samples = Some(SampleMeta {
                flagged: sample.flagged.clone(),
                flagged_count: sample.flagged.len(),
                max_residual: sample.max_residual(),
                max_condition: sample.condition.iter().cloned().fold(0.0, f64::max),
                max_reciprocity_defect: sample.max_reciprocity_defect(),
            });
        }
    }
}

/// Convenience for front ends: reads the config, resolves relative paths
/// against its directory and runs the command.
pub fn run_file(command: Command, config: &Path, out: &Path, cache: Option<&Path>, verbose: bool) -> Result<RunReport> {
    let cfg = RunConfig::load(config)?;
    let base = config.parent().map(Path::to_path_buf).unwrap_or_default();
    let paths = RunPaths { base, out: out.to_path_buf(), cache: cache.map(Path::to_path_buf), verbose };
    run(command, &cfg, &paths)
}
