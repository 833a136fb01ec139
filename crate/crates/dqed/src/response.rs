//! Transfer matrix `H = M⁻¹` over a frequency sweep and impulse-response
//! synthesis by inverse FFT.
//!
//! Every frequency-domain quantity is evaluated on `s = iω + ε`. The shift `ε`
//! is the larger of the material's own offset and `shift_factor / T`, where
//! `T = 2π/Δω` is the period of the synthesized time axis; the synthesized
//! samples are multiplied back by `e^{εt}`. This keeps lossless resonances off
//! the grid and suppresses wrap-around of slowly decaying responses.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::coupling::{ChebyshevTable, CouplingCache, CouplingMatrix, CouplingOperator};
use crate::linalg::{invert, CMat};
use crate::material::DrudeLorentz;
use crate::modes::Family;
use crate::{Error, Result};

/// Anything that yields coupling coefficients at a complex frequency.
pub trait CouplingModel: Sync {
    fn families(&self) -> &[Family];
    /// `κ∥` for longitudinal entries, `κ⊥` (or `∞`) for transverse ones.
    fn kappa(&self) -> &[f64];
    fn labels(&self) -> Vec<String>;
    fn coupling_at(&self, s: C64) -> Result<CouplingMatrix>;
    /// Largest `ω` the model can be evaluated at, if limited.
    fn omega_limit(&self) -> Option<f64> {
        None
    }
    fn len(&self) -> usize {
        self.families().len()
    }
}

/// Direct quadrature at every `s`.
pub struct DirectCoupling<'a>(pub &'a CouplingOperator);

impl CouplingModel for DirectCoupling<'_> {
    fn families(&self) -> &[Family] {
        self.0.families()
    }
    fn kappa(&self) -> &[f64] {
        &self.0.kappa
    }
    fn labels(&self) -> Vec<String> {
        self.0.selection.labels()
    }
    fn coupling_at(&self, s: C64) -> Result<CouplingMatrix> {
        self.0.coupling(s)
    }
}

/// Dynamic part from a Chebyshev table, static parts from the operator.
pub struct TabulatedCoupling {
    pub operator: CouplingOperator,
    pub table: ChebyshevTable,
}

impl TabulatedCoupling {
    /// Tabulates on `[0, omega_max]` with the suggested node count unless one is given.
    pub fn new(
        operator: CouplingOperator,
        omega_max: f64,
        nodes: Option<usize>,
        cache: Option<&CouplingCache>,
    ) -> Result<Self> {
        let n = nodes.unwrap_or_else(|| operator.suggested_nodes(omega_max));
        let table = operator.chebyshev_table(omega_max, 0.0, n, cache)?;
        Ok(TabulatedCoupling { operator, table })
    }
}

impl CouplingModel for TabulatedCoupling {
    fn families(&self) -> &[Family] {
        self.operator.families()
    }
    fn kappa(&self) -> &[f64] {
        &self.operator.kappa
    }
    fn labels(&self) -> Vec<String> {
        self.operator.selection.labels()
    }
    fn coupling_at(&self, s: C64) -> Result<CouplingMatrix> {
        if s.im > self.table.omega_max * (1.0 + 1e-12) {
            return Err(Error::Invalid(format!(
                "ω = {:e} beyond the tabulated range {:e}",
                s.im, self.table.omega_max
            )));
        }
        Ok(self.operator.coupling_with_dynamic(s, &self.table.eval_at(s)))
    }
    fn omega_limit(&self) -> Option<f64> {
        Some(self.table.omega_max)
    }
}

/// Coupling switched off except for the quasistatic transverse self term,
/// which reproduces the small-size closed forms exactly.
pub struct Uncoupled {
    pub families: Vec<Family>,
    pub kappa: Vec<f64>,
    pub radius: f64,
    pub c0: f64,
}

impl CouplingModel for Uncoupled {
    fn families(&self) -> &[Family] {
        &self.families
    }
    fn kappa(&self) -> &[f64] {
        &self.kappa
    }
    fn labels(&self) -> Vec<String> {
        let mut counts = [0usize; 2];
        self.families
            .iter()
            .map(|f| {
                let c = &mut counts[(*f == Family::Perpendicular) as usize];
                *c += 1;
                format!("{}{}", f.symbol(), c)
            })
            .collect()
    }
    fn coupling_at(&self, s: C64) -> Result<CouplingMatrix> {
        let q = self.families.len();
        let a2 = self.radius * self.radius;
        let pre = s / (self.c0 * self.c0);
        Ok(CouplingMatrix {
            s,
            gamma: s.norm() * self.radius / self.c0,
            families: self.families.clone(),
            regular: CMat::zeros(q),
            quasistatic_perp: (0..q)
                .map(|k| match self.families[k] {
                    Family::Perpendicular => pre * (a2 / self.kappa[k]),
                    Family::Parallel => C64::new(0.0, 0.0),
                })
                .collect(),
        })
    }
}

/// `M(s)`: `δ/χ̃ + δ∥/κ∥ + s S`, where the transverse diagonal of `S` carries
/// the quasistatic `a²s/(c₀²κ⊥)`.
pub fn assemble_m(material: &DrudeLorentz, kappa: &[f64], coupling: &CouplingMatrix) -> Result<CMat> {
    if material.is_vacuum() {
        return Err(Error::Invalid("the vacuum model has no polarization response".into()));
    }
    let s = coupling.s;
    material.chi(s)?;
    let inv_chi = material.inv_chi(s)?;
    let q = coupling.families.len();
    if kappa.len() != q || coupling.regular.n != q {
        return Err(Error::Invalid("coupling and eigenvalue lists disagree in size".into()));
    }
    let mut m = CMat::from_fn(q, |i, j| s * coupling.regular[(i, j)]);
    for i in 0..q {
        m[(i, i)] += inv_chi + s * coupling.quasistatic_perp[i];
        if coupling.families[i] == Family::Parallel {
            m[(i, i)] += 1.0 / kappa[i];
        }
    }
    Ok(m)
}

/// `‖H − Hᵀ‖_max / ‖H‖_max`.
pub fn reciprocity_defect(h: &CMat) -> f64 {
    let big = h.max_abs();
    if big == 0.0 {
        return 0.0;
    }
    h.max_abs_diff(&h.transpose()) / big
}

/// One solved frequency point.
#[derive(Debug, Clone)]
pub struct TransferPoint {
    pub omega: f64,
    pub s: C64,
    pub m: CMat,
    pub h: CMat,
    pub residual: f64,
    pub condition: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OmegaMaxPolicy {
    /// Coarse pre-sweep on `(0, search_factor · max(ω_P, ω₀)]`; the band ends
    /// where `max|H|` stays below `threshold` of its global maximum, but not
    /// below `floor_factor · max(ω_P, ω₀)`, then widened so the taper starts
    /// there.
    Auto { presweep_points: usize, search_factor: f64, floor_factor: f64, threshold: f64 },
    Fixed { value: f64 },
}

impl Default for OmegaMaxPolicy {
    fn default() -> Self {
        OmegaMaxPolicy::Auto { presweep_points: 512, search_factor: 16.0, floor_factor: 8.0, threshold: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Window {
    /// Raised-cosine roll-off over the top `fraction` of the band.
    RaisedCosine { fraction: f64 },
    None,
}

impl Default for Window {
    fn default() -> Self {
        Window::RaisedCosine { fraction: 0.1 }
    }
}

impl Window {
    pub fn weight(&self, omega: f64, omega_max: f64) -> f64 {
        match *self {
            Window::None => 1.0,
            Window::RaisedCosine { fraction } => {
                let start = (1.0 - fraction) * omega_max;
                let w = omega.abs();
                if w <= start {
                    1.0
                } else if w >= omega_max {
                    0.0
                } else {
                    0.5 * (1.0 + (PI * (w - start) / (fraction * omega_max)).cos())
                }
            }
        }
    }

    fn taper_start(&self) -> f64 {
        match *self {
            Window::None => 1.0,
            Window::RaisedCosine { fraction } => 1.0 - fraction,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepOptions {
    pub n_f: usize,
    pub omega_max: OmegaMaxPolicy,
    /// Used by the auto policy so the taper begins at the decay point.
    pub window: Window,
    /// `ε ≥ shift_factor · Δω / 2π`.
    pub shift_factor: f64,
    /// Samples whose condition estimate exceeds this are flagged and replaced
    /// by interpolation from unflagged neighbours.
    pub condition_limit: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            n_f: 4096,
            omega_max: OmegaMaxPolicy::default(),
            window: Window::default(),
            shift_factor: 8.0,
            condition_limit: 1e12,
        }
    }
}

/// Band and shift actually used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub omega_max: f64,
    pub n_f: usize,
    pub eps: f64,
    /// Where the pre-sweep found the decay below threshold, if it ran.
    pub decay_point: Option<f64>,
    /// The band was limited by the search range or by the coupling model.
    pub clamped: bool,
}

/// `H` and `M` on a uniform grid of `N_F` points on `(0, ω_max]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransferSample {
    pub plan: SweepPlan,
    pub labels: Vec<String>,
    pub families: Vec<Family>,
    pub omega: Vec<f64>,
    pub m: Vec<CMat>,
    pub h: Vec<CMat>,
    /// `H(ε)`, the zero-frequency sample used by the synthesis.
    pub dc: Option<CMat>,
    pub residual: Vec<f64>,
    pub condition: Vec<f64>,
    /// Indices of interpolated samples.
    pub flagged: Vec<usize>,
}

impl TransferSample {
    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn q(&self) -> usize {
        self.labels.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> Vec<C64> {
        self.h.iter().map(|h| h[(i, j)]).collect()
    }

    pub fn max_residual(&self) -> f64 {
        self.residual.iter().cloned().fold(0.0, f64::max)
    }

    pub fn max_reciprocity_defect(&self) -> f64 {
        self.h.iter().map(reciprocity_defect).fold(0.0, f64::max)
    }
}

/// Material plus coupling model.
pub struct ResponseSolver<'a> {
    pub material: DrudeLorentz,
    pub model: &'a dyn CouplingModel,
}

impl<'a> ResponseSolver<'a> {
    pub fn new(material: DrudeLorentz, model: &'a dyn CouplingModel) -> Result<Self> {
        material.validate()?;
        if material.is_vacuum() {
            return Err(Error::Invalid("the vacuum model has no polarization response".into()));
        }
        if model.len() == 0 {
            return Err(Error::Invalid("empty mode selection".into()));
        }
        Ok(ResponseSolver { material, model })
    }

    pub fn assemble(&self, s: C64) -> Result<CMat> {
        let c = self.model.coupling_at(s)?;
        assemble_m(&self.material, self.model.kappa(), &c)
    }

    pub fn transfer_at(&self, omega: f64, eps: f64) -> Result<TransferPoint> {
        let s = C64::new(eps, omega);
        let m = self.assemble(s)?;
        let inv = invert(&m)?;
        Ok(TransferPoint { omega, s, m, h: inv.inv, residual: inv.residual, condition: inv.condition })
    }

    fn scale(&self) -> f64 {
        self.material.omega_p.max(self.material.omega_0)
    }

    /// Chooses `ω_max` and `ε` for a sweep.
    pub fn plan(&self, opts: &SweepOptions) -> Result<SweepPlan> {
        if opts.n_f < 8 {
            return Err(Error::Invalid("N_F must be at least 8".into()));
        }
        if !(opts.shift_factor >= 0.0) {
            return Err(Error::Invalid("shift_factor must be non-negative".into()));
        }
        let limit = self.model.omega_limit().unwrap_or(f64::INFINITY);
        let (omega_max, decay_point, mut clamped) = match opts.omega_max {
            OmegaMaxPolicy::Fixed { value } => {
                if !(value > 0.0) || !value.is_finite() {
                    return Err(Error::Invalid(format!("ω_max must be positive, got {value}")));
                }
                (value, None, false)
            }
            OmegaMaxPolicy::Auto { presweep_points, search_factor, floor_factor, threshold } => {
                if presweep_points < 8 || !(search_factor > 0.0) || !(threshold > 0.0 && threshold < 1.0) {
                    return Err(Error::Invalid("invalid pre-sweep parameters".into()));
                }
                let top = (search_factor * self.scale()).min(limit);
                let eps = self.material.epsilon().max(opts.shift_factor * top / (presweep_points as f64 * 2.0 * PI));
                let grid: Vec<f64> = (1..=presweep_points).map(|k| top * k as f64 / presweep_points as f64).collect();
                let peaks: Vec<f64> = grid
                    .par_iter()
                    .map(|&w| self.transfer_at(w, eps).map(|p| p.h.max_abs()).unwrap_or(f64::INFINITY))
                    .collect();
                let global = peaks.iter().cloned().fold(0.0, f64::max);
                let mut j = grid.len();
                while j > 0 && peaks[j - 1] < threshold * global {
                    j -= 1;
                }
                let decay = if j < grid.len() { grid[j] } else { top };
                let floor = floor_factor * self.scale();
                let want = decay.max(floor) / opts.window.taper_start();
                (want.min(top), Some(decay), want > top || j == grid.len())
            }
        };
        let omega_max = if omega_max > limit {
            clamped = true;
            limit
        } else {
            omega_max
        };
        let d_omega = omega_max / opts.n_f as f64;
        let eps = self.material.epsilon().max(opts.shift_factor * d_omega / (2.0 * PI));
        Ok(SweepPlan { omega_max, n_f: opts.n_f, eps, decay_point, clamped })
    }

    /// Uniform sweep, parallel over frequencies, deterministic order.
    pub fn sweep(&self, plan: &SweepPlan, condition_limit: f64) -> Result<TransferSample> {
        let n = plan.n_f;
        let omega: Vec<f64> = (1..=n).map(|k| plan.omega_max * k as f64 / n as f64).collect();
        let points: Vec<Result<TransferPoint>> = omega.par_iter().map(|&w| self.transfer_at(w, plan.eps)).collect();
        let q = self.model.len();
        let mut m = Vec::with_capacity(n);
        let mut h = Vec::with_capacity(n);
        let mut residual = Vec::with_capacity(n);
        let mut condition = Vec::with_capacity(n);
        let mut flagged = Vec::new();
        for (k, p) in points.into_iter().enumerate() {
            match p {
                Ok(p) if p.condition <= condition_limit => {
                    m.push(p.m);
                    h.push(p.h);
                    residual.push(p.residual);
                    condition.push(p.condition);
                }
                Ok(p) => {
                    flagged.push(k);
                    m.push(p.m);
                    h.push(p.h);
                    residual.push(p.residual);
                    condition.push(p.condition);
                }
                Err(Error::Singular(_)) => {
                    flagged.push(k);
                    m.push(CMat::zeros(q));
                    h.push(CMat::zeros(q));
                    residual.push(f64::NAN);
                    condition.push(f64::INFINITY);
                }
                Err(e) => return Err(e),
            }
        }
        if flagged.len() == n {
            return Err(Error::Singular("every sample of the sweep is singular".into()));
        }
        interpolate_flagged(&omega, &mut h, &flagged);
        interpolate_flagged(&omega, &mut m, &flagged);
        let dc = self.transfer_at(0.0, plan.eps).ok().map(|p| p.h);
        Ok(TransferSample {
            plan: *plan,
            labels: self.model.labels(),
            families: self.model.families().to_vec(),
            omega,
            m,
            h,
            dc,
            residual,
            condition,
            flagged,
        })
    }

    pub fn frequency_sweep(&self, opts: &SweepOptions) -> Result<TransferSample> {
        let plan = self.plan(opts)?;
        self.sweep(&plan, opts.condition_limit)
    }
}

fn interpolate_flagged(omega: &[f64], values: &mut [CMat], flagged: &[usize]) {
    if flagged.is_empty() {
        return;
    }
    let bad: std::collections::BTreeSet<usize> = flagged.iter().cloned().collect();
    let good: Vec<usize> = (0..omega.len()).filter(|k| !bad.contains(k)).collect();
    for &k in flagged {
        let right = good.iter().position(|&g| g > k);
        let (lo, hi) = match right {
            Some(0) => (good[0], good[0]),
            Some(r) => (good[r - 1], good[r]),
            None => (*good.last().unwrap(), *good.last().unwrap()),
        };
        let t = if hi == lo { 0.0 } else { (omega[k] - omega[lo]) / (omega[hi] - omega[lo]) };
        let (a, b) = (values[lo].clone(), values[hi].clone());
        values[k] = CMat { n: a.n, data: a.data.iter().zip(&b.data).map(|(x, y)| x * (1.0 - t) + y * t).collect() };
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthesisOptions {
    pub window: Window,
    /// Limit on `max|Im| / max|Re|` of the raw inverse transform.
    pub realness_limit: f64,
    /// Limit on `∫_{t<0} h² / ∫ h²`.
    pub causality_limit: f64,
    /// Return an error when a limit is exceeded.
    pub enforce: bool,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions { window: Window::default(), realness_limit: 1e-10, causality_limit: 1e-3, enforce: true }
    }
}

/// Real `h(t)` on a two-sided axis of `2N_F` points, `Δt = π/ω_max`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImpulseResponse {
    pub labels: Vec<String>,
    pub t: Vec<f64>,
    /// `values[i·Q + j][k] = h_ij(t_k)`.
    pub values: Vec<Vec<f64>>,
    pub omega_max: f64,
    pub n_f: usize,
    pub eps: f64,
    pub window: Window,
    /// Worst `max|Im| / max|Re|` of the inverse transform.
    pub imag_residue: f64,
    /// Worst anti-causal energy fraction over entries carrying energy.
    pub anticausal_energy: f64,
    /// Worst `max|h(t<0)| / max|h|`.
    pub anticausal_peak: f64,
}

impl ImpulseResponse {
    pub fn q(&self) -> usize {
        self.labels.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> &[f64] {
        &self.values[i * self.q() + j]
    }

    /// Index of the first sample with `t ≥ 0`.
    pub fn origin(&self) -> usize {
        self.n_f
    }

    pub fn dt(&self) -> f64 {
        self.t[1] - self.t[0]
    }

    /// Linear interpolation of one entry at `t` (zero outside the axis).
    pub fn sample(&self, i: usize, j: usize, t: f64) -> f64 {
        let x = (t - self.t[0]) / self.dt();
        if x < 0.0 || x > (self.t.len() - 1) as f64 {
            return 0.0;
        }
        let k = (x.floor() as usize).min(self.t.len() - 2);
        let f = x - k as f64;
        let e = self.entry(i, j);
        e[k] * (1.0 - f) + e[k + 1] * f
    }
}

/// Uniform band `kΔω`, `k = 1..N_F`, with shift and window, for synthesizing
/// single series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisGrid {
    pub omega_max: f64,
    pub n_f: usize,
    pub eps: f64,
    pub window: Window,
}

impl SynthesisGrid {
    /// Two-sided time axis of `2N_F` points, `Δt = π/ω_max`.
    pub fn times(&self) -> Vec<f64> {
        let dt = PI / self.omega_max;
        (0..2 * self.n_f).map(|k| (k as f64 - self.n_f as f64) * dt).collect()
    }

    /// Real series from samples `value(k−1) = F(i kΔω + ε)`, `k = 1..N_F`, and
    /// the zero-frequency value. Returns the series on [`times`](Self::times)
    /// and `max|Im| / max|Re|` of the raw transform.
    pub fn synthesize(&self, dc: f64, value: impl Fn(usize) -> C64) -> (Vec<f64>, f64) {
        let n = self.n_f;
        let len = 2 * n;
        let d_omega = self.omega_max / n as f64;
        let fft = FftPlanner::<f64>::new().plan_fft_inverse(len);
        let mut buf = vec![C64::new(0.0, 0.0); len];
        buf[0] = C64::new(dc, 0.0);
        for k in 1..n {
            let v = value(k - 1) * self.window.weight(k as f64 * d_omega, self.omega_max);
            buf[k] = v;
            buf[len - k] = v.conj();
        }
        buf[n] = C64::new((value(n - 1) * self.window.weight(self.omega_max, self.omega_max)).re, 0.0);
        fft.process(&mut buf);
        let re_max = buf.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
        let im_max = buf.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        let residue = if re_max > 0.0 { im_max / re_max } else { 0.0 };
        let norm = d_omega / (2.0 * PI);
        let dt = PI / self.omega_max;
        let h = (0..len)
            .map(|k| {
                let t = (k as f64 - n as f64) * dt;
                buf[(k + n) % len].re * norm * (self.eps * t).exp()
            })
            .collect();
        (h, residue)
    }
}

/// Inverse FFT of the Hermitian-extended, windowed transfer samples.
pub fn impulse_from_transfer(sample: &TransferSample, opts: &SynthesisOptions) -> Result<ImpulseResponse> {
    let n = sample.len();
    if n < 2 {
        return Err(Error::Invalid("synthesis needs at least two frequency samples".into()));
    }
    let omega_max = *sample.omega.last().unwrap();
    let d_omega = omega_max / n as f64;
    for (k, &w) in sample.omega.iter().enumerate() {
        if ((w - d_omega * (k + 1) as f64) / omega_max).abs() > 1e-9 {
            return Err(Error::Invalid("synthesis needs the uniform grid kΔω, k = 1..N_F".into()));
        }
    }
    let q = sample.q();
    let eps = sample.plan.eps;
    let grid = SynthesisGrid { omega_max, n_f: n, eps, window: opts.window };
    let t = grid.times();
    let entries: Vec<(Vec<f64>, f64)> = (0..q * q)
        .into_par_iter()
        .map(|e| {
            let (i, j) = (e / q, e % q);
            let dc = match &sample.dc {
                Some(d) => d[(i, j)].re,
                None => (2.0 * sample.h[0][(i, j)] - sample.h[1][(i, j)]).re,
            };
            grid.synthesize(dc, |k| sample.h[k][(i, j)])
        })
        .collect();
    let energy: Vec<f64> = entries.iter().map(|(h, _)| h.iter().map(|x| x * x).sum()).collect();
    let top = energy.iter().cloned().fold(0.0, f64::max);
    let mut imag_residue = 0.0f64;
    let mut anticausal_energy = 0.0f64;
    let mut anticausal_peak = 0.0f64;
    for ((h, r), &en) in entries.iter().zip(&energy) {
        // Entries forbidden by symmetry carry only rounding noise.
        if en <= 1e-12 * top || en == 0.0 {
            continue;
        }
        imag_residue = imag_residue.max(*r);
        let neg: f64 = h[..n].iter().map(|x| x * x).sum();
        anticausal_energy = anticausal_energy.max(neg / en);
        let peak = h.iter().map(|x| x.abs()).fold(0.0, f64::max);
        let neg_peak = h[..n].iter().map(|x| x.abs()).fold(0.0, f64::max);
        anticausal_peak = anticausal_peak.max(neg_peak / peak);
    }
    let out = ImpulseResponse {
        labels: sample.labels.clone(),
        t,
        values: entries.into_iter().map(|(h, _)| h).collect(),
        omega_max,
        n_f: n,
        eps,
        window: opts.window,
        imag_residue,
        anticausal_energy,
        anticausal_peak,
    };
    if opts.enforce && (imag_residue > opts.realness_limit || anticausal_energy > opts.causality_limit) {
        return Err(Error::Quality(format!(
            "impulse synthesis: imaginary residue {imag_residue:.3e} (limit {:.1e}), anti-causal energy {anticausal_energy:.3e} (limit {:.1e})",
            opts.realness_limit, opts.causality_limit
        )));
    }
    Ok(out)
}

/// Decoupled single-mode response of a small body.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallSizeResponse {
    pub family: Family,
    pub kappa: f64,
    pub beta: f64,
    pub material: DrudeLorentz,
    /// `1 + β²/κ⊥` for transverse modes, 1 otherwise.
    pub delta: f64,
    /// Oscillation frequency; zero when critically or over-damped.
    pub omega: f64,
    /// Envelope decay time, infinite without losses.
    pub tau: f64,
    /// The square-root argument is negative: the response decays monotonically.
    pub overdamped: bool,
}

/// Closed-form `H(s)` and `h(t)` of one decoupled mode.
pub fn small_size_closed_forms(material: &DrudeLorentz, kappa: f64, family: Family, beta: f64) -> Result<SmallSizeResponse> {
    material.validate()?;
    if !(kappa > 0.0) {
        return Err(Error::Invalid(format!("eigenvalue must be positive, got {kappa}")));
    }
    if family == Family::Parallel && kappa < 2.0 - 1e-9 {
        return Err(Error::Invalid(format!("longitudinal eigenvalue {kappa} below 2")));
    }
    let (wp, w0, g) = (material.omega_p, material.omega_0, material.gamma);
    let delta = match family {
        Family::Parallel => 1.0,
        Family::Perpendicular => 1.0 + beta * beta / kappa,
    };
    let disc = match family {
        Family::Parallel => w0 * w0 + wp * wp / kappa - g * g / 4.0,
        Family::Perpendicular => w0 * w0 / delta - g * g / (4.0 * delta * delta),
    };
    let tau = if g > 0.0 { 2.0 * delta / g } else { f64::INFINITY };
    Ok(SmallSizeResponse {
        family,
        kappa,
        beta,
        material: *material,
        delta,
        omega: disc.max(0.0).sqrt(),
        tau,
        overdamped: disc < 0.0,
    })
}

impl SmallSizeResponse {
    pub fn transfer(&self, s: C64) -> C64 {
        let m = &self.material;
        let wp2 = m.omega_p * m.omega_p;
        let den = match self.family {
            Family::Parallel => s * s + s * m.gamma + m.omega_0 * m.omega_0 + wp2 / self.kappa,
            Family::Perpendicular => s * s * self.delta + s * m.gamma + m.omega_0 * m.omega_0,
        };
        wp2 / den
    }

    /// `h(t)`, zero for `t < 0`.
    pub fn impulse(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let m = &self.material;
        let wp2 = m.omega_p * m.omega_p;
        let env = if self.tau.is_finite() { (-t / self.tau).exp() } else { 1.0 };
        let amp = wp2 / self.delta;
        if self.overdamped {
            let nu = self.root_gap();
            amp / nu * env * (nu * t).sinh()
        } else if self.omega > 0.0 {
            amp / self.omega * env * (self.omega * t).sin()
        } else {
            amp * t * env
        }
    }

    /// `√(−disc)` in the overdamped branch.
    fn root_gap(&self) -> f64 {
        let m = &self.material;
        let disc = match self.family {
            Family::Parallel => m.omega_0.powi(2) + m.omega_p.powi(2) / self.kappa - m.gamma.powi(2) / 4.0,
            Family::Perpendicular => m.omega_0.powi(2) / self.delta - m.gamma.powi(2) / (4.0 * self.delta.powi(2)),
        };
        (-disc).max(0.0).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metal() -> DrudeLorentz {
        DrudeLorentz::metal(1.0)
    }

    #[test]
    fn diagonal_m_without_coupling() {
        let model = Uncoupled { families: vec![Family::Parallel], kappa: vec![3.0], radius: 1.0, c0: 10.0 };
        let s = C64::new(0.01, 0.7);
        let c = model.coupling_at(s).unwrap();
        let m = assemble_m(&metal(), &[3.0], &c).unwrap();
        let chi = metal().chi(s).unwrap();
        let h = 1.0 / m[(0, 0)];
        assert!((h - chi * 3.0 / (3.0 + chi)).norm() < 1e-14 * h.norm());
        let ss = small_size_closed_forms(&metal(), 3.0, Family::Parallel, 0.1).unwrap();
        assert!((ss.transfer(s) - h).norm() < 1e-13 * h.norm());
    }

    #[test]
    fn m_is_conjugate_symmetric() {
        let model = Uncoupled {
            families: vec![Family::Parallel, Family::Perpendicular],
            kappa: vec![3.0, 11.0],
            radius: 1.0,
            c0: 3.0,
        };
        let mat = DrudeLorentz::new(1.0, 0.2, 0.05).unwrap();
        let s = C64::new(0.02, 0.9);
        let a = assemble_m(&mat, &model.kappa, &model.coupling_at(s).unwrap()).unwrap();
        let b = assemble_m(&mat, &model.kappa, &model.coupling_at(s.conj()).unwrap()).unwrap();
        assert!(a.conj().max_abs_diff(&b) < 1e-15);
    }

    #[test]
    fn perpendicular_closed_form_limits() {
        let mat = DrudeLorentz::new(2.0, 0.5, 0.0).unwrap();
        let r = small_size_closed_forms(&mat, 10.0, Family::Perpendicular, 0.0).unwrap();
        assert_eq!(r.delta, 1.0);
        let t = 1.3;
        assert!((r.impulse(t) - 4.0 / 0.5 * (0.5 * t).sin()).abs() < 1e-12);
        let ramp = small_size_closed_forms(&metal(), 10.0, Family::Perpendicular, 1.0).unwrap();
        assert!(ramp.omega == 0.0 && !ramp.overdamped);
        assert!((ramp.impulse(2.0) - 2.0 / 1.1).abs() < 1e-12);
        let lossy = small_size_closed_forms(&DrudeLorentz::new(1.0, 0.0, 0.3).unwrap(), 10.0, Family::Perpendicular, 1.0)
            .unwrap();
        assert!(lossy.overdamped);
        let t = 4.0;
        let expected = (1.0 - (-0.3 * t / 1.1f64).exp()) / 0.3;
        assert!((lossy.impulse(t) - expected).abs() < 1e-12);
    }

    #[test]
    fn window_shape() {
        let w = Window::default();
        assert_eq!(w.weight(0.5, 1.0), 1.0);
        assert_eq!(w.weight(0.9, 1.0), 1.0);
        assert!((w.weight(0.95, 1.0) - 0.5).abs() < 1e-12);
        assert_eq!(w.weight(1.0, 1.0), 0.0);
    }

    fn synthetic(h: impl Fn(f64) -> C64, n: usize, omega_max: f64) -> TransferSample {
        let omega: Vec<f64> = (1..=n).map(|k| omega_max * k as f64 / n as f64).collect();
        TransferSample {
            plan: SweepPlan { omega_max, n_f: n, eps: 0.0, decay_point: None, clamped: false },
            labels: vec!["par1".into()],
            families: vec![Family::Parallel],
            m: vec![CMat::identity(1); n],
            h: omega.iter().map(|&w| CMat { n: 1, data: vec![h(w)] }).collect(),
            dc: Some(CMat { n: 1, data: vec![h(0.0)] }),
            residual: vec![0.0; n],
            condition: vec![1.0; n],
            flagged: vec![],
            omega,
        }
    }

    #[test]
    fn constant_transfer_gives_band_sinc() {
        let n = 256;
        let sample = synthetic(|_| C64::new(2.0, 0.0), n, 10.0);
        let opts = SynthesisOptions { window: Window::None, enforce: false, ..Default::default() };
        let h = impulse_from_transfer(&sample, &opts).unwrap();
        let peak = h.entry(0, 0).iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(h.entry(0, 0)[h.origin()], peak);
        // Σ_k c e^{iω_k t} Δω/2π at t = 0 is c·ω_max/π.
        assert!((peak - 2.0 * 10.0 / PI).abs() < 1e-10);
        assert!(h.imag_residue < 1e-12);
        assert_eq!(h.t.len(), 2 * n);
    }

    #[test]
    fn flagged_samples_are_interpolated() {
        let omega = vec![1.0, 2.0, 3.0, 4.0];
        let mut v: Vec<CMat> = omega.iter().map(|&w| CMat { n: 1, data: vec![C64::new(w, 0.0)] }).collect();
        v[2] = CMat::zeros(1);
        interpolate_flagged(&omega, &mut v, &[2]);
        assert!((v[2][(0, 0)].re - 3.0).abs() < 1e-15);
    }

    #[test]
    fn small_size_sweep_and_synthesis_match_closed_form() {
        let mat = DrudeLorentz::new(1.0, 0.0, 0.05).unwrap();
        let model = Uncoupled { families: vec![Family::Parallel], kappa: vec![3.0], radius: 1.0, c0: 100.0 };
        let solver = ResponseSolver::new(mat, &model).unwrap();
        let opts = SweepOptions { n_f: 4096, ..Default::default() };
        let sample = solver.frequency_sweep(&opts).unwrap();
        assert!(sample.max_residual() < 1e-12);
        let h = impulse_from_transfer(&sample, &SynthesisOptions::default()).unwrap();
        let closed = small_size_closed_forms(&mat, 3.0, Family::Parallel, 0.01).unwrap();
        let period = 2.0 * PI / closed.omega;
        let (mut num, mut den) = (0.0, 0.0);
        for (k, &t) in h.t.iter().enumerate() {
            if t >= 0.0 && t <= 10.0 * period {
                let e = closed.impulse(t);
                num += (h.entry(0, 0)[k] - e).powi(2);
                den += e * e;
            }
        }
        assert!((num / den).sqrt() < 1e-2, "relative L2 {}", (num / den).sqrt());
    }
}
