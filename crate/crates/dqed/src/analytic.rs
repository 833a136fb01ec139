//! Closed-form reference problems: homogeneous medium, slab at normal
//! incidence, sphere eigenvalues.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::coupling::CouplingMatrix;
use crate::linalg::{invert, CMat};
use crate::material::DrudeLorentz;
use crate::modes::Family;
use crate::response::{assemble_m, CouplingModel};
use crate::{Error, Result};

/// `χ̃(s²+ω_μ²)/((1+χ̃)s²+ω_μ²)`, the single-mode transfer function of an
/// unbounded medium.
pub fn infinite_medium_transfer(material: &DrudeLorentz, omega_mu: f64, s: C64) -> Result<C64> {
    let chi = material.chi(s)?;
    let s2 = s * s;
    let w2 = omega_mu * omega_mu;
    let den = (1.0 + chi) * s2 + w2;
    if den.norm() <= 1e3 * f64::EPSILON * (chi.norm() + 1.0) * (s2.norm() + w2) {
        return Err(Error::Singular(format!("polariton pole at s = {s}")));
    }
    Ok(chi * (s2 + w2) / den)
}

/// Plane-wave modes of an unbounded medium, each coupling only to itself
/// through `S = s/(s² + ω_μ²)`.
pub struct InfiniteMedium {
    pub omega_mu: Vec<f64>,
    families: Vec<Family>,
    kappa: Vec<f64>,
}

impl InfiniteMedium {
    pub fn new(omega_mu: Vec<f64>) -> Self {
        let n = omega_mu.len();
        InfiniteMedium { omega_mu, families: vec![Family::Perpendicular; n], kappa: vec![f64::INFINITY; n] }
    }
}

impl CouplingModel for InfiniteMedium {
    fn families(&self) -> &[Family] {
        &self.families
    }
    fn kappa(&self) -> &[f64] {
        &self.kappa
    }
    fn labels(&self) -> Vec<String> {
        (1..=self.omega_mu.len()).map(|k| format!("mu{k}")).collect()
    }
    fn coupling_at(&self, s: C64) -> Result<CouplingMatrix> {
        let n = self.omega_mu.len();
        let diag: Vec<C64> = self.omega_mu.iter().map(|w| s / (s * s + w * w)).collect();
        if diag.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Singular(format!("free-field pole at s = {s}")));
        }
        Ok(CouplingMatrix {
            s,
            gamma: 0.0,
            families: self.families.clone(),
            regular: CMat::from_fn(n, |i, j| if i == j { diag[i] } else { C64::new(0.0, 0.0) }),
            quasistatic_perp: vec![C64::new(0.0, 0.0); n],
        })
    }
}

/// Which slab coefficient formula to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlabForm {
    /// Direct evaluation of `(s/c₀²)∬ U*_m g U_m′` with `g = (c₀/2s)e^{−s|x|/c₀}`
    /// and unit-norm modes: the bulk term `δ s/(s² + c₀²k_m²)` plus the
    /// two-face term with round trip `e^{−2as/c₀}`.
    Exact,
    /// The reduced expression without the bulk term and with `e^{−as/c₀}`.
    /// Its static limit `sS₀₀ → −1/2` is unphysical; kept for comparison.
    Reduced,
}

pub const MAX_SLAB_CUTOFF: usize = 128;
const SLAB_SLOTS: usize = 2 * MAX_SLAB_CUTOFF + 3;

/// Slab of thickness `2a`, normal incidence, modes `e^{ik_m x}` with
/// `k_m = mπ/a`, `m = −M..M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlabModel {
    pub half_thickness: f64,
    pub material: DrudeLorentz,
    pub cutoff: usize,
    pub c0: f64,
    pub form: SlabForm,
}

impl SlabModel {
    pub fn new(half_thickness: f64, material: DrudeLorentz, cutoff: usize) -> Result<Self> {
        if !(half_thickness > 0.0) || !half_thickness.is_finite() {
            return Err(Error::Invalid(format!("slab half-thickness must be positive, got {half_thickness}")));
        }
        material.validate()?;
        if cutoff > MAX_SLAB_CUTOFF {
            return Err(Error::Invalid(format!("slab cutoff {cutoff} above {MAX_SLAB_CUTOFF}")));
        }
        Ok(SlabModel { half_thickness, material, cutoff, c0: crate::constants::C0, form: SlabForm::Exact })
    }

    pub fn with_cutoff(&self, cutoff: usize) -> Self {
        SlabModel { cutoff, ..*self }
    }

    pub fn indices(&self) -> Vec<i64> {
        let m = self.cutoff as i64;
        (-m..=m).collect()
    }

    pub fn len(&self) -> usize {
        2 * self.cutoff + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `S⊥⊥_mm′(s)`.
    pub fn coupling(&self, m: i64, mp: i64, s: C64) -> Result<C64> {
        slab_coupling(self, m, mp, s)
    }

    pub fn coupling_matrix(&self, s: C64) -> Result<CMat> {
        let idx = self.indices();
        let n = idx.len();
        let mut out = CMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = slab_coupling(self, idx[i], idx[j], s)?;
            }
        }
        Ok(out)
    }
}

/// Coefficient between slab modes `m` and `m′`.
pub fn slab_coupling(model: &SlabModel, m: i64, mp: i64, s: C64) -> Result<C64> {
    let a = model.half_thickness;
    let c0 = model.c0;
    let pi = std::f64::consts::PI;
    let i = C64::new(0.0, 1.0);
    let as_ = s * a;
    let bp = (c0 / (as_ + i * (m as f64 * pi * c0))) * (c0 / (as_ + i * (mp as f64 * pi * c0)));
    let bm = (c0 / (as_ - i * (m as f64 * pi * c0))) * (c0 / (as_ - i * (mp as f64 * pi * c0)));
    let sign = if (m + mp).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let round_trip = match model.form {
        SlabForm::Exact => (-2.0 * as_ / c0).exp(),
        SlabForm::Reduced => (-as_ / c0).exp(),
    };
    let mut v = (a / (4.0 * c0)) * (bp + bm) * (sign * round_trip - sign);
    if model.form == SlabForm::Exact && m == mp {
        let k = m as f64 * pi / a;
        v += s / (s * s + c0 * c0 * k * k);
    }
    if !v.re.is_finite() || !v.im.is_finite() {
        return Err(Error::Singular(format!("slab coefficient pole at s = {s}")));
    }
    Ok(v)
}

impl CouplingModel for SlabModel {
    fn families(&self) -> &[Family] {
        static PERP: [Family; SLAB_SLOTS] = [Family::Perpendicular; SLAB_SLOTS];
        &PERP[..self.len().min(SLAB_SLOTS)]
    }
    fn kappa(&self) -> &[f64] {
        static INF: [f64; SLAB_SLOTS] = [f64::INFINITY; SLAB_SLOTS];
        &INF[..self.len().min(SLAB_SLOTS)]
    }
    fn labels(&self) -> Vec<String> {
        self.indices().iter().map(|m| format!("m{m:+}")).collect()
    }
    fn coupling_at(&self, s: C64) -> Result<CouplingMatrix> {
        if self.len() > SLAB_SLOTS {
            return Err(Error::Invalid(format!("slab cutoff above {}", MAX_SLAB_CUTOFF + 1)));
        }
        let n = self.len();
        Ok(CouplingMatrix {
            s,
            gamma: s.norm() * self.half_thickness / self.c0,
            families: vec![Family::Perpendicular; n],
            regular: self.coupling_matrix(s)?,
            quasistatic_perp: vec![C64::new(0.0, 0.0); n],
        })
    }
}

#[derive(Debug, Clone)]
pub struct SlabTransfer {
    pub h: CMat,
    pub residual: f64,
    /// Largest change of a retained diagonal entry under `M → M + 2`,
    /// relative to the largest diagonal magnitude.
    pub truncation_change: f64,
}

fn slab_h(model: &SlabModel, s: C64) -> Result<(CMat, f64)> {
    let c = model.coupling_at(s)?;
    let m = assemble_m(&model.material, model.kappa(), &c)?;
    let inv = invert(&m)?;
    Ok((inv.inv, inv.residual))
}

/// Truncated `H⊥⊥ = (δ/χ̃ + sS)⁻¹` with a convergence check in the cutoff.
pub fn slab_transfer(model: &SlabModel, s: C64) -> Result<SlabTransfer> {
    let (h, residual) = slab_h(model, s)?;
    let (h2, _) = slab_h(&model.with_cutoff(model.cutoff + 2), s)?;
    Ok(SlabTransfer { truncation_change: diagonal_change(&h, &h2, 2), h, residual })
}

/// Change of the diagonal of `small` against the matching block of `big`,
/// whose cutoff is larger by `extra`.
pub fn diagonal_change(small: &CMat, big: &CMat, extra: usize) -> f64 {
    let scale = (0..small.n).map(|i| small[(i, i)].norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    (0..small.n).map(|i| (small[(i, i)] - big[(i + extra, i + extra)]).norm()).fold(0.0, f64::max) / scale
}

/// `κ∥` of the sphere for multipole order `l` and its degeneracy.
pub fn sphere_kappa_longitudinal(l: u32) -> Result<(f64, usize)> {
    if l == 0 {
        return Err(Error::Invalid("multipole order starts at 1".into()));
    }
    Ok(((2 * l + 1) as f64 / l as f64, (2 * l + 1) as usize))
}
