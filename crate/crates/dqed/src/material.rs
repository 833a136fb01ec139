//! Single-pole Drude–Lorentz susceptibility and derived quantities.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::constants::EPS0;
use crate::{Error, Result};

/// `χ̃(s) = ω_P² / (s² + sΓ + ω₀²)`, all rates in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrudeLorentz {
    pub omega_p: f64,
    pub omega_0: f64,
    pub gamma: f64,
}

/// Value of `χ̃` at a complex frequency, with the Laplace convention recorded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SusceptibilitySample {
    pub s: C64,
    pub chi: C64,
}

impl SusceptibilitySample {
    /// `s = iω + ε`: the convention used for every frequency-domain quantity.
    pub const CONVENTION: &'static str = "laplace: s = i*omega + epsilon";
}

impl DrudeLorentz {
    pub fn new(omega_p: f64, omega_0: f64, gamma: f64) -> Result<Self> {
        if !(omega_p > 0.0) || !omega_p.is_finite() {
            return Err(Error::Invalid(format!("omega_p must be positive, got {omega_p}")));
        }
        if !(omega_0 >= 0.0) || !(gamma >= 0.0) || !omega_0.is_finite() || !gamma.is_finite() {
            return Err(Error::Invalid(format!("omega_0 and gamma must be non-negative, got {omega_0}, {gamma}")));
        }
        Ok(DrudeLorentz { omega_p, omega_0, gamma })
    }

    /// Lossless free-electron metal.
    pub fn metal(omega_p: f64) -> Self {
        DrudeLorentz { omega_p, omega_0: 0.0, gamma: 0.0 }
    }

    /// The explicit `χ ≡ 0` model.
    pub fn vacuum() -> Self {
        DrudeLorentz { omega_p: 0.0, omega_0: 0.0, gamma: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.omega_p == 0.0 && self.omega_0 == 0.0 && self.gamma == 0.0 {
            return Ok(());
        }
        Self::new(self.omega_p, self.omega_0, self.gamma).map(|_| ())
    }

    pub fn is_vacuum(&self) -> bool {
        self.omega_p == 0.0
    }

    /// Abscissa `ε` used for `s = iω + ε`: zero for lossy media, `10⁻⁹ ω_P` otherwise.
    pub fn epsilon(&self) -> f64 {
        if self.gamma > 0.0 {
            0.0
        } else {
            1e-9 * self.omega_p
        }
    }

    /// `s = iω + ε` on the material's default contour.
    pub fn s_of(&self, omega: f64) -> C64 {
        C64::new(self.epsilon(), omega)
    }

    fn denominator(&self, s: C64) -> C64 {
        s * s + s * self.gamma + self.omega_0 * self.omega_0
    }

    /// `χ̃(s)`, rejecting evaluation at (or numerically on top of) a pole.
    pub fn chi(&self, s: C64) -> Result<C64> {
        if self.is_vacuum() {
            return Ok(C64::new(0.0, 0.0));
        }
        let den = self.denominator(s);
        let scale = s.norm_sqr().max(self.omega_0 * self.omega_0).max(self.omega_p * self.omega_p);
        if den.norm() <= 1e2 * f64::EPSILON * scale {
            return Err(Error::Singular(format!("susceptibility pole at s = {s}")));
        }
        Ok(self.omega_p * self.omega_p / den)
    }

    pub fn sample(&self, s: C64) -> Result<SusceptibilitySample> {
        Ok(SusceptibilitySample { s, chi: self.chi(s)? })
    }

    /// `1/χ̃(s) = (s² + sΓ + ω₀²)/ω_P²`, entire in `s`.
    pub fn inv_chi(&self, s: C64) -> Result<C64> {
        if self.is_vacuum() {
            return Err(Error::Singular("1/chi of the vacuum model".into()));
        }
        Ok(self.denominator(s) / (self.omega_p * self.omega_p))
    }

    /// Real-frequency susceptibility `χ(ω) = χ̃(iω)` (no shift).
    pub fn chi_real_axis(&self, omega: f64) -> Result<C64> {
        self.chi(C64::new(0.0, omega))
    }

    /// Conductivity `σ(ω) = −ε₀ ω Im χ(ω)` (S/m), zero without damping.
    pub fn sigma(&self, omega: f64) -> f64 {
        if self.is_vacuum() || self.gamma == 0.0 || omega == 0.0 {
            return 0.0;
        }
        let w2 = omega * omega;
        let d = self.omega_0 * self.omega_0 - w2;
        EPS0 * w2 * self.gamma * self.omega_p * self.omega_p / (d * d + w2 * self.gamma * self.gamma)
    }

    /// `α_ν = √(2σ(ν)/π)`.
    pub fn alpha(&self, nu: f64) -> f64 {
        (2.0 * self.sigma(nu) / PI).sqrt()
    }

    /// Largest deviation between `Re χ(ω)` and its Kramers–Kronig reconstruction
    /// `−(2/π) P∫₀^Ω ω′ Im χ(ω′)/(ω′² − ω²) dω′` over the grid.
    ///
    /// The minus sign belongs to the `e^{iωt}` convention, in which `Im χ < 0`
    /// for a passive medium at positive frequency.
    ///
    /// The principal value is taken by subtracting the singular part, whose
    /// integral is known in closed form, and excluding the singular node.
    pub fn kk_residual(&self, grid: &[f64]) -> Result<f64> {
        if self.is_vacuum() {
            return Ok(0.0);
        }
        if grid.len() < 8 || grid.windows(2).any(|w| !(w[1] > w[0])) || grid[0] < 0.0 {
            return Err(Error::Invalid("frequency grid must be non-negative and strictly increasing".into()));
        }
        let top = *grid.last().unwrap();
        let reach = self.omega_0.max(self.omega_p);
        let max_step = grid.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        if top < 4.0 * reach {
            return Err(Error::Invalid(format!(
                "grid ends at {top:e} rad/s, below 4x the resonance scale {reach:e}"
            )));
        }
        if self.gamma > 0.0 && max_step > 0.25 * self.gamma {
            return Err(Error::Invalid(format!(
                "grid step {max_step:e} too coarse to resolve a resonance of width {:e}",
                self.gamma
            )));
        }
        let im: Vec<f64> = grid.iter().map(|&w| self.chi_real_axis(w).map(|c| c.im)).collect::<Result<_>>()?;
        let mut worst = 0.0f64;
        for (i, &w) in grid.iter().enumerate() {
            if w == 0.0 || w == top {
                continue;
            }
            let re = self.chi_real_axis(w)?.re;
            let g0 = w * im[i];
            let f = |j: usize| (grid[j] * im[j] - g0) / (grid[j] * grid[j] - w * w);
            let mut integral = 0.0;
            for j in 0..grid.len() - 1 {
                let (a, b) = (j, j + 1);
                let fa = if a == i { 0.5 * (f(b) + if a > 0 { f(a - 1) } else { f(b) }) } else { f(a) };
                let fb = if b == i { 0.5 * (f(a) + if b + 1 < grid.len() { f(b + 1) } else { f(a) }) } else { f(b) };
                integral += 0.5 * (fa + fb) * (grid[b] - grid[a]);
            }
            // PV ∫_{g0}^{top} dω′/(ω′² − ω²) in closed form.
            let pv = |x: f64| ((x - w).abs() / (x + w)).ln() / (2.0 * w);
            integral += g0 * (pv(top) - pv(grid[0]));
            let kk = -2.0 / PI * integral;
            worst = worst.max((re - kk).abs());
        }
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn static_susceptibility() {
        let wp = 2.0e15;
        let m = DrudeLorentz::new(wp, wp / 4.0, 0.0).unwrap();
        let chi = m.chi(C64::new(1e-3, 0.0)).unwrap();
        assert!((chi.re - 16.0).abs() < 1e-9);
    }

    #[test]
    fn lossless_metal_on_imaginary_axis() {
        let m = DrudeLorentz::metal(3.0);
        let w = 1.7;
        let chi = m.chi(C64::new(0.0, w)).unwrap();
        assert!((chi - C64::new(-9.0 / (w * w), 0.0)).norm() < 1e-14);
    }

    #[test]
    fn pole_is_rejected() {
        let m = DrudeLorentz::new(1.0, 0.5, 0.0).unwrap();
        assert!(matches!(m.chi(C64::new(0.0, 0.5)), Err(Error::Singular(_))));
    }

    #[test]
    fn sigma_closed_form_and_alpha() {
        let m = DrudeLorentz::new(1e15, 3e14, 1e14).unwrap();
        let w = 2.5e14;
        let expected = EPS0 * w * w * 1e14 * 1e30 / ((9e28 - w * w).powi(2) + w * w * 1e28);
        assert!((m.sigma(w) / expected - 1.0).abs() < 1e-13);
        let via_chi = -EPS0 * w * m.chi_real_axis(w).unwrap().im;
        assert!((m.sigma(w) / via_chi - 1.0).abs() < 1e-12);
        assert!((m.alpha(w).powi(2) - 2.0 * m.sigma(w) / PI).abs() <= 1e-15 * m.sigma(w));
    }

    #[test]
    fn kk_residual_small_for_lossy_model() {
        let m = DrudeLorentz::new(1.0, 0.25, 0.1).unwrap();
        let grid: Vec<f64> = (0..=40000).map(|k| k as f64 * 0.001).collect();
        let max_re = grid.iter().map(|&w| m.chi_real_axis(w).unwrap().re.abs()).fold(0.0, f64::max);
        let r = m.kk_residual(&grid).unwrap();
        assert!(r < 0.01 * max_re, "residual {r}, max {max_re}");
    }

    #[test]
    fn kk_rejects_coarse_grid() {
        let m = DrudeLorentz::new(1.0, 0.25, 0.1).unwrap();
        let grid: Vec<f64> = (0..=100).map(|k| k as f64 * 0.1).collect();
        assert!(m.kk_residual(&grid).is_err());
    }
}
