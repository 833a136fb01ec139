//! Free-space dyadic Green functions for the vector potential in the temporal
//! gauge, and their longitudinal/transverse and static/dynamic parts.
//!
//! Every kernel here has the form `a I + b r̂r̂`; [`IsoDyad`] stores the two
//! coefficients so that hot loops never build full matrices.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::geometry::vec3::*;
use crate::{Error, Result};

pub type Dyad3 = [[C64; 3]; 3];

/// Switch from closed forms to Taylor series below this `|ξ|`.
pub const SERIES_SWITCH: f64 = 0.5;

/// `iso · I + radial · r̂r̂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsoDyad {
    pub iso: C64,
    pub radial: C64,
}

impl IsoDyad {
    pub fn matrix(&self, e: Vec3) -> Dyad3 {
        let mut m = [[C64::new(0.0, 0.0); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = self.radial * (e[i] * e[j]);
            }
            m[i][i] += self.iso;
        }
        m
    }

    /// `u · (a I + b r̂r̂) · v` for real vectors.
    #[inline]
    pub fn contract(&self, u: Vec3, e: Vec3, v: Vec3) -> C64 {
        self.iso * dot(u, v) + self.radial * (dot(u, e) * dot(e, v))
    }
}

fn unit(r: Vec3) -> Result<(f64, Vec3)> {
    let d = norm(r);
    if !(d > 0.0) {
        return Err(Error::Singular("Green function evaluated at r = 0".into()));
    }
    Ok((d, scale(r, 1.0 / d)))
}

fn nonzero_s(s: C64) -> Result<()> {
    if s.norm() == 0.0 {
        return Err(Error::Singular("longitudinal kernel has a 1/s^2 pole at s = 0".into()));
    }
    Ok(())
}

/// `f₁(ξ) = sinh ξ / ξ`.
pub fn f1(xi: C64) -> C64 {
    if xi.norm() < SERIES_SWITCH {
        f1_series(xi)
    } else {
        xi.sinh() / xi
    }
}

pub fn f1_series(xi: C64) -> C64 {
    let x2 = xi * xi;
    let mut term = C64::new(1.0, 0.0);
    let mut sum = term;
    for k in 1..10 {
        term *= x2 / ((2 * k) as f64 * (2 * k + 1) as f64);
        sum += term;
    }
    sum
}

/// `f₂(ξ) = (3/2ξ³)(−2 + ξ² + 2ξe^{−ξ} + 2e^{−ξ})`.
pub fn f2(xi: C64) -> C64 {
    if xi.norm() < SERIES_SWITCH {
        f2_series(xi)
    } else {
        f2_closed(xi)
    }
}

pub fn f2_closed(xi: C64) -> C64 {
    let e = (-xi).exp();
    1.5 / (xi * xi * xi) * (-2.0 + xi * xi + 2.0 * xi * e + 2.0 * e)
}

/// `f₂(ξ) = 3 Σ_j (−1)^j (j+2)/(j+3)! ξ^j`.
pub fn f2_series(xi: C64) -> C64 {
    let mut sum = C64::new(0.0, 0.0);
    let mut pow = C64::new(1.0, 0.0);
    let mut fact = 6.0;
    for j in 0..14 {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        sum += pow * (3.0 * sign * (j + 2) as f64 / fact);
        pow *= xi;
        fact *= (j + 4) as f64;
    }
    sum
}

/// `e^{−ξ/2} f₁(ξ/2) = (1 − e^{−ξ})/ξ`.
pub fn damped_f1(xi: C64) -> C64 {
    if xi.norm() < SERIES_SWITCH {
        let mut sum = C64::new(0.0, 0.0);
        let mut pow = C64::new(1.0, 0.0);
        let mut fact = 1.0;
        for j in 0..14 {
            fact *= (j + 1) as f64;
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sum += pow * (sign / fact);
            pow *= xi;
        }
        sum
    } else {
        (1.0 - (-xi).exp()) / xi
    }
}

/// `(e^{−ξ/2} f₁(ξ/2), f₂(ξ))` sharing one exponential.
pub fn dynamic_scalars(xi: C64) -> (C64, C64) {
    if xi.norm() < SERIES_SWITCH {
        (damped_f1(xi), f2_series(xi))
    } else {
        let e = (-xi).exp();
        let inv = 1.0 / xi;
        ((1.0 - e) * inv, 1.5 * inv * inv * inv * (-2.0 + xi * xi + 2.0 * xi * e + 2.0 * e))
    }
}

/// Coefficients of the total kernel `G(r; s)`.
pub fn total_coeffs(r: f64, s: C64, c0: f64) -> IsoDyad {
    let xi = s * r / c0;
    let pre = (-xi).exp() / (4.0 * PI * r);
    let q = (1.0 + 1.0 / xi) / xi;
    IsoDyad { iso: pre * (1.0 + q), radial: pre * (-1.0 - 3.0 * q) }
}

pub fn longitudinal_coeffs(r: f64, s: C64, c0: f64) -> IsoDyad {
    let k = c0 * c0 / (s * s) / (4.0 * PI * r * r * r);
    IsoDyad { iso: k, radial: -3.0 * k }
}

pub fn transverse_static_coeffs(r: f64) -> IsoDyad {
    let k = C64::new(1.0 / (8.0 * PI * r), 0.0);
    IsoDyad { iso: k, radial: k }
}

/// Coefficients of `G_d⊥(r; s)`; regular at `r = 0`, where the radial part vanishes.
pub fn transverse_dynamic_coeffs(r: f64, s: C64, c0: f64) -> IsoDyad {
    let (d1, d2) = dynamic_scalars(s * r / c0);
    let a = s / (4.0 * PI * c0) * d1;
    let b = s / (12.0 * PI * c0) * d2;
    IsoDyad { iso: b - a, radial: a - 3.0 * b }
}

pub fn green_total(r: Vec3, s: C64, c0: f64) -> Result<Dyad3> {
    let (d, e) = unit(r)?;
    nonzero_s(s)?;
    Ok(total_coeffs(d, s, c0).matrix(e))
}

pub fn green_longitudinal(r: Vec3, s: C64, c0: f64) -> Result<Dyad3> {
    let (d, e) = unit(r)?;
    nonzero_s(s)?;
    Ok(longitudinal_coeffs(d, s, c0).matrix(e))
}

/// `G⊥ = G − G∥`.
pub fn green_transverse(r: Vec3, s: C64, c0: f64) -> Result<Dyad3> {
    let (d, e) = unit(r)?;
    nonzero_s(s)?;
    let t = total_coeffs(d, s, c0);
    let l = longitudinal_coeffs(d, s, c0);
    Ok(IsoDyad { iso: t.iso - l.iso, radial: t.radial - l.radial }.matrix(e))
}

/// `g₀⊥ = (I + r̂r̂)/(8πr)`.
pub fn green_transverse_static(r: Vec3) -> Result<Dyad3> {
    let (d, e) = unit(r)?;
    Ok(transverse_static_coeffs(d).matrix(e))
}

pub fn green_transverse_dynamic(r: Vec3, s: C64, c0: f64) -> Dyad3 {
    let d = norm(r);
    let e = if d > 0.0 { scale(r, 1.0 / d) } else { [0.0; 3] };
    transverse_dynamic_coeffs(d, s, c0).matrix(e)
}

/// Second-order small-argument expansion of `G⊥`:
/// `g₀⊥ − (2/12πr)(sr/c₀) I + ((3I − r̂r̂)/32πr)(sr/c₀)²`.
pub fn green_asymptotic_small(r: Vec3, s: C64, c0: f64) -> Result<Dyad3> {
    let (d, e) = unit(r)?;
    let x = s * d / c0;
    let g0 = transverse_static_coeffs(d);
    let k = 1.0 / (32.0 * PI * d);
    let coeffs = IsoDyad {
        iso: g0.iso - x * (2.0 / (12.0 * PI * d)) + x * x * (3.0 * k),
        radial: g0.radial - x * x * k,
    };
    Ok(coeffs.matrix(e))
}

/// Largest entry magnitude, for relative comparisons.
pub fn max_abs(m: &Dyad3) -> f64 {
    m.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &Dyad3, b: &Dyad3) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            worst = worst.max((a[i][j] - b[i][j]).norm());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    const C0: f64 = crate::constants::C0;

    fn add_dyads(a: &Dyad3, b: &Dyad3) -> Dyad3 {
        let mut m = *a;
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += b[i][j];
            }
        }
        m
    }

    #[test]
    fn decomposition_identity() {
        let cases = [
            ([0.3, -0.2, 0.5], C64::new(1e9, 3e8)),
            ([1e-7, 2e-7, -1e-7], C64::new(0.0, 2e15)),
            ([0.01, 0.0, 0.0], C64::new(4e10, -7e10)),
        ];
        for (r, s) in cases {
            let gt = green_transverse(r, s, C0).unwrap();
            let split = add_dyads(&green_transverse_static(r).unwrap(), &green_transverse_dynamic(r, s, C0));
            assert!(max_abs_diff(&gt, &split) < 1e-12 * max_abs(&gt), "{r:?} {s}");
        }
    }

    #[test]
    fn f_functions_at_zero_and_crossover() {
        assert!((f1(C64::new(0.0, 0.0)) - 1.0).norm() < 1e-15);
        assert!((f2(C64::new(0.0, 0.0)) - 1.0).norm() < 1e-15);
        // Away from the cancellation region the closed form is accurate, so the
        // two paths must agree tightly there.
        for xi in [C64::new(0.3, 0.0), C64::new(0.0, 0.5), C64::new(0.2, -0.3)] {
            assert!((f2_series(xi) - f2_closed(xi)).norm() < 1e-13);
            assert!((f1_series(xi) - xi.sinh() / xi).norm() < 1e-15);
        }
        // Just above the switch the closed form has lost about ξ⁻³ ulps.
        for xi in [C64::new(0.011, 0.0), C64::new(0.0, 0.02)] {
            assert!((f2_series(xi) - f2_closed(xi)).norm() < 1e-8);
        }
        let tiny = C64::new(1e-6, 0.0);
        assert!((f1_series(tiny) - tiny.sinh() / tiny).norm() < 1e-12);
        assert!((damped_f1(tiny) - (1.0 - (-tiny).exp()) / tiny).norm() < 1e-9);
    }

    #[test]
    fn dynamic_part_vanishes_linearly_in_s() {
        let r = [0.1, 0.2, 0.05];
        let a = max_abs(&green_transverse_dynamic(r, C64::new(1e3, 0.0), C0));
        let b = max_abs(&green_transverse_dynamic(r, C64::new(2e3, 0.0), C0));
        assert!((b / a - 2.0).abs() < 1e-6);
    }

    #[test]
    fn static_transverse_on_axis() {
        let g = green_transverse_static([0.0, 0.0, 1.0]).unwrap();
        let k = 1.0 / (8.0 * PI);
        assert!((g[0][0].re - k).abs() < 1e-16 && (g[2][2].re - 2.0 * k).abs() < 1e-16);
        assert!(g[0][1].norm() == 0.0);
    }

    #[test]
    fn singular_points_are_errors() {
        assert!(green_total([0.0; 3], C64::new(1.0, 0.0), C0).is_err());
        assert!(green_longitudinal([1.0, 0.0, 0.0], C64::new(0.0, 0.0), C0).is_err());
    }
}
