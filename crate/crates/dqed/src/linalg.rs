//! Thin wrappers over faer for the dense problems used here.

use faer::linalg::solvers::DenseSolveCore;
use faer::linalg::triangular_solve::{solve_lower_triangular_in_place, solve_upper_triangular_in_place};
use faer::{c64, Mat, MatRef, Par, Side};
use num_complex::Complex64 as C64;

use crate::{Error, Result};

/// Generalized symmetric-definite eigenproblem `A x = λ B x`.
/// Returns eigenvalues ascending and `B`-orthonormal eigenvectors as columns.
pub fn sym_generalized_eigen(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let n = a.nrows();
    let llt = b.llt(Side::Lower).map_err(|e| Error::Eigen(format!("Cholesky of the metric failed: {e:?}")))?;
    let l = llt.L().to_owned();
    // C = L⁻¹ A L⁻ᵀ
    let mut c = a.to_owned();
    solve_lower_triangular_in_place(l.as_ref(), c.as_mut(), Par::Seq);
    let mut ct = c.transpose().to_owned();
    solve_lower_triangular_in_place(l.as_ref(), ct.as_mut(), Par::Seq);
    let sym = Mat::from_fn(n, n, |i, j| 0.5 * (ct[(i, j)] + ct[(j, i)]));
    let evd = sym.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let vals: Vec<f64> = (0..n).map(|i| evd.S().column_vector()[i]).collect();
    let mut x = evd.U().to_owned();
    solve_upper_triangular_in_place(l.transpose(), x.as_mut(), Par::Seq);
    Ok((vals, x))
}

/// Symmetric eigenproblem, eigenvalues ascending.
pub fn sym_eigen(a: MatRef<'_, f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let n = a.nrows();
    let evd = a.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Eigen(format!("{e:?}")))?;
    Ok(((0..n).map(|i| evd.S().column_vector()[i]).collect(), evd.U().to_owned()))
}

/// 3×3 polar factor: the orthogonal matrix closest to `m`, or `None` when `m`
/// is numerically rank deficient.
pub fn polar3(m: [[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let a = Mat::from_fn(3, 3, |i, j| m[i][j]);
    let svd = a.svd().ok()?;
    let s = svd.S().column_vector();
    if !(s[2] > 1e-6 * s[0]) {
        return None;
    }
    let q = svd.U() * svd.V().transpose();
    Some([0, 1, 2].map(|i| [0, 1, 2].map(|j| q[(i, j)])))
}

/// Complex dense matrix stored row-major, the interchange type for response blocks.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CMat {
    pub n: usize,
    pub data: Vec<C64>,
}

impl CMat {
    pub fn zeros(n: usize) -> Self {
        CMat { n, data: vec![C64::new(0.0, 0.0); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        CMat { n: self.n, data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn mul(&self, other: &CMat) -> CMat {
        let n = self.n;
        let mut out = CMat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &CMat) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    fn to_faer(&self) -> Mat<c64> {
        Mat::from_fn(self.n, self.n, |i, j| {
            let z = self[(i, j)];
            c64::new(z.re, z.im)
        })
    }

    fn from_faer(m: MatRef<'_, c64>) -> Self {
        CMat::from_fn(m.nrows(), |i, j| {
            let z = m[(i, j)];
            C64::new(z.re, z.im)
        })
    }
}

impl std::ops::Index<(usize, usize)> for CMat {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.n + j]
    }
}

/// Result of an LU inversion.
#[derive(Debug, Clone)]
pub struct Inverse {
    pub inv: CMat,
    /// `‖M H − I‖_max`.
    pub residual: f64,
    /// `‖M‖₁ ‖H‖₁`, a cheap condition estimate.
    pub condition: f64,
}

fn norm1(m: &CMat) -> f64 {
    (0..m.n).map(|j| (0..m.n).map(|i| m[(i, j)].norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Inverse by LU with partial pivoting, with residual and condition estimate.
pub fn invert(m: &CMat) -> Result<Inverse> {
    if !m.is_finite() {
        return Err(Error::Singular("matrix has non-finite entries".into()));
    }
    let lu = m.to_faer().partial_piv_lu();
    let inv = CMat::from_faer(lu.inverse().as_ref());
    if !inv.is_finite() {
        return Err(Error::Singular("LU inversion produced non-finite entries".into()));
    }
    let prod = m.mul(&inv);
    let residual = prod.max_abs_diff(&CMat::identity(m.n));
    Ok(Inverse { condition: norm1(m) * norm1(&inv), inv, residual })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generalized_eigen_small() {
        let a = Mat::from_fn(2, 2, |i, j| [[2.0, 1.0], [1.0, 3.0]][i][j]);
        let b = Mat::from_fn(2, 2, |i, j| [[2.0, 0.0], [0.0, 1.0]][i][j]);
        let (vals, x) = sym_generalized_eigen(a.as_ref(), b.as_ref()).unwrap();
        for k in 0..2 {
            for i in 0..2 {
                let ax: f64 = (0..2).map(|j| a[(i, j)] * x[(j, k)]).sum();
                let bx: f64 = (0..2).map(|j| b[(i, j)] * x[(j, k)]).sum();
                assert!((ax - vals[k] * bx).abs() < 1e-12);
            }
        }
        let xtbx: f64 = (0..2).map(|i| x[(i, 0)] * x[(i, 0)] * b[(i, i)]).sum();
        assert!((xtbx - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_of_diagonal() {
        let m = CMat::from_fn(3, |i, j| if i == j { C64::new(i as f64 + 1.0, 1.0) } else { C64::new(0.0, 0.0) });
        let inv = invert(&m).unwrap();
        for i in 0..3 {
            assert!((inv.inv[(i, i)] - 1.0 / m[(i, i)]).norm() < 1e-15);
        }
        assert!(inv.residual < 1e-15);
    }

    #[test]
    fn polar_of_scaled_rotation() {
        let (c, s) = (0.6, 0.8);
        let r = [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]];
        let m = r.map(|row| row.map(|v| 3.0 * v));
        let q = polar3(m).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((q[i][j] - r[i][j]).abs() < 1e-12);
            }
        }
    }
}
