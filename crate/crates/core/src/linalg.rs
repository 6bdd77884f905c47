use faer::linalg::solvers::Solve;
use faer::{c64, Mat, Side};

use crate::error::{Error, Result};

/// Smallest admissible squared Cholesky pivot relative to the largest
/// diagonal entry of the factored matrix.
pub const PIVOT_RATIO_MIN: f64 = 1e-14;

/// Cholesky factor of a Hermitian positive definite matrix.
pub struct HermitianFactor {
    llt: faer::linalg::solvers::Llt<c64>,
    n: usize,
}

impl HermitianFactor {
    pub fn new(a: &Mat<c64>) -> Result<Self> {
        let n = a.nrows();
        if n != a.ncols() {
            return Err(Error::Dimension(format!("matrix is {}x{}, expected square", n, a.ncols())));
        }
        let max_diag = (0..n).map(|i| a[(i, i)].re).fold(0.0_f64, f64::max);
        if n > 0 && !(max_diag > 0.0 && max_diag.is_finite()) {
            return Err(Error::Conditioning("matrix has no positive diagonal".into()));
        }
        let llt = a
            .llt(Side::Lower)
            .map_err(|e| Error::Conditioning(format!("matrix is not positive definite: {e:?}")))?;
        let l = llt.L();
        for i in 0..n {
            let piv = l[(i, i)].norm_sqr();
            if !(piv > PIVOT_RATIO_MIN * max_diag) {
                return Err(Error::Conditioning(format!(
                    "matrix is numerically singular (pivot {i}: {piv:e} vs diagonal {max_diag:e})"
                )));
            }
        }
        Ok(HermitianFactor { llt, n })
    }

    pub fn solve(&self, rhs: &[c64]) -> Vec<c64> {
        debug_assert_eq!(rhs.len(), self.n);
        let b = Mat::from_fn(self.n, 1, |i, _| rhs[i]);
        let x = self.llt.solve(&b);
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }
}

pub fn to_complex(m: &Mat<f64>) -> Mat<c64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| c64::new(m[(i, j)], 0.0))
}

pub fn norm2(v: &[c64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn col_norm(m: &Mat<c64>, j: usize) -> f64 {
    (0..m.nrows()).map(|i| m[(i, j)].norm_sqr()).sum::<f64>().sqrt()
}

pub fn frobenius_sq(m: &Mat<f64>) -> f64 {
    m.col_iter().map(|c| c.iter().map(|v| v * v).sum::<f64>()).sum()
}
