use num_complex::Complex64;

use super::matrix::ComplexMatrix;
use crate::error::{Error, Result};

/// Lower-triangular factor `L` with `A = L Lᴴ` for a Hermitian positive definite `A`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: ComplexMatrix,
}

impl Cholesky {
    /// Factors `a`, reading only its lower triangle.
    ///
    /// A pivot that is non-positive, or smaller than `n·ε` times its original
    /// diagonal entry, is reported as a conditioning error.
    pub fn factor(a: &ComplexMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::shape("Cholesky::factor", "square matrix", format!("{:?}", a.shape())));
        }
        let n = a.rows();
        let rel_tol = (n.max(1) as f64) * f64::EPSILON;
        let mut l = a.clone();
        for j in 0..n {
            let mut d = l[(j, j)].re;
            for k in 0..j {
                d -= l[(j, k)].norm_sqr();
            }
            if !(d > rel_tol * a[(j, j)].re.abs()) || !d.is_finite() {
                return Err(Error::Conditioning { index: j, pivot: d });
            }
            let djj = d.sqrt();
            l[(j, j)] = Complex64::new(djj, 0.0);
            for i in (j + 1)..n {
                let mut s = l[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s / djj;
            }
            for i in 0..j {
                l[(i, j)] = Complex64::new(0.0, 0.0);
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    pub fn lower(&self) -> &ComplexMatrix {
        &self.l
    }

    /// Solves `A x = b` in place by forward then backward substitution.
    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        let n = self.dim();
        debug_assert_eq!(b.len(), n);
        let l = &self.l;
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= l[(i, k)] * b[k];
            }
            b[i] = s / l[(i, i)].re;
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n {
                s -= l[(k, i)].conj() * b[k];
            }
            b[i] = s / l[(i, i)].re;
        }
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// `log det A = 2 Σ log L_jj`.
    pub fn log_det(&self) -> f64 {
        (0..self.dim()).map(|j| self.l[(j, j)].re.ln()).sum::<f64>() * 2.0
    }

    /// Diagonal of `A⁻¹`.
    ///
    /// With `A⁻¹ = L⁻ᴴ L⁻¹`, entry `j` is the squared norm of column `j` of `L⁻¹`.
    pub fn inverse_diagonal(&self) -> Vec<f64> {
        let n = self.dim();
        let l = &self.l;
        let mut linv = ComplexMatrix::zeros(n, n);
        for j in 0..n {
            linv[(j, j)] = Complex64::new(1.0 / l[(j, j)].re, 0.0);
            for i in (j + 1)..n {
                let mut s = Complex64::new(0.0, 0.0);
                for k in j..i {
                    s -= l[(i, k)] * linv[(k, j)];
                }
                linv[(i, j)] = s / l[(i, i)].re;
            }
        }
        (0..n)
            .map(|j| (j..n).map(|i| linv[(i, j)].norm_sqr()).sum())
            .collect()
    }
}
