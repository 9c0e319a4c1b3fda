use num_complex::Complex64;

use super::matrix::ComplexMatrix;
use crate::error::{Error, Result};

/// Off-diagonal Frobenius mass (relative to diagonal mass) below which a Gram
/// factor is treated as exactly diagonal.
pub const ORTHOGONALITY_TOL: f64 = 1e-10;

/// Measurement operator `A = Pᵀ ⊗ F`, kept as its two factors.
///
/// `P` is the `K×N` pilot matrix and `F` the `M×Q` transform, so `A` maps a
/// length `QK` coefficient vector `u = vec(U)` to a length `MN` observation
/// through `A·vec(U) = vec(F U P)`. The dense `MN×QK` operator is never built.
///
/// The Gram factors `conj(P)·Pᵀ` (K×K) and `FᴴF` (Q×Q) are computed once at
/// construction, together with their diagonality flags.
#[derive(Debug, Clone)]
pub struct DictionaryKron {
    pilot: ComplexMatrix,
    transform: ComplexMatrix,
    pilot_gram: ComplexMatrix,
    transform_gram: ComplexMatrix,
    pilot_gram_diagonal: bool,
    transform_gram_diagonal: bool,
}

fn is_numerically_diagonal(g: &ComplexMatrix) -> bool {
    let diag: f64 = g.diagonal().iter().map(|z| z.norm_sqr()).sum();
    g.off_diagonal_norm_sqr().sqrt() <= ORTHOGONALITY_TOL * diag.sqrt()
}

impl DictionaryKron {
    pub fn new(pilot: ComplexMatrix, transform: ComplexMatrix) -> Result<Self> {
        if pilot.rows() == 0 || pilot.cols() == 0 || transform.rows() == 0 || transform.cols() == 0 {
            return Err(Error::shape(
                "DictionaryKron::new",
                "non-empty pilot and transform",
                format!("pilot {:?}, transform {:?}", pilot.shape(), transform.shape()),
            ));
        }
        // (Pᵀ)ᴴ Pᵀ = conj(P) Pᵀ, the transpose of PPᴴ.
        let pilot_gram = pilot.conj().matmul(&pilot.transpose())?;
        let transform_gram = transform.conj_transpose().matmul(&transform)?;
        let pilot_gram_diagonal = is_numerically_diagonal(&pilot_gram);
        let transform_gram_diagonal = is_numerically_diagonal(&transform_gram);
        Ok(Self {
            pilot,
            transform,
            pilot_gram,
            transform_gram,
            pilot_gram_diagonal,
            transform_gram_diagonal,
        })
    }

    pub fn pilot(&self) -> &ComplexMatrix {
        &self.pilot
    }

    pub fn transform(&self) -> &ComplexMatrix {
        &self.transform
    }

    /// `conj(P)·Pᵀ`, the left Kronecker factor of `AᴴA`.
    pub fn pilot_gram(&self) -> &ComplexMatrix {
        &self.pilot_gram
    }

    /// `FᴴF`, the right Kronecker factor of `AᴴA`.
    pub fn transform_gram(&self) -> &ComplexMatrix {
        &self.transform_gram
    }

    pub fn pilot_gram_is_diagonal(&self) -> bool {
        self.pilot_gram_diagonal
    }

    pub fn transform_gram_is_diagonal(&self) -> bool {
        self.transform_gram_diagonal
    }

    pub fn num_users(&self) -> usize {
        self.pilot.rows()
    }

    pub fn pilot_length(&self) -> usize {
        self.pilot.cols()
    }

    pub fn num_antennas(&self) -> usize {
        self.transform.rows()
    }

    pub fn transform_size(&self) -> usize {
        self.transform.cols()
    }

    /// Length of the coefficient vector, `QK`.
    pub fn num_coefficients(&self) -> usize {
        self.transform_size() * self.num_users()
    }

    /// Length of the observation vector, `MN`.
    pub fn num_observations(&self) -> usize {
        self.num_antennas() * self.pilot_length()
    }

    /// `A x` via `vec(F X P)` with `X` the `Q×K` reshape of `x`.
    pub fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        let (q, k) = (self.transform_size(), self.num_users());
        if x.len() != q * k {
            return Err(Error::shape("apply_dictionary", q * k, x.len()));
        }
        let u = ComplexMatrix::from_col_major(q, k, x.to_vec())?;
        let fu = self.transform.matmul(&u)?;
        Ok(fu.matmul(&self.pilot)?.into_vec())
    }

    /// `Aᴴ y` via `vec(Fᴴ Y Pᴴ)` with `Y` the `M×N` reshape of `y`.
    pub fn apply_adjoint(&self, y: &[Complex64]) -> Result<Vec<Complex64>> {
        let (m, n) = (self.num_antennas(), self.pilot_length());
        if y.len() != m * n {
            return Err(Error::shape("apply_dictionary_adjoint", m * n, y.len()));
        }
        let ym = ComplexMatrix::from_col_major(m, n, y.to_vec())?;
        let fy = self.transform.conj_transpose().matmul(&ym)?;
        Ok(fy.matmul(&self.pilot.conj_transpose())?.into_vec())
    }

    /// Materializes `Pᵀ ⊗ F`. Only meant for small instances and tests.
    pub fn to_dense(&self) -> ComplexMatrix {
        self.pilot.transpose().kron(&self.transform)
    }
}

pub fn apply_dictionary(dict: &DictionaryKron, x: &[Complex64]) -> Result<Vec<Complex64>> {
    dict.apply(x)
}

pub fn apply_dictionary_adjoint(dict: &DictionaryKron, y: &[Complex64]) -> Result<Vec<Complex64>> {
    dict.apply_adjoint(y)
}
