//! Complex linear algebra over the Kronecker-structured dictionary.
//!
//! Everything the estimators need from `S = (1/σ²)AᴴA + W̃⁻¹` lives here:
//! matrix-free application of `A` and `Aᴴ`, structure-aware assembly of `S`,
//! solves, the diagonal of `S⁻¹`, and Gaussian evidence terms computed through
//! `S` instead of the `MN×MN` marginal covariance.

mod cholesky;
mod gram;
mod kron;
mod matrix;

use num_complex::Complex64;

pub use cholesky::Cholesky;
pub use gram::{
    build_gram, build_gram_as, diag_of_gram_inverse, gram_structure, solve_gram, GramFactor,
    GramMatrix, GramStructure,
};
pub use kron::{apply_dictionary, apply_dictionary_adjoint, DictionaryKron, ORTHOGONALITY_TOL};
pub use matrix::{norm_sqr, relative_error, ComplexMatrix};

pub(crate) use gram::check_positive;

use crate::error::{Error, Result};

/// `log det V` and `zᴴV⁻¹z` for `V = A Diag(w) Aᴴ + σ²I`, without forming `V`.
///
/// Determinant lemma:
///   `log det V = MN·log σ² + Σ log w_j + log det S`.
///
/// Quadratic form: with `μ = (1/σ²) S⁻¹ Aᴴz`, the Woodbury identity
/// `V⁻¹ = σ⁻²I − σ⁻⁴ A S⁻¹ Aᴴ` rearranges to
///   `zᴴV⁻¹z = ‖z − Aμ‖²/σ² + μᴴ Diag(w)⁻¹ μ`,
/// a sum of nonnegative terms that avoids the cancellation in
/// `(‖z‖² − bᴴS⁻¹b/σ²)/σ²`.
pub fn gauss_logdet_quadform(
    dict: &DictionaryKron,
    weights: &[f64],
    sigma2: f64,
    z: &[Complex64],
) -> Result<(f64, f64)> {
    if z.len() != dict.num_observations() {
        return Err(Error::shape("gauss_logdet_quadform z", dict.num_observations(), z.len()));
    }
    let gram = build_gram(dict, weights, sigma2)?;
    let factor = gram.factor()?;
    let b = dict.apply_adjoint(z)?;
    let mean: Vec<Complex64> = factor.solve(&b)?.into_iter().map(|v| v / sigma2).collect();
    evidence_terms(dict, &factor, weights, sigma2, z, &mean)
}

/// Same identities as [`gauss_logdet_quadform`] given an existing factor of
/// `S` and the posterior mean it produces.
pub(crate) fn evidence_terms(
    dict: &DictionaryKron,
    factor: &GramFactor,
    weights: &[f64],
    sigma2: f64,
    z: &[Complex64],
    mean: &[Complex64],
) -> Result<(f64, f64)> {
    let mn = dict.num_observations() as f64;
    let log_det = mn * sigma2.ln() + weights.iter().map(|w| w.ln()).sum::<f64>() + factor.log_det();

    let fitted = dict.apply(mean)?;
    let residual: f64 = z.iter().zip(&fitted).map(|(a, b)| (a - b).norm_sqr()).sum();
    let prior: f64 = mean.iter().zip(weights).map(|(m, w)| m.norm_sqr() / w).sum();
    Ok((log_det, residual / sigma2 + prior))
}
