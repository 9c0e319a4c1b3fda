use num_complex::Complex64;

use super::{check_observation, factor_and_mean, EstimateReport, Timer};
use crate::error::Result;
use crate::numerics::{check_positive, DictionaryKron};

/// Regularized least squares `(AᴴA + σ²I)⁻¹ Aᴴz`, i.e. the SBL posterior mean
/// with every weight fixed at one.
pub fn run_least_squares(dict: &DictionaryKron, z: &[Complex64], sigma2: f64) -> Result<EstimateReport> {
    let timer = Timer::start();
    check_observation(dict, z)?;
    check_positive("noise variance", sigma2)?;
    let n = dict.num_coefficients();
    let b = dict.apply_adjoint(z)?;
    let (_, u_hat) = factor_and_mean(dict, &vec![1.0; n], sigma2, &b)?;
    Ok(EstimateReport {
        u_hat,
        iterations: 1,
        objective_trace: Vec::new(),
        converged: true,
        wall_time: timer.seconds(),
        weights: vec![1.0; n],
        scales: None,
    })
}
