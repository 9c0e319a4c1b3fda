use num_complex::Complex64;

use super::{
    check_len, check_observation, effective_weights, factor_and_mean, relative_change,
    ConvergencePolicy, ESblHyper, EstimateReport, PosteriorStats, ScaleState, Timer, WeightState,
};
use crate::error::Result;
use crate::numerics::{
    check_positive, evidence_terms, gauss_logdet_quadform, DictionaryKron, GramFactor,
};

/// Posterior of `u` given `(w, τ)`, i.e. the SBL posterior with `W̃ = Diag(τ ⊙ w)`.
pub fn esbl_posterior_stats(
    dict: &DictionaryKron,
    weights: &WeightState,
    scales: &ScaleState,
    sigma2: f64,
    z: &[Complex64],
) -> Result<PosteriorStats> {
    check_observation(dict, z)?;
    check_len("weights", dict.num_coefficients(), weights.len())?;
    check_len("scales", dict.num_coefficients(), scales.len())?;
    let b = dict.apply_adjoint(z)?;
    let (factor, mean) = factor_and_mean(dict, &effective_weights(weights, scales), sigma2, &b)?;
    Ok(PosteriorStats {
        mean,
        cov_diag: factor.inverse_diagonal(),
    })
}

/// One EM update of `(w, τ)`. With `r_j = |μ̃_j|² + Σ̃_jj`:
///
/// ```text
/// w_j⁺ = (ν/2 + r_j/τ_j) / (ν/2 + 2)
/// τ_j⁺ = (φ + r_j/w_j⁺)  / (θ + 2)
/// ```
///
/// `τ` is updated with the new `w`.
pub fn esbl_update_weights_scales(
    stats: &PosteriorStats,
    weights: &WeightState,
    scales: &ScaleState,
    hyper: &ESblHyper,
) -> (WeightState, ScaleState) {
    debug_assert_eq!(weights.len(), stats.mean.len());
    let r = stats.second_moments();
    let half_nu = hyper.nu / 2.0;
    let new_w = WeightState::from_update(
        r.iter()
            .zip(scales.as_slice())
            .map(|(r, t)| (half_nu + r / t) / (half_nu + 2.0))
            .collect(),
    );
    let new_tau = ScaleState::from_update(
        r.iter()
            .zip(new_w.as_slice())
            .map(|(r, w)| (hyper.phi + r / w) / (hyper.theta + 2.0))
            .collect(),
    );
    (new_w, new_tau)
}

/// `Σ_j [(ν+2)/2·log w_j + ν/(2w_j)] + Σ_j [(θ+1)·log τ_j + φ/τ_j]`, negated.
pub(crate) fn log_prior(weights: &[f64], scales: &[f64], hyper: &ESblHyper) -> f64 {
    let w_terms: f64 = weights
        .iter()
        .map(|w| (hyper.nu + 2.0) / 2.0 * w.ln() + hyper.nu / (2.0 * w))
        .sum();
    let tau_terms: f64 = scales
        .iter()
        .map(|t| (hyper.theta + 1.0) * t.ln() + hyper.phi / t)
        .sum();
    -w_terms - tau_terms
}

/// Log marginal posterior of `(w, τ)` up to a constant:
/// `−log det Ṽ − zᴴṼ⁻¹z + log p(w) + log p(τ)`.
pub fn eval_esbl_marginal_objective(
    dict: &DictionaryKron,
    weights: &WeightState,
    scales: &ScaleState,
    sigma2: f64,
    z: &[Complex64],
    hyper: &ESblHyper,
) -> Result<f64> {
    check_len("scales", weights.len(), scales.len())?;
    let eff = effective_weights(weights, scales);
    let (log_det, quad) = gauss_logdet_quadform(dict, &eff, sigma2, z)?;
    Ok(-log_det - quad + log_prior(weights.as_slice(), scales.as_slice(), hyper))
}

pub fn run_esbl(
    dict: &DictionaryKron,
    z: &[Complex64],
    sigma2: f64,
    hyper: &ESblHyper,
    policy: &ConvergencePolicy,
) -> Result<EstimateReport> {
    let timer = Timer::start();
    check_observation(dict, z)?;
    check_positive("noise variance", sigma2)?;
    hyper.validate()?;
    policy.validate()?;

    let n = dict.num_coefficients();
    let b = dict.apply_adjoint(z)?;
    let mut weights = WeightState::ones(n);
    let mut scales = ScaleState::ones(n);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    let objective = |factor: &GramFactor, w: &WeightState, t: &ScaleState, eff: &[f64], mean: &[Complex64]| {
        evidence_terms(dict, factor, eff, sigma2, z, mean)
            .map(|(ld, qf)| -ld - qf + log_prior(w.as_slice(), t.as_slice(), hyper))
    };

    while iterations < policy.max_iter {
        let eff = effective_weights(&weights, &scales);
        let (factor, mean) = factor_and_mean(dict, &eff, sigma2, &b)?;
        if policy.track_objective {
            trace.push(objective(&factor, &weights, &scales, &eff, &mean)?);
        }
        let stats = PosteriorStats {
            mean,
            cov_diag: factor.inverse_diagonal(),
        };
        let (next_w, next_tau) = esbl_update_weights_scales(&stats, &weights, &scales, hyper);
        let abs = |v: &f64| v.abs();
        let change = relative_change(next_w.as_slice(), weights.as_slice(), abs)
            .max(relative_change(next_tau.as_slice(), scales.as_slice(), abs));
        weights = next_w;
        scales = next_tau;
        iterations += 1;
        if change < policy.tol {
            converged = true;
            break;
        }
    }

    let eff = effective_weights(&weights, &scales);
    let (factor, u_hat) = factor_and_mean(dict, &eff, sigma2, &b)?;
    if policy.track_objective {
        trace.push(objective(&factor, &weights, &scales, &eff, &u_hat)?);
    }

    Ok(EstimateReport {
        u_hat,
        iterations,
        objective_trace: trace,
        converged,
        wall_time: timer.seconds(),
        weights: weights.into_vec(),
        scales: Some(scales.into_vec()),
    })
}
