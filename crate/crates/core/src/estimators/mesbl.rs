use num_complex::Complex64;

use super::esbl::log_prior;
use super::{
    check_len, check_observation, effective_weights, factor_and_mean, relative_change,
    ConvergencePolicy, ESblHyper, EstimateReport, ScaleState, Timer, WeightState,
};
use crate::error::Result;
use crate::numerics::{check_positive, DictionaryKron};

/// Maximizer of the joint posterior in `u` for fixed `(w, τ)`:
/// `u⁺ = (1/σ²) S⁻¹ Aᴴz`. One solve, no inverse diagonal.
pub fn mesbl_update_u(
    dict: &DictionaryKron,
    weights: &WeightState,
    scales: &ScaleState,
    sigma2: f64,
    z: &[Complex64],
) -> Result<Vec<Complex64>> {
    check_observation(dict, z)?;
    check_len("weights", dict.num_coefficients(), weights.len())?;
    check_len("scales", dict.num_coefficients(), scales.len())?;
    let b = dict.apply_adjoint(z)?;
    let (_, u) = factor_and_mean(dict, &effective_weights(weights, scales), sigma2, &b)?;
    Ok(u)
}

/// `w_j⁺ = (ν/2 + |u_j|²/τ_j) / (ν/2 + 2)`.
pub fn mesbl_update_w(u: &[Complex64], scales: &ScaleState, hyper: &ESblHyper) -> WeightState {
    let half_nu = hyper.nu / 2.0;
    WeightState::from_update(
        u.iter()
            .zip(scales.as_slice())
            .map(|(u, t)| (half_nu + u.norm_sqr() / t) / (half_nu + 2.0))
            .collect(),
    )
}

/// `τ_j⁺ = (φ + |u_j|²/w_j) / (θ + 2)`, with `w` the freshly updated weights.
pub fn mesbl_update_tau(u: &[Complex64], weights: &WeightState, hyper: &ESblHyper) -> ScaleState {
    ScaleState::from_update(
        u.iter()
            .zip(weights.as_slice())
            .map(|(u, w)| (hyper.phi + u.norm_sqr() / w) / (hyper.theta + 2.0))
            .collect(),
    )
}

/// Log joint posterior of `(u, w, τ)` up to a constant:
///
/// ```text
/// −‖z − Au‖²/σ² − Σ log(τ_j w_j) − uᴴW̃⁻¹u
///   − Σ [(ν+2)/2·log w_j + ν/(2w_j)] − Σ [(θ+1)·log τ_j + φ/τ_j]
/// ```
pub fn eval_mesbl_joint_objective(
    dict: &DictionaryKron,
    u: &[Complex64],
    weights: &WeightState,
    scales: &ScaleState,
    sigma2: f64,
    z: &[Complex64],
    hyper: &ESblHyper,
) -> Result<f64> {
    check_observation(dict, z)?;
    check_positive("noise variance", sigma2)?;
    check_len("u", dict.num_coefficients(), u.len())?;
    check_len("weights", u.len(), weights.len())?;
    check_len("scales", u.len(), scales.len())?;
    let fitted = dict.apply(u)?;
    let residual: f64 = z.iter().zip(&fitted).map(|(a, b)| (a - b).norm_sqr()).sum();
    let coupling: f64 = u
        .iter()
        .zip(weights.as_slice().iter().zip(scales.as_slice()))
        .map(|(u, (w, t))| {
            let v = w * t;
            v.ln() + u.norm_sqr() / v
        })
        .sum();
    Ok(-residual / sigma2 - coupling + log_prior(weights.as_slice(), scales.as_slice(), hyper))
}

pub fn run_mesbl(
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
    let mut u = vec![Complex64::new(0.0, 0.0); n];
    let mut weights = WeightState::ones(n);
    let mut scales = ScaleState::ones(n);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    if policy.track_objective {
        trace.push(eval_mesbl_joint_objective(dict, &u, &weights, &scales, sigma2, z, hyper)?);
    }

    while iterations < policy.max_iter {
        let (_, next_u) = factor_and_mean(dict, &effective_weights(&weights, &scales), sigma2, &b)?;
        let next_w = mesbl_update_w(&next_u, &scales, hyper);
        let next_tau = mesbl_update_tau(&next_u, &next_w, hyper);

        let abs = |v: &f64| v.abs();
        let change = relative_change(&next_u, &u, |v: &Complex64| v.norm())
            .max(relative_change(next_w.as_slice(), weights.as_slice(), abs))
            .max(relative_change(next_tau.as_slice(), scales.as_slice(), abs));
        u = next_u;
        weights = next_w;
        scales = next_tau;
        iterations += 1;

        if policy.track_objective {
            trace.push(eval_mesbl_joint_objective(dict, &u, &weights, &scales, sigma2, z, hyper)?);
        }
        if change < policy.tol {
            converged = true;
            break;
        }
    }

    Ok(EstimateReport {
        u_hat: u,
        iterations,
        objective_trace: trace,
        converged,
        wall_time: timer.seconds(),
        weights: weights.into_vec(),
        scales: Some(scales.into_vec()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{esbl_update_weights_scales, PosteriorStats};
    use crate::numerics::ComplexMatrix;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn identity2() -> DictionaryKron {
        DictionaryKron::new(ComplexMatrix::identity(1), ComplexMatrix::identity(2)).unwrap()
    }

    #[test]
    fn u_update_identity() {
        let d = identity2();
        let u = mesbl_update_u(&d, &WeightState::ones(2), &ScaleState::ones(2), 1.0, &[c(1.0), c(0.0)]).unwrap();
        assert_eq!(u, vec![c(0.5), c(0.0)]);
        let u0 = mesbl_update_u(&d, &WeightState::ones(2), &ScaleState::ones(2), 1.0, &[c(0.0); 2]).unwrap();
        assert_eq!(u0, vec![c(0.0); 2]);
    }

    #[test]
    fn w_and_tau_substitution() {
        let h = ESblHyper::default();
        let w = mesbl_update_w(&[c(0.0), c(1.0)], &ScaleState::ones(2), &h);
        assert!((w.as_slice()[0] - 0.2).abs() < 1e-15);
        assert!((w.as_slice()[1] - 0.6).abs() < 1e-15);

        let t = mesbl_update_tau(&[c(0.0), c(1.0)], &WeightState::new(vec![1.0, 0.5]).unwrap(), &h);
        assert!((t.as_slice()[0] - 0.01 / 2.01).abs() < 1e-15);
        assert!((t.as_slice()[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn w_update_differs_from_esbl_by_covariance_term() {
        let h = ESblHyper::default();
        let u = vec![Complex64::new(0.3, -0.4), c(1.5)];
        let cov = vec![0.2, 0.05];
        let tau = ScaleState::new(vec![0.7, 2.0]).unwrap();
        let m = mesbl_update_w(&u, &tau, &h);
        let stats = PosteriorStats { mean: u.clone(), cov_diag: cov.clone() };
        let (e, _) = esbl_update_weights_scales(&stats, &WeightState::ones(2), &tau, &h);
        for j in 0..2 {
            let expected = cov[j] / tau.as_slice()[j] / (h.nu / 2.0 + 2.0);
            assert!((e.as_slice()[j] - m.as_slice()[j] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn objective_at_unit_state() {
        let h = ESblHyper::default();
        let d = identity2();
        let f = eval_mesbl_joint_objective(&d, &[c(0.0); 2], &WeightState::ones(2), &ScaleState::ones(2), 1.0, &[c(0.0); 2], &h)
            .unwrap();
        assert!((f + 2.0 * 0.51).abs() < 1e-15);
    }

    #[test]
    fn prior_quadratic_scales_by_four() {
        let h = ESblHyper::default();
        let d = identity2();
        let u = vec![Complex64::new(0.5, 0.5), c(-1.0)];
        let u2: Vec<_> = u.iter().map(|v| v * 2.0).collect();
        let z = [c(0.0); 2];
        let ones_w = WeightState::ones(2);
        let ones_t = ScaleState::ones(2);
        let f1 = eval_mesbl_joint_objective(&d, &u, &ones_w, &ones_t, 1.0, &z, &h).unwrap();
        let f2 = eval_mesbl_joint_objective(&d, &u2, &ones_w, &ones_t, 1.0, &z, &h).unwrap();
        let norm: f64 = u.iter().map(|v| v.norm_sqr()).sum();
        // Residual ‖Au‖² and prior uᴴu both grow by 3‖u‖² for A = I, σ² = 1.
        assert!((f1 - f2 - 2.0 * 3.0 * norm).abs() < 1e-12);
    }
}
