//! Iterative sparse Bayesian estimators.
//!
//! * [`run_sbl`]: baseline SBL, EM on the marginal likelihood of the weights.
//! * [`run_esbl`]: E-SBL, EM on the marginal posterior of weights and scales.
//! * [`run_mesbl`]: M-E-SBL, closed-form coordinate ascent on the joint
//!   posterior of coefficients, weights and scales. It never needs the
//!   diagonal of `S⁻¹`, so each iteration is a single solve.
//! * [`run_least_squares`]: regularized least squares, a sanity baseline.
//!
//! SBL and E-SBL ascend an objective in which `u` has been integrated out;
//! M-E-SBL ascends the joint density. The two objectives are different
//! functions, so each estimator's trace is only comparable with itself.

mod esbl;
mod ls;
mod mesbl;
mod sbl;

use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{DictionaryKron, GramFactor};

pub use esbl::{esbl_posterior_stats, esbl_update_weights_scales, eval_esbl_marginal_objective, run_esbl};
pub use ls::run_least_squares;
pub use mesbl::{
    eval_mesbl_joint_objective, mesbl_update_tau, mesbl_update_u, mesbl_update_w, run_mesbl,
};
pub use sbl::{
    eval_sbl_marginal_objective, run_sbl, sbl_posterior_stats, sbl_update_weights,
    sbl_update_weights_with_prior,
};

/// Lower bound applied to every weight and scale after each update.
pub const WEIGHT_FLOOR: f64 = 1e-12;

/// Inverse-gamma `IG(alpha, beta)` prior on the baseline SBL weights.
///
/// `alpha = beta = 0` means no prior term at all, which gives the classic
/// `w = |μ|² + Σ_jj` update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SblHyper {
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
}

impl Default for SblHyper {
    fn default() -> Self {
        Self { alpha: 0.0, beta: 0.0 }
    }
}

impl SblHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("hyper.alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("hyper.beta must be >= 0, got {}", self.beta)));
        }
        Ok(())
    }

    pub fn has_prior(&self) -> bool {
        self.alpha > 0.0 || self.beta > 0.0
    }
}

/// Hyperparameters of the E-SBL / M-E-SBL model:
/// `w_j ~ IG(nu/2, nu/2)`, `tau_j ~ IG(theta, phi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ESblHyper {
    #[serde(default = "ESblHyper::default_nu")]
    pub nu: f64,
    #[serde(default = "ESblHyper::default_theta_phi")]
    pub theta: f64,
    #[serde(default = "ESblHyper::default_theta_phi")]
    pub phi: f64,
}

impl ESblHyper {
    fn default_nu() -> f64 {
        1.0
    }

    fn default_theta_phi() -> f64 {
        1e-2
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::Config(format!("hyper.nu must be > 0, got {}", self.nu)));
        }
        if !(self.theta >= 0.0 && self.theta.is_finite()) {
            return Err(Error::Config(format!("hyper.theta must be >= 0, got {}", self.theta)));
        }
        if !(self.phi >= 0.0 && self.phi.is_finite()) {
            return Err(Error::Config(format!("hyper.phi must be >= 0, got {}", self.phi)));
        }
        Ok(())
    }
}

impl Default for ESblHyper {
    fn default() -> Self {
        Self {
            nu: Self::default_nu(),
            theta: Self::default_theta_phi(),
            phi: Self::default_theta_phi(),
        }
    }
}

fn floored(values: Vec<f64>) -> Vec<f64> {
    values.into_iter().map(|v| v.max(WEIGHT_FLOOR)).collect()
}

fn validate_positive_vec(what: &'static str, values: &[f64]) -> Result<()> {
    for &v in values {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::NonPositive { what, value: v });
        }
    }
    Ok(())
}

/// Per-coefficient weights `w`, each at least [`WEIGHT_FLOOR`].
#[derive(Debug, Clone, PartialEq)]
pub struct WeightState(Vec<f64>);

impl WeightState {
    /// Validates positivity and finiteness, then applies the floor.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        validate_positive_vec("weight", &values)?;
        Ok(Self(floored(values)))
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub(crate) fn from_update(values: Vec<f64>) -> Self {
        Self(floored(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Per-coefficient E-SBL scales `τ`, each at least [`WEIGHT_FLOOR`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleState(Vec<f64>);

impl ScaleState {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        validate_positive_vec("scale", &values)?;
        Ok(Self(floored(values)))
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub(crate) fn from_update(values: Vec<f64>) -> Self {
        Self(floored(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Elementwise `τ ⊙ w`, the diagonal of `W̃`.
pub fn effective_weights(weights: &WeightState, scales: &ScaleState) -> Vec<f64> {
    weights.0.iter().zip(&scales.0).map(|(w, t)| w * t).collect()
}

/// Posterior mean and the diagonal of the posterior covariance of `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorStats {
    pub mean: Vec<Complex64>,
    pub cov_diag: Vec<f64>,
}

impl PosteriorStats {
    /// `|μ_j|² + Σ_jj`, the posterior second moment of each coefficient.
    pub fn second_moments(&self) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.cov_diag)
            .map(|(m, s)| m.norm_sqr() + s)
            .collect()
    }
}

/// Stopping rule shared by the iterative estimators.
///
/// Iteration stops once the largest relative change `‖x⁺ − x‖∞ / ‖x⁺‖∞` over
/// all estimated parameter vectors falls below `tol`, or after `max_iter`
/// updates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergencePolicy {
    #[serde(default = "ConvergencePolicy::default_tol")]
    pub tol: f64,
    #[serde(default = "ConvergencePolicy::default_max_iter")]
    pub max_iter: usize,
    /// Evaluate the estimator's objective after every iteration. Costs an
    /// extra log-determinant per iteration for the marginal objectives.
    #[serde(default = "ConvergencePolicy::default_track")]
    pub track_objective: bool,
}

impl ConvergencePolicy {
    fn default_tol() -> f64 {
        1e-6
    }

    fn default_max_iter() -> usize {
        500
    }

    fn default_track() -> bool {
        false
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::Config(format!("policy.tol must be > 0, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("policy.max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

impl Default for ConvergencePolicy {
    fn default() -> Self {
        Self {
            tol: Self::default_tol(),
            max_iter: Self::default_max_iter(),
            track_objective: Self::default_track(),
        }
    }
}

/// Output of one estimator run.
#[derive(Debug, Clone)]
pub struct EstimateReport {
    pub u_hat: Vec<Complex64>,
    pub iterations: usize,
    /// Objective at the initial state followed by one value per iteration;
    /// empty when tracking is disabled.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    /// Seconds.
    pub wall_time: f64,
    pub weights: Vec<f64>,
    pub scales: Option<Vec<f64>>,
}

/// `‖new − old‖∞ / max(‖new‖∞, ‖old‖∞)`, zero when both vectors vanish.
pub(crate) fn relative_change<T, F>(new: &[T], old: &[T], abs: F) -> f64
where
    F: Fn(&T) -> f64,
    T: Copy + std::ops::Sub<Output = T>,
{
    let mut diff = 0.0f64;
    let mut scale = 0.0f64;
    for (&a, &b) in new.iter().zip(old) {
        diff = diff.max(abs(&(a - b)));
        scale = scale.max(abs(&a)).max(abs(&b));
    }
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

pub(crate) fn check_observation(dict: &DictionaryKron, z: &[Complex64]) -> Result<()> {
    if z.len() != dict.num_observations() {
        return Err(Error::shape("observation z", dict.num_observations(), z.len()));
    }
    if z.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::NonFinite("observation z"));
    }
    Ok(())
}

pub(crate) fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        Err(Error::shape(what, expected, actual))
    } else {
        Ok(())
    }
}

/// Factors `S` for the given effective weights and returns it with the
/// posterior mean `(1/σ²) S⁻¹ Aᴴz`.
pub(crate) fn factor_and_mean(
    dict: &DictionaryKron,
    effective: &[f64],
    sigma2: f64,
    adjoint_z: &[Complex64],
) -> Result<(GramFactor, Vec<Complex64>)> {
    let factor = crate::numerics::build_gram(dict, effective, sigma2)?.factor()?;
    let mean = factor
        .solve(adjoint_z)?
        .into_iter()
        .map(|v| v / sigma2)
        .collect();
    Ok((factor, mean))
}

pub(crate) struct Timer(Instant);

impl Timer {
    pub(crate) fn start() -> Self {
        Self(Instant::now())
    }

    pub(crate) fn seconds(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let h = ESblHyper::default();
        assert_eq!((h.nu, h.theta, h.phi), (1.0, 0.01, 0.01));
        let p = ConvergencePolicy::default();
        assert_eq!((p.tol, p.max_iter), (1e-6, 500));
        assert_eq!(SblHyper::default(), SblHyper { alpha: 0.0, beta: 0.0 });
    }

    #[test]
    fn states_floor_and_validate() {
        let w = WeightState::new(vec![1e-20, 2.0]).unwrap();
        assert_eq!(w.as_slice(), &[WEIGHT_FLOOR, 2.0]);
        assert!(WeightState::new(vec![0.0]).is_err());
        assert!(ScaleState::new(vec![f64::INFINITY]).is_err());
        assert!(ESblHyper { nu: 0.0, ..Default::default() }.validate().is_err());
        assert!(ConvergencePolicy { max_iter: 0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn relative_change_uses_sup_norm() {
        let r = relative_change(&[2.0, 1.0], &[1.0, 1.0], |v: &f64| v.abs());
        assert_eq!(r, 0.5);
        assert_eq!(relative_change(&[0.0], &[0.0], |v: &f64| v.abs()), 0.0);
    }
}
