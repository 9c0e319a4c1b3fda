//! Dense reference implementations (nalgebra) and random instance builders
//! shared by the integration suites.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use sbl_core::channel::{dft_pilot, dft_transform};
use sbl_core::numerics::{ComplexMatrix, DictionaryKron};

pub type Mat = DMatrix<Complex64>;
pub type Vector = DVector<Complex64>;

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cn<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn random_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| cn(rng))
}

pub fn random_vec<R: Rng>(n: usize, rng: &mut R) -> Vec<Complex64> {
    (0..n).map(|_| cn(rng)).collect()
}

pub fn random_weights<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| 10f64.powf(rng.random_range(-2.0..1.0))).collect()
}

/// Pilot/transform families, so that every Gram structure class shows up.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    BothDft,
    DftPilot,
    DftTransform,
    BothRandom,
}

pub const FAMILIES: [Family; 4] = [Family::BothDft, Family::DftPilot, Family::DftTransform, Family::BothRandom];

/// Random dictionary with `MN ≤ 64` and `QK ≤ 32`.
pub fn random_dictionary<R: Rng>(rng: &mut R, family: Family) -> DictionaryKron {
    let k = rng.random_range(1..=4);
    let n = rng.random_range(k..=(k + 3).min(8));
    let max_m = (64 / n).min(16);
    let m = rng.random_range(1..=max_m);
    let q = match family {
        Family::BothDft | Family::DftTransform => m,
        _ => rng.random_range(1..=(32 / k).min(12)),
    };
    let (m, q) = if q * k > 32 { (32 / k, 32 / k) } else { (m, q) };
    let pilot = match family {
        Family::BothDft | Family::DftPilot => dft_pilot(k, n).unwrap(),
        _ => random_matrix(k, n, rng),
    };
    let transform = match family {
        Family::BothDft | Family::DftTransform => dft_transform(m),
        _ => random_matrix(m, q, rng),
    };
    DictionaryKron::new(pilot, transform).unwrap()
}

pub fn to_na(m: &ComplexMatrix) -> Mat {
    Mat::from_column_slice(m.rows(), m.cols(), m.as_slice())
}

pub fn to_vec(v: &[Complex64]) -> Vector {
    Vector::from_column_slice(v)
}

/// `A = Pᵀ ⊗ F`, assembled with nalgebra.
pub fn dense_dictionary(dict: &DictionaryKron) -> Mat {
    to_na(dict.pilot()).transpose().kronecker(&to_na(dict.transform()))
}

/// `S = (1/σ²)AᴴA + Diag(w)⁻¹`.
pub fn dense_gram(dict: &DictionaryKron, w: &[f64], sigma2: f64) -> Mat {
    let a = dense_dictionary(dict);
    let mut s = a.adjoint() * &a / c(sigma2);
    for (j, wj) in w.iter().enumerate() {
        s[(j, j)] += c(1.0 / wj);
    }
    s
}

/// `V = σ²I + A Diag(w) Aᴴ`.
pub fn dense_marginal_cov(dict: &DictionaryKron, w: &[f64], sigma2: f64) -> Mat {
    let a = dense_dictionary(dict);
    let wd = Mat::from_diagonal(&DVector::from_iterator(w.len(), w.iter().map(|&v| c(v))));
    let mn = a.nrows();
    &a * wd * a.adjoint() + Mat::identity(mn, mn) * c(sigma2)
}

/// Posterior mean and covariance diagonal through the observation-space
/// form `Σ = W − W Aᴴ V⁻¹ A W`, `μ = W Aᴴ V⁻¹ z`.
pub fn dense_posterior(dict: &DictionaryKron, w: &[f64], sigma2: f64, z: &[Complex64]) -> (Vec<Complex64>, Vec<f64>) {
    let a = dense_dictionary(dict);
    let v = dense_marginal_cov(dict, w, sigma2);
    let v_inv = v.cholesky().expect("V is positive definite").inverse();
    let wd = Mat::from_diagonal(&DVector::from_iterator(w.len(), w.iter().map(|&v| c(v))));
    let wa = &wd * a.adjoint();
    let mean = &wa * &v_inv * to_vec(z);
    let cov = &wd - &wa * &v_inv * wa.adjoint();
    (mean.iter().copied().collect(), cov.diagonal().iter().map(|v| v.re).collect())
}

/// `(log det V, zᴴV⁻¹z)` from a dense Cholesky of `V`.
pub fn dense_logdet_quadform(dict: &DictionaryKron, w: &[f64], sigma2: f64, z: &[Complex64]) -> (f64, f64) {
    let v = dense_marginal_cov(dict, w, sigma2);
    let chol = v.cholesky().expect("V is positive definite");
    let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.re.ln()).sum::<f64>();
    let zv = to_vec(z);
    let quad = (zv.adjoint() * chol.solve(&zv))[(0, 0)].re;
    (log_det, quad)
}

pub fn rel_err_vec(a: &[Complex64], b: &[Complex64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y.norm_sqr()).sum::<f64>().sqrt();
    diff / scale.max(1e-300)
}

pub fn rel_err_real(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / scale.max(1e-300)
}

pub fn rel_err_scalar(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}
