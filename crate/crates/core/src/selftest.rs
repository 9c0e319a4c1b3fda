//! Invariant suite shipped in the binary (`sbl selftest`).
//!
//! Checks the structured numerics against a plain dense LU reference, and
//! the estimators against their own objectives, on small random instances.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::channel::{dft_pilot, dft_transform, stream_rng};
use crate::error::Result;
use crate::estimators::{
    run_esbl, run_mesbl, run_sbl, ConvergencePolicy, ESblHyper, SblHyper,
};
use crate::numerics::{build_gram, gauss_logdet_quadform, ComplexMatrix, DictionaryKron};

const SEED: u64 = 0x5eed;
const INSTANCES: usize = 25;
const ORACLE_TOL: f64 = 1e-10;
const LOGDET_TOL: f64 = 1e-8;
const ASCENT_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SelfTestReport {
    pub checks: Vec<CheckResult>,
}

impl SelfTestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

type Check = (&'static str, fn() -> Result<String>);

pub fn run_selftest() -> SelfTestReport {
    let checks: [Check; 5] = [
        ("kronecker identity", check_kronecker),
        ("gram oracle", check_gram_oracle),
        ("evidence oracle", check_evidence_oracle),
        ("objective ascent", check_ascent),
        ("noiseless recovery", check_recovery),
    ];
    let checks = checks
        .into_iter()
        .map(|(name, f)| match f() {
            Ok(detail) => CheckResult { name, passed: true, detail },
            Err(e) => CheckResult { name, passed: false, detail: e.to_string() },
        })
        .collect();
    SelfTestReport { checks }
}

fn fail(msg: String) -> crate::Error {
    crate::Error::Config(msg)
}

fn cn(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| cn(rng))
}

fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    (0..n).map(|_| cn(rng)).collect()
}

/// Small dictionary; every fourth instance uses DFT factors so the diagonal
/// and block paths get exercised alongside the dense one.
fn random_instance(rng: &mut ChaCha8Rng, i: usize) -> Result<DictionaryKron> {
    let k = rng.random_range(1..=3);
    let n = rng.random_range(k..=4);
    let m = rng.random_range(2..=8);
    let q = rng.random_range(1..=(32 / k).min(8));
    let pilot = if i % 2 == 0 { dft_pilot(k, n)? } else { random_matrix(k, n, rng) };
    let transform = if i % 4 == 0 { dft_transform(m) } else { random_matrix(m, q, rng) };
    DictionaryKron::new(pilot, transform)
}

fn random_weights(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| 10f64.powf(rng.random_range(-2.0..1.0))).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn vec_rel(a: &[Complex64], b: &[Complex64]) -> f64 {
    crate::numerics::relative_error(a, b)
}

/// Dense LU with partial pivoting: `(solution of A X = B, log|det A|)`.
fn lu_solve(a: &ComplexMatrix, b: &ComplexMatrix) -> (ComplexMatrix, f64) {
    let n = a.rows();
    let mut lu: Vec<Vec<Complex64>> = (0..n).map(|r| (0..n).map(|c| a[(r, c)]).collect()).collect();
    let mut rhs: Vec<Vec<Complex64>> = (0..n).map(|r| (0..b.cols()).map(|c| b[(r, c)]).collect()).collect();
    let mut log_det = 0.0;
    for col in 0..n {
        let p = (col..n)
            .max_by(|&x, &y| lu[x][col].norm().total_cmp(&lu[y][col].norm()))
            .unwrap_or(col);
        lu.swap(col, p);
        rhs.swap(col, p);
        let pivot = lu[col][col];
        log_det += pivot.norm().ln();
        for r in col + 1..n {
            let f = lu[r][col] / pivot;
            for c in col..n {
                let v = lu[col][c];
                lu[r][c] -= f * v;
            }
            for c in 0..b.cols() {
                let v = rhs[col][c];
                rhs[r][c] -= f * v;
            }
        }
    }
    for c in 0..b.cols() {
        for r in (0..n).rev() {
            let mut acc = rhs[r][c];
            for j in r + 1..n {
                acc -= lu[r][j] * rhs[j][c];
            }
            rhs[r][c] = acc / lu[r][r];
        }
    }
    (ComplexMatrix::from_fn(n, b.cols(), |r, c| rhs[r][c]), log_det)
}

fn dense_gram(dict: &DictionaryKron, w: &[f64], sigma2: f64) -> Result<ComplexMatrix> {
    let a = dict.to_dense();
    let mut s = a.conj_transpose().matmul(&a)?.scale(1.0 / sigma2);
    let inv: Vec<f64> = w.iter().map(|v| 1.0 / v).collect();
    s = ComplexMatrix::from_fn(s.rows(), s.cols(), |r, c| {
        s[(r, c)] + if r == c { Complex64::new(inv[r], 0.0) } else { Complex64::new(0.0, 0.0) }
    });
    Ok(s)
}

fn check_kronecker() -> Result<String> {
    let mut rng = stream_rng(SEED, 0);
    let mut worst: f64 = 0.0;
    for i in 0..INSTANCES {
        let dict = random_instance(&mut rng, i)?;
        let a = dict.to_dense();
        let x = random_vec(dict.num_coefficients(), &mut rng);
        let y = random_vec(dict.num_observations(), &mut rng);
        worst = worst
            .max(vec_rel(&dict.apply(&x)?, &a.matvec(&x)?))
            .max(vec_rel(&dict.apply_adjoint(&y)?, &a.conj_transpose().matvec(&y)?));
    }
    if worst > ORACLE_TOL {
        return Err(fail(format!("structured product deviates by {worst:e}")));
    }
    Ok(format!("max relative error {worst:.1e}"))
}

fn check_gram_oracle() -> Result<String> {
    let mut rng = stream_rng(SEED, 1);
    let mut worst: f64 = 0.0;
    let mut worst_logdet: f64 = 0.0;
    for i in 0..INSTANCES {
        let dict = random_instance(&mut rng, i)?;
        let n = dict.num_coefficients();
        let w = random_weights(n, &mut rng);
        let sigma2 = 10f64.powf(rng.random_range(-1.0..1.0));
        let dense = dense_gram(&dict, &w, sigma2)?;

        let gram = build_gram(&dict, &w, sigma2)?;
        worst = worst.max(gram.to_dense().relative_frobenius_error(&dense));
        let factor = gram.factor()?;

        let rhs = random_vec(n, &mut rng);
        let (x, log_det) = lu_solve(&dense, &ComplexMatrix::from_col_major(n, 1, rhs.clone())?);
        worst = worst.max(vec_rel(&factor.solve(&rhs)?, x.as_slice()));

        let (inv, _) = lu_solve(&dense, &ComplexMatrix::identity(n));
        let diag: Vec<Complex64> = inv.diagonal();
        let ours: Vec<Complex64> = factor.inverse_diagonal().into_iter().map(|v| Complex64::new(v, 0.0)).collect();
        worst = worst.max(vec_rel(&ours, &diag));
        worst_logdet = worst_logdet.max(rel(factor.log_det(), log_det));
    }
    if worst > ORACLE_TOL || worst_logdet > LOGDET_TOL {
        return Err(fail(format!("gram paths deviate: {worst:e} (logdet {worst_logdet:e})")));
    }
    Ok(format!("max relative error {worst:.1e}, logdet {worst_logdet:.1e}"))
}

fn check_evidence_oracle() -> Result<String> {
    let mut rng = stream_rng(SEED, 2);
    let mut worst: f64 = 0.0;
    for i in 0..INSTANCES {
        let dict = random_instance(&mut rng, i)?;
        let w = random_weights(dict.num_coefficients(), &mut rng);
        let sigma2 = 10f64.powf(rng.random_range(-1.0..1.0));
        let z = random_vec(dict.num_observations(), &mut rng);

        // V = σ²I + A W Aᴴ
        let a = dict.to_dense();
        let aw = ComplexMatrix::from_fn(a.rows(), a.cols(), |r, c| a[(r, c)] * w[c]);
        let mut v = aw.matmul(&a.conj_transpose())?;
        v = ComplexMatrix::from_fn(v.rows(), v.cols(), |r, c| {
            v[(r, c)] + if r == c { Complex64::new(sigma2, 0.0) } else { Complex64::new(0.0, 0.0) }
        });
        let (vz, log_det) = lu_solve(&v, &ComplexMatrix::from_col_major(z.len(), 1, z.clone())?);
        let quad: f64 = z.iter().zip(vz.as_slice()).map(|(a, b)| (a.conj() * b).re).sum();

        let (ld, qf) = gauss_logdet_quadform(&dict, &w, sigma2, &z)?;
        worst = worst.max(rel(ld, log_det)).max(rel(qf, quad));
    }
    if worst > LOGDET_TOL {
        return Err(fail(format!("logdet/quadform deviate by {worst:e}")));
    }
    Ok(format!("max relative error {worst:.1e}"))
}

fn check_ascent() -> Result<String> {
    let mut rng = stream_rng(SEED, 3);
    let policy = ConvergencePolicy { tol: 1e-8, max_iter: 60, track_objective: true };
    let hyper = ESblHyper::default();
    let mut steps = 0;
    for i in 0..INSTANCES {
        let dict = random_instance(&mut rng, i)?;
        let sigma2 = 10f64.powf(rng.random_range(-1.5..0.5));
        let z = random_vec(dict.num_observations(), &mut rng);
        let traces = [
            ("sbl", run_sbl(&dict, &z, sigma2, &SblHyper::default(), &policy)?.objective_trace),
            ("esbl", run_esbl(&dict, &z, sigma2, &hyper, &policy)?.objective_trace),
            ("mesbl", run_mesbl(&dict, &z, sigma2, &hyper, &policy)?.objective_trace),
        ];
        for (name, trace) in traces {
            for (step, pair) in trace.windows(2).enumerate() {
                if pair[1] < pair[0] - ASCENT_SLACK {
                    return Err(fail(format!(
                        "{name} objective decreased at step {step} on instance {i}: {} -> {}",
                        pair[0], pair[1]
                    )));
                }
                steps += 1;
            }
        }
    }
    Ok(format!("{steps} steps nondecreasing"))
}

fn check_recovery() -> Result<String> {
    let dict = DictionaryKron::new(dft_pilot(2, 8)?, dft_transform(32))?;
    let n = dict.num_coefficients();
    let mut u = vec![Complex64::new(0.0, 0.0); n];
    u[3] = Complex64::new(1.0, -0.5);
    u[40] = Complex64::new(-0.7, 0.2);
    let z = dict.apply(&u)?;
    let sigma2 = 1e-6;
    let policy = ConvergencePolicy::default();
    let reports = [
        ("sbl", run_sbl(&dict, &z, sigma2, &SblHyper::default(), &policy)?),
        ("esbl", run_esbl(&dict, &z, sigma2, &ESblHyper::default(), &policy)?),
        ("mesbl", run_mesbl(&dict, &z, sigma2, &ESblHyper::default(), &policy)?),
    ];
    let energy: f64 = u.iter().map(|v| v.norm_sqr()).sum();
    let mut worst: f64 = 0.0;
    for (name, r) in &reports {
        let err: f64 = r.u_hat.iter().zip(&u).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() / energy;
        if err >= 1e-4 {
            return Err(fail(format!("{name} NMSE {err:e} on a 2-sparse noiseless problem")));
        }
        worst = worst.max(err);
    }
    Ok(format!("worst NMSE {worst:.1e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_matches_identity() {
        let a = ComplexMatrix::from_fn(3, 3, |r, c| Complex64::new(if r == c { 2.0 } else { 0.5 }, (r as f64) - (c as f64)));
        let (inv, _) = lu_solve(&a, &ComplexMatrix::identity(3));
        let prod = a.matmul(&inv).unwrap();
        assert!(prod.relative_frobenius_error(&ComplexMatrix::identity(3)) < 1e-14);
    }

    #[test]
    fn suite_passes() {
        let report = run_selftest();
        for c in &report.checks {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
