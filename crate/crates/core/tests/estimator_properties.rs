mod common;

use common::*;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use sbl_core::channel::{dft_pilot, dft_transform};
use sbl_core::estimators::*;
use sbl_core::numerics::{ComplexMatrix, DictionaryKron};
use sbl_core::Error;

const SLACK: f64 = 1e-9;

fn tracked(max_iter: usize) -> ConvergencePolicy {
    ConvergencePolicy { tol: 1e-9, max_iter, track_objective: true }
}

/// Dictionary plus an observation drawn from a sparse coefficient vector.
fn sparse_problem(r: &mut ChaCha8Rng, fam: Family) -> (DictionaryKron, Vec<Complex64>, f64) {
    let dict = random_dictionary(r, fam);
    let n = dict.num_coefficients();
    let mut u = vec![c(0.0); n];
    for _ in 0..(n / 4).max(1) {
        let j = r.random_range(0..n);
        u[j] = cn(r) * 2.0;
    }
    let sigma2 = 10f64.powf(r.random_range(-2.0..0.0));
    let mut z = dict.apply(&u).unwrap();
    for v in &mut z {
        *v += cn(r) * sigma2.sqrt();
    }
    (dict, z, sigma2)
}

fn assert_nondecreasing(name: &str, trace: &[f64]) {
    assert!(trace.len() >= 2, "{name}: trace too short");
    for (i, w) in trace.windows(2).enumerate() {
        assert!(w[1] >= w[0] - SLACK, "{name}: objective fell at step {i}: {} -> {}", w[0], w[1]);
    }
}

#[test]
fn sbl_marginal_objective_is_nondecreasing() {
    let mut r = rng(11);
    for i in 0..100 {
        let (dict, z, s2) = sparse_problem(&mut r, FAMILIES[i % 4]);
        let rep = run_sbl(&dict, &z, s2, &SblHyper::default(), &tracked(80)).unwrap();
        assert_eq!(rep.objective_trace.len(), rep.iterations + 1);
        assert_nondecreasing("sbl", &rep.objective_trace);
    }
}

#[test]
fn sbl_with_prior_is_nondecreasing() {
    let mut r = rng(12);
    let hyper = SblHyper { alpha: 0.5, beta: 0.05 };
    for i in 0..40 {
        let (dict, z, s2) = sparse_problem(&mut r, FAMILIES[i % 4]);
        let rep = run_sbl(&dict, &z, s2, &hyper, &tracked(80)).unwrap();
        assert_nondecreasing("sbl+prior", &rep.objective_trace);
    }
}

#[test]
fn esbl_marginal_objective_is_nondecreasing() {
    let mut r = rng(13);
    for i in 0..100 {
        let (dict, z, s2) = sparse_problem(&mut r, FAMILIES[i % 4]);
        let rep = run_esbl(&dict, &z, s2, &ESblHyper::default(), &tracked(80)).unwrap();
        assert_nondecreasing("esbl", &rep.objective_trace);
    }
}

#[test]
fn mesbl_joint_objective_is_nondecreasing() {
    let mut r = rng(14);
    for i in 0..100 {
        let (dict, z, s2) = sparse_problem(&mut r, FAMILIES[i % 4]);
        let rep = run_mesbl(&dict, &z, s2, &ESblHyper::default(), &tracked(80)).unwrap();
        assert_eq!(rep.objective_trace.len(), rep.iterations + 1);
        assert_nondecreasing("mesbl", &rep.objective_trace);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Each of the three coordinate updates is individually an ascent step.
    #[test]
    fn mesbl_each_update_ascends(seed in any::<u64>(), nu in 0.2f64..10.0, theta in 0.0f64..1.0, phi in 0.001f64..1.0) {
        let mut r = rng(seed);
        let (dict, z, s2) = sparse_problem(&mut r, FAMILIES[(seed % 4) as usize]);
        let hyper = ESblHyper { nu, theta, phi };
        let n = dict.num_coefficients();
        let mut u = random_vec(n, &mut r);
        let mut w = WeightState::new(random_weights(n, &mut r)).unwrap();
        let mut t = ScaleState::new(random_weights(n, &mut r)).unwrap();
        let obj = |u: &[Complex64], w: &WeightState, t: &ScaleState| {
            eval_mesbl_joint_objective(&dict, u, w, t, s2, &z, &hyper).unwrap()
        };
        for _ in 0..3 {
            let f0 = obj(&u, &w, &t);
            u = mesbl_update_u(&dict, &w, &t, s2, &z).unwrap();
            let f1 = obj(&u, &w, &t);
            w = mesbl_update_w(&u, &t, &hyper);
            let f2 = obj(&u, &w, &t);
            t = mesbl_update_tau(&u, &w, &hyper);
            let f3 = obj(&u, &w, &t);
            let slack = SLACK * f0.abs().max(1.0);
            prop_assert!(f1 >= f0 - slack, "u step {} -> {}", f0, f1);
            prop_assert!(f2 >= f1 - slack, "w step {} -> {}", f1, f2);
            prop_assert!(f3 >= f2 - slack, "tau step {} -> {}", f2, f3);
        }
    }

    /// The closed-form `w` and `τ` updates are coordinate maximizers:
    /// scaling any single entry away from the update lowers the objective.
    #[test]
    fn mesbl_updates_are_coordinate_maxima(seed in any::<u64>(), scale in prop::sample::select(vec![0.9, 0.99, 1.01, 1.1])) {
        let mut r = rng(seed);
        let (dict, z, s2) = sparse_problem(&mut r, Family::BothDft);
        let hyper = ESblHyper::default();
        let n = dict.num_coefficients();
        let u = random_vec(n, &mut r);
        let t = ScaleState::new(random_weights(n, &mut r)).unwrap();
        let w = mesbl_update_w(&u, &t, &hyper);
        let base = eval_mesbl_joint_objective(&dict, &u, &w, &t, s2, &z, &hyper).unwrap();
        let j = r.random_range(0..n);
        let mut moved = w.as_slice().to_vec();
        moved[j] *= scale;
        let moved = WeightState::new(moved).unwrap();
        prop_assert!(eval_mesbl_joint_objective(&dict, &u, &moved, &t, s2, &z, &hyper).unwrap() <= base);

        let t2 = mesbl_update_tau(&u, &w, &hyper);
        let base = eval_mesbl_joint_objective(&dict, &u, &w, &t2, s2, &z, &hyper).unwrap();
        let mut moved = t2.as_slice().to_vec();
        moved[j] *= scale;
        let moved = ScaleState::new(moved).unwrap();
        prop_assert!(eval_mesbl_joint_objective(&dict, &u, &w, &moved, s2, &z, &hyper).unwrap() <= base);
    }

    /// `u⁺` is the exact maximizer in `u`: the joint objective's gradient
    /// in `u` vanishes there, so random perturbations never improve it.
    #[test]
    fn mesbl_u_update_is_the_maximizer(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (dict, z, s2) = sparse_problem(&mut r, FAMILIES[(seed % 4) as usize]);
        let hyper = ESblHyper::default();
        let n = dict.num_coefficients();
        let w = WeightState::new(random_weights(n, &mut r)).unwrap();
        let t = ScaleState::new(random_weights(n, &mut r)).unwrap();
        let u = mesbl_update_u(&dict, &w, &t, s2, &z).unwrap();
        let base = eval_mesbl_joint_objective(&dict, &u, &w, &t, s2, &z, &hyper).unwrap();
        let d = random_vec(n, &mut r);
        let moved: Vec<Complex64> = u.iter().zip(&d).map(|(a, b)| a + b * 1e-3).collect();
        prop_assert!(eval_mesbl_joint_objective(&dict, &moved, &w, &t, s2, &z, &hyper).unwrap() <= base + 1e-12 * base.abs());
    }

    /// Relabelling transform columns and users permutes the estimate the same way.
    #[test]
    fn estimates_are_permutation_equivariant(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (dict, z, s2) = sparse_problem(&mut r, FAMILIES[(seed % 4) as usize]);
        let (k, q) = (dict.num_users(), dict.transform_size());
        let mut col_perm: Vec<usize> = (0..q).collect();
        let mut user_perm: Vec<usize> = (0..k).collect();
        for i in (1..q).rev() { col_perm.swap(i, r.random_range(0..=i)); }
        for i in (1..k).rev() { user_perm.swap(i, r.random_range(0..=i)); }
        let f = dict.transform();
        let p = dict.pilot();
        let f2 = ComplexMatrix::from_fn(f.rows(), q, |m, j| f[(m, col_perm[j])]);
        let p2 = ComplexMatrix::from_fn(k, p.cols(), |i, n| p[(user_perm[i], n)]);
        let dict2 = DictionaryKron::new(p2, f2).unwrap();
        let policy = ConvergencePolicy { tol: 1e-10, max_iter: 40, track_objective: false };
        let h = ESblHyper::default();
        let pairs = [
            (run_sbl(&dict, &z, s2, &SblHyper::default(), &policy).unwrap(), run_sbl(&dict2, &z, s2, &SblHyper::default(), &policy).unwrap()),
            (run_esbl(&dict, &z, s2, &h, &policy).unwrap(), run_esbl(&dict2, &z, s2, &h, &policy).unwrap()),
            (run_mesbl(&dict, &z, s2, &h, &policy).unwrap(), run_mesbl(&dict2, &z, s2, &h, &policy).unwrap()),
        ];
        for (a, b) in pairs {
            let permuted: Vec<Complex64> = (0..q * k)
                .map(|j| a.u_hat[col_perm[j % q] + q * user_perm[j / q]])
                .collect();
            prop_assert!(rel_err_vec(&b.u_hat, &permuted) < 1e-8);
            prop_assert_eq!(a.iterations, b.iterations);
        }
    }
}

/// With `ν → ∞` the weights pin to one and E-SBL becomes SBL with an
/// `IG(θ, φ)` prior on the remaining scale.
#[test]
fn esbl_approaches_sbl_with_matching_prior_as_nu_grows() {
    let policy = ConvergencePolicy { tol: 1e-12, max_iter: 2000, track_objective: false };
    for seed in 0..5 {
        let mut r = rng(100 + seed);
        let (dict, z, s2) = sparse_problem(&mut r, FAMILIES[seed as usize % 4]);
        let esbl = ESblHyper { nu: 1.0, theta: 0.3, phi: 0.05 };
        let sbl = run_sbl(&dict, &z, s2, &SblHyper { alpha: esbl.theta, beta: esbl.phi }, &policy).unwrap();
        let dist = |nu: f64| {
            let e = run_esbl(&dict, &z, s2, &ESblHyper { nu, ..esbl }, &policy).unwrap();
            rel_err_vec(&e.u_hat, &sbl.u_hat)
        };
        let d: Vec<f64> = [1.0, 10.0, 100.0].into_iter().map(dist).collect();
        assert!(d[0] > d[1] && d[1] > d[2], "seed {seed}: distances {d:?}");
        assert!(dist(1e6) < 1e-3, "seed {seed}");
    }
}

#[test]
fn unit_scales_make_esbl_posterior_the_sbl_posterior() {
    let mut r = rng(21);
    for i in 0..10 {
        let (dict, z, s2) = sparse_problem(&mut r, FAMILIES[i % 4]);
        let w = WeightState::new(random_weights(dict.num_coefficients(), &mut r)).unwrap();
        let a = esbl_posterior_stats(&dict, &w, &ScaleState::ones(w.len()), s2, &z).unwrap();
        let b = sbl_posterior_stats(&dict, &w, s2, &z).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn noiseless_sparse_recovery() {
    let dict = DictionaryKron::new(dft_pilot(2, 8).unwrap(), dft_transform(32)).unwrap();
    let n = dict.num_coefficients();
    let mut r = rng(31);
    for s in 1..=3 {
        for _ in 0..5 {
            let mut u = vec![c(0.0); n];
            let mut placed = 0;
            while placed < s {
                let j = r.random_range(0..n);
                if u[j] == c(0.0) {
                    u[j] = cn(&mut r) + cn(&mut r).unscale(4.0);
                    placed += 1;
                }
            }
            let z = dict.apply(&u).unwrap();
            let policy = ConvergencePolicy::default();
            let h = ESblHyper::default();
            for (name, rep) in [
                ("sbl", run_sbl(&dict, &z, 1e-6, &SblHyper::default(), &policy).unwrap()),
                ("esbl", run_esbl(&dict, &z, 1e-6, &h, &policy).unwrap()),
                ("mesbl", run_mesbl(&dict, &z, 1e-6, &h, &policy).unwrap()),
            ] {
                let err = rel_err_vec(&rep.u_hat, &u).powi(2);
                assert!(err < 1e-4, "{name} s={s}: NMSE {err:e}");
            }
        }
    }
}

#[test]
fn zero_observation_shrinks_weights() {
    let dict = DictionaryKron::new(dft_pilot(2, 4).unwrap(), dft_transform(8)).unwrap();
    let z = vec![c(0.0); dict.num_observations()];
    let rep = run_sbl(&dict, &z, 0.1, &SblHyper::default(), &ConvergencePolicy { tol: 1e-12, max_iter: 200, track_objective: false }).unwrap();
    assert!(rep.u_hat.iter().all(|v| v.norm() == 0.0));
    assert!(rep.weights.iter().all(|&w| w < 1e-2), "{:?}", rep.weights);
}

#[test]
fn least_squares_is_unit_weight_posterior_mean() {
    let mut r = rng(41);
    for i in 0..8 {
        let (dict, z, s2) = sparse_problem(&mut r, FAMILIES[i % 4]);
        let ls = run_least_squares(&dict, &z, s2).unwrap();
        let (mean, _) = dense_posterior(&dict, &vec![1.0; dict.num_coefficients()], s2, &z);
        assert!(rel_err_vec(&ls.u_hat, &mean) < 1e-9);
        assert_eq!(ls.iterations, 1);
    }
}

#[test]
fn iteration_cap_reports_nonconvergence() {
    let mut r = rng(51);
    let (dict, z, s2) = sparse_problem(&mut r, Family::BothDft);
    let policy = ConvergencePolicy { tol: 1e-15, max_iter: 2, track_objective: false };
    let h = ESblHyper::default();
    for rep in [
        run_sbl(&dict, &z, s2, &SblHyper::default(), &policy).unwrap(),
        run_esbl(&dict, &z, s2, &h, &policy).unwrap(),
        run_mesbl(&dict, &z, s2, &h, &policy).unwrap(),
    ] {
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 2);
    }
}

#[test]
fn weights_and_scales_stay_positive() {
    let mut r = rng(61);
    for i in 0..20 {
        let (dict, z, s2) = sparse_problem(&mut r, FAMILIES[i % 4]);
        let h = ESblHyper { nu: 0.5, theta: 0.0, phi: 0.0 };
        let rep = run_mesbl(&dict, &z, s2, &h, &ConvergencePolicy::default()).unwrap();
        assert!(rep.weights.iter().all(|&w| w >= WEIGHT_FLOOR));
        assert!(rep.scales.unwrap().iter().all(|&t| t >= WEIGHT_FLOOR));
    }
}

#[test]
fn bad_inputs_are_rejected() {
    let dict = DictionaryKron::new(dft_pilot(2, 4).unwrap(), dft_transform(8)).unwrap();
    let z = vec![c(1.0); dict.num_observations()];
    let p = ConvergencePolicy::default();
    let h = ESblHyper::default();
    assert!(matches!(run_sbl(&dict, &z[1..], 1.0, &SblHyper::default(), &p), Err(Error::Shape { .. })));
    assert!(matches!(run_esbl(&dict, &z, 0.0, &h, &p), Err(Error::NonPositive { .. })));
    assert!(run_mesbl(&dict, &z, 1.0, &ESblHyper { nu: 0.0, ..h }, &p).is_err());
    assert!(run_sbl(&dict, &z, 1.0, &SblHyper::default(), &ConvergencePolicy { tol: 0.0, ..p }).is_err());
    assert!(WeightState::new(vec![1.0, -1.0]).is_err());
    assert!(ScaleState::new(vec![f64::INFINITY]).is_err());
}
