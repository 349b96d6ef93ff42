mod common;

use common::*;
use hilma::models::{CensoredExponential, ExponentialMean, ExponentialRegression};
use hilma::scale::forward_all;
use hilma::{
    em_fit, hessian_blocks, hlik, hlik_in_y, joint_maximize, simulate, var_fixed, var_random,
    BlockScale, Dataset, EmOptions, MissingnessMechanism, Model, ModelParams, SolveOptions,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn censored_fit_is_closed_form(seed in 0u64..10_000, n in 50usize..400, c in 1.5f64..5.0) {
        let p = ModelParams::CensoredExp { theta: 2.0, c };
        let d = simulate(&p, &MissingnessMechanism::ThresholdCensor { c }, n, seed, 0).unwrap().dataset;
        let fit = joint_maximize(&CensoredExponential::new(c), &d, &SolveOptions::default()).unwrap();
        let exact = d.y_obs_mean() + d.n_mis() as f64 * c / d.n_obs() as f64;
        prop_assert!((fit.psi_hat[0] - exact).abs() < 1e-8);
    }

    #[test]
    fn y_scale_form_is_invariant(
        b0 in -1.0f64..1.0,
        b1 in -1.0f64..1.0,
        scale in prop::collection::vec(0.1f64..5.0, 1..20),
        seed in 0u64..1000,
    ) {
        let m = ExponentialRegression::new();
        let n = scale.len() + 10;
        let d = exp_reg_data(n.max(40), seed);
        let psi = [b0, b1];
        let y: Vec<f64> = (0..d.n_mis()).map(|i| scale[i % scale.len()]).collect();
        let v = forward_all(m.scale(), &psi, &d, &y).unwrap();
        let a = hlik_in_y(&m, &psi, &y, &d).unwrap();
        let b = hlik(&m, &psi, &v, &d).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn prediction_variance_exceeds_estimation_variance(seed in 0u64..10_000, n in 5usize..60) {
        let d = exp_mean_data(n, seed);
        let fit = joint_maximize(&ExponentialMean, &d, &SolveOptions::default()).unwrap();
        let v = var_fixed(&hessian_blocks(&ExponentialMean, &d, &fit, BlockScale::V).unwrap()).unwrap();
        let r = var_random(&hessian_blocks(&ExponentialMean, &d, &fit, BlockScale::YMis).unwrap(), &v).unwrap();
        prop_assert!(r.var_estimation[(0, 0)] > 0.0);
        prop_assert!(r.var_prediction[(0, 0)] > r.var_estimation[(0, 0)]);
        prop_assert!(r.intervals[0].contains(r.predicted[0]));
    }

    #[test]
    fn em_increases_marginal_likelihood(seed in 0u64..10_000, start in 0.2f64..10.0) {
        let m = CensoredExponential::new(3.0);
        let d = censored_data(100, seed);
        let e = em_fit(&m, &d, &[start], &EmOptions::default()).unwrap();
        let lm: Vec<f64> = e
            .trajectory
            .iter()
            .map(|p| m.closed_marginal_loglik(p, &d).unwrap().unwrap())
            .collect();
        for w in lm.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9 * w[0].abs());
        }
    }

    #[test]
    fn fit_ignores_order_of_observed_values(ys in prop::collection::vec(0.05f64..8.0, 2..30), m_mis in 1usize..5) {
        let mut rev = ys.clone();
        rev.reverse();
        let a = joint_maximize(&ExponentialMean, &Dataset::without_covariates(&ys, m_mis).unwrap(), &SolveOptions::default()).unwrap();
        let b = joint_maximize(&ExponentialMean, &Dataset::without_covariates(&rev, m_mis).unwrap(), &SolveOptions::default()).unwrap();
        prop_assert!((a.psi_hat[0] - b.psi_hat[0]).abs() <= 1e-10 * a.psi_hat[0]);
        prop_assert!(a.y_mis_hat.iter().all(|&y| (y - a.psi_hat[0]).abs() <= 1e-8 * y));
    }
}
