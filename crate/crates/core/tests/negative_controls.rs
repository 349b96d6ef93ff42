mod common;

use common::*;
use hilma::models::{CensoredExponential, ExponentialMean, ExponentialRegression, NormalRegression, OneWayMixed};
use hilma::{
    bartlett_check, joint_maximize, joint_maximize_on, Error, Identity, LogShift, MissingnessMechanism,
    Model, ModelParams, SimSetup, SolveOptions,
};

#[test]
fn raw_scale_censored_modes_sit_on_the_threshold() {
    let m = CensoredExponential::new(3.0);
    for seed in 0..5 {
        let d = censored_data(150, 40 + seed);
        let (theta, y) = m.raw_scale_mode(&d).unwrap();
        let n = d.n() as f64;
        let raw = (d.y_obs_sum() + d.n_mis() as f64 * 3.0) / n;
        assert!((theta - raw).abs() < 1e-8);
        assert!(y.iter().all(|&v| v == 3.0));
        let mle = d.y_obs_mean() + d.n_mis() as f64 * 3.0 / d.n_obs() as f64;
        assert!(mle - theta > 0.1);
    }
}

#[test]
fn raw_scale_normal_regression_variance_uses_total_count() {
    let m = NormalRegression::new();
    let d = normal_reg_data(150, 41);
    let fit = joint_maximize(&m, &d, &SolveOptions::default()).unwrap();
    let raw = joint_maximize_on(&m, &Identity, &d, &SolveOptions::default()).unwrap();
    assert!(max_abs_diff(&raw.psi_hat[..2], &fit.psi_hat[..2]) < 1e-8);
    let ratio = d.n_obs() as f64 / d.n() as f64;
    assert!((raw.psi_hat[2] - fit.psi_hat[2] * ratio).abs() < 1e-8);
    assert!((raw.psi_hat[2] - fit.psi_hat[2]).abs() > 1e-3);
}

#[test]
fn henderson_joint_likelihood_misses_variance_components() {
    let (q, n) = (20, 5);
    let m = OneWayMixed::new(q, n);
    let d = mixed_data(q, n, 42);
    let mle = joint_maximize(&m, &d, &SolveOptions::default()).unwrap();
    match joint_maximize_on(&m, &Identity, &d, &SolveOptions::default()) {
        Ok(raw) => assert!(max_abs_diff(&raw.psi_hat[1..], &mle.psi_hat[1..]) > 1e-3),
        Err(e) => assert!(matches!(e, Error::Boundary { .. } | Error::Convergence { .. }), "{e}"),
    }
}

#[test]
fn log_scale_satisfies_both_identities_in_exponential_models() {
    let setup = SimSetup {
        params: ModelParams::ExpReg { beta0: 1.0, beta1: 2.0 },
        mechanism: MissingnessMechanism::LogisticMar { rho: [1.0, 2.0, 0.3] },
        n: 50,
    };
    let r = bartlett_check(&ExponentialRegression::new(), &setup, &[1.0, 2.0], &LogShift::base(0.0), 2000, 7)
        .unwrap();
    assert!(r.first_identity_holds(3.0), "{}", r.max_score_z());
    assert!(r.second_identity_holds(3.0), "{}", r.max_residual_z());

    let setup = SimSetup {
        params: ModelParams::ExpMean { theta: 2.0 },
        mechanism: MissingnessMechanism::FixedPattern { missing: vec![29] },
        n: 30,
    };
    let r = bartlett_check(&ExponentialMean, &setup, &[2.0], &LogShift::base(0.0), 2000, 8).unwrap();
    assert!(r.first_identity_holds(3.0) && r.second_identity_holds(3.0));
}

#[test]
fn bounded_support_scale_breaks_first_identity() {
    let setup = SimSetup {
        params: ModelParams::CensoredExp { theta: 2.0, c: 3.0 },
        mechanism: MissingnessMechanism::ThresholdCensor { c: 3.0 },
        n: 50,
    };
    let m = CensoredExponential::new(3.0);
    let r = bartlett_check(&m, &setup, &[2.0], &Identity, 2000, 9).unwrap();
    assert!(!r.first_identity_holds(3.0));
    assert_eq!(r.components, vec!["theta".to_string(), "b_sum".into()]);
}

#[test]
fn bartlett_check_rejects_too_few_draws() {
    let setup = SimSetup {
        params: ModelParams::ExpMean { theta: 2.0 },
        mechanism: MissingnessMechanism::FixedPattern { missing: vec![0] },
        n: 5,
    };
    let e = bartlett_check(&ExponentialMean, &setup, &[2.0], &Identity, 10, 0).unwrap_err();
    assert!(matches!(e, Error::Usage(_)));
    assert!(ExponentialMean.param_dim() == 1);
}
