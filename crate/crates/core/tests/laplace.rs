mod common;

use common::*;
use hilma::models::{CensoredExponential, ExponentialRegression, NormalRegression, OneWayMixed, Tobit};
use hilma::{
    approx_mle, hlik_on, joint_maximize, joint_maximize_on, laplace_marginal, laplace_score_hessian,
    make_weak_canonical, Error, Identity, LogShift, Model, ScaleKind, ScaleTransform, SolveOptions,
};

#[test]
fn gaussian_models_have_exact_laplace_likelihood() {
    let m = NormalRegression::new();
    let d = normal_reg_data(120, 50);
    for psi in [[0.8, 2.2, 1.3], [1.5, 1.0, 0.4], [-0.3, 3.0, 2.5]] {
        let exact = m.closed_marginal_loglik(&psi, &d).unwrap().unwrap();
        let lap = laplace_marginal(&m, &psi, &d, &Identity).unwrap();
        assert!((exact - lap).abs() < 1e-10, "{exact} vs {lap}");
    }
    let m = OneWayMixed::new(15, 4);
    let d = mixed_data(15, 4, 51);
    for psi in [[0.9, 1.1, 0.6], [1.4, 0.5, 2.0]] {
        let exact = m.closed_marginal_loglik(&psi, &d).unwrap().unwrap();
        let lap = laplace_marginal(&m, &psi, &d, &Identity).unwrap();
        assert!((exact - lap).abs() < 1e-10, "{exact} vs {lap}");
    }
}

#[test]
fn laplace_derivatives_match_finite_differences() {
    let m = Tobit::new(3.0);
    let d = tobit_data(150, 52);
    let b = m.base_scale();
    let psi = [1.1, 2.8, 0.9];
    let ld = laplace_score_hessian(&m, &psi, &d, b).unwrap();
    let f = |p: &[f64]| laplace_marginal(&m, p, &d, b).unwrap();
    assert!((ld.value - f(&psi)).abs() < 1e-10);
    let g = fd_grad(&f, &psi);
    for k in 0..3 {
        assert!((ld.score[k] - g[k]).abs() < 1e-5 * g[k].abs().max(1.0), "{k}");
    }
    let h = fd_hess(&f, &psi);
    for k in 0..3 {
        for l in 0..3 {
            assert!((ld.information[(k, l)] + h[k][l]).abs() < 1e-3 * h[k][k].abs().max(1.0));
        }
    }
}

#[test]
fn weak_canonical_mode_reproduces_laplace_likelihood() {
    let m = Tobit::new(3.0);
    let d = tobit_data(100, 53);
    let b = m.base_scale();
    let w = make_weak_canonical(&m, b, &d).unwrap();
    assert_eq!(w.kind(), ScaleKind::WeakCanonical);
    let psi = [0.9, 3.2, 1.2];
    let lap = laplace_marginal(&m, &psi, &d, b).unwrap();
    let fit = approx_mle(&m, &d, b, &SolveOptions::starting_at(psi.to_vec())).unwrap();
    let w_modes: Vec<f64> = (0..d.n_mis())
        .map(|i| {
            let y = m.canonical_mode(&psi, &d).unwrap().unwrap()[i];
            w.forward(&psi, &d, i, y).unwrap()
        })
        .collect();
    let h = hlik_on(&m, &w, &psi, &w_modes, &d).unwrap();
    let half_log_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
    assert!((h + d.n_mis() as f64 * half_log_2pi - lap).abs() < 1e-8);
    let h_hat = fit.fit.h_value + d.n_mis() as f64 * half_log_2pi;
    assert!((h_hat - fit.laplace_loglik).abs() < 1e-8);
}

#[test]
fn approximate_mle_agrees_with_joint_maximization_on_weak_scale() {
    let m = Tobit::new(3.0);
    let d = tobit_data(200, 54);
    let b = m.base_scale();
    let lap = approx_mle(&m, &d, b, &SolveOptions::default()).unwrap();
    let w = make_weak_canonical(&m, b, &d).unwrap();
    let joint = joint_maximize_on(&m, &w, &d, &SolveOptions::default()).unwrap();
    assert!(max_abs_diff(&lap.fit.psi_hat, &joint.psi_hat) < 1e-6);
    assert!(max_abs_diff(&lap.fit.y_mis_hat, &joint.y_mis_hat) < 1e-6);
    assert!(lap.fit.y_mis_hat.iter().all(|&y| y > 3.0));
}

#[test]
fn tobit_laplace_estimate_is_close_to_exact_mle() {
    let m = Tobit::new(3.0);
    let d = tobit_data(500, 55);
    let exact = joint_maximize(&m, &d, &SolveOptions::default()).unwrap();
    let lap = approx_mle(&m, &d, m.base_scale(), &SolveOptions::default()).unwrap();
    assert!(max_abs_diff(&exact.psi_hat, &lap.fit.psi_hat) < 0.05);
    assert!(max_abs_diff(&exact.psi_hat, &lap.fit.psi_hat) > 0.0);
}

#[test]
fn log_scale_laplace_is_exact_up_to_a_constant_in_exponential_regression() {
    let m = ExponentialRegression::new();
    let d = exp_reg_data(150, 56);
    let exact = joint_maximize(&m, &d, &SolveOptions::default()).unwrap();
    let lap = approx_mle(&m, &d, &LogShift::base(0.0), &SolveOptions::default()).unwrap();
    assert!(max_abs_diff(&exact.psi_hat, &lap.fit.psi_hat) < 1e-7);
}

#[test]
fn weak_scale_requires_full_support_and_fixed_base() {
    let m = CensoredExponential::new(3.0);
    let d = censored_data(50, 57);
    let e = make_weak_canonical(&m, &Identity, &d).unwrap_err();
    assert!(matches!(e, Error::Unsupported(_)));
    let e = approx_mle(&m, &d, &Identity, &SolveOptions::default()).unwrap_err();
    assert!(matches!(e, Error::Unsupported(_)));
    let t = Tobit::new(3.0);
    let e = make_weak_canonical(&t, t.scale(), &tobit_data(50, 58)).unwrap_err();
    assert!(matches!(e, Error::Unsupported(_)));
}
