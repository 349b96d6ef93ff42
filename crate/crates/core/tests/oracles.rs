mod common;

use common::*;
use hilma::models::{
    CensoredExponential, ExponentialMean, ExponentialRegression, NormalRegression, OneWayMixed,
    Tobit,
};
use hilma::{
    em_fit, hessian_blocks, joint_maximize, var_fixed, var_random, BlockScale, Dataset, EmOptions,
    Model, SolveOptions,
};
use statrs::distribution::{ContinuousCDF, Normal};

#[test]
fn censored_exponential_matches_closed_form_mle() {
    let m = CensoredExponential::new(3.0);
    for (k, n) in [50, 120, 200, 350, 500].into_iter().enumerate() {
        let d = censored_data(n, 100 + k as u64);
        let fit = joint_maximize(&m, &d, &SolveOptions::default()).unwrap();
        let exact = d.y_obs_mean() + d.n_mis() as f64 * 3.0 / d.n_obs() as f64;
        assert!((fit.psi_hat[0] - exact).abs() < 1e-8, "n={n}");
        for y in &fit.y_mis_hat {
            assert!((y - (exact + 3.0)).abs() < 1e-8);
        }
    }
}

#[test]
fn censored_exponential_information_is_theta_squared_over_n_obs() {
    let m = CensoredExponential::new(3.0);
    let d = censored_data(200, 7);
    let fit = joint_maximize(&m, &d, &SolveOptions::default()).unwrap();
    let v = var_fixed(&hessian_blocks(&m, &d, &fit, BlockScale::V).unwrap()).unwrap();
    let th = fit.psi_hat[0];
    assert!((v[(0, 0)] - th * th / d.n_obs() as f64).abs() < 1e-8);
}

#[test]
fn exponential_mean_prediction_variance() {
    let m = ExponentialMean;
    let d = exp_mean_data(40, 3);
    let fit = joint_maximize(&m, &d, &SolveOptions::starting_at(vec![0.7])).unwrap();
    let th = d.y_obs_mean();
    assert!((fit.psi_hat[0] - th).abs() < 1e-10);
    assert!((fit.y_mis_hat[0] - th).abs() < 1e-10);
    let v = var_fixed(&hessian_blocks(&m, &d, &fit, BlockScale::V).unwrap()).unwrap();
    let n_obs = d.n_obs() as f64;
    assert!((v[(0, 0)] - th * th / n_obs).abs() < 1e-8);
    let y_blocks = hessian_blocks(&m, &d, &fit, BlockScale::YMis).unwrap();
    let rep = var_random(&y_blocks, &v).unwrap();
    assert!((rep.var_prediction[(0, 0)] - th * th * (1.0 + 1.0 / n_obs)).abs() < 1e-8);
    assert!((rep.var_estimation[(0, 0)] - th * th / n_obs).abs() < 1e-8);
}

#[test]
fn normal_regression_matches_observed_rows_least_squares() {
    let m = NormalRegression::new();
    let d = normal_reg_data(150, 11);
    let fit = joint_maximize(&m, &d, &SolveOptions::starting_at(vec![0.0, 0.0, 3.0])).unwrap();
    // least squares on observed rows, divisor n_obs
    let n_obs = d.n_obs();
    let x: Vec<f64> = (0..n_obs).map(|i| d.x(i, 0)).collect();
    let y = d.y_obs();
    let (mx, my) = (
        x.iter().sum::<f64>() / n_obs as f64,
        y.iter().sum::<f64>() / n_obs as f64,
    );
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let b1 = sxy / sxx;
    let b0 = my - b1 * mx;
    let s = x.iter().zip(&y).map(|(a, b)| (b - b0 - b1 * a).powi(2)).sum::<f64>() / n_obs as f64;
    assert!(max_abs_diff(&fit.psi_hat, &[b0, b1, s]) < 1e-8);
    for (i, yi) in fit.y_mis_hat.iter().enumerate() {
        assert!((yi - (b0 + b1 * d.x_mis(i, 0))).abs() < 1e-8);
    }
}

fn exp_reg_marginal(psi: &[f64], d: &Dataset) -> f64 {
    (0..d.n_obs())
        .map(|i| {
            let eta = psi[0] + psi[1] * d.x(i, 0);
            -eta - d.response()[i].unwrap() / eta.exp()
        })
        .sum()
}

#[test]
fn exponential_regression_matches_direct_marginal_maximization() {
    let m = ExponentialRegression::new();
    let d = exp_reg_data(200, 5);
    let fit = joint_maximize(&m, &d, &SolveOptions::default()).unwrap();
    let direct = newton_maximize(&|p| exp_reg_marginal(p, &d), &[0.0, 0.0], &[false, false]);
    assert!(max_abs_diff(&fit.psi_hat, &direct) < 1e-5);
    for (i, yi) in fit.y_mis_hat.iter().enumerate() {
        let eta = fit.psi_hat[0] + fit.psi_hat[1] * d.x_mis(i, 0);
        assert!((yi - eta.exp()).abs() < 1e-8 * eta.exp());
    }
}

fn tobit_marginal(psi: &[f64], d: &Dataset, c: f64) -> f64 {
    let sd = psi[2].sqrt();
    let std = Normal::standard();
    let mut v = 0.0;
    for i in 0..d.n_obs() {
        let e = d.response()[i].unwrap() - psi[0] - psi[1] * d.x(i, 0);
        v += -0.5 * (2.0 * std::f64::consts::PI * psi[2]).ln() - e * e / (2.0 * psi[2]);
    }
    for i in 0..d.n_mis() {
        let mu = psi[0] + psi[1] * d.x_mis(i, 0);
        v += std.cdf((mu - c) / sd).ln();
    }
    v
}

#[test]
fn tobit_canonical_scale_matches_direct_marginal_maximization() {
    let m = Tobit::new(3.0);
    let d = tobit_data(300, 9);
    let fit = joint_maximize(&m, &d, &SolveOptions::default()).unwrap();
    let direct = newton_maximize(
        &|p| tobit_marginal(p, &d, 3.0),
        &[0.5, 2.0, 1.5],
        &[false, false, true],
    );
    assert!(max_abs_diff(&fit.psi_hat, &direct) < 1e-5, "{:?} vs {direct:?}", fit.psi_hat);
    let closed = m.closed_marginal_loglik(&fit.psi_hat, &d).unwrap().unwrap();
    assert!((closed - tobit_marginal(&fit.psi_hat, &d, 3.0)).abs() < 1e-9);
}

#[test]
fn mixed_model_matches_balanced_anova_mle() {
    let (q, n) = (30, 6);
    let m = OneWayMixed::new(q, n);
    let d = mixed_data(q, n, 21);
    let fit = joint_maximize(&m, &d, &SolveOptions::default()).unwrap();
    let y: Vec<f64> = d.y_obs();
    let means: Vec<f64> = (0..q).map(|i| y[i * n..(i + 1) * n].iter().sum::<f64>() / n as f64).collect();
    let grand = means.iter().sum::<f64>() / q as f64;
    let ssw: f64 = (0..q)
        .map(|i| y[i * n..(i + 1) * n].iter().map(|v| (v - means[i]).powi(2)).sum::<f64>())
        .sum();
    let ssb: f64 = n as f64 * means.iter().map(|v| (v - grand).powi(2)).sum::<f64>();
    let s2 = ssw / (q * (n - 1)) as f64;
    let l2 = (ssb / q as f64 - s2) / n as f64;
    assert!(l2 > 0.0);
    assert!(max_abs_diff(&fit.psi_hat, &[grand, s2, l2]) < 1e-6, "{:?}", fit.psi_hat);
    for i in 0..q {
        let blup = n as f64 * l2 * (means[i] - grand) / (s2 + n as f64 * l2);
        assert!((fit.y_mis_hat[i] - blup).abs() < 1e-6);
    }
}

#[test]
fn em_agrees_with_joint_maximization() {
    let m = CensoredExponential::new(3.0);
    let d = censored_data(200, 31);
    let h = joint_maximize(&m, &d, &SolveOptions::default()).unwrap();
    let e = em_fit(&m, &d, &[1.0], &EmOptions::default()).unwrap();
    assert!(max_abs_diff(&h.psi_hat, &e.psi_hat) < 1e-6);

    let m = NormalRegression::new();
    let d = normal_reg_data(200, 32);
    let h = joint_maximize(&m, &d, &SolveOptions::default()).unwrap();
    let e = em_fit(&m, &d, &[0.0, 0.0, 1.0], &EmOptions::default()).unwrap();
    assert!(max_abs_diff(&h.psi_hat, &e.psi_hat) < 1e-6);

    let m = ExponentialRegression::new();
    let d = exp_reg_data(200, 33);
    let h = joint_maximize(&m, &d, &SolveOptions::default()).unwrap();
    let e = em_fit(&m, &d, &[0.0, 0.0], &EmOptions::default()).unwrap();
    assert!(max_abs_diff(&h.psi_hat, &e.psi_hat) < 1e-6);
}
