mod common;

use common::*;
use hilma::models::{
    CensoredExponential, ExponentialMean, ExponentialRegression, NormalRegression, OneWayMixed,
    Tobit,
};
use hilma::scale::forward_all;
use hilma::{
    hessian_blocks, hlik, hlik_in_y, inner_mode, joint_maximize, solve_random_given_psi, var_fixed,
    BlockScale, Dataset, Model, SolveOptions,
};

fn cases() -> Vec<(Box<dyn Model>, Dataset, Vec<f64>)> {
    vec![
        (Box::new(ExponentialMean), exp_mean_data(30, 1), vec![1.7]),
        (Box::new(CensoredExponential::new(3.0)), censored_data(120, 2), vec![2.3]),
        (Box::new(NormalRegression::new()), normal_reg_data(120, 3), vec![0.8, 2.2, 1.3]),
        (Box::new(ExponentialRegression::new()), exp_reg_data(120, 4), vec![0.9, 1.8]),
        (Box::new(Tobit::new(3.0)), tobit_data(150, 5), vec![1.1, 2.8, 0.9]),
        (Box::new(OneWayMixed::new(20, 5)), mixed_data(20, 5, 6), vec![0.9, 1.1, 0.6]),
    ]
}

fn marginal<'a>(m: &'a dyn Model, d: &'a Dataset) -> impl Fn(&[f64]) -> f64 + 'a {
    move |p: &[f64]| m.closed_marginal_loglik(p, d).unwrap().unwrap()
}

#[test]
fn profile_score_equals_marginal_score() {
    for (m, d, psi) in cases() {
        let v = inner_mode(m.as_ref(), &psi, &d, None).unwrap();
        let h = hlik(m.as_ref(), &psi, &v, &d).unwrap();
        assert!(h.grad_v.amax() < 1e-8, "{}", m.name());
        let g = fd_grad(&marginal(m.as_ref(), &d), &psi);
        for k in 0..psi.len() {
            assert!(
                (h.grad_psi[k] - g[k]).abs() < 1e-6 * g[k].abs().max(1.0),
                "{} component {k}: {} vs {}",
                m.name(),
                h.grad_psi[k],
                g[k]
            );
        }
    }
}

#[test]
fn inverse_fixed_variance_equals_marginal_information() {
    for (m, d, _) in cases() {
        let fit = joint_maximize(m.as_ref(), &d, &SolveOptions::default()).unwrap();
        let v = var_fixed(&hessian_blocks(m.as_ref(), &d, &fit, BlockScale::V).unwrap()).unwrap();
        let info = v.try_inverse().unwrap();
        let h = fd_hess(&marginal(m.as_ref(), &d), &fit.psi_hat);
        let scale = h.iter().flatten().fold(0.0_f64, |a, b| a.max(b.abs()));
        for k in 0..h.len() {
            for l in 0..h.len() {
                assert!(
                    (info[(k, l)] + h[k][l]).abs() < 1e-4 * scale,
                    "{} ({k},{l}): {} vs {}",
                    m.name(),
                    info[(k, l)],
                    -h[k][l]
                );
            }
        }
    }
}

#[test]
fn canonical_scale_offset_is_constant_in_psi() {
    for (m, d, psi) in cases() {
        let mut offsets = Vec::new();
        for t in 0..50 {
            let s = 0.7 + 0.6 * t as f64 / 49.0;
            let p: Vec<f64> = psi
                .iter()
                .zip(m.param_domain())
                .map(|(&x, dom)| match dom {
                    hilma::ParamDomain::Positive => x * s,
                    hilma::ParamDomain::Real => x + (s - 1.0),
                })
                .collect();
            let v = inner_mode(m.as_ref(), &p, &d, None).unwrap();
            let h = hlik(m.as_ref(), &p, &v, &d).unwrap().value;
            offsets.push(h - m.closed_marginal_loglik(&p, &d).unwrap().unwrap());
        }
        let lo = offsets.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = offsets.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(hi - lo < 1e-8, "{}: range {}", m.name(), hi - lo);
    }
}

#[test]
fn inner_mode_matches_closed_form_mode() {
    for (m, d, psi) in cases() {
        let y = solve_random_given_psi(m.as_ref(), &psi, &d).unwrap();
        let exact = m.canonical_mode(&psi, &d).unwrap().unwrap();
        assert!(max_abs_diff(&y, &exact) < 1e-8, "{}", m.name());
    }
}

#[test]
fn natural_scale_form_agrees_with_transformed_form() {
    for (m, d, psi) in cases() {
        let y = m.canonical_mode(&psi, &d).unwrap().unwrap();
        let y: Vec<f64> = y.iter().map(|v| v * 1.1 + 0.05).collect();
        let v = forward_all(m.scale(), &psi, &d, &y).unwrap();
        let a = hlik_in_y(m.as_ref(), &psi, &y, &d).unwrap();
        let b = hlik(m.as_ref(), &psi, &v, &d).unwrap().value;
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{}: {a} vs {b}", m.name());
    }
}

#[test]
fn profile_newton_ascends_monotonically() {
    for (m, d, psi) in cases() {
        let start: Vec<f64> = psi.iter().map(|x| x * 0.6 + 0.1).collect();
        let fit = joint_maximize(m.as_ref(), &d, &SolveOptions::starting_at(start)).unwrap();
        for w in fit.history.windows(2) {
            assert!(w[1] >= w[0] - 1e-10 * w[0].abs().max(1.0), "{}", m.name());
        }
        assert!(fit.converged && fit.grad_norm <= 1e-8);
    }
}

#[test]
fn row_permutation_permutes_imputations() {
    let m = ExponentialRegression::new();
    let d = exp_reg_data(80, 8);
    let rows = d.rows_in_original_order();
    let n = rows.len();
    let perm: Vec<usize> = (0..n).map(|i| (i * 37 + 11) % n).collect();
    let x = nalgebra::DMatrix::from_fn(n, 1, |i, _| rows[perm[i]].0[0]);
    let resp = perm.iter().map(|&k| rows[k].1).collect();
    let dp = Dataset::from_rows(x, resp).unwrap();
    let a = joint_maximize(&m, &d, &SolveOptions::default()).unwrap();
    let b = joint_maximize(&m, &dp, &SolveOptions::default()).unwrap();
    assert!(max_abs_diff(&a.psi_hat, &b.psi_hat) < 1e-10);
    let key = |data: &Dataset, fit: &hilma::FitResult| {
        let mut v: Vec<(u64, f64)> = (0..data.n_mis())
            .map(|i| (data.x_mis(i, 0).to_bits(), fit.y_mis_hat[i]))
            .collect();
        v.sort_by_key(|e| e.0);
        v
    };
    for (p, q) in key(&d, &a).iter().zip(key(&dp, &b)) {
        assert_eq!(p.0, q.0);
        assert!((p.1 - q.1).abs() < 1e-10);
    }
}

#[test]
fn ignorable_mechanism_term_leaves_response_parameters_unchanged() {
    let d = normal_reg_data(200, 12);
    let plain = joint_maximize(&NormalRegression::new(), &d, &SolveOptions::default()).unwrap();
    let full = joint_maximize(&NormalRegression::with_mechanism(), &d, &SolveOptions::default()).unwrap();
    assert!(max_abs_diff(&plain.psi_hat, &full.psi_hat[..3]) < 1e-8);
    assert!(max_abs_diff(&plain.y_mis_hat, &full.y_mis_hat) < 1e-8);

    let d = exp_reg_data(200, 13);
    let plain = joint_maximize(&ExponentialRegression::new(), &d, &SolveOptions::default()).unwrap();
    let full =
        joint_maximize(&ExponentialRegression::with_mechanism(), &d, &SolveOptions::default()).unwrap();
    assert!(max_abs_diff(&plain.psi_hat, &full.psi_hat[..2]) < 1e-8);
}

#[test]
fn no_missing_values_gives_complete_data_mle() {
    let d = Dataset::without_covariates(&[0.4, 1.9, 2.2, 0.7], 0).unwrap();
    let fit = joint_maximize(&ExponentialMean, &d, &SolveOptions::starting_at(vec![5.0])).unwrap();
    assert!((fit.psi_hat[0] - 1.3).abs() < 1e-8, "{}", fit.psi_hat[0]);
    assert!(fit.y_mis_hat.is_empty());
}

#[test]
fn normal_regression_z_scale_intervals_are_exact_normal_intervals() {
    let m = NormalRegression::new();
    let d = normal_reg_data(100, 14);
    let fit = joint_maximize(&m, &d, &SolveOptions::default()).unwrap();
    let rep = hilma::z_scale_report(&m, &d, &fit, 0.9).unwrap();
    let y = hilma::variance_report(&m, &d, &fit, 0.9).unwrap();
    assert!(max_abs_diff(&rep.se_prediction, &y.se_prediction) < 1e-10);
    let s2 = fit.psi_hat[2];
    assert!(rep.se_prediction.iter().all(|&s| s * s > s2));
    assert!((rep.quantile - 1.6448536269514722).abs() < 1e-9);
}
