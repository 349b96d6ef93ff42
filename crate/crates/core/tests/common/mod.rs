//! Test-side oracles, kept independent of the crate's own numerics.
#![allow(dead_code)]

use hilma::{simulate, Dataset, MissingnessMechanism, ModelParams};

pub fn censored_data(n: usize, seed: u64) -> Dataset {
    let p = ModelParams::CensoredExp { theta: 2.0, c: 3.0 };
    let m = MissingnessMechanism::ThresholdCensor { c: 3.0 };
    simulate(&p, &m, n, seed, 0).unwrap().dataset
}

pub fn exp_mean_data(n: usize, seed: u64) -> Dataset {
    let p = ModelParams::ExpMean { theta: 2.0 };
    let m = MissingnessMechanism::FixedPattern {
        missing: vec![n - 1],
    };
    simulate(&p, &m, n, seed, 0).unwrap().dataset
}

pub fn normal_reg_data(n: usize, seed: u64) -> Dataset {
    let p = ModelParams::NormalReg {
        beta0: 1.0,
        beta1: 2.0,
        sigma2: 1.0,
    };
    let m = MissingnessMechanism::LogisticMar { rho: [1.0, 2.0, 0.3] };
    simulate(&p, &m, n, seed, 0).unwrap().dataset
}

pub fn exp_reg_data(n: usize, seed: u64) -> Dataset {
    let p = ModelParams::ExpReg {
        beta0: 1.0,
        beta1: 2.0,
    };
    let m = MissingnessMechanism::LogisticMar { rho: [1.0, 2.0, 0.3] };
    simulate(&p, &m, n, seed, 0).unwrap().dataset
}

pub fn tobit_data(n: usize, seed: u64) -> Dataset {
    let p = ModelParams::Tobit {
        beta0: 1.0,
        beta1: 3.0,
        sigma2: 1.0,
        c: 3.0,
    };
    let m = MissingnessMechanism::ThresholdCensor { c: 3.0 };
    simulate(&p, &m, n, seed, 0).unwrap().dataset
}

pub fn mixed_data(q: usize, n: usize, seed: u64) -> Dataset {
    let p = ModelParams::MixedOneway {
        mu: 1.0,
        sigma2: 1.0,
        lambda2: 0.5,
        q,
        n_per_group: n,
    };
    simulate(&p, &MissingnessMechanism::none(), q * n, seed, 0)
        .unwrap()
        .dataset
}

/// Central-difference gradient with step `1e-5 * max(1, |x|)`.
pub fn fd_grad(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|k| {
            let h = 1e-5 * x[k].abs().max(1.0);
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[k] += h;
            b[k] -= h;
            (f(&a) - f(&b)) / (2.0 * h)
        })
        .collect()
}

/// Central-difference Hessian with step `1e-4 * max(1, |x|)`.
pub fn fd_hess(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Vec<Vec<f64>> {
    let p = x.len();
    let h: Vec<f64> = x.iter().map(|v| 1e-4 * v.abs().max(1.0)).collect();
    let at = |moves: &[(usize, f64)]| {
        let mut z = x.to_vec();
        for &(k, d) in moves {
            z[k] += d;
        }
        f(&z)
    };
    let mut out = vec![vec![0.0; p]; p];
    for k in 0..p {
        for l in 0..p {
            out[k][l] = (at(&[(k, h[k]), (l, h[l])]) - at(&[(k, h[k]), (l, -h[l])])
                - at(&[(k, -h[k]), (l, h[l])])
                + at(&[(k, -h[k]), (l, -h[l])]))
                / (4.0 * h[k] * h[l]);
        }
    }
    out
}

/// Gauss-Jordan inverse of a small dense matrix.
pub fn invert(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        m.swap(c, piv);
        let d = m[c][c];
        for v in m[c].iter_mut() {
            *v /= d;
        }
        for r in 0..n {
            if r != c {
                let f = m[r][c];
                let pivot_row = m[c].clone();
                for (v, pr) in m[r].iter_mut().zip(pivot_row) {
                    *v -= f * pr;
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// Maximizes `f` by damped Newton with finite-difference derivatives.
///
/// `positive` marks coordinates optimized on the log scale.
pub fn newton_maximize(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], positive: &[bool]) -> Vec<f64> {
    let to_x = |u: &[f64]| -> Vec<f64> {
        u.iter()
            .zip(positive)
            .map(|(&v, &pos)| if pos { v.exp() } else { v })
            .collect()
    };
    let g = |u: &[f64]| f(&to_x(u));
    let mut u: Vec<f64> = x0
        .iter()
        .zip(positive)
        .map(|(&v, &pos)| if pos { v.ln() } else { v })
        .collect();
    for _ in 0..200 {
        let grad = fd_grad(&g, &u);
        if grad.iter().all(|v| v.abs() < 1e-9) {
            break;
        }
        let hess = fd_hess(&g, &u);
        let neg: Vec<Vec<f64>> = hess.iter().map(|r| r.iter().map(|v| -v).collect()).collect();
        let inv = invert(&neg);
        let step: Vec<f64> = inv
            .iter()
            .map(|r| r.iter().zip(&grad).map(|(a, b)| a * b).sum())
            .collect();
        let f0 = g(&u);
        let mut t = 1.0;
        loop {
            let cand: Vec<f64> = u.iter().zip(&step).map(|(a, b)| a + t * b).collect();
            if g(&cand) >= f0 - 1e-12 || t < 1e-8 {
                u = cand;
                break;
            }
            t *= 0.5;
        }
    }
    to_x(&u)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
