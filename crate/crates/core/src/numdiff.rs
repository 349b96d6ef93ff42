//! Central finite differences.
//!
//! First derivatives use step `cbrt(eps) * max(1, |x|)`; second derivatives
//! use `eps^(1/4) * max(1, |x|)`. The `richardson_*` variants combine steps
//! `h` and `h/2` to cancel the leading truncation term.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;

fn step1(x: f64) -> f64 {
    f64::EPSILON.cbrt() * x.abs().max(1.0)
}

fn step2(x: f64) -> f64 {
    f64::EPSILON.powf(0.25) * x.abs().max(1.0)
}

fn step_richardson(x: f64) -> f64 {
    f64::EPSILON.powf(0.2) * x.abs().max(1.0)
}

fn step_richardson2(x: f64) -> f64 {
    f64::EPSILON.powf(1.0 / 6.0) * x.abs().max(1.0)
}

fn shifted(x: &[f64], moves: &[(usize, f64)]) -> Vec<f64> {
    let mut y = x.to_vec();
    for &(k, d) in moves {
        y[k] += d;
    }
    y
}

pub fn try_gradient<F>(f: F, x: &[f64]) -> Result<DVector<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let mut g = DVector::zeros(x.len());
    for k in 0..x.len() {
        let h = step1(x[k]);
        let fp = f(&shifted(x, &[(k, h)]))?;
        let fm = f(&shifted(x, &[(k, -h)]))?;
        g[k] = (fp - fm) / (2.0 * h);
    }
    Ok(g)
}

fn mixed<F>(f: &F, x: &[f64], k: usize, l: usize, hk: f64, hl: f64, f0: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if k == l {
        let fp = f(&shifted(x, &[(k, hk)]))?;
        let fm = f(&shifted(x, &[(k, -hk)]))?;
        Ok((fp - 2.0 * f0 + fm) / (hk * hk))
    } else {
        let fpp = f(&shifted(x, &[(k, hk), (l, hl)]))?;
        let fpm = f(&shifted(x, &[(k, hk), (l, -hl)]))?;
        let fmp = f(&shifted(x, &[(k, -hk), (l, hl)]))?;
        let fmm = f(&shifted(x, &[(k, -hk), (l, -hl)]))?;
        Ok((fpp - fpm - fmp + fmm) / (4.0 * hk * hl))
    }
}

pub fn try_hessian<F>(f: F, x: &[f64]) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let n = x.len();
    let f0 = f(x)?;
    let mut h = DMatrix::zeros(n, n);
    for k in 0..n {
        for l in k..n {
            let v = mixed(&f, x, k, l, step2(x[k]), step2(x[l]), f0)?;
            h[(k, l)] = v;
            h[(l, k)] = v;
        }
    }
    Ok(h)
}

pub fn try_richardson_gradient<F>(f: F, x: &[f64]) -> Result<DVector<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let mut g = DVector::zeros(x.len());
    for k in 0..x.len() {
        let h = step_richardson(x[k]);
        let d = |h: f64| -> Result<f64> {
            Ok((f(&shifted(x, &[(k, h)]))? - f(&shifted(x, &[(k, -h)]))?) / (2.0 * h))
        };
        let coarse = d(h)?;
        let fine = d(0.5 * h)?;
        g[k] = (4.0 * fine - coarse) / 3.0;
    }
    Ok(g)
}

pub fn try_richardson_hessian<F>(f: F, x: &[f64]) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let n = x.len();
    let f0 = f(x)?;
    let mut h = DMatrix::zeros(n, n);
    for k in 0..n {
        for l in k..n {
            let (hk, hl) = (step_richardson2(x[k]), step_richardson2(x[l]));
            let coarse = mixed(&f, x, k, l, hk, hl, f0)?;
            let fine = mixed(&f, x, k, l, 0.5 * hk, 0.5 * hl, f0)?;
            let v = (4.0 * fine - coarse) / 3.0;
            h[(k, l)] = v;
            h[(l, k)] = v;
        }
    }
    Ok(h)
}

pub fn gradient<F>(f: F, x: &[f64]) -> DVector<f64>
where
    F: Fn(&[f64]) -> f64,
{
    try_gradient(|z| Ok(f(z)), x).expect("infallible")
}

pub fn hessian<F>(f: F, x: &[f64]) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> f64,
{
    try_hessian(|z| Ok(f(z)), x).expect("infallible")
}

/// Scalar derivative with Richardson refinement.
pub fn derivative<F>(f: F, x: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    try_richardson_gradient(|z| Ok(f(z[0])), &[x]).expect("infallible")[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosen(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn gradient_and_hessian_of_rosenbrock() {
        let x = [0.3, -0.2];
        let g = gradient(rosen, &x);
        let g_exact = [
            -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]),
            200.0 * (x[1] - x[0] * x[0]),
        ];
        for k in 0..2 {
            assert!((g[k] - g_exact[k]).abs() < 1e-6 * g_exact[k].abs().max(1.0));
        }
        let h = hessian(rosen, &x);
        let h_exact = [
            [2.0 - 400.0 * (x[1] - 3.0 * x[0] * x[0]), -400.0 * x[0]],
            [-400.0 * x[0], 200.0],
        ];
        for k in 0..2 {
            for l in 0..2 {
                assert!((h[(k, l)] - h_exact[k][l]).abs() < 1e-4 * h_exact[k][l].abs().max(1.0));
            }
        }
    }

    #[test]
    fn richardson_is_more_accurate_than_plain_central() {
        let f = |z: &[f64]| Ok((3.0 * z[0]).exp());
        let exact = 3.0 * (3.0_f64 * 0.5).exp();
        let plain = try_gradient(f, &[0.5]).unwrap()[0];
        let rich = try_richardson_gradient(f, &[0.5]).unwrap()[0];
        assert!((rich - exact).abs() < (plain - exact).abs());
        assert!((rich - exact).abs() / exact < 1e-11);
        let h = try_richardson_hessian(f, &[0.5]).unwrap()[(0, 0)];
        assert!((h - 9.0 * (1.5_f64).exp()).abs() / h < 1e-8);
    }
}
