use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::jet::FixedJet;

/// How the response indicator is generated in simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MissingnessMechanism {
    /// `logit P(delta = 1 | x) = rho0 + rho1 x + rho2 x^2`.
    LogisticMar { rho: [f64; 3] },
    /// The response is missing iff it exceeds `c`.
    ThresholdCensor { c: f64 },
    /// The listed rows are missing.
    FixedPattern { missing: Vec<usize> },
}

impl MissingnessMechanism {
    pub fn none() -> Self {
        MissingnessMechanism::FixedPattern { missing: Vec::new() }
    }
}

pub(crate) fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

pub(crate) fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

pub fn response_probability(rho: &[f64], x: f64) -> f64 {
    logistic(rho[0] + rho[1] * x + rho[2] * x * x)
}

/// `sum_i log P_rho(delta_i | x_i)` with `rho = psi[offset..offset + 3]`
/// and `x` in covariate column 0.
pub(crate) fn logistic_loglik(psi: &[f64], offset: usize, data: &Dataset) -> f64 {
    let rho = &psi[offset..offset + 3];
    (0..data.n())
        .map(|i| {
            let x = data.x(i, 0);
            let eta = rho[0] + rho[1] * x + rho[2] * x * x;
            let d = if i < data.n_obs() { 1.0 } else { 0.0 };
            d * eta - softplus(eta)
        })
        .sum()
}

pub(crate) fn logistic_jet(psi: &[f64], offset: usize, data: &Dataset) -> FixedJet {
    let p = psi.len();
    let rho = &psi[offset..offset + 3];
    let mut value = 0.0;
    let mut grad = DVector::zeros(p);
    let mut hess = DMatrix::zeros(p, p);
    for i in 0..data.n() {
        let x = data.x(i, 0);
        let z = [1.0, x, x * x];
        let eta = rho[0] + rho[1] * x + rho[2] * x * x;
        let d = if i < data.n_obs() { 1.0 } else { 0.0 };
        let pr = logistic(eta);
        value += d * eta - softplus(eta);
        for a in 0..3 {
            grad[offset + a] += (d - pr) * z[a];
            for b in 0..3 {
                hess[(offset + a, offset + b)] -= pr * (1.0 - pr) * z[a] * z[b];
            }
        }
    }
    FixedJet { value, grad, hess }
}
