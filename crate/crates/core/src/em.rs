//! EM baseline: point estimates only, no variance.

use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{check_psi, Model};

/// One EM update and the conditional mean used by its E-step.
pub trait EmStep: Send + Sync {
    /// `E_psi(y_mis,i | data)`.
    fn conditional_mean(&self, psi: &[f64], data: &Dataset, i: usize) -> Result<f64>;

    /// `psi^(t+1)` from `psi^(t)`.
    fn m_step(&self, psi: &[f64], data: &Dataset) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmOptions {
    /// Sup-norm tolerance on successive iterates.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iters: 5000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmFit {
    pub psi_hat: Vec<f64>,
    pub iterations: usize,
    /// Iterates, starting value first.
    pub trajectory: Vec<Vec<f64>>,
}

pub fn em_fit(model: &dyn Model, data: &Dataset, init: &[f64], opts: &EmOptions) -> Result<EmFit> {
    let step = model
        .em()
        .ok_or_else(|| Error::Unsupported(format!("no EM step for model {}", model.name())))?;
    model.validate(data)?;
    check_psi(model, init)?;
    let mut psi = init.to_vec();
    let mut trajectory = vec![psi.clone()];
    for it in 1..=opts.max_iters {
        let next = step.m_step(&psi, data)?;
        check_psi(model, &next)?;
        let change = next
            .iter()
            .zip(&psi)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        psi = next;
        trajectory.push(psi.clone());
        if change <= opts.tol {
            return Ok(EmFit {
                psi_hat: psi,
                iterations: it,
                trajectory,
            });
        }
    }
    Err(Error::Convergence {
        context: "EM".into(),
        iterations: opts.max_iters,
        grad_norm: f64::NAN,
        last_iterate: psi,
    })
}

/// Completed-data mean response with `E_psi(y_mis | data)` filled in.
pub fn em_mean_response(model: &dyn Model, psi: &[f64], data: &Dataset) -> Result<f64> {
    let step = model
        .em()
        .ok_or_else(|| Error::Unsupported(format!("no EM step for model {}", model.name())))?;
    let mut total = data.y_obs_sum();
    for i in 0..data.n_mis() {
        total += step.conditional_mean(psi, data, i)?;
    }
    Ok(total / data.n() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{CensoredExponential, ExponentialMean};

    #[test]
    fn censored_exponential_converges_to_closed_form() {
        let m = CensoredExponential::new(3.0);
        let d = Dataset::without_covariates(&[0.5, 1.0, 2.5, 0.2, 1.7], 2).unwrap();
        let fit = em_fit(&m, &d, &[1.0], &EmOptions::default()).unwrap();
        let exact = d.y_obs_mean() + 2.0 * 3.0 / 5.0;
        assert!((fit.psi_hat[0] - exact).abs() < 1e-9);
        assert_eq!(fit.trajectory.len(), fit.iterations + 1);
    }

    #[test]
    fn complete_data_lands_on_the_mle_in_one_step() {
        let m = ExponentialMean;
        let d = Dataset::without_covariates(&[0.5, 1.0, 2.5], 0).unwrap();
        let fit = em_fit(&m, &d, &[7.0], &EmOptions::default()).unwrap();
        assert!((fit.trajectory[1][0] - d.y_obs_mean()).abs() < 1e-15);
    }

    #[test]
    fn model_without_em_is_unsupported() {
        let m = crate::models::Tobit::new(3.0);
        let d = Dataset::without_covariates(&[0.5], 0).unwrap();
        assert!(matches!(
            em_fit(&m, &d, &[0.0, 0.0, 1.0], &EmOptions::default()),
            Err(Error::Unsupported(_))
        ));
    }
}
