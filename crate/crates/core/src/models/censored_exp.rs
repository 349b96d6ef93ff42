use crate::data::Dataset;
use crate::em::EmStep;
use crate::error::{Error, Result};
use crate::jet::{FixedJet, Jet};
use crate::model::{Model, ParamDomain};
use crate::scale::{LogShift, RDerivs, ScaleTransform};

use super::exp_mean::{check_positive_obs, exp_fixed_jet, exp_random_jet};

/// `y_i ~ Exp(mean theta)`, with `y_i` missing exactly when `y_i > c`.
#[derive(Debug, Clone, Copy)]
pub struct CensoredExponential {
    pub c: f64,
    scale: LogShift,
}

impl CensoredExponential {
    pub fn new(c: f64) -> Self {
        assert!(c > 0.0 && c.is_finite(), "censoring threshold must be positive");
        Self {
            c,
            scale: LogShift::canonical(c),
        }
    }

    /// Joint supremum of `l_e(theta, y_mis)` with no Jacobian.
    ///
    /// `l_e` decreases in every `y_mis,i` over `(c, inf)`, so the supremum
    /// sits on the boundary `y_mis = c` and the natural-scale objective has
    /// no interior mode. Returns `theta` maximizing `l_e(theta, c)` and the
    /// boundary modes.
    pub fn raw_scale_mode(&self, data: &Dataset) -> Result<(f64, Vec<f64>)> {
        self.validate(data)?;
        let m = data.n_mis();
        let theta0 = data.y_obs_mean();
        for i in 0..m {
            let [_, slope, _] = self.random_r(&[theta0], data, i, self.c)?;
            if !(slope < 0.0) {
                return Err(Error::Curvature(format!(
                    "l_e is not decreasing in y_mis[{i}] at the censoring threshold"
                )));
            }
        }
        let y = vec![self.c; m];
        // Newton on log theta for theta -> l_e(theta, c)
        let mut phi = theta0.ln();
        for _ in 0..200 {
            let theta = phi.exp();
            let mut f = self.fixed_jet(&[theta], data)?;
            for &yi in &y {
                let j = exp_random_jet(theta, yi);
                f.grad[0] += j.d_psi[0];
                f.hess[(0, 0)] += j.d_psi_psi[(0, 0)];
            }
            let g = theta * f.grad[0];
            let h = theta * theta * f.hess[(0, 0)] + g;
            if g.abs() <= 1e-13 * data.n() as f64 {
                return Ok((theta, y));
            }
            if !(h < 0.0) {
                return Err(Error::Curvature("l_e(theta, c) is not concave in log theta".into()));
            }
            phi -= (g / h).clamp(-5.0, 5.0);
        }
        Err(Error::Convergence {
            context: "raw-scale censored exponential mode".into(),
            iterations: 200,
            grad_norm: f64::NAN,
            last_iterate: vec![phi.exp()],
        })
    }
}

impl Model for CensoredExponential {
    fn name(&self) -> &'static str {
        "censored_exp"
    }

    fn param_names(&self) -> Vec<String> {
        vec!["theta".into()]
    }

    fn param_domain(&self) -> Vec<ParamDomain> {
        vec![ParamDomain::Positive]
    }

    fn validate(&self, data: &Dataset) -> Result<()> {
        check_positive_obs(self.name(), data)?;
        if let Some(y) = data.y_obs().into_iter().find(|&y| y > self.c) {
            return Err(Error::Data(format!(
                "observed response {y} exceeds the censoring threshold {}",
                self.c
            )));
        }
        Ok(())
    }

    fn random_support(&self, _: &Dataset, _: usize) -> (f64, f64) {
        (self.c, f64::INFINITY)
    }

    fn fixed_term(&self, psi: &[f64], data: &Dataset) -> Result<f64> {
        Ok(exp_fixed_jet(psi[0], data.n_obs() as f64, data.y_obs_sum()).value)
    }

    fn random_term(&self, psi: &[f64], _: &Dataset, _: usize, y: f64) -> Result<f64> {
        Ok(-psi[0].ln() - y / psi[0])
    }

    fn fixed_jet(&self, psi: &[f64], data: &Dataset) -> Result<FixedJet> {
        Ok(exp_fixed_jet(psi[0], data.n_obs() as f64, data.y_obs_sum()))
    }

    fn random_jet(&self, psi: &[f64], _: &Dataset, _: usize, y: f64) -> Result<Jet> {
        Ok(exp_random_jet(psi[0], y))
    }

    fn random_r(&self, psi: &[f64], _: &Dataset, _: usize, y: f64) -> Result<RDerivs> {
        Ok([-psi[0].ln() - y / psi[0], -1.0 / psi[0], 0.0])
    }

    fn scale(&self) -> &dyn ScaleTransform {
        &self.scale
    }

    fn bartlett_scale(&self) -> Option<&dyn ScaleTransform> {
        Some(&self.scale)
    }

    fn closed_marginal_loglik(&self, psi: &[f64], data: &Dataset) -> Option<Result<f64>> {
        let theta = psi[0];
        let n_obs = data.n_obs() as f64;
        let n_mis = data.n_mis() as f64;
        Some(Ok(
            -n_obs * theta.ln() - data.y_obs_sum() / theta - n_mis * self.c / theta
        ))
    }

    fn canonical_mode(&self, psi: &[f64], data: &Dataset) -> Option<Result<Vec<f64>>> {
        Some(Ok(vec![psi[0] + self.c; data.n_mis()]))
    }

    fn mle_oracle(&self, data: &Dataset) -> Option<Result<Vec<f64>>> {
        let n_obs = data.n_obs() as f64;
        Some(Ok(vec![
            data.y_obs_mean() + data.n_mis() as f64 * self.c / n_obs,
        ]))
    }

    fn initial_psi(&self, data: &Dataset) -> Result<Vec<f64>> {
        self.validate(data)?;
        Ok(vec![data.y_obs_mean()])
    }

    fn initial_random(&self, _: &[f64], data: &Dataset, _: usize) -> f64 {
        self.c + data.y_obs_mean()
    }

    fn em(&self) -> Option<&dyn EmStep> {
        Some(self)
    }
}

impl EmStep for CensoredExponential {
    fn conditional_mean(&self, psi: &[f64], _: &Dataset, _: usize) -> Result<f64> {
        Ok(psi[0] + self.c)
    }

    fn m_step(&self, psi: &[f64], data: &Dataset) -> Result<Vec<f64>> {
        let n = data.n() as f64;
        let n_mis = data.n_mis() as f64;
        Ok(vec![(data.y_obs_sum() + n_mis * (psi[0] + self.c)) / n])
    }
}
