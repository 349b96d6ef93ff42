use nalgebra::{DMatrix, DVector};

use crate::data::Dataset;
use crate::em::EmStep;
use crate::error::{Error, Result};
use crate::jet::{FixedJet, Jet};
use crate::model::{Model, NormalizingTransform, ParamDomain};
use crate::scale::{Identity, LogShift, RDerivs, ScaleTransform};

static SCALE: LogShift = LogShift {
    shift: 0.0,
    kind: crate::scale::ScaleKind::Canonical,
};

/// `y_i ~ Exp(mean theta)` with an ignorable missingness pattern.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExponentialMean;

pub(crate) fn exp_fixed_jet(theta: f64, n_obs: f64, sum: f64) -> FixedJet {
    FixedJet {
        value: -n_obs * theta.ln() - sum / theta,
        grad: DVector::from_element(1, -n_obs / theta + sum / (theta * theta)),
        hess: DMatrix::from_element(1, 1, n_obs / (theta * theta) - 2.0 * sum / theta.powi(3)),
    }
}

pub(crate) fn exp_random_jet(theta: f64, y: f64) -> Jet {
    let mut j = Jet::constant(1, -theta.ln() - y / theta);
    j.d_psi[0] = -1.0 / theta + y / (theta * theta);
    j.d_r = -1.0 / theta;
    j.d_psi_psi[(0, 0)] = 1.0 / (theta * theta) - 2.0 * y / theta.powi(3);
    j.d_psi_r[0] = 1.0 / (theta * theta);
    j
}

pub(crate) fn check_positive_obs(name: &str, data: &Dataset) -> Result<()> {
    if data.n_obs() == 0 {
        return Err(Error::Data(format!("{name}: no observed responses")));
    }
    if let Some(y) = data.y_obs().into_iter().find(|&y| !(y > 0.0)) {
        return Err(Error::Data(format!(
            "{name}: observed response {y} is not positive"
        )));
    }
    Ok(())
}

impl Model for ExponentialMean {
    fn name(&self) -> &'static str {
        "exp_mean"
    }

    fn param_names(&self) -> Vec<String> {
        vec!["theta".into()]
    }

    fn param_domain(&self) -> Vec<ParamDomain> {
        vec![ParamDomain::Positive]
    }

    fn validate(&self, data: &Dataset) -> Result<()> {
        check_positive_obs(self.name(), data)
    }

    fn random_support(&self, _: &Dataset, _: usize) -> (f64, f64) {
        (0.0, f64::INFINITY)
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
        &SCALE
    }

    fn bartlett_scale(&self) -> Option<&dyn ScaleTransform> {
        Some(&SCALE)
    }

    fn closed_marginal_loglik(&self, psi: &[f64], data: &Dataset) -> Option<Result<f64>> {
        Some(self.fixed_term(psi, data))
    }

    fn canonical_mode(&self, psi: &[f64], data: &Dataset) -> Option<Result<Vec<f64>>> {
        Some(Ok(vec![psi[0]; data.n_mis()]))
    }

    fn mle_oracle(&self, data: &Dataset) -> Option<Result<Vec<f64>>> {
        Some(Ok(vec![data.y_obs_mean()]))
    }

    fn initial_psi(&self, data: &Dataset) -> Result<Vec<f64>> {
        self.validate(data)?;
        Ok(vec![data.y_obs_mean()])
    }

    fn initial_random(&self, _: &[f64], data: &Dataset, _: usize) -> f64 {
        data.y_obs_mean()
    }

    fn normalizing_transform(&self) -> Option<NormalizingTransform<'_>> {
        Some(NormalizingTransform {
            map: Box::new(Identity),
            approximate: true,
        })
    }

    fn em(&self) -> Option<&dyn EmStep> {
        Some(self)
    }
}

impl EmStep for ExponentialMean {
    fn conditional_mean(&self, psi: &[f64], _: &Dataset, _: usize) -> Result<f64> {
        Ok(psi[0])
    }

    fn m_step(&self, psi: &[f64], data: &Dataset) -> Result<Vec<f64>> {
        let n = data.n() as f64;
        Ok(vec![(data.y_obs_sum() + data.n_mis() as f64 * psi[0]) / n])
    }
}
