use crate::data::Dataset;
use crate::em::EmStep;
use crate::error::{Error, Result};
use crate::jet::{FixedJet, Jet};
use crate::model::{Model, NormalizingTransform, ParamDomain};
use crate::scale::{Identity, InverseSd, RDerivs, Rescaled, ScaleKind, ScaleTransform};

use super::mechanism::{logistic_jet, logistic_loglik};
use super::{covariate_column, gaussian_jet, gaussian_logpdf, ols, require_one_covariate};

static IDENTITY: Identity = Identity;

/// `y_i | x_i ~ N(beta0 + beta1 x_i, sigma2)` with responses missing at random.
///
/// With `with_mechanism`, `psi` also carries the logistic response-model
/// coefficients `(rho0, rho1, rho2)` and their log-likelihood enters `l_e`.
pub struct NormalRegression {
    with_mechanism: bool,
    scale: Rescaled<'static>,
}

impl Default for NormalRegression {
    fn default() -> Self {
        Self::new()
    }
}

impl NormalRegression {
    pub fn new() -> Self {
        Self::build(false)
    }

    pub fn with_mechanism() -> Self {
        Self::build(true)
    }

    fn build(with_mechanism: bool) -> Self {
        Self {
            with_mechanism,
            scale: Rescaled::new(
                Identity,
                InverseSd { variance_index: 2 },
                ScaleKind::Canonical,
                "y/sigma",
            ),
        }
    }

    fn mean(&self, psi: &[f64], x: f64) -> f64 {
        psi[0] + psi[1] * x
    }
}

impl Model for NormalRegression {
    fn name(&self) -> &'static str {
        "normal_reg"
    }

    fn param_names(&self) -> Vec<String> {
        let mut v: Vec<String> = ["beta0", "beta1", "sigma2"].map(String::from).into();
        if self.with_mechanism {
            v.extend(["rho0", "rho1", "rho2"].map(String::from));
        }
        v
    }

    fn param_domain(&self) -> Vec<ParamDomain> {
        let mut d = vec![ParamDomain::Real, ParamDomain::Real, ParamDomain::Positive];
        if self.with_mechanism {
            d.extend([ParamDomain::Real; 3]);
        }
        d
    }

    fn validate(&self, data: &Dataset) -> Result<()> {
        require_one_covariate(self.name(), data)?;
        if data.n_obs() < 3 {
            return Err(Error::Data(format!(
                "{} needs at least 3 observed responses, found {}",
                self.name(),
                data.n_obs()
            )));
        }
        Ok(())
    }

    fn fixed_term(&self, psi: &[f64], data: &Dataset) -> Result<f64> {
        let mut v: f64 = (0..data.n_obs())
            .map(|i| {
                let y = data.response()[i].expect("observed row");
                gaussian_logpdf(self.mean(psi, data.x(i, 0)), psi[2], y)
            })
            .sum();
        if self.with_mechanism {
            v += logistic_loglik(psi, 3, data);
        }
        Ok(v)
    }

    fn random_term(&self, psi: &[f64], data: &Dataset, i: usize, y: f64) -> Result<f64> {
        Ok(gaussian_logpdf(self.mean(psi, data.x_mis(i, 0)), psi[2], y))
    }

    fn fixed_jet(&self, psi: &[f64], data: &Dataset) -> Result<FixedJet> {
        let mut f = FixedJet::zero(psi.len());
        for i in 0..data.n_obs() {
            let j = gaussian_jet(psi, data.x(i, 0), data.response()[i].expect("observed row"));
            f.value += j.value;
            f.grad += &j.d_psi;
            f.hess += &j.d_psi_psi;
        }
        if self.with_mechanism {
            f.add_assign(&logistic_jet(psi, 3, data));
        }
        Ok(f)
    }

    fn random_jet(&self, psi: &[f64], data: &Dataset, i: usize, y: f64) -> Result<Jet> {
        Ok(gaussian_jet(psi, data.x_mis(i, 0), y))
    }

    fn random_r(&self, psi: &[f64], data: &Dataset, i: usize, y: f64) -> Result<RDerivs> {
        let mu = self.mean(psi, data.x_mis(i, 0));
        let s = psi[2];
        Ok([gaussian_logpdf(mu, s, y), -(y - mu) / s, -1.0 / s])
    }

    fn scale(&self) -> &dyn ScaleTransform {
        &self.scale
    }

    fn bartlett_scale(&self) -> Option<&dyn ScaleTransform> {
        Some(&IDENTITY)
    }

    fn closed_marginal_loglik(&self, psi: &[f64], data: &Dataset) -> Option<Result<f64>> {
        Some(self.fixed_term(psi, data))
    }

    fn canonical_mode(&self, psi: &[f64], data: &Dataset) -> Option<Result<Vec<f64>>> {
        Some(Ok((0..data.n_mis())
            .map(|i| self.mean(psi, data.x_mis(i, 0)))
            .collect()))
    }

    fn mle_oracle(&self, data: &Dataset) -> Option<Result<Vec<f64>>> {
        if self.with_mechanism {
            return None;
        }
        let x = covariate_column(data, 0..data.n_obs());
        Some(ols(&x, &data.y_obs()).map(|(b0, b1, ss)| vec![b0, b1, ss / data.n_obs() as f64]))
    }

    fn initial_psi(&self, data: &Dataset) -> Result<Vec<f64>> {
        self.validate(data)?;
        let x = covariate_column(data, 0..data.n_obs());
        let (b0, b1, ss) = ols(&x, &data.y_obs())?;
        let mut psi = vec![b0, b1, (ss / data.n_obs() as f64).max(1e-8)];
        if self.with_mechanism {
            psi.extend([0.0; 3]);
        }
        Ok(psi)
    }

    fn initial_random(&self, psi: &[f64], data: &Dataset, i: usize) -> f64 {
        self.mean(psi, data.x_mis(i, 0))
    }

    fn normalizing_transform(&self) -> Option<NormalizingTransform<'_>> {
        Some(NormalizingTransform {
            map: Box::new(Identity),
            approximate: false,
        })
    }

    fn em(&self) -> Option<&dyn EmStep> {
        if self.with_mechanism {
            None
        } else {
            Some(self)
        }
    }
}

impl EmStep for NormalRegression {
    fn conditional_mean(&self, psi: &[f64], data: &Dataset, i: usize) -> Result<f64> {
        Ok(self.mean(psi, data.x_mis(i, 0)))
    }

    fn m_step(&self, psi: &[f64], data: &Dataset) -> Result<Vec<f64>> {
        let n = data.n();
        let x = covariate_column(data, 0..n);
        let mut y = data.y_obs();
        let mis_mean: Vec<f64> = (0..data.n_mis())
            .map(|i| self.mean(psi, data.x_mis(i, 0)))
            .collect();
        y.extend_from_slice(&mis_mean);
        let (b0, b1, _) = ols(&x, &y)?;
        let mut ss = 0.0;
        for i in 0..n {
            let fitted = b0 + b1 * x[i];
            ss += (y[i] - fitted).powi(2);
            if i >= data.n_obs() {
                // E[(Y - fitted)^2] = (E[Y] - fitted)^2 + var(Y)
                ss += psi[2];
            }
        }
        Ok(vec![b0, b1, ss / n as f64])
    }
}
