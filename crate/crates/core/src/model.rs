//! The model interface consumed by the likelihood, solver and inference layers.
//!
//! The extended log-likelihood splits as
//! `l_e(psi, y) = fixed_term(psi) + sum_i random_term(psi, i, y_i)`,
//! one term per random coordinate. Every shipped model has this form, so the
//! random-random information block is diagonal.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::em::EmStep;
use crate::error::{Error, Result};
use crate::jet::{FixedJet, Jet};
use crate::numdiff;
use crate::scale::{RDerivs, ScaleTransform};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamDomain {
    Real,
    Positive,
}

/// Transform `z = M(y_mis)` under which the predictive law is (near) normal.
pub struct NormalizingTransform<'a> {
    pub map: Box<dyn ScaleTransform + 'a>,
    /// `false` when normality is exact.
    pub approximate: bool,
}

pub trait Model: Send + Sync {
    fn name(&self) -> &'static str;

    fn param_names(&self) -> Vec<String>;

    fn param_domain(&self) -> Vec<ParamDomain>;

    fn param_dim(&self) -> usize {
        self.param_names().len()
    }

    /// Checks that the dataset matches the model's structure.
    fn validate(&self, data: &Dataset) -> Result<()>;

    /// Number of random coordinates.
    fn n_random(&self, data: &Dataset) -> usize {
        data.n_mis()
    }

    /// Open support `(lo, hi)` of random coordinate `i` on the natural scale.
    fn random_support(&self, _data: &Dataset, _i: usize) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }

    /// Terms of `l_e` that do not involve the random coordinates.
    fn fixed_term(&self, psi: &[f64], data: &Dataset) -> Result<f64>;

    /// Contribution of random coordinate `i` at natural value `y`.
    fn random_term(&self, psi: &[f64], data: &Dataset, i: usize, y: f64) -> Result<f64>;

    fn fixed_jet(&self, psi: &[f64], data: &Dataset) -> Result<FixedJet> {
        let f = |z: &[f64]| self.fixed_term(z, data);
        Ok(FixedJet {
            value: f(psi)?,
            grad: numdiff::try_richardson_gradient(f, psi)?,
            hess: numdiff::try_richardson_hessian(f, psi)?,
        })
    }

    /// Jet of `random_term` in `(psi, y)`.
    fn random_jet(&self, psi: &[f64], data: &Dataset, i: usize, y: f64) -> Result<Jet> {
        let p = psi.len();
        let f = |z: &[f64]| self.random_term(&z[..p], data, i, z[p]);
        let mut z = psi.to_vec();
        z.push(y);
        let value = f(&z)?;
        let g = numdiff::try_richardson_gradient(f, &z)?;
        let h = numdiff::try_richardson_hessian(f, &z)?;
        Ok(Jet {
            value,
            d_psi: g.rows(0, p).into_owned(),
            d_r: g[p],
            d_psi_psi: h.view((0, 0), (p, p)).into_owned(),
            d_psi_r: h.view((0, p), (p, 1)).column(0).into_owned(),
            d_rr: h[(p, p)],
        })
    }

    /// `y`-derivatives of `random_term` at fixed `psi`.
    fn random_r(&self, psi: &[f64], data: &Dataset, i: usize, y: f64) -> Result<RDerivs> {
        let j = self.random_jet(psi, data, i, y)?;
        Ok([j.value, j.d_r, j.d_rr])
    }

    /// The declared h-likelihood scale.
    fn scale(&self) -> &dyn ScaleTransform;

    /// A psi-independent scale with full real support, used to build the
    /// weak canonical scale. `None` when the model offers no such path.
    fn bartlett_scale(&self) -> Option<&dyn ScaleTransform> {
        None
    }

    /// Exact marginal log-likelihood, when available in closed form.
    fn closed_marginal_loglik(&self, _psi: &[f64], _data: &Dataset) -> Option<Result<f64>> {
        None
    }

    /// Closed-form maximizer of `H(psi, y)` over the random coordinates on the
    /// natural scale, when available.
    fn canonical_mode(&self, _psi: &[f64], _data: &Dataset) -> Option<Result<Vec<f64>>> {
        None
    }

    /// Closed-form marginal MLE, when available.
    fn mle_oracle(&self, _data: &Dataset) -> Option<Result<Vec<f64>>> {
        None
    }

    /// Complete-case starting value for the fixed parameters.
    fn initial_psi(&self, data: &Dataset) -> Result<Vec<f64>>;

    /// Starting value for random coordinate `i` on the natural scale.
    fn initial_random(&self, psi: &[f64], data: &Dataset, i: usize) -> f64;

    fn normalizing_transform(&self) -> Option<NormalizingTransform<'_>> {
        None
    }

    fn em(&self) -> Option<&dyn EmStep> {
        None
    }
}

/// Validates length, finiteness and domain of `psi`.
pub fn check_psi(model: &dyn Model, psi: &[f64]) -> Result<()> {
    let names = model.param_names();
    if psi.len() != names.len() {
        return Err(Error::dimension("psi", psi.len(), names.len()));
    }
    for ((v, name), dom) in psi.iter().zip(&names).zip(model.param_domain()) {
        if !v.is_finite() {
            return Err(Error::domain(name.as_str(), *v, "must be finite"));
        }
        if dom == ParamDomain::Positive && *v <= 0.0 {
            return Err(Error::domain(name.as_str(), *v, "must be positive"));
        }
    }
    Ok(())
}

/// Rejects `y` outside the open support of coordinate `i`.
pub fn check_support(model: &dyn Model, data: &Dataset, i: usize, y: f64) -> Result<()> {
    let (lo, hi) = model.random_support(data, i);
    if y > lo && y < hi && y.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(
            format!("y_mis[{i}]"),
            y,
            format!("support is ({lo}, {hi})"),
        ))
    }
}
