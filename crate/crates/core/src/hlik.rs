//! Extended likelihood and h-likelihood evaluation.
//!
//! An [`Objective`] pairs a model with two scales: the *Jacobian scale*,
//! whose `log|dy/dv|` is added to `l_e`, and the *coordinate scale*, in
//! which the random parameters are expressed. Taking both equal gives
//! `h(psi, v)`; taking the identity as coordinate scale gives `H(psi, y)`,
//! the same function written on the natural scale.

use nalgebra::DVector;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::jet::{FixedJet, Jet};
use crate::model::{check_psi, check_support, Model};
use crate::scale::{Identity, RDerivs, ScaleTransform};

static IDENTITY: Identity = Identity;

#[derive(Clone, Copy)]
pub struct Objective<'a> {
    pub model: &'a dyn Model,
    pub data: &'a Dataset,
    jacobian: Option<&'a dyn ScaleTransform>,
    coords: &'a dyn ScaleTransform,
}

impl<'a> Objective<'a> {
    /// `h(psi, v)` on `scale`.
    pub fn on_scale(model: &'a dyn Model, scale: &'a dyn ScaleTransform, data: &'a Dataset) -> Self {
        Self {
            model,
            data,
            jacobian: Some(scale),
            coords: scale,
        }
    }

    /// `H(psi, y)`: the h-likelihood on `scale` written in natural coordinates.
    pub fn in_y(model: &'a dyn Model, scale: &'a dyn ScaleTransform, data: &'a Dataset) -> Self {
        Self {
            model,
            data,
            jacobian: Some(scale),
            coords: &IDENTITY,
        }
    }

    /// The h-likelihood on `scale` expressed in the coordinates of `coords`.
    pub fn with_coords(
        model: &'a dyn Model,
        scale: &'a dyn ScaleTransform,
        coords: &'a dyn ScaleTransform,
        data: &'a Dataset,
    ) -> Self {
        Self {
            model,
            data,
            jacobian: Some(scale),
            coords,
        }
    }

    /// `l_e(psi, y)` with no Jacobian.
    pub fn extended(model: &'a dyn Model, data: &'a Dataset) -> Self {
        Self {
            model,
            data,
            jacobian: None,
            coords: &IDENTITY,
        }
    }

    pub fn coords(&self) -> &'a dyn ScaleTransform {
        self.coords
    }

    pub fn p(&self) -> usize {
        self.model.param_dim()
    }

    pub fn m(&self) -> usize {
        self.model.n_random(self.data)
    }

    pub fn to_y(&self, psi: &[f64], i: usize, r: f64) -> Result<f64> {
        self.coords.inverse(psi, self.data, i, r)
    }

    pub fn from_y(&self, psi: &[f64], i: usize, y: f64) -> Result<f64> {
        self.coords.forward(psi, self.data, i, y)
    }

    pub fn check(&self, psi: &[f64], r: &[f64]) -> Result<()> {
        check_psi(self.model, psi)?;
        if r.len() != self.m() {
            return Err(Error::dimension("random vector", r.len(), self.m()));
        }
        Ok(())
    }

    pub fn fixed_value(&self, psi: &[f64]) -> Result<f64> {
        self.model.fixed_term(psi, self.data)
    }

    pub fn fixed_jet(&self, psi: &[f64]) -> Result<FixedJet> {
        self.model.fixed_jet(psi, self.data)
    }

    /// Contribution of coordinate `i` at coordinate value `r`.
    pub fn coord_value(&self, psi: &[f64], i: usize, r: f64) -> Result<f64> {
        let y = self.to_y(psi, i, r)?;
        check_support(self.model, self.data, i, y)?;
        let mut v = self.model.random_term(psi, self.data, i, y)?;
        if let Some(s) = self.jacobian {
            v += s.log_jacobian(psi, self.data, i, y)?;
        }
        Ok(v)
    }

    /// Value and first two `r`-derivatives of coordinate `i` at fixed `psi`.
    pub fn coord_r(&self, psi: &[f64], i: usize, r: f64) -> Result<RDerivs> {
        let [y, t1, t2] = self.coords.inverse_r(psi, self.data, i, r)?;
        check_support(self.model, self.data, i, y)?;
        let [mut l0, mut l1, mut l2] = self.model.random_r(psi, self.data, i, y)?;
        if let Some(s) = self.jacobian {
            let [k0, k1, k2] = s.log_jacobian_r(psi, self.data, i, y)?;
            l0 += k0;
            l1 += k1;
            l2 += k2;
        }
        Ok([l0, l1 * t1, l2 * t1 * t1 + l1 * t2])
    }

    /// Full jet of coordinate `i` in `(psi, r)`.
    pub fn coord_jet(&self, psi: &[f64], i: usize, r: f64) -> Result<Jet> {
        let t = self.coords.inverse_jet(psi, self.data, i, r)?;
        let y = t.value;
        check_support(self.model, self.data, i, y)?;
        let mut l = self.model.random_jet(psi, self.data, i, y)?;
        if let Some(s) = self.jacobian {
            l = l.add(&s.log_jacobian_jet(psi, self.data, i, y)?);
        }
        Ok(l.compose(&t))
    }

    pub fn value(&self, psi: &[f64], r: &[f64]) -> Result<f64> {
        self.check(psi, r)?;
        let mut total = self.fixed_value(psi)?;
        for (i, &ri) in r.iter().enumerate() {
            total += self.coord_value(psi, i, ri)?;
        }
        Ok(total)
    }

    /// Value, `psi`-gradient and random-coordinate gradient.
    pub fn value_and_grad(&self, psi: &[f64], r: &[f64]) -> Result<HLikValue> {
        self.check(psi, r)?;
        let f = self.fixed_jet(psi)?;
        let mut value = f.value;
        let mut grad_psi = f.grad;
        let mut grad_v = DVector::zeros(r.len());
        for (i, &ri) in r.iter().enumerate() {
            let j = self.coord_jet(psi, i, ri)?;
            value += j.value;
            grad_psi += &j.d_psi;
            grad_v[i] = j.d_r;
        }
        Ok(HLikValue {
            value,
            grad_psi,
            grad_v,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HLikValue {
    pub value: f64,
    pub grad_psi: DVector<f64>,
    pub grad_v: DVector<f64>,
}

/// `l_e(psi, y_mis)`.
pub fn extended_loglik(model: &dyn Model, psi: &[f64], y_mis: &[f64], data: &Dataset) -> Result<f64> {
    Objective::extended(model, data).value(psi, y_mis)
}

/// `h(psi, v)` on the model's declared scale, with gradients.
pub fn hlik(model: &dyn Model, psi: &[f64], v: &[f64], data: &Dataset) -> Result<HLikValue> {
    Objective::on_scale(model, model.scale(), data).value_and_grad(psi, v)
}

/// `h(psi, v)` on an explicit scale, value only.
pub fn hlik_on(
    model: &dyn Model,
    scale: &dyn ScaleTransform,
    psi: &[f64],
    v: &[f64],
    data: &Dataset,
) -> Result<f64> {
    Objective::on_scale(model, scale, data).value(psi, v)
}

/// `H(psi, y)` for the model's declared scale.
pub fn hlik_in_y(model: &dyn Model, psi: &[f64], y_mis: &[f64], data: &Dataset) -> Result<f64> {
    Objective::in_y(model, model.scale(), data).value(psi, y_mis)
}
