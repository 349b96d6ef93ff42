//! Coordinate-wise transforms of the random parameters.
//!
//! A scale maps the natural random parameter `y` of coordinate `i` to `v`
//! and supplies `log|dy/dv|`. Scales may depend on the fixed parameters and
//! the dataset; every transform here is monotone increasing in `y`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::jet::{FixedJet, Jet};
use crate::numdiff;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleKind {
    /// The natural scale; zero log-Jacobian.
    Raw,
    /// Joint maximization on this scale gives the marginal MLE.
    Canonical,
    /// Curvature-standardized scale reproducing the Laplace-approximate MLE.
    WeakCanonical,
    /// Bartlett-regular building block (full real support) that is not
    /// itself known to be canonical.
    Base,
}

impl ScaleKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScaleKind::Raw => "raw",
            ScaleKind::Canonical => "canonical",
            ScaleKind::WeakCanonical => "weak_canonical",
            ScaleKind::Base => "base",
        }
    }
}

/// Value, first and second `v`-derivatives of a map at fixed `psi`.
pub type RDerivs = [f64; 3];

pub trait ScaleTransform: Send + Sync {
    fn kind(&self) -> ScaleKind;

    fn describe(&self) -> String;

    /// `v = g(y)` for random coordinate `i`.
    fn forward(&self, psi: &[f64], data: &Dataset, i: usize, y: f64) -> Result<f64>;

    /// `y = g^{-1}(v)`.
    fn inverse(&self, psi: &[f64], data: &Dataset, i: usize, v: f64) -> Result<f64>;

    /// `log|dy/dv|` evaluated at `y`.
    fn log_jacobian(&self, psi: &[f64], data: &Dataset, i: usize, y: f64) -> Result<f64>;

    /// Jet of `y = g^{-1}(psi, v)` in `(psi, v)`.
    fn inverse_jet(&self, psi: &[f64], data: &Dataset, i: usize, v: f64) -> Result<Jet>;

    /// Jet of `log|dy/dv|` as a function of `(psi, y)`.
    fn log_jacobian_jet(&self, psi: &[f64], data: &Dataset, i: usize, y: f64) -> Result<Jet>;

    /// `v`-derivatives of the inverse map only.
    fn inverse_r(&self, psi: &[f64], data: &Dataset, i: usize, v: f64) -> Result<RDerivs> {
        let j = self.inverse_jet(psi, data, i, v)?;
        Ok([j.value, j.d_r, j.d_rr])
    }

    /// `y`-derivatives of the log-Jacobian only.
    fn log_jacobian_r(&self, psi: &[f64], data: &Dataset, i: usize, y: f64) -> Result<RDerivs> {
        let j = self.log_jacobian_jet(psi, data, i, y)?;
        Ok([j.value, j.d_r, j.d_rr])
    }

    fn depends_on_psi(&self) -> bool;

    /// Image of the interval `(lo, hi)` up to positive rescaling; used to
    /// decide whether the transformed support is the whole real line.
    fn support_image(&self, lo: f64, hi: f64) -> (f64, f64);
}

impl<T: ScaleTransform + ?Sized> ScaleTransform for &T {
    fn kind(&self) -> ScaleKind {
        (**self).kind()
    }
    fn describe(&self) -> String {
        (**self).describe()
    }
    fn forward(&self, psi: &[f64], data: &Dataset, i: usize, y: f64) -> Result<f64> {
        (**self).forward(psi, data, i, y)
    }
    fn inverse(&self, psi: &[f64], data: &Dataset, i: usize, v: f64) -> Result<f64> {
        (**self).inverse(psi, data, i, v)
    }
    fn log_jacobian(&self, psi: &[f64], data: &Dataset, i: usize, y: f64) -> Result<f64> {
        (**self).log_jacobian(psi, data, i, y)
    }
    fn inverse_jet(&self, psi: &[f64], data: &Dataset, i: usize, v: f64) -> Result<Jet> {
        (**self).inverse_jet(psi, data, i, v)
    }
    fn log_jacobian_jet(&self, psi: &[f64], data: &Dataset, i: usize, y: f64) -> Result<Jet> {
        (**self).log_jacobian_jet(psi, data, i, y)
    }
    fn inverse_r(&self, psi: &[f64], data: &Dataset, i: usize, v: f64) -> Result<RDerivs> {
        (**self).inverse_r(psi, data, i, v)
    }
    fn log_jacobian_r(&self, psi: &[f64], data: &Dataset, i: usize, y: f64) -> Result<RDerivs> {
        (**self).log_jacobian_r(psi, data, i, y)
    }
    fn depends_on_psi(&self) -> bool {
        (**self).depends_on_psi()
    }
    fn support_image(&self, lo: f64, hi: f64) -> (f64, f64) {
        (**self).support_image(lo, hi)
    }
}

/// `v = y`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl ScaleTransform for Identity {
    fn kind(&self) -> ScaleKind {
        ScaleKind::Raw
    }
    fn describe(&self) -> String {
        "identity".into()
    }
    fn forward(&self, _: &[f64], _: &Dataset, _: usize, y: f64) -> Result<f64> {
        Ok(y)
    }
    fn inverse(&self, _: &[f64], _: &Dataset, _: usize, v: f64) -> Result<f64> {
        Ok(v)
    }
    fn log_jacobian(&self, _: &[f64], _: &Dataset, _: usize, _: f64) -> Result<f64> {
        Ok(0.0)
    }
    fn inverse_jet(&self, psi: &[f64], _: &Dataset, _: usize, v: f64) -> Result<Jet> {
        Ok(Jet::identity(psi.len(), v))
    }
    fn log_jacobian_jet(&self, psi: &[f64], _: &Dataset, _: usize, _: f64) -> Result<Jet> {
        Ok(Jet::constant(psi.len(), 0.0))
    }
    fn inverse_r(&self, _: &[f64], _: &Dataset, _: usize, v: f64) -> Result<RDerivs> {
        Ok([v, 1.0, 0.0])
    }
    fn log_jacobian_r(&self, _: &[f64], _: &Dataset, _: usize, _: f64) -> Result<RDerivs> {
        Ok([0.0, 0.0, 0.0])
    }
    fn depends_on_psi(&self) -> bool {
        false
    }
    fn support_image(&self, lo: f64, hi: f64) -> (f64, f64) {
        (lo, hi)
    }
}

/// `v = log(y - shift)` with support `y > shift`.
#[derive(Debug, Clone, Copy)]
pub struct LogShift {
    pub shift: f64,
    pub kind: ScaleKind,
}

impl LogShift {
    pub fn canonical(shift: f64) -> Self {
        Self {
            shift,
            kind: ScaleKind::Canonical,
        }
    }

    pub fn base(shift: f64) -> Self {
        Self {
            shift,
            kind: ScaleKind::Base,
        }
    }

    fn excess(&self, i: usize, y: f64) -> Result<f64> {
        let d = y - self.shift;
        if d > 0.0 && d.is_finite() {
            Ok(d)
        } else {
            Err(Error::domain(
                format!("y_mis[{i}]"),
                y,
                format!("log scale requires y > {}", self.shift),
            ))
        }
    }
}

impl ScaleTransform for LogShift {
    fn kind(&self) -> ScaleKind {
        self.kind
    }
    fn describe(&self) -> String {
        if self.shift == 0.0 {
            "log(y)".into()
        } else {
            format!("log(y - {})", self.shift)
        }
    }
    fn forward(&self, _: &[f64], _: &Dataset, i: usize, y: f64) -> Result<f64> {
        Ok(self.excess(i, y)?.ln())
    }
    fn inverse(&self, _: &[f64], _: &Dataset, i: usize, v: f64) -> Result<f64> {
        let e = v.exp();
        if e > 0.0 && e.is_finite() {
            Ok(self.shift + e)
        } else {
            Err(Error::domain(format!("v[{i}]"), v, "exp(v) over/underflows"))
        }
    }
    fn log_jacobian(&self, _: &[f64], _: &Dataset, i: usize, y: f64) -> Result<f64> {
        Ok(self.excess(i, y)?.ln())
    }
    fn inverse_jet(&self, psi: &[f64], data: &Dataset, i: usize, v: f64) -> Result<Jet> {
        let [y, d1, d2] = self.inverse_r(psi, data, i, v)?;
        let mut j = Jet::constant(psi.len(), y);
        j.d_r = d1;
        j.d_rr = d2;
        Ok(j)
    }
    fn log_jacobian_jet(&self, psi: &[f64], data: &Dataset, i: usize, y: f64) -> Result<Jet> {
        let [k, d1, d2] = self.log_jacobian_r(psi, data, i, y)?;
        let mut j = Jet::constant(psi.len(), k);
        j.d_r = d1;
        j.d_rr = d2;
        Ok(j)
    }
    fn inverse_r(&self, psi: &[f64], data: &Dataset, i: usize, v: f64) -> Result<RDerivs> {
        let y = self.inverse(psi, data, i, v)?;
        let e = y - self.shift;
        Ok([y, e, e])
    }
    fn log_jacobian_r(&self, _: &[f64], _: &Dataset, i: usize, y: f64) -> Result<RDerivs> {
        let d = self.excess(i, y)?;
        Ok([d.ln(), 1.0 / d, -1.0 / (d * d)])
    }
    fn depends_on_psi(&self) -> bool {
        false
    }
    fn support_image(&self, lo: f64, hi: f64) -> (f64, f64) {
        let map = |y: f64| {
            if y <= self.shift {
                f64::NEG_INFINITY
            } else {
                (y - self.shift).ln()
            }
        };
        (map(lo), map(hi))
    }
}

/// A positive multiplier `a_i(psi)` for [`Rescaled`] scales, given on the log scale.
pub trait ScaleFactor: Send + Sync {
    fn log_factor(&self, psi: &[f64], data: &Dataset, i: usize) -> Result<f64>;

    /// Jet of `log a_i(psi)`. Defaults to Richardson-refined central differences.
    fn log_factor_jet(&self, psi: &[f64], data: &Dataset, i: usize) -> Result<FixedJet> {
        let f = |z: &[f64]| self.log_factor(z, data, i);
        let value = f(psi)?;
        let grad = numdiff::try_richardson_gradient(f, psi)?;
        let hess = numdiff::try_richardson_hessian(f, psi)?;
        Ok(FixedJet { value, grad, hess })
    }
}

/// `v = a_i(psi) * b(y)` for a psi-independent base scale `b`.
pub struct Rescaled<'a> {
    base: Box<dyn ScaleTransform + 'a>,
    factor: Box<dyn ScaleFactor + 'a>,
    kind: ScaleKind,
    name: String,
}

impl std::fmt::Debug for Rescaled<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Rescaled")
            .field("kind", &self.kind)
            .field("name", &self.name)
            .finish_non_exhaustive()
    }
}

impl<'a> Rescaled<'a> {
    pub fn new(
        base: impl ScaleTransform + 'a,
        factor: impl ScaleFactor + 'a,
        kind: ScaleKind,
        name: impl Into<String>,
    ) -> Self {
        assert!(
            !base.depends_on_psi(),
            "Rescaled requires a psi-independent base scale"
        );
        Self {
            base: Box::new(base),
            factor: Box::new(factor),
            kind,
            name: name.into(),
        }
    }

    pub fn base(&self) -> &dyn ScaleTransform {
        self.base.as_ref()
    }

    pub fn factor(&self, psi: &[f64], data: &Dataset, i: usize) -> Result<f64> {
        Ok(self.factor.log_factor(psi, data, i)?.exp())
    }
}

impl ScaleTransform for Rescaled<'_> {
    fn kind(&self) -> ScaleKind {
        self.kind
    }
    fn describe(&self) -> String {
        self.name.clone()
    }
    fn forward(&self, psi: &[f64], data: &Dataset, i: usize, y: f64) -> Result<f64> {
        Ok(self.factor(psi, data, i)? * self.base.forward(psi, data, i, y)?)
    }
    fn inverse(&self, psi: &[f64], data: &Dataset, i: usize, v: f64) -> Result<f64> {
        let b = v / self.factor(psi, data, i)?;
        self.base.inverse(psi, data, i, b)
    }
    fn log_jacobian(&self, psi: &[f64], data: &Dataset, i: usize, y: f64) -> Result<f64> {
        Ok(self.base.log_jacobian(psi, data, i, y)? - self.factor.log_factor(psi, data, i)?)
    }
    fn inverse_jet(&self, psi: &[f64], data: &Dataset, i: usize, v: f64) -> Result<Jet> {
        let p = psi.len();
        let la = Jet::from_fixed(&self.factor.log_factor_jet(psi, data, i)?);
        // b(psi, v) = v * exp(-log a(psi))
        let b = Jet::identity(p, v).mul(&la.scale(-1.0).exp());
        let y_of_b = self.base.inverse_jet(psi, data, i, b.value)?;
        Ok(y_of_b.compose(&b))
    }
    fn log_jacobian_jet(&self, psi: &[f64], data: &Dataset, i: usize, y: f64) -> Result<Jet> {
        let la = Jet::from_fixed(&self.factor.log_factor_jet(psi, data, i)?);
        Ok(self.base.log_jacobian_jet(psi, data, i, y)?.add(&la.scale(-1.0)))
    }
    fn inverse_r(&self, psi: &[f64], data: &Dataset, i: usize, v: f64) -> Result<RDerivs> {
        let a = self.factor(psi, data, i)?;
        let [y, d1, d2] = self.base.inverse_r(psi, data, i, v / a)?;
        Ok([y, d1 / a, d2 / (a * a)])
    }
    fn log_jacobian_r(&self, psi: &[f64], data: &Dataset, i: usize, y: f64) -> Result<RDerivs> {
        let [k, d1, d2] = self.base.log_jacobian_r(psi, data, i, y)?;
        Ok([k - self.factor.log_factor(psi, data, i)?, d1, d2])
    }
    fn depends_on_psi(&self) -> bool {
        true
    }
    fn support_image(&self, lo: f64, hi: f64) -> (f64, f64) {
        self.base.support_image(lo, hi)
    }
}

/// `log a(psi) = -0.5 * log(psi[k])`, i.e. division by a standard deviation.
#[derive(Debug, Clone, Copy)]
pub struct InverseSd {
    pub variance_index: usize,
}

impl ScaleFactor for InverseSd {
    fn log_factor(&self, psi: &[f64], _: &Dataset, _: usize) -> Result<f64> {
        let s = psi[self.variance_index];
        if s > 0.0 {
            Ok(-0.5 * s.ln())
        } else {
            Err(Error::domain(
                format!("psi[{}]", self.variance_index),
                s,
                "variance must be positive",
            ))
        }
    }

    fn log_factor_jet(&self, psi: &[f64], data: &Dataset, i: usize) -> Result<FixedJet> {
        let value = self.log_factor(psi, data, i)?;
        let k = self.variance_index;
        let s = psi[k];
        let mut grad = DVector::zeros(psi.len());
        let mut hess = DMatrix::zeros(psi.len(), psi.len());
        grad[k] = -0.5 / s;
        hess[(k, k)] = 0.5 / (s * s);
        Ok(FixedJet { value, grad, hess })
    }
}

/// Validates every coordinate of a random vector through `forward`.
pub fn forward_all(
    scale: &dyn ScaleTransform,
    psi: &[f64],
    data: &Dataset,
    y: &[f64],
) -> Result<Vec<f64>> {
    y.iter()
        .enumerate()
        .map(|(i, &yi)| scale.forward(psi, data, i, yi))
        .collect()
}

pub fn inverse_all(
    scale: &dyn ScaleTransform,
    psi: &[f64],
    data: &Dataset,
    v: &[f64],
) -> Result<Vec<f64>> {
    v.iter()
        .enumerate()
        .map(|(i, &vi)| scale.inverse(psi, data, i, vi))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data() -> Dataset {
        Dataset::without_covariates(&[1.0], 2).unwrap()
    }

    #[test]
    fn identity_has_zero_log_jacobian() {
        let d = data();
        assert_eq!(Identity.log_jacobian(&[1.0], &d, 0, 3.2).unwrap(), 0.0);
        assert_eq!(Identity.kind(), ScaleKind::Raw);
    }

    #[test]
    fn log_shift_round_trip_and_boundary() {
        let d = data();
        let s = LogShift::canonical(3.0);
        let v = s.forward(&[], &d, 0, 4.5).unwrap();
        assert!((s.inverse(&[], &d, 0, v).unwrap() - 4.5).abs() < 1e-15);
        assert!(matches!(s.forward(&[], &d, 0, 3.0), Err(Error::Domain { .. })));
        assert_eq!(s.support_image(3.0, f64::INFINITY), (f64::NEG_INFINITY, f64::INFINITY));
    }

    #[test]
    fn linear_scale_offsets_log_jacobian() {
        struct Two;
        impl ScaleFactor for Two {
            fn log_factor(&self, _: &[f64], _: &Dataset, _: usize) -> Result<f64> {
                Ok(2.0_f64.ln())
            }
        }
        let d = data();
        let s = Rescaled::new(Identity, Two, ScaleKind::Canonical, "2y");
        assert!((s.forward(&[1.0], &d, 0, 1.5).unwrap() - 3.0).abs() < 1e-15);
        assert!((s.log_jacobian(&[1.0], &d, 0, 1.5).unwrap() + 2.0_f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn rescaled_inverse_jet_matches_finite_differences() {
        let d = data();
        let s = Rescaled::new(
            LogShift::base(1.0),
            InverseSd { variance_index: 1 },
            ScaleKind::Canonical,
            "log(y-1)/sigma",
        );
        let psi = [0.3, 2.5];
        let v = 0.4;
        let j = s.inverse_jet(&psi, &d, 0, v).unwrap();
        let f = |z: &[f64]| s.inverse(&z[..2], &d, 0, z[2]);
        let z = [psi[0], psi[1], v];
        let g = numdiff::try_gradient(f, &z).unwrap();
        let h = numdiff::try_hessian(f, &z).unwrap();
        assert!((j.d_psi[1] - g[1]).abs() < 1e-7);
        assert!((j.d_r - g[2]).abs() < 1e-7);
        assert!((j.d_psi_psi[(1, 1)] - h[(1, 1)]).abs() < 1e-5);
        assert!((j.d_psi_r[1] - h[(1, 2)]).abs() < 1e-5);
        assert!((j.d_rr - h[(2, 2)]).abs() < 1e-5);
    }
}
