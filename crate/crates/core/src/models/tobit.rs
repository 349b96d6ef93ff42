use std::f64::consts::{PI, SQRT_2};

use statrs::function::erf::erfc;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::model::{Model, ParamDomain};
use crate::scale::{LogShift, RDerivs, Rescaled, ScaleFactor, ScaleKind, ScaleTransform};

use super::{covariate_column, gaussian_jet, gaussian_logpdf, ols, require_one_covariate};

/// Fixed design `x_i = -1 + 2i/n`, `i = 1..n`.
pub fn design(n: usize) -> Vec<f64> {
    (1..=n).map(|i| -1.0 + 2.0 * i as f64 / n as f64).collect()
}

/// `log Phi(z)`, accurate in the far left tail.
pub(crate) fn log_norm_cdf(z: f64) -> f64 {
    if z > -30.0 {
        (0.5 * erfc(-z / SQRT_2)).ln()
    } else {
        log_norm_cdf_tail(z)
    }
}

/// Asymptotic series, valid for large negative `z`.
fn log_norm_cdf_tail(z: f64) -> f64 {
    let z2 = z * z;
    -0.5 * z2 - (-z).ln() - 0.5 * (2.0 * PI).ln() + (1.0 - 1.0 / z2 + 3.0 / (z2 * z2)).ln()
}

/// `exp(b~)` for `b = log(y - c)` with `y ~ N(mu, s)` truncated to `y > c`.
fn mode_excess(d: f64, s: f64) -> f64 {
    let r = (d * d + 4.0 * s).sqrt();
    if d >= 0.0 {
        0.5 * (d + r)
    } else {
        2.0 * s / (r - d)
    }
}

/// Predictive density of `b = log(y - c)` at its mode: `a_i(psi) = f(b~_i | y_i > c)`.
///
/// Rescaling `b` by this factor makes the joint maximum of the h-likelihood
/// reproduce the exact marginal MLE.
#[derive(Debug, Clone, Copy)]
pub struct TobitCanonicalFactor {
    pub c: f64,
}

impl TobitCanonicalFactor {
    fn pieces(&self, psi: &[f64], data: &Dataset, i: usize) -> Result<(f64, f64, f64)> {
        let s = psi[2];
        if !(s > 0.0) {
            return Err(Error::domain("sigma2", s, "must be positive"));
        }
        let d = psi[0] + psi[1] * data.x_mis(i, 0) - self.c;
        Ok((d, s, mode_excess(d, s)))
    }
}

impl ScaleFactor for TobitCanonicalFactor {
    fn log_factor(&self, psi: &[f64], data: &Dataset, i: usize) -> Result<f64> {
        let (d, s, e) = self.pieces(psi, data, i)?;
        let log_fb = -0.5 * (2.0 * PI * s).ln() - (e - d).powi(2) / (2.0 * s) + e.ln();
        Ok(log_fb - log_norm_cdf(d / s.sqrt()))
    }
}

/// `y_i | x_i ~ N(beta0 + beta1 x_i, sigma2)`, with `y_i` missing exactly when `y_i > c`.
pub struct Tobit {
    pub c: f64,
    base: LogShift,
    scale: Rescaled<'static>,
}

impl Tobit {
    pub fn new(c: f64) -> Self {
        assert!(c.is_finite(), "censoring threshold must be finite");
        Self {
            c,
            base: LogShift::base(c),
            scale: Rescaled::new(
                LogShift::base(c),
                TobitCanonicalFactor { c },
                ScaleKind::Canonical,
                format!("a(psi) * log(y - {c})"),
            ),
        }
    }

    /// The psi-independent scale `b = log(y - c)`.
    pub fn base_scale(&self) -> &LogShift {
        &self.base
    }

    fn mean(&self, psi: &[f64], x: f64) -> f64 {
        psi[0] + psi[1] * x
    }
}

impl Model for Tobit {
    fn name(&self) -> &'static str {
        "tobit"
    }

    fn param_names(&self) -> Vec<String> {
        ["beta0", "beta1", "sigma2"].map(String::from).into()
    }

    fn param_domain(&self) -> Vec<ParamDomain> {
        vec![ParamDomain::Real, ParamDomain::Real, ParamDomain::Positive]
    }

    fn validate(&self, data: &Dataset) -> Result<()> {
        require_one_covariate(self.name(), data)?;
        if data.n_obs() < 3 {
            return Err(Error::Data(format!(
                "tobit needs at least 3 observed responses, found {}",
                data.n_obs()
            )));
        }
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
        Ok((0..data.n_obs())
            .map(|i| {
                let y = data.response()[i].expect("observed row");
                gaussian_logpdf(self.mean(psi, data.x(i, 0)), psi[2], y)
            })
            .sum())
    }

    fn random_term(&self, psi: &[f64], data: &Dataset, i: usize, y: f64) -> Result<f64> {
        Ok(gaussian_logpdf(self.mean(psi, data.x_mis(i, 0)), psi[2], y))
    }

    fn fixed_jet(&self, psi: &[f64], data: &Dataset) -> Result<crate::jet::FixedJet> {
        let mut f = crate::jet::FixedJet::zero(psi.len());
        for i in 0..data.n_obs() {
            let j = gaussian_jet(psi, data.x(i, 0), data.response()[i].expect("observed row"));
            f.value += j.value;
            f.grad += &j.d_psi;
            f.hess += &j.d_psi_psi;
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
        Some(&self.base)
    }

    fn closed_marginal_loglik(&self, psi: &[f64], data: &Dataset) -> Option<Result<f64>> {
        let sd = psi[2].sqrt();
        let censored: f64 = (0..data.n_mis())
            .map(|i| log_norm_cdf((self.mean(psi, data.x_mis(i, 0)) - self.c) / sd))
            .sum();
        Some(self.fixed_term(psi, data).map(|v| v + censored))
    }

    fn canonical_mode(&self, psi: &[f64], data: &Dataset) -> Option<Result<Vec<f64>>> {
        Some(
            (0..data.n_mis())
                .map(|i| {
                    let d = self.mean(psi, data.x_mis(i, 0)) - self.c;
                    Ok(self.c + mode_excess(d, psi[2]))
                })
                .collect(),
        )
    }

    fn initial_psi(&self, data: &Dataset) -> Result<Vec<f64>> {
        self.validate(data)?;
        let x = covariate_column(data, 0..data.n_obs());
        let (b0, b1, ss) = ols(&x, &data.y_obs())?;
        Ok(vec![b0, b1, (ss / data.n_obs() as f64).max(1e-8)])
    }

    fn initial_random(&self, psi: &[f64], _: &Dataset, _: usize) -> f64 {
        self.c + psi[2].sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ContinuousCDF, Normal};

    #[test]
    fn log_norm_cdf_matches_reference_and_tail() {
        let n = Normal::standard();
        for z in [-5.0, -1.0, 0.0, 0.7, 3.0] {
            assert!((log_norm_cdf(z) - n.cdf(z).ln()).abs() < 1e-12);
        }
        assert!((log_norm_cdf_tail(-25.0) - log_norm_cdf(-25.0)).abs() < 1e-7);
        assert!(log_norm_cdf(-60.0).is_finite());
    }

    #[test]
    fn mode_excess_solves_first_order_condition() {
        // d/db [ -(e^b - d)^2/(2s) + b ] = 0  <=>  e^b (e^b - d) = s
        for (d, s) in [(1.5, 0.3), (-4.0, 1.0), (0.0, 2.0), (-40.0, 0.5)] {
            let e = mode_excess(d, s);
            assert!((e * (e - d) - s).abs() < 1e-12 * s.max(1.0), "d={d}");
        }
    }

    #[test]
    fn design_is_the_fixed_grid() {
        let x = design(4);
        assert_eq!(x, vec![-0.5, 0.0, 0.5, 1.0]);
    }
}
