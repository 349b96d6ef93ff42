use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::jet::{FixedJet, Jet};
use crate::model::{Model, NormalizingTransform, ParamDomain};
use crate::scale::{Identity, RDerivs, Rescaled, ScaleFactor, ScaleKind, ScaleTransform};

static IDENTITY: Identity = Identity;

/// Balanced one-way random-effects model
/// `y_ij = mu + u_i + e_ij`, `u_i ~ N(0, lambda2)`, `e_ij ~ N(0, sigma2)`.
///
/// Rows are group-major with the group index in covariate column 0; every
/// response is observed and the random coordinates are the `u_i`.
pub struct OneWayMixed {
    pub q: usize,
    pub n_per_group: usize,
    scale: Rescaled<'static>,
}

/// `sqrt((sigma2 + n lambda2) / (sigma2 lambda2))`, the posterior precision root of `u_i`.
#[derive(Debug, Clone, Copy)]
pub struct PosteriorPrecisionRoot {
    pub n_per_group: usize,
}

impl ScaleFactor for PosteriorPrecisionRoot {
    fn log_factor(&self, psi: &[f64], _: &Dataset, _: usize) -> Result<f64> {
        let (a, l) = (psi[1], psi[2]);
        let n = self.n_per_group as f64;
        Ok(0.5 * ((a + n * l).ln() - a.ln() - l.ln()))
    }

    fn log_factor_jet(&self, psi: &[f64], data: &Dataset, i: usize) -> Result<FixedJet> {
        let (a, l) = (psi[1], psi[2]);
        let n = self.n_per_group as f64;
        let t = a + n * l;
        let mut grad = DVector::zeros(3);
        let mut hess = DMatrix::zeros(3, 3);
        grad[1] = 0.5 * (1.0 / t - 1.0 / a);
        grad[2] = 0.5 * (n / t - 1.0 / l);
        hess[(1, 1)] = 0.5 * (1.0 / (a * a) - 1.0 / (t * t));
        hess[(1, 2)] = -0.5 * n / (t * t);
        hess[(2, 1)] = hess[(1, 2)];
        hess[(2, 2)] = 0.5 * (1.0 / (l * l) - n * n / (t * t));
        Ok(FixedJet {
            value: self.log_factor(psi, data, i)?,
            grad,
            hess,
        })
    }
}

impl OneWayMixed {
    pub fn new(q: usize, n_per_group: usize) -> Self {
        Self {
            q,
            n_per_group,
            scale: Rescaled::new(
                Identity,
                PosteriorPrecisionRoot { n_per_group },
                ScaleKind::Canonical,
                "u * sqrt((sigma2 + n lambda2)/(sigma2 lambda2))",
            ),
        }
    }

    /// Mean and within sum of squares of group `i`.
    fn group_stats(&self, data: &Dataset, i: usize) -> (f64, f64) {
        let n = self.n_per_group;
        let ys = data.response()[i * n..(i + 1) * n]
            .iter()
            .map(|y| y.expect("all responses observed"));
        let mean = ys.clone().sum::<f64>() / n as f64;
        let ss = ys.map(|y| (y - mean).powi(2)).sum();
        (mean, ss)
    }

    fn between_within(&self, data: &Dataset) -> (f64, f64, f64) {
        let mut means = Vec::with_capacity(self.q);
        let mut ssw = 0.0;
        for i in 0..self.q {
            let (m, ss) = self.group_stats(data, i);
            means.push(m);
            ssw += ss;
        }
        let grand = means.iter().sum::<f64>() / self.q as f64;
        let ssb = self.n_per_group as f64 * means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
        (grand, ssw, ssb)
    }
}

impl Model for OneWayMixed {
    fn name(&self) -> &'static str {
        "mixed_oneway"
    }

    fn param_names(&self) -> Vec<String> {
        ["mu", "sigma2", "lambda2"].map(String::from).into()
    }

    fn param_domain(&self) -> Vec<ParamDomain> {
        vec![ParamDomain::Real, ParamDomain::Positive, ParamDomain::Positive]
    }

    fn validate(&self, data: &Dataset) -> Result<()> {
        if self.q < 2 || self.n_per_group < 2 {
            return Err(Error::Data(
                "one-way model needs at least 2 groups of at least 2 rows".into(),
            ));
        }
        if data.n() != self.q * self.n_per_group {
            return Err(Error::dimension("rows", data.n(), self.q * self.n_per_group));
        }
        if data.n_mis() != 0 {
            return Err(Error::Data("one-way model requires every response to be observed".into()));
        }
        if data.n_covariates() != 1 {
            return Err(Error::Data("one-way model expects the group index in column 0".into()));
        }
        for r in 0..data.n() {
            let want = (r / self.n_per_group) as f64;
            if data.x(r, 0) != want {
                return Err(Error::Data(format!(
                    "row {r} has group {} but rows must be group-major (expected {want})",
                    data.x(r, 0)
                )));
            }
        }
        Ok(())
    }

    fn n_random(&self, _: &Dataset) -> usize {
        self.q
    }

    fn fixed_term(&self, _: &[f64], _: &Dataset) -> Result<f64> {
        Ok(0.0)
    }

    fn random_term(&self, psi: &[f64], data: &Dataset, i: usize, u: f64) -> Result<f64> {
        Ok(self.random_r(psi, data, i, u)?[0])
    }

    fn fixed_jet(&self, psi: &[f64], _: &Dataset) -> Result<FixedJet> {
        Ok(FixedJet::zero(psi.len()))
    }

    fn random_jet(&self, psi: &[f64], data: &Dataset, i: usize, u: f64) -> Result<Jet> {
        let (mu, a, l) = (psi[0], psi[1], psi[2]);
        let n = self.n_per_group as f64;
        let (ybar, ss) = self.group_stats(data, i);
        let d = ybar - mu - u;
        let q = ss + n * d * d;
        let mut j = Jet::constant(3, self.random_r(psi, data, i, u)?[0]);
        j.d_psi[0] = n * d / a;
        j.d_psi[1] = -n / (2.0 * a) + q / (2.0 * a * a);
        j.d_psi[2] = -1.0 / (2.0 * l) + u * u / (2.0 * l * l);
        j.d_r = n * d / a - u / l;
        j.d_rr = -n / a - 1.0 / l;
        j.d_psi_r[0] = -n / a;
        j.d_psi_r[1] = -n * d / (a * a);
        j.d_psi_r[2] = u / (l * l);
        j.d_psi_psi[(0, 0)] = -n / a;
        j.d_psi_psi[(0, 1)] = -n * d / (a * a);
        j.d_psi_psi[(1, 0)] = j.d_psi_psi[(0, 1)];
        j.d_psi_psi[(1, 1)] = n / (2.0 * a * a) - q / (a * a * a);
        j.d_psi_psi[(2, 2)] = 1.0 / (2.0 * l * l) - u * u / (l * l * l);
        Ok(j)
    }

    fn random_r(&self, psi: &[f64], data: &Dataset, i: usize, u: f64) -> Result<RDerivs> {
        let (mu, a, l) = (psi[0], psi[1], psi[2]);
        let n = self.n_per_group as f64;
        let (ybar, ss) = self.group_stats(data, i);
        let d = ybar - mu - u;
        let value = -0.5 * n * (2.0 * PI * a).ln() - (ss + n * d * d) / (2.0 * a)
            - 0.5 * (2.0 * PI * l).ln()
            - u * u / (2.0 * l);
        Ok([value, n * d / a - u / l, -n / a - 1.0 / l])
    }

    fn scale(&self) -> &dyn ScaleTransform {
        &self.scale
    }

    fn bartlett_scale(&self) -> Option<&dyn ScaleTransform> {
        Some(&IDENTITY)
    }

    fn closed_marginal_loglik(&self, psi: &[f64], data: &Dataset) -> Option<Result<f64>> {
        let (mu, a, l) = (psi[0], psi[1], psi[2]);
        let n = self.n_per_group as f64;
        let t = a + n * l;
        let total = (0..self.q)
            .map(|i| {
                let (ybar, ss) = self.group_stats(data, i);
                -0.5 * n * (2.0 * PI).ln() - 0.5 * (n - 1.0) * a.ln() - 0.5 * t.ln()
                    - ss / (2.0 * a)
                    - n * (ybar - mu).powi(2) / (2.0 * t)
            })
            .sum();
        Some(Ok(total))
    }

    fn canonical_mode(&self, psi: &[f64], data: &Dataset) -> Option<Result<Vec<f64>>> {
        let (mu, a, l) = (psi[0], psi[1], psi[2]);
        let n = self.n_per_group as f64;
        Some(Ok((0..self.q)
            .map(|i| n * l * (self.group_stats(data, i).0 - mu) / (a + n * l))
            .collect()))
    }

    /// Balanced-design ML: `mu = ybar`, `sigma2 = SSW/(N - q)`, `lambda2 = (SSB/q - sigma2)/n`.
    fn mle_oracle(&self, data: &Dataset) -> Option<Result<Vec<f64>>> {
        let (grand, ssw, ssb) = self.between_within(data);
        let a = ssw / (data.n() - self.q) as f64;
        let l = (ssb / self.q as f64 - a) / self.n_per_group as f64;
        if l > 0.0 {
            Some(Ok(vec![grand, a, l]))
        } else {
            Some(Err(Error::Boundary {
                param: "lambda2".into(),
                value: l,
            }))
        }
    }

    fn initial_psi(&self, data: &Dataset) -> Result<Vec<f64>> {
        self.validate(data)?;
        let (grand, ssw, ssb) = self.between_within(data);
        let total = (ssw + ssb) / data.n() as f64;
        Ok(vec![grand, 0.5 * total, 0.5 * total])
    }

    fn initial_random(&self, _: &[f64], _: &Dataset, _: usize) -> f64 {
        0.0
    }

    fn normalizing_transform(&self) -> Option<NormalizingTransform<'_>> {
        Some(NormalizingTransform {
            map: Box::new(Identity),
            approximate: false,
        })
    }
}
