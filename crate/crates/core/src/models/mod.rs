//! Shipped models, their true-parameter descriptions and simulators.

mod censored_exp;
mod exp_mean;
mod exp_reg;
pub mod mechanism;
mod mixed;
mod normal_reg;
mod tobit;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

pub use censored_exp::CensoredExponential;
pub use exp_mean::ExponentialMean;
pub use exp_reg::ExponentialRegression;
pub use mechanism::MissingnessMechanism;
pub use mixed::OneWayMixed;
pub use normal_reg::NormalRegression;
pub use tobit::{Tobit, TobitCanonicalFactor};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::model::Model;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelTag {
    ExpMean,
    MixedOneway,
    CensoredExp,
    NormalReg,
    ExpReg,
    Tobit,
}

impl ModelTag {
    pub const ALL: [ModelTag; 6] = [
        ModelTag::ExpMean,
        ModelTag::MixedOneway,
        ModelTag::CensoredExp,
        ModelTag::NormalReg,
        ModelTag::ExpReg,
        ModelTag::Tobit,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelTag::ExpMean => "exp_mean",
            ModelTag::MixedOneway => "mixed_oneway",
            ModelTag::CensoredExp => "censored_exp",
            ModelTag::NormalReg => "normal_reg",
            ModelTag::ExpReg => "exp_reg",
            ModelTag::Tobit => "tobit",
        }
    }
}

impl fmt::Display for ModelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| {
                let known: Vec<_> = ModelTag::ALL.iter().map(|t| t.as_str()).collect();
                Error::Usage(format!("unknown model '{s}' (expected one of {})", known.join(", ")))
            })
    }
}

/// True parameters plus the structural constants needed to build and simulate a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelParams {
    ExpMean {
        theta: f64,
    },
    MixedOneway {
        mu: f64,
        sigma2: f64,
        lambda2: f64,
        q: usize,
        n_per_group: usize,
    },
    CensoredExp {
        theta: f64,
        c: f64,
    },
    NormalReg {
        beta0: f64,
        beta1: f64,
        sigma2: f64,
    },
    ExpReg {
        beta0: f64,
        beta1: f64,
    },
    Tobit {
        beta0: f64,
        beta1: f64,
        sigma2: f64,
        c: f64,
    },
}

impl ModelParams {
    pub fn tag(&self) -> ModelTag {
        match self {
            ModelParams::ExpMean { .. } => ModelTag::ExpMean,
            ModelParams::MixedOneway { .. } => ModelTag::MixedOneway,
            ModelParams::CensoredExp { .. } => ModelTag::CensoredExp,
            ModelParams::NormalReg { .. } => ModelTag::NormalReg,
            ModelParams::ExpReg { .. } => ModelTag::ExpReg,
            ModelParams::Tobit { .. } => ModelTag::Tobit,
        }
    }

    pub fn psi(&self) -> Vec<f64> {
        match *self {
            ModelParams::ExpMean { theta } => vec![theta],
            ModelParams::MixedOneway {
                mu, sigma2, lambda2, ..
            } => vec![mu, sigma2, lambda2],
            ModelParams::CensoredExp { theta, .. } => vec![theta],
            ModelParams::NormalReg {
                beta0,
                beta1,
                sigma2,
            } => vec![beta0, beta1, sigma2],
            ModelParams::ExpReg { beta0, beta1 } => vec![beta0, beta1],
            ModelParams::Tobit {
                beta0,
                beta1,
                sigma2,
                ..
            } => vec![beta0, beta1, sigma2],
        }
    }

    /// Same structure with the parameter vector replaced.
    pub fn with_psi(&self, psi: &[f64]) -> Result<Self> {
        let want = self.psi().len();
        if psi.len() != want {
            return Err(Error::dimension("psi", psi.len(), want));
        }
        Ok(match *self {
            ModelParams::ExpMean { .. } => ModelParams::ExpMean { theta: psi[0] },
            ModelParams::MixedOneway { q, n_per_group, .. } => ModelParams::MixedOneway {
                mu: psi[0],
                sigma2: psi[1],
                lambda2: psi[2],
                q,
                n_per_group,
            },
            ModelParams::CensoredExp { c, .. } => ModelParams::CensoredExp { theta: psi[0], c },
            ModelParams::NormalReg { .. } => ModelParams::NormalReg {
                beta0: psi[0],
                beta1: psi[1],
                sigma2: psi[2],
            },
            ModelParams::ExpReg { .. } => ModelParams::ExpReg {
                beta0: psi[0],
                beta1: psi[1],
            },
            ModelParams::Tobit { c, .. } => ModelParams::Tobit {
                beta0: psi[0],
                beta1: psi[1],
                sigma2: psi[2],
                c,
            },
        })
    }

    pub fn build(&self) -> Box<dyn Model> {
        match *self {
            ModelParams::ExpMean { .. } => Box::new(ExponentialMean),
            ModelParams::MixedOneway { q, n_per_group, .. } => {
                Box::new(OneWayMixed::new(q, n_per_group))
            }
            ModelParams::CensoredExp { c, .. } => Box::new(CensoredExponential::new(c)),
            ModelParams::NormalReg { .. } => Box::new(NormalRegression::new()),
            ModelParams::ExpReg { .. } => Box::new(ExponentialRegression::new()),
            ModelParams::Tobit { c, .. } => Box::new(Tobit::new(c)),
        }
    }

    /// Population mean of the response for a sample of size `n`, the target
    /// of the mean-response estimators.
    pub fn population_mean(&self, n: usize) -> f64 {
        match *self {
            ModelParams::ExpMean { theta } | ModelParams::CensoredExp { theta, .. } => theta,
            ModelParams::MixedOneway { mu, .. } => mu,
            ModelParams::NormalReg { beta0, .. } => beta0,
            ModelParams::ExpReg { beta0, beta1 } => {
                if beta1 == 0.0 {
                    beta0.exp()
                } else {
                    beta0.exp() * beta1.sinh() / beta1
                }
            }
            // fixed design x_i = -1 + 2i/n averages to 1/n
            ModelParams::Tobit { beta0, beta1, .. } => beta0 + beta1 / n as f64,
        }
    }

    fn check_mechanism(&self, mech: &MissingnessMechanism, n: usize) -> Result<()> {
        use MissingnessMechanism as M;
        let bad = || {
            Err(Error::Usage(format!(
                "mechanism {mech:?} does not apply to model {}",
                self.tag()
            )))
        };
        match (self, mech) {
            (ModelParams::CensoredExp { c, .. } | ModelParams::Tobit { c, .. }, M::ThresholdCensor { c: mc }) => {
                if c != mc {
                    return Err(Error::Usage(format!(
                        "censoring threshold {mc} differs from the model's c = {c}"
                    )));
                }
                Ok(())
            }
            (ModelParams::ExpMean { .. }, M::FixedPattern { .. }) => Ok(()),
            (ModelParams::NormalReg { .. } | ModelParams::ExpReg { .. }, M::LogisticMar { .. } | M::FixedPattern { .. }) => Ok(()),
            (ModelParams::MixedOneway { .. }, M::FixedPattern { missing }) if missing.is_empty() => Ok(()),
            _ => bad(),
        }?;
        if let M::FixedPattern { missing } = mech {
            if let Some(&bad_idx) = missing.iter().find(|&&k| k >= n) {
                return Err(Error::Usage(format!("missing row {bad_idx} out of range for n = {n}")));
            }
        }
        Ok(())
    }
}

/// A simulated dataset together with its hidden truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedData {
    pub dataset: Dataset,
    /// Realized missing responses, in stored order.
    pub y_mis_true: Vec<f64>,
    /// Realized random coordinates on their natural scale.
    pub random_true: Vec<f64>,
    /// Mean of all `n` realized responses.
    pub y_complete_mean: f64,
}

pub trait Simulator: Send + Sync {
    fn draw(&self, psi: &[f64], rng: &mut ChaCha8Rng) -> Result<SimulatedData>;
}

/// Simulation design: model structure, mechanism and sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSetup {
    pub params: ModelParams,
    pub mechanism: MissingnessMechanism,
    pub n: usize,
}

impl Simulator for SimSetup {
    fn draw(&self, psi: &[f64], rng: &mut ChaCha8Rng) -> Result<SimulatedData> {
        draw_with(&self.params.with_psi(psi)?, &self.mechanism, self.n, rng)
    }
}

/// Independent generator for replicate `stream` under `seed`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Simulates one dataset; replicate `stream` is reproducible independently of others.
pub fn simulate(
    params: &ModelParams,
    mechanism: &MissingnessMechanism,
    n: usize,
    seed: u64,
    stream: u64,
) -> Result<SimulatedData> {
    draw_with(params, mechanism, n, &mut rng_for(seed, stream))
}

const MAX_RESAMPLES: usize = 100;

pub(crate) fn draw_with(
    params: &ModelParams,
    mechanism: &MissingnessMechanism,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<SimulatedData> {
    let n = match params {
        ModelParams::MixedOneway { q, n_per_group, .. } => q * n_per_group,
        _ => n,
    };
    if n == 0 {
        return Err(Error::Usage("sample size must be positive".into()));
    }
    params.check_mechanism(mechanism, n)?;
    crate::model::check_psi(params.build().as_ref(), &params.psi())?;

    for _ in 0..MAX_RESAMPLES {
        let (x, y, random) = draw_complete(params, n, rng)?;
        let missing: Vec<bool> = match mechanism {
            MissingnessMechanism::LogisticMar { rho } => (0..n)
                .map(|i| rng.random::<f64>() >= mechanism::response_probability(rho, x[(i, 0)]))
                .collect(),
            MissingnessMechanism::ThresholdCensor { c } => y.iter().map(|&v| v > *c).collect(),
            MissingnessMechanism::FixedPattern { missing } => {
                let mut m = vec![false; n];
                for &k in missing {
                    m[k] = true;
                }
                m
            }
        };
        let n_obs = missing.iter().filter(|&&m| !m).count();
        if n_obs == 0 {
            if matches!(mechanism, MissingnessMechanism::FixedPattern { .. }) {
                return Err(Error::Usage("fixed pattern leaves no observed responses".into()));
            }
            continue;
        }
        let y_complete_mean = y.iter().sum::<f64>() / n as f64;
        let y_mis_true: Vec<f64> = (0..n).filter(|&i| missing[i]).map(|i| y[i]).collect();
        let response = (0..n)
            .map(|i| if missing[i] { None } else { Some(y[i]) })
            .collect();
        let dataset = Dataset::from_rows(x, response)?;
        let random_true = random.unwrap_or_else(|| y_mis_true.clone());
        return Ok(SimulatedData {
            dataset,
            y_mis_true,
            random_true,
            y_complete_mean,
        });
    }
    Err(Error::Data(format!(
        "no observed responses after {MAX_RESAMPLES} resamples"
    )))
}

type Complete = (DMatrix<f64>, Vec<f64>, Option<Vec<f64>>);

fn draw_complete(params: &ModelParams, n: usize, rng: &mut ChaCha8Rng) -> Result<Complete> {
    let normal = |sd: f64| Normal::new(0.0, sd).map_err(|e| Error::Usage(e.to_string()));
    let exp = |mean: f64| Exp::new(1.0 / mean).map_err(|e| Error::Usage(e.to_string()));
    Ok(match *params {
        ModelParams::ExpMean { theta } | ModelParams::CensoredExp { theta, .. } => {
            let d = exp(theta)?;
            (DMatrix::zeros(n, 0), (0..n).map(|_| d.sample(rng)).collect(), None)
        }
        ModelParams::NormalReg {
            beta0,
            beta1,
            sigma2,
        } => {
            let e = normal(sigma2.sqrt())?;
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y = x.iter().map(|&xi| beta0 + beta1 * xi + e.sample(rng)).collect();
            (DMatrix::from_column_slice(n, 1, &x), y, None)
        }
        ModelParams::ExpReg { beta0, beta1 } => {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y = x
                .iter()
                .map(|&xi| Ok(exp((beta0 + beta1 * xi).exp())?.sample(rng)))
                .collect::<Result<_>>()?;
            (DMatrix::from_column_slice(n, 1, &x), y, None)
        }
        ModelParams::Tobit {
            beta0,
            beta1,
            sigma2,
            ..
        } => {
            let e = normal(sigma2.sqrt())?;
            let x = tobit::design(n);
            let y = x.iter().map(|&xi| beta0 + beta1 * xi + e.sample(rng)).collect();
            (DMatrix::from_column_slice(n, 1, &x), y, None)
        }
        ModelParams::MixedOneway {
            mu,
            sigma2,
            lambda2,
            q,
            n_per_group,
        } => {
            let eu = normal(lambda2.sqrt())?;
            let ee = normal(sigma2.sqrt())?;
            let u: Vec<f64> = (0..q).map(|_| eu.sample(rng)).collect();
            let mut g = Vec::with_capacity(n);
            let mut y = Vec::with_capacity(n);
            for (k, &uk) in u.iter().enumerate() {
                for _ in 0..n_per_group {
                    g.push(k as f64);
                    y.push(mu + uk + ee.sample(rng));
                }
            }
            (DMatrix::from_column_slice(n, 1, &g), y, Some(u))
        }
    })
}

/// Jet in `(psi, y)` of `log N(y; psi0 + psi1 x, psi2)`; other coordinates of `psi` are inert.
pub(crate) fn gaussian_jet(psi: &[f64], x: f64, y: f64) -> Jet {
    let p = psi.len();
    let (b0, b1, s) = (psi[0], psi[1], psi[2]);
    let e = y - b0 - b1 * x;
    let z = [1.0, x];
    let mut j = Jet::constant(p, gaussian_logpdf(b0 + b1 * x, s, y));
    for a in 0..2 {
        j.d_psi[a] = e * z[a] / s;
        j.d_psi_r[a] = z[a] / s;
        for b in 0..2 {
            j.d_psi_psi[(a, b)] = -z[a] * z[b] / s;
        }
        j.d_psi_psi[(a, 2)] = -e * z[a] / (s * s);
        j.d_psi_psi[(2, a)] = j.d_psi_psi[(a, 2)];
    }
    j.d_psi[2] = -0.5 / s + e * e / (2.0 * s * s);
    j.d_psi_psi[(2, 2)] = 0.5 / (s * s) - e * e / (s * s * s);
    j.d_psi_r[2] = e / (s * s);
    j.d_r = -e / s;
    j.d_rr = -1.0 / s;
    j
}

pub(crate) fn gaussian_logpdf(mean: f64, var: f64, y: f64) -> f64 {
    let e = y - mean;
    -0.5 * (2.0 * std::f64::consts::PI * var).ln() - e * e / (2.0 * var)
}

/// Least squares of `y` on `(1, x)`: intercept, slope and residual sum of squares.
pub(crate) fn ols(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Data("covariate has no spread among the rows used".into()));
    }
    let b1 = sxy / sxx;
    let b0 = my - b1 * mx;
    let ss = x.iter().zip(y).map(|(a, b)| (b - b0 - b1 * a).powi(2)).sum();
    Ok((b0, b1, ss))
}

pub(crate) fn covariate_column(data: &Dataset, rows: std::ops::Range<usize>) -> Vec<f64> {
    rows.map(|i| data.x(i, 0)).collect()
}

pub(crate) fn require_one_covariate(name: &str, data: &Dataset) -> Result<()> {
    if data.n_covariates() != 1 {
        return Err(Error::Data(format!(
            "{name} needs exactly one covariate column, found {}",
            data.n_covariates()
        )));
    }
    Ok(())
}
