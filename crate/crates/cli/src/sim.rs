//! Monte Carlo replication of mean-response estimators.

use std::path::{Path, PathBuf};

use hilma::{
    approx_mle, em_fit, em_mean_response, joint_maximize, make_weak_canonical, simulate,
    variance_report, Dataset, EmOptions, FitResult, MissingnessMechanism, Model, ModelParams,
    SolveOptions,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
pub enum Estimator {
    /// Mean of all `n` realized responses; infeasible benchmark.
    #[serde(rename = "y_com")]
    #[value(name = "y_com")]
    YCom,
    #[serde(rename = "y_obs")]
    #[value(name = "y_obs")]
    YObs,
    /// Completed-data mean with h-likelihood ML imputations.
    #[serde(rename = "y_ML")]
    #[value(name = "y_ML")]
    YMl,
    /// Completed-data mean with imputations from the Laplace-approximate MLE.
    #[serde(rename = "y_ML_lap")]
    #[value(name = "y_ML_lap")]
    YMlLap,
    /// Completed-data mean with EM conditional means.
    #[serde(rename = "em")]
    #[value(name = "em")]
    Em,
}

impl Estimator {
    pub fn as_str(&self) -> &'static str {
        match self {
            Estimator::YCom => "y_com",
            Estimator::YObs => "y_obs",
            Estimator::YMl => "y_ML",
            Estimator::YMlLap => "y_ML_lap",
            Estimator::Em => "em",
        }
    }
}

fn default_level() -> f64 {
    0.95
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: ModelParams,
    pub mechanism: MissingnessMechanism,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub estimators: Vec<Estimator>,
    #[serde(default = "default_level")]
    pub interval_level: f64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(CliError::Config("reps must be at least 1".into()));
        }
        if self.estimators.is_empty() {
            return Err(CliError::Config("estimator set is empty".into()));
        }
        if !(self.interval_level > 0.0 && self.interval_level < 1.0) {
            return Err(CliError::Config(format!(
                "interval_level {} is outside (0, 1)",
                self.interval_level
            )));
        }
        let model = self.params.build();
        let pilot = simulate(&self.params, &self.mechanism, self.n, self.seed, 0)?;
        if self.estimators.contains(&Estimator::YMlLap) {
            let b = model.bartlett_scale().ok_or_else(|| {
                CliError::Config(format!("{} has no weak canonical path", model.name()))
            })?;
            make_weak_canonical(model.as_ref(), b, &pilot.dataset)
                .map_err(|e| CliError::Config(format!("y_ML_lap unavailable: {e}")))?;
        }
        if self.estimators.contains(&Estimator::Em) && model.em().is_none() {
            return Err(CliError::Config(format!("{} has no EM step", model.name())));
        }
        Ok(())
    }
}

/// `n^{-1} (sum_obs y_i + sum_mis y^_i)`; the observed mean when nothing is missing.
pub fn estimator_y_ml(fit: &FitResult, data: &Dataset) -> f64 {
    if data.n_mis() == 0 {
        return data.y_obs_mean();
    }
    (data.y_obs_sum() + fit.y_mis_hat.iter().sum::<f64>()) / data.n() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

/// Linear interpolation between order statistics at `(n - 1) p`.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quartiles(values: &[f64]) -> Quartiles {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    Quartiles {
        q1: quantile(&s, 0.25),
        median: quantile(&s, 0.5),
        q3: quantile(&s, 0.75),
    }
}

/// Kolmogorov-Smirnov distance between the empirical CDF of `values` and `N(0, 1)`.
pub fn ks_standard_normal(values: &[f64]) -> f64 {
    let std = Normal::standard();
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = std.cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorSummary {
    pub estimator: Estimator,
    pub mean: f64,
    /// `mean - eta`.
    pub bias: f64,
    /// Population convention (divisor = number of values), so `rmse^2 = bias^2 + sd^2`.
    pub sd: f64,
    pub rmse: f64,
    /// Standard error of `mean`, with divisor `k - 1`; 0 for a single value.
    pub mc_se: f64,
    pub quartiles: Quartiles,
    /// Pooled share of realized missing values inside their predictive intervals.
    pub coverage: Option<f64>,
    pub values: Vec<f64>,
}

impl EstimatorSummary {
    pub fn from_values(estimator: Estimator, eta: f64, values: Vec<f64>, coverage: Option<f64>) -> Self {
        let k = values.len() as f64;
        let mean = values.iter().sum::<f64>() / k;
        let ss = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
        let rmse = (values.iter().map(|v| (v - eta).powi(2)).sum::<f64>() / k).sqrt();
        Self {
            estimator,
            mean,
            bias: mean - eta,
            sd: (ss / k).sqrt(),
            rmse,
            mc_se: if values.len() > 1 { (ss / (k - 1.0) / k).sqrt() } else { 0.0 },
            quartiles: quartiles(&values),
            coverage,
            values,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepFailure {
    pub rep: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryTable {
    pub config: SimConfig,
    /// Target mean response.
    pub eta: f64,
    /// Replication ids contributing to every row, ascending.
    pub reps_used: Vec<usize>,
    pub rows: Vec<EstimatorSummary>,
    pub failures: Vec<RepFailure>,
}

impl SummaryTable {
    pub fn row(&self, e: Estimator) -> Option<&EstimatorSummary> {
        self.rows.iter().find(|r| r.estimator == e)
    }
}

struct RepOutcome {
    values: Vec<f64>,
    covered: usize,
    intervals: usize,
}

fn replicate(cfg: &SimConfig, model: &dyn Model, rep: usize) -> hilma::Result<RepOutcome> {
    let sim = simulate(&cfg.params, &cfg.mechanism, cfg.n, cfg.seed, rep as u64)?;
    let data = &sim.dataset;
    let mut covered = 0;
    let mut intervals = 0;
    let mut values = Vec::with_capacity(cfg.estimators.len());
    for e in &cfg.estimators {
        values.push(match e {
            Estimator::YCom => sim.y_complete_mean,
            Estimator::YObs => data.y_obs_mean(),
            Estimator::YMl => {
                let fit = joint_maximize(model, data, &SolveOptions::default())?;
                if data.n_mis() > 0 && model.n_random(data) == data.n_mis() {
                    let v = variance_report(model, data, &fit, cfg.interval_level)?;
                    intervals += v.intervals.len();
                    covered += v
                        .intervals
                        .iter()
                        .zip(&sim.y_mis_true)
                        .filter(|(iv, &y)| iv.contains(y))
                        .count();
                }
                estimator_y_ml(&fit, data)
            }
            Estimator::YMlLap => {
                let b = model.bartlett_scale().expect("checked by validate");
                let lap = approx_mle(model, data, b, &SolveOptions::default())?;
                estimator_y_ml(&lap.fit, data)
            }
            Estimator::Em => {
                let e = em_fit(model, data, &model.initial_psi(data)?, &EmOptions::default())?;
                em_mean_response(model, &e.psi_hat, data)?
            }
        });
    }
    Ok(RepOutcome {
        values,
        covered,
        intervals,
    })
}

/// Worker count from `HILMA_THREADS`, else rayon's default.
pub fn thread_count() -> usize {
    std::env::var("HILMA_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&t| t > 0)
        .unwrap_or_else(rayon::current_num_threads)
}

pub fn run_simulation(cfg: &SimConfig) -> Result<SummaryTable> {
    run_simulation_with_threads(cfg, thread_count())
}

pub fn run_simulation_with_threads(cfg: &SimConfig, threads: usize) -> Result<SummaryTable> {
    cfg.validate()?;
    let model = cfg.params.build();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let outcomes: Vec<hilma::Result<RepOutcome>> = pool.install(|| {
        (0..cfg.reps)
            .into_par_iter()
            .map(|r| replicate(cfg, model.as_ref(), r))
            .collect()
    });

    let k = cfg.estimators.len();
    let mut per_est = vec![Vec::new(); k];
    let mut reps_used = Vec::new();
    let mut failures = Vec::new();
    let (mut covered, mut intervals) = (0usize, 0usize);
    for (rep, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(o) => {
                for (col, v) in per_est.iter_mut().zip(o.values) {
                    col.push(v);
                }
                covered += o.covered;
                intervals += o.intervals;
                reps_used.push(rep);
            }
            Err(e) => failures.push(RepFailure {
                rep,
                error: e.to_string(),
            }),
        }
    }
    if failures.len() * 20 > cfg.reps || reps_used.is_empty() {
        return Err(CliError::TooManyFailures {
            failed: failures.len(),
            reps: cfg.reps,
            first: failures[0].error.clone(),
        });
    }
    let eta = cfg.params.population_mean(cfg.n);
    let rows = cfg
        .estimators
        .iter()
        .zip(per_est)
        .map(|(&e, values)| {
            let coverage = (e == Estimator::YMl && intervals > 0).then(|| covered as f64 / intervals as f64);
            EstimatorSummary::from_values(e, eta, values, coverage)
        })
        .collect();
    Ok(SummaryTable {
        config: cfg.clone(),
        eta,
        reps_used,
        rows,
        failures,
    })
}

/// Writes `estimator,rep,value` rows to `path` and per-estimator quartiles to
/// `<stem>_quartiles.csv` beside it; returns both paths.
pub fn export_boxplot_data(table: &SummaryTable, path: &Path) -> Result<(PathBuf, PathBuf)> {
    let io = |p: &Path, e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(source) => CliError::io(p, source),
        kind => CliError::Config(format!("{}: {kind:?}", p.display())),
    };
    let mut w = csv::Writer::from_path(path).map_err(|e| io(path, e))?;
    w.write_record(["estimator", "rep", "value"]).map_err(|e| io(path, e))?;
    for row in &table.rows {
        for (rep, v) in table.reps_used.iter().zip(&row.values) {
            w.write_record([row.estimator.as_str(), &rep.to_string(), &v.to_string()])
                .map_err(|e| io(path, e))?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))?;

    let stem = path.file_stem().map_or("boxplot".into(), |s| s.to_string_lossy().into_owned());
    let qpath = path.with_file_name(format!("{stem}_quartiles.csv"));
    let mut w = csv::Writer::from_path(&qpath).map_err(|e| io(&qpath, e))?;
    w.write_record(["estimator", "q1", "median", "q3", "mean", "eta"])
        .map_err(|e| io(&qpath, e))?;
    for row in &table.rows {
        let q = &row.quartiles;
        w.write_record([
            row.estimator.as_str().to_string(),
            q.q1.to_string(),
            q.median.to_string(),
            q.q3.to_string(),
            row.mean.to_string(),
            table.eta.to_string(),
        ])
        .map_err(|e| io(&qpath, e))?;
    }
    w.flush().map_err(|e| CliError::io(&qpath, e))?;
    Ok((path.to_path_buf(), qpath))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn censored(reps: usize) -> SimConfig {
        SimConfig {
            params: ModelParams::CensoredExp { theta: 2.0, c: 3.0 },
            mechanism: MissingnessMechanism::ThresholdCensor { c: 3.0 },
            n: 60,
            reps,
            seed: 5,
            estimators: vec![Estimator::YCom, Estimator::YObs, Estimator::YMl],
            interval_level: 0.95,
        }
    }

    #[test]
    fn y_ml_equals_closed_form_estimate() {
        let d = Dataset::without_covariates(&[1.0, 2.0, 1.0, 2.0], 1).unwrap();
        let fit = joint_maximize(&hilma::models::CensoredExponential::new(3.0), &d, &SolveOptions::default())
            .unwrap();
        assert!((estimator_y_ml(&fit, &d) - 2.25).abs() < 1e-9);
    }

    #[test]
    fn single_replication_table_reports_its_values() {
        let t = run_simulation(&censored(1)).unwrap();
        for r in &t.rows {
            assert_eq!(r.values.len(), 1);
            assert_eq!(r.mean, r.values[0]);
            assert_eq!(r.sd, 0.0);
            assert_eq!(r.quartiles.median, r.values[0]);
        }
    }

    #[test]
    fn serialization_does_not_depend_on_thread_count() {
        let cfg = censored(40);
        let a = serde_json::to_string(&run_simulation_with_threads(&cfg, 1).unwrap()).unwrap();
        let b = serde_json::to_string(&run_simulation_with_threads(&cfg, 4).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut c = censored(0);
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
        c.reps = 3;
        c.estimators.clear();
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
        c.estimators = vec![Estimator::YMlLap];
        assert!(c.validate().is_ok());
        c.params = ModelParams::Tobit { beta0: 1.0, beta1: 3.0, sigma2: 1.0, c: 3.0 };
        c.estimators = vec![Estimator::Em];
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
    }

    #[test]
    fn ks_of_exact_quantiles_is_half_a_step() {
        let std = Normal::standard();
        let n = 200;
        let v: Vec<f64> = (0..n).map(|i| std.inverse_cdf((i as f64 + 0.5) / n as f64)).collect();
        assert!((ks_standard_normal(&v) - 0.5 / n as f64).abs() < 1e-9);
    }
}
