//! One-shot fitting and ML imputation of a dataset.

use std::collections::BTreeSet;
use std::path::Path;

use hilma::models::{
    CensoredExponential, ExponentialMean, ExponentialRegression, NormalRegression, OneWayMixed, Tobit,
};
use hilma::{
    approx_mle, em_fit, hessian_blocks_on, joint_maximize, make_weak_canonical, var_random_at,
    variance_report, BlockScale, Dataset, EmOptions, Error as CoreError, Model, ModelTag,
    SolveOptions, VarianceReport,
};
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::table::{ColumnSpec, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    Hlik,
    Em,
    Laplace,
}

impl FitMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            FitMethod::Hlik => "hlik",
            FitMethod::Em => "em",
            FitMethod::Laplace => "laplace",
        }
    }
}

/// Structural constants a model needs beyond the data.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelOptions {
    /// Censoring threshold for `censored_exp` and `tobit`.
    pub threshold: Option<f64>,
}

/// Builds the model for a real dataset.
///
/// `mixed_oneway` reads group labels `0..q` from covariate column 0.
pub fn build_model(tag: ModelTag, data: &Dataset, opts: &ModelOptions) -> Result<Box<dyn Model>> {
    let threshold = || {
        opts.threshold
            .ok_or_else(|| CliError::Config(format!("model {tag} needs a censoring threshold")))
    };
    Ok(match tag {
        ModelTag::ExpMean => Box::new(ExponentialMean),
        ModelTag::CensoredExp => Box::new(CensoredExponential::new(threshold()?)),
        ModelTag::NormalReg => Box::new(NormalRegression::new()),
        ModelTag::ExpReg => Box::new(ExponentialRegression::new()),
        ModelTag::Tobit => Box::new(Tobit::new(threshold()?)),
        ModelTag::MixedOneway => {
            if data.n_covariates() != 1 {
                return Err(CoreError::Data("mixed_oneway needs exactly one group column".into()).into());
            }
            let groups: BTreeSet<u64> = (0..data.n()).map(|r| data.x(r, 0).to_bits()).collect();
            let q = groups.len();
            if q == 0 || data.n() % q != 0 {
                return Err(CoreError::Data("mixed_oneway needs balanced groups".into()).into());
            }
            Box::new(OneWayMixed::new(q, data.n() / q))
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub method: String,
    pub param_names: Vec<String>,
    pub psi_hat: Vec<f64>,
    /// `None` for EM, which yields no information matrix.
    pub se_psi: Option<Vec<f64>>,
    /// Marginal log-likelihood at `psi_hat`; Laplace-approximate for `laplace`.
    pub loglik: f64,
    pub h_value: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub scale: String,
    pub n_obs: usize,
    pub n_mis: usize,
}

/// Fit plus ML imputations of the random coordinates, in stored order.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub report: FitReport,
    pub random_hat: Vec<f64>,
    /// Absent for EM.
    pub variance: Option<VarianceReport>,
}

fn marginal_or(model: &dyn Model, psi: &[f64], data: &Dataset, fallback: f64) -> Result<f64> {
    match model.closed_marginal_loglik(psi, data) {
        Some(v) => Ok(v?),
        None => Ok(fallback),
    }
}

fn standard_errors(var: &VarianceReport) -> Vec<f64> {
    (0..var.var_psi.nrows()).map(|k| var.var_psi[(k, k)].sqrt()).collect()
}

pub fn fit_dataset(model: &dyn Model, data: &Dataset, method: FitMethod, level: f64) -> Result<FitOutcome> {
    let base = |psi_hat: Vec<f64>, loglik: f64| FitReport {
        method: method.as_str().into(),
        param_names: model.param_names(),
        psi_hat,
        se_psi: None,
        loglik,
        h_value: None,
        converged: true,
        iterations: 0,
        scale: String::new(),
        n_obs: data.n_obs(),
        n_mis: data.n_mis(),
    };
    match method {
        FitMethod::Hlik => {
            let fit = joint_maximize(model, data, &SolveOptions::default())?;
            let var = variance_report(model, data, &fit, level)?;
            let mut r = base(fit.psi_hat.clone(), marginal_or(model, &fit.psi_hat, data, fit.h_value)?);
            r.se_psi = Some(standard_errors(&var));
            r.h_value = Some(fit.h_value);
            r.converged = fit.converged;
            r.iterations = fit.iterations;
            r.scale = fit.scale_name.clone();
            Ok(FitOutcome {
                report: r,
                random_hat: fit.y_mis_hat,
                variance: Some(var),
            })
        }
        FitMethod::Em => {
            let step = model
                .em()
                .ok_or_else(|| CoreError::Unsupported(format!("no EM step for model {}", model.name())))?;
            let e = em_fit(model, data, &model.initial_psi(data)?, &EmOptions::default())?;
            let y: Vec<f64> = (0..data.n_mis())
                .map(|i| step.conditional_mean(&e.psi_hat, data, i))
                .collect::<hilma::Result<_>>()?;
            let mut r = base(e.psi_hat.clone(), marginal_or(model, &e.psi_hat, data, f64::NAN)?);
            r.iterations = e.iterations;
            r.scale = "conditional mean".into();
            Ok(FitOutcome {
                report: r,
                random_hat: y,
                variance: None,
            })
        }
        FitMethod::Laplace => {
            let b = model.bartlett_scale().ok_or_else(|| {
                CoreError::Unsupported(format!("{} declares no base scale for the Laplace fit", model.name()))
            })?;
            let lap = approx_mle(model, data, b, &SolveOptions::default())?;
            let w = make_weak_canonical(model, b, data)?;
            let var_psi = lap.information.clone().try_inverse().ok_or_else(|| CoreError::Rank {
                context: "Laplace information is singular".into(),
                min_eigenvalue: 0.0,
                direction: vec![],
            })?;
            let blocks = hessian_blocks_on(model, &w, data, &lap.fit, BlockScale::YMis)?;
            let var = var_random_at(&blocks, &var_psi, level)?;
            let mut r = base(lap.fit.psi_hat.clone(), lap.laplace_loglik);
            r.se_psi = Some(standard_errors(&var));
            r.h_value = Some(lap.fit.h_value);
            r.iterations = lap.fit.iterations;
            r.scale = lap.fit.scale_name.clone();
            Ok(FitOutcome {
                report: r,
                random_hat: lap.fit.y_mis_hat,
                variance: Some(var),
            })
        }
    }
}

/// Input table with `imputed_flag, y_imputed, se_prediction, pi_lower, pi_upper` appended.
///
/// Observed rows carry their own response and empty interval fields.
pub fn impute_table(
    table: &Table,
    path: &Path,
    spec: &ColumnSpec,
    tag: ModelTag,
    opts: &ModelOptions,
    method: FitMethod,
    level: f64,
) -> Result<(Table, FitReport)> {
    let data = table.to_dataset(path, spec)?;
    let model = build_model(tag, &data, opts)?;
    if model.n_random(&data) != data.n_mis() {
        return Err(CoreError::Unsupported(format!(
            "{} has random effects that are not missing responses; use fit",
            model.name()
        ))
        .into());
    }
    let out = fit_dataset(model.as_ref(), &data, method, level)?;
    let mut headers = table.headers.clone();
    headers.extend(["imputed_flag", "y_imputed", "se_prediction", "pi_lower", "pi_upper"].map(String::from));
    let mut extra = vec![Vec::new(); data.n()];
    for (k, &orig) in data.original_index().iter().enumerate() {
        extra[orig] = if k < data.n_obs() {
            let y = data.response()[k].expect("observed row");
            vec!["0".into(), y.to_string(), String::new(), String::new(), String::new()]
        } else {
            let i = k - data.n_obs();
            let mut cells = vec!["1".into(), out.random_hat[i].to_string()];
            match &out.variance {
                Some(v) => cells.extend([
                    v.se_prediction[i].to_string(),
                    v.intervals[i].lower.to_string(),
                    v.intervals[i].upper.to_string(),
                ]),
                None => cells.extend([String::new(), String::new(), String::new()]),
            }
            cells
        };
    }
    let rows = table
        .rows
        .iter()
        .zip(extra)
        .map(|(r, e)| r.iter().cloned().chain(e).collect())
        .collect();
    Ok((Table { headers, rows }, out.report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: &[(&str, &str)]) -> Table {
        Table {
            headers: vec!["x".into(), "y".into()],
            rows: rows.iter().map(|(a, b)| vec![a.to_string(), b.to_string()]).collect(),
        }
    }

    #[test]
    fn censored_rows_are_imputed_at_theta_plus_c() {
        let t = Table {
            headers: vec!["y".into()],
            rows: ["1", "2", "", "1", "2"].iter().map(|s| vec![s.to_string()]).collect(),
        };
        let opts = ModelOptions { threshold: Some(3.0) };
        let (out, rep) = impute_table(
            &t,
            Path::new("mem"),
            &ColumnSpec { response: "y".into(), covariates: Some(vec![]) },
            ModelTag::CensoredExp,
            &opts,
            FitMethod::Hlik,
            0.95,
        )
        .unwrap();
        // theta = 6/4 + 3/4
        assert!((rep.psi_hat[0] - 2.25).abs() < 1e-9);
        let y: f64 = out.rows[2][2].parse().unwrap();
        assert!((y - 5.25).abs() < 1e-9);
        assert_eq!(out.rows[2][1], "1");
        assert_eq!(out.rows[0][1..3], ["0".to_string(), "1".into()]);
    }

    #[test]
    fn mixed_model_cannot_be_imputed() {
        let t = table(&[("0", "1"), ("0", "2"), ("1", "3"), ("1", "5")]);
        let e = impute_table(
            &t,
            Path::new("mem"),
            &ColumnSpec::default(),
            ModelTag::MixedOneway,
            &ModelOptions::default(),
            FitMethod::Hlik,
            0.95,
        )
        .unwrap_err();
        assert!(matches!(e, CliError::Core(CoreError::Unsupported(_))));
    }

    #[test]
    fn threshold_is_required_for_censored_models() {
        let d = Dataset::without_covariates(&[1.0], 1).unwrap();
        assert!(matches!(
            build_model(ModelTag::Tobit, &d, &ModelOptions::default()),
            Err(CliError::Config(_))
        ));
    }
}
