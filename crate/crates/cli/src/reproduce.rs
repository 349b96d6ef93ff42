//! Preset simulation studies.
//!
//! Replication counts and, where unstated, sample sizes are harness choices.

use std::path::Path;

use hilma::{MissingnessMechanism, ModelParams};

use crate::error::{CliError, Result};
use crate::sim::{export_boxplot_data, run_simulation, Estimator, SimConfig, SummaryTable};

pub const DEFAULT_REPS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Target {
    /// Censored exponential, c = 3 (about 22% censored).
    Figure2,
    /// Normal regression under logistic MAR.
    Figure3,
    /// Exponential regression under logistic MAR.
    Figure4,
    /// Tobit regression, exact and Laplace-approximate imputation.
    Figure5,
    /// Censored exponential at n = 200 with the EM estimate.
    Example51,
}

const SIZES: [usize; 2] = [100, 500];
const RHO: [f64; 3] = [1.0, 2.0, 0.3];

/// Labelled configurations for `target`.
pub fn presets(target: Target, reps: usize, seed: u64) -> Vec<(String, SimConfig)> {
    use Estimator::*;
    let cfg = |params: ModelParams, mechanism: MissingnessMechanism, n: usize, est: Vec<Estimator>| SimConfig {
        params,
        mechanism,
        n,
        reps,
        seed,
        estimators: est,
        interval_level: 0.95,
    };
    let censored = ModelParams::CensoredExp { theta: 2.0, c: 3.0 };
    let censor = MissingnessMechanism::ThresholdCensor { c: 3.0 };
    let mar = MissingnessMechanism::LogisticMar { rho: RHO };
    let sized = |name: &str, params: ModelParams, mech: MissingnessMechanism, est: Vec<Estimator>| {
        SIZES
            .iter()
            .map(|&n| (format!("{name}_n{n}"), cfg(params.clone(), mech.clone(), n, est.clone())))
            .collect::<Vec<_>>()
    };
    match target {
        Target::Figure2 => sized("figure2", censored, censor, vec![YCom, YObs, YMl]),
        Target::Figure3 => sized(
            "figure3",
            ModelParams::NormalReg { beta0: 1.0, beta1: 2.0, sigma2: 1.0 },
            mar,
            vec![YCom, YObs, YMl],
        ),
        Target::Figure4 => sized(
            "figure4",
            ModelParams::ExpReg { beta0: 1.0, beta1: 2.0 },
            mar,
            vec![YCom, YObs, YMl],
        ),
        Target::Figure5 => sized(
            "figure5",
            ModelParams::Tobit { beta0: 1.0, beta1: 3.0, sigma2: 1.0, c: 3.0 },
            MissingnessMechanism::ThresholdCensor { c: 3.0 },
            vec![YCom, YObs, YMl, YMlLap],
        ),
        Target::Example51 => vec![(
            "example51_n200".into(),
            cfg(censored, censor, 200, vec![YCom, YObs, YMl, Em]),
        )],
    }
}

/// Runs every preset of `target`, writing `<label>_summary.json`,
/// `<label>_boxplot.csv` and `<label>_boxplot_quartiles.csv` into `out_dir`.
pub fn reproduce(target: Target, reps: usize, seed: u64, out_dir: &Path) -> Result<Vec<(String, SummaryTable)>> {
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let mut out = Vec::new();
    for (label, cfg) in presets(target, reps, seed) {
        let table = run_simulation(&cfg)?;
        let json = out_dir.join(format!("{label}_summary.json"));
        std::fs::write(&json, serde_json::to_string_pretty(&table)?).map_err(|e| CliError::io(&json, e))?;
        export_boxplot_data(&table, &out_dir.join(format!("{label}_boxplot.csv")))?;
        out.push((label, table));
    }
    Ok(out)
}
