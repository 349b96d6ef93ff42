use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hilma::{
    bartlett_check, Identity, LogShift, MissingnessMechanism, ModelParams, ModelTag, ScaleTransform,
    SimSetup,
};
use hilma_cli::reproduce::{reproduce, Target, DEFAULT_REPS};
use hilma_cli::{
    build_model, export_boxplot_data, fit_dataset, impute_table, read_table, run_simulation,
    write_table, CliError, ColumnSpec, Estimator, FitMethod, ModelOptions, Result, SimConfig,
};

#[derive(Parser)]
#[command(name = "hilma", version, about = "h-likelihood ML imputation and simulation harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DataArgs {
    /// Input CSV with a header row; empty response cells are missing.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_parser = parse_tag)]
    model: ModelTag,
    #[arg(long, default_value = "y")]
    response: String,
    /// Comma-separated covariate columns; defaults to every non-response column.
    #[arg(long, value_delimiter = ',')]
    covariates: Option<Vec<String>>,
    /// Censoring threshold for censored_exp and tobit.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, value_enum, default_value = "hlik")]
    method: FitMethod,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
}

impl DataArgs {
    fn spec(&self) -> ColumnSpec {
        ColumnSpec {
            response: self.response.clone(),
            covariates: self.covariates.clone(),
        }
    }

    fn options(&self) -> ModelOptions {
        ModelOptions {
            threshold: self.threshold,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MechanismKind {
    Censor,
    Mar,
    Fixed,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, value_parser = parse_tag)]
    model: Option<ModelTag>,
    /// True fixed parameters, comma-separated in the model's order.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    psi: Option<Vec<f64>>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Group count for mixed_oneway; group size is n / groups.
    #[arg(long)]
    groups: Option<usize>,
    #[arg(long, value_enum)]
    mechanism: Option<MechanismKind>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "1,2,0.3")]
    rho: Vec<f64>,
    /// Rows missing under the fixed mechanism.
    #[arg(long, value_delimiter = ',')]
    missing: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    n: usize,
}

impl ModelArgs {
    fn params(&self) -> Result<ModelParams> {
        let tag = self.model.ok_or_else(|| CliError::Config("--model is required".into()))?;
        let c = self.threshold.unwrap_or(3.0);
        let base = match tag {
            ModelTag::ExpMean => ModelParams::ExpMean { theta: 1.0 },
            ModelTag::CensoredExp => ModelParams::CensoredExp { theta: 1.0, c },
            ModelTag::NormalReg => ModelParams::NormalReg { beta0: 0.0, beta1: 0.0, sigma2: 1.0 },
            ModelTag::ExpReg => ModelParams::ExpReg { beta0: 0.0, beta1: 0.0 },
            ModelTag::Tobit => ModelParams::Tobit { beta0: 0.0, beta1: 0.0, sigma2: 1.0, c },
            ModelTag::MixedOneway => {
                let q = self.groups.ok_or_else(|| CliError::Config("--groups is required".into()))?;
                ModelParams::MixedOneway { mu: 0.0, sigma2: 1.0, lambda2: 1.0, q, n_per_group: self.n / q.max(1) }
            }
        };
        let psi = self.psi.clone().ok_or_else(|| CliError::Config("--psi is required".into()))?;
        Ok(base.with_psi(&psi)?)
    }

    fn mechanism(&self, params: &ModelParams) -> Result<MissingnessMechanism> {
        let kind = self.mechanism.unwrap_or(match params {
            ModelParams::CensoredExp { .. } | ModelParams::Tobit { .. } => MechanismKind::Censor,
            ModelParams::NormalReg { .. } | ModelParams::ExpReg { .. } => MechanismKind::Mar,
            _ => MechanismKind::Fixed,
        });
        Ok(match kind {
            MechanismKind::Censor => MissingnessMechanism::ThresholdCensor {
                c: self.threshold.unwrap_or(3.0),
            },
            MechanismKind::Mar => {
                let rho: [f64; 3] = self
                    .rho
                    .as_slice()
                    .try_into()
                    .map_err(|_| CliError::Config("--rho needs three values".into()))?;
                MissingnessMechanism::LogisticMar { rho }
            }
            MechanismKind::Fixed => MissingnessMechanism::FixedPattern {
                missing: self.missing.clone(),
            },
        })
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BaseScale {
    /// `b = log y`.
    Log,
    /// `b = y`.
    Identity,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model to a CSV dataset and print the JSON fit report.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit and write imputed.csv and fit_report.json.
    Impute {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Monte Carlo study from a TOML config or flags.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "y_com,y_obs,y_ML")]
        estimators: Vec<Estimator>,
        #[arg(long, default_value_t = DEFAULT_REPS)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Monte Carlo check of both Bartlett identities at the true parameters.
    CheckBartlett {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value = "log")]
        scale: BaseScale,
        #[arg(long, default_value_t = 5000)]
        draws: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Regenerate a preset study as boxplot data plus quartiles.
    Reproduce {
        #[arg(value_enum)]
        target: Target,
        #[arg(long, default_value_t = DEFAULT_REPS)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

fn parse_tag(s: &str) -> std::result::Result<ModelTag, String> {
    s.parse().map_err(|e: hilma::Error| e.to_string())
}

fn write(path: &PathBuf, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CliError::Io {
        path: path.clone(),
        source: e,
    })
}

fn create_dir(path: &PathBuf) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| CliError::Io {
        path: path.clone(),
        source: e,
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit { data, out } => {
            let table = read_table(&data.data)?;
            let ds = table.to_dataset(&data.data, &data.spec())?;
            let model = build_model(data.model, &ds, &data.options())?;
            let fit = fit_dataset(model.as_ref(), &ds, data.method, data.level)?;
            let json = serde_json::to_string_pretty(&fit.report)?;
            match out {
                Some(p) => write(&p, &json)?,
                None => println!("{json}"),
            }
        }
        Command::Impute { data, out_dir } => {
            let table = read_table(&data.data)?;
            let (imputed, report) = impute_table(
                &table,
                &data.data,
                &data.spec(),
                data.model,
                &data.options(),
                data.method,
                data.level,
            )?;
            create_dir(&out_dir)?;
            write_table(&out_dir.join("imputed.csv"), &imputed)?;
            write(&out_dir.join("fit_report.json"), &serde_json::to_string_pretty(&report)?)?;
        }
        Command::Simulate {
            config,
            model,
            estimators,
            reps,
            seed,
            level,
            out_dir,
        } => {
            let cfg = match config {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| CliError::Io {
                        path: p.clone(),
                        source: e,
                    })?;
                    toml::from_str::<SimConfig>(&text).map_err(|e| CliError::Config(e.to_string()))?
                }
                None => {
                    let params = model.params()?;
                    SimConfig {
                        mechanism: model.mechanism(&params)?,
                        params,
                        n: model.n,
                        reps,
                        seed,
                        estimators,
                        interval_level: level,
                    }
                }
            };
            let table = run_simulation(&cfg)?;
            create_dir(&out_dir)?;
            write(&out_dir.join("summary.json"), &serde_json::to_string_pretty(&table)?)?;
            export_boxplot_data(&table, &out_dir.join("boxplot.csv"))?;
            for r in &table.rows {
                println!(
                    "{:<9} mean {:.6} bias {:+.6} sd {:.6} rmse {:.6} mc_se {:.6}",
                    r.estimator.as_str(),
                    r.mean,
                    r.bias,
                    r.sd,
                    r.rmse,
                    r.mc_se
                );
            }
        }
        Command::CheckBartlett {
            model,
            scale,
            draws,
            seed,
        } => {
            let params = model.params()?;
            let setup = SimSetup {
                mechanism: model.mechanism(&params)?,
                params: params.clone(),
                n: model.n,
            };
            let m = params.build();
            let log = LogShift::base(0.0);
            let b: &dyn ScaleTransform = match scale {
                BaseScale::Log => &log,
                BaseScale::Identity => &Identity,
            };
            let r = bartlett_check(m.as_ref(), &setup, &params.psi(), b, draws, seed)?;
            println!("{}", serde_json::to_string_pretty(&r)?);
        }
        Command::Reproduce {
            target,
            reps,
            seed,
            out_dir,
        } => {
            for (label, t) in reproduce(target, reps, seed, &out_dir)? {
                for r in &t.rows {
                    println!("{label} {:<9} mean {:.6} bias {:+.6} rmse {:.6}", r.estimator.as_str(), r.mean, r.bias, r.rmse);
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
