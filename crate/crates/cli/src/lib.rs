//! Command-line ML imputation of CSV data and Monte Carlo reproduction of
//! the mean-response simulation studies.

pub mod error;
pub mod fit;
pub mod reproduce;
pub mod sim;
pub mod table;

pub use error::{CliError, Result};
pub use fit::{build_model, fit_dataset, impute_table, FitMethod, FitOutcome, FitReport, ModelOptions};
pub use sim::{
    estimator_y_ml, export_boxplot_data, ks_standard_normal, quartiles, run_simulation,
    run_simulation_with_threads, Estimator, EstimatorSummary, Quartiles, SimConfig, SummaryTable,
};
pub use table::{load_dataset, read_table, save_dataset, write_table, ColumnSpec, Table};
