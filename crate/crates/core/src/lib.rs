//! h-likelihood estimation and imputation for models with missing responses.
//!
//! Missing responses are treated as random parameters. Jointly maximizing the
//! h-likelihood on a canonical scale gives the marginal MLE of the fixed
//! parameters and the ML imputations of the missing values in one pass, and
//! the observed h-likelihood information supplies variances for both.

pub mod data;
pub mod em;
pub mod error;
pub mod hlik;
pub mod inference;
pub mod jet;
pub mod laplace;
pub mod model;
pub mod models;
pub mod numdiff;
pub mod scale;
pub mod solver;

pub use data::Dataset;
pub use em::{em_fit, em_mean_response, EmFit, EmOptions, EmStep};
pub use error::{Error, Result};
pub use hlik::{extended_loglik, hlik, hlik_in_y, hlik_on, HLikValue, Objective};
pub use inference::{
    dtilde_v_dpsi, hessian_blocks, hessian_blocks_on, normal_quantile, var_fixed, var_random,
    var_random_at, variance_report, z_scale_report, BlockScale, HessianBlocks,
    PredictionInterval, VarianceReport,
};
pub use laplace::{
    approx_mle, bartlett_check, laplace_marginal, laplace_score_hessian, make_weak_canonical,
    BartlettCheckResult, CurvatureFactor, LaplaceDerivatives, LaplaceFit,
};
pub use model::{Model, NormalizingTransform, ParamDomain};
pub use models::{
    simulate, MissingnessMechanism, ModelParams, ModelTag, SimSetup, SimulatedData, Simulator,
};
pub use scale::{Identity, LogShift, Rescaled, ScaleFactor, ScaleKind, ScaleTransform};
pub use solver::{
    inner_mode, joint_maximize, joint_maximize_on, profile_loglik, solve_random_given_psi,
    FitResult, InitPsi, InitRandom, SolveOptions,
};
