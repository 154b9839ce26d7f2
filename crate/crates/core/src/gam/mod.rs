//! Generalized additive model with identity link: penalized cubic regression
//! splines per feature, optional pairwise tensor-product surfaces, partial
//! dependence and validation-based smoothing-parameter search.

mod basis;
mod design;
mod model;
mod table;
mod tune;

pub use basis::{build_basis, penalty_matrix, BSplineBasis, RangePolicy};
pub use model::{fit, predict, FitDiagnostics, GamModel, GamSpec, InteractionTerm, Lambdas, Link, SmoothTerm};
pub use table::FeatureTable;
pub use tune::{
    observed_grid, partial_dependence, tune_lambda, write_pdp_csv, GridScore, LambdaGrid, TuneOutcome, TuneSplit,
    TIE_TOLERANCE,
};
