//! Estimation: proximal operators, FISTA inner solvers for the row and
//! learner subproblems, secant updates of the precision and bin boundaries,
//! and the outer block coordinate descent.

mod fit;
mod inner;
mod precision;
mod prox;
mod svd;
mod tags;

pub use fit::{fit, fit_tagged, stationarity, FitOptions, FitTrace, PrecisionMode, Stationarity};
pub use inner::{
    row_step, solve_or_c, solve_or_w, ColumnProblem, InnerOptions, NormConstraint, RowProblem, RowSolution,
};
pub use precision::{estimate_precision, optimize_bins, BinSharing, PrecisionEstimate, MIN_BIN_GAP};
pub use prox::{
    lipschitz_step, nuclear_norm, project_frobenius, project_l1_ball, project_nuclear, shrink_nonneg,
    shrink_tag_ridge, spectral_norm,
};
pub use svd::{singular_values, thin_svd, ThinSvd};
pub use tags::TagSupport;
