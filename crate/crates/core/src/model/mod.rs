//! The ordinal probit factor model: quantizer, likelihood, and gradients.

mod factor;
mod likelihood;
mod normal;
mod quantizer;
mod responses;

pub use factor::FactorModel;
pub use likelihood::{
    gradient_row, likelihood_ratio_term, negative_log_likelihood, ordinal_likelihood,
};
pub use normal::{std_normal_cdf, std_normal_pdf, std_normal_quantile, LIKELIHOOD_FLOOR};
pub use quantizer::{BoundsPair, QuantizerSpec, Thresholds};
pub use responses::{Observation, ResponseMatrix};

pub(crate) use likelihood::{check_dims, dot, entry_terms, nll_unchecked, row_nll, row_value_and_gradient};
pub(crate) use normal::IntervalTerms;
