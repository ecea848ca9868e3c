//! Sparse factor analysis for ordinal (partial-credit) graded responses.
//!
//! Given a partially observed `Q x N` matrix of ordinal labels, the crate
//! estimates a sparse non-negative question-concept association matrix `W`,
//! learner concept knowledge `C`, per-question intrinsic difficulties `mu`,
//! and the noise precision `tau` of the probit quantization model
//!
//! ```text
//! Y_ij = Q(w_i . c_j + mu_i + e_ij),   e_ij ~ N(0, 1/tau)
//! ```
//!
//! by block coordinate descent with accelerated proximal gradient inner
//! solvers. Instructor tags can be supplied as known support of `W`.
//!
//! * [`model`]: quantizer, likelihood, gradients
//! * [`solvers`]: proximal operators, inner solvers, [`solvers::fit`]
//! * [`synthetic`]: ground truth generation, alignment, recovery errors
//! * [`evaluation`]: BIC, hyperparameter selection, holdout prediction, experiment drivers
//! * [`io`]: CSV/JSON/DOT formats
//! * [`cli`]: the `ordfactor` command line

pub mod cli;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod model;
pub mod solvers;
pub mod synthetic;

pub use error::{Error, Result};
