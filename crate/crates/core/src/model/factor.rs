use nalgebra::{DMatrix, DVector};

use super::quantizer::Thresholds;
use crate::error::{invalid, Error, Result};

/// Estimated (or ground-truth) factors of the ordinal model
/// `Y = Q(W C + mu 1^T + noise)`, noise precision `tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    /// `Q x K` non-negative question-concept associations.
    pub w: DMatrix<f64>,
    /// Intrinsic question difficulties, length `Q`.
    pub mu: DVector<f64>,
    /// `K x N` learner concept knowledge.
    pub c: DMatrix<f64>,
    pub tau: f64,
    /// Bin edges the model was fitted with (or learned).
    pub thresholds: Thresholds,
}

impl FactorModel {
    pub fn new(
        w: DMatrix<f64>,
        mu: DVector<f64>,
        c: DMatrix<f64>,
        tau: f64,
        thresholds: Thresholds,
    ) -> Result<Self> {
        let model = FactorModel {
            w,
            mu,
            c,
            tau,
            thresholds,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.w.ncols() != self.c.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "W has {} concepts, C has {}",
                self.w.ncols(),
                self.c.nrows()
            )));
        }
        if self.mu.len() != self.w.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "mu has length {}, W has {} rows",
                self.mu.len(),
                self.w.nrows()
            )));
        }
        if let Thresholds::PerQuestion(v) = &self.thresholds {
            if v.len() != self.w.nrows() {
                return Err(Error::DimensionMismatch(format!(
                    "{} per-question quantizers for {} questions",
                    v.len(),
                    self.w.nrows()
                )));
            }
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(invalid(format!("precision must be positive, got {}", self.tau)));
        }
        Ok(())
    }

    pub fn num_questions(&self) -> usize {
        self.w.nrows()
    }

    pub fn num_concepts(&self) -> usize {
        self.w.ncols()
    }

    pub fn num_learners(&self) -> usize {
        self.c.ncols()
    }

    /// Slack value `z_ij = w_i . c_j + mu_i`.
    #[inline]
    pub fn slack(&self, i: usize, j: usize) -> f64 {
        self.w.row(i).transpose().dot(&self.c.column(j)) + self.mu[i]
    }

    /// Number of nonzero entries of `W`.
    pub fn nnz_w(&self) -> usize {
        self.w.iter().filter(|&&x| x != 0.0).count()
    }
}
