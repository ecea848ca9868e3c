//! Ordinal probit likelihood and its derivatives.
//!
//! For a slack value `z`, label `y` with bin edges `(L, U)` and precision
//! `tau`, `P(Y = y | z) = Phi(tau (U - z)) - Phi(tau (L - z))`.

use nalgebra::{DMatrix, DVector};

use super::factor::FactorModel;
use super::normal::{IntervalTerms, LIKELIHOOD_FLOOR};
use super::quantizer::QuantizerSpec;
use super::responses::ResponseMatrix;
use crate::error::{invalid, Error, Result};

#[inline]
pub(crate) fn entry_terms(z: f64, y: usize, tau: f64, q: &QuantizerSpec) -> IntervalTerms {
    let b = q.bounds_unchecked(y);
    IntervalTerms::new(tau * (b.upper - z), tau * (b.lower - z))
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("precision must be positive and finite, got {tau}")))
    }
}

/// `P(Y = y | z)`, clamped below at [`LIKELIHOOD_FLOOR`].
pub fn ordinal_likelihood(z: f64, y: usize, tau: f64, q: &QuantizerSpec) -> Result<f64> {
    check_tau(tau)?;
    q.check_label(y)?;
    if z.is_nan() {
        return Err(invalid("slack value is NaN"));
    }
    Ok(entry_terms(z, y, tau, q).prob().max(LIKELIHOOD_FLOOR))
}

/// `[phi(tau (U - z)) - phi(tau (L - z))] / [Phi(tau (U - z)) - Phi(tau (L - z))]`.
///
/// Evaluated in tail-stable form, so it stays finite (and follows the Mills
/// ratio asymptotics) far outside the observed bin.
pub fn likelihood_ratio_term(z: f64, y: usize, tau: f64, q: &QuantizerSpec) -> Result<f64> {
    check_tau(tau)?;
    q.check_label(y)?;
    Ok(entry_terms(z, y, tau, q).ratio())
}

/// `-sum log P(Y_ij | z_ij)` over the observed entries.
pub fn negative_log_likelihood(model: &FactorModel, y: &ResponseMatrix) -> Result<f64> {
    check_dims(model, y)?;
    check_tau(model.tau)?;
    Ok(nll_unchecked(model, y))
}

pub(crate) fn check_dims(model: &FactorModel, y: &ResponseMatrix) -> Result<()> {
    model.validate()?;
    if model.num_questions() != y.num_questions() || model.num_learners() != y.num_learners() {
        return Err(Error::DimensionMismatch(format!(
            "model is {}x{}, responses are {}x{}",
            model.num_questions(),
            model.num_learners(),
            y.num_questions(),
            y.num_learners()
        )));
    }
    y.check_labels(model.thresholds.num_labels())
}

pub(crate) fn nll_unchecked(model: &FactorModel, y: &ResponseMatrix) -> f64 {
    (0..y.num_questions())
        .map(|i| {
            row_nll(
                model.w.row(i).transpose().as_slice(),
                model.mu[i],
                &model.c,
                y.row(i),
                model.tau,
                model.thresholds.for_question(i),
            )
        })
        .sum()
}

pub(crate) fn row_nll(
    w_i: &[f64],
    mu_i: f64,
    c: &DMatrix<f64>,
    row: &[(usize, usize)],
    tau: f64,
    q: &QuantizerSpec,
) -> f64 {
    row.iter()
        .map(|&(j, label)| {
            let z = dot(w_i, c.column(j).as_slice()) + mu_i;
            -entry_terms(z, label, tau, q).floored_log_prob()
        })
        .sum()
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gradient of the row negative log-likelihood with respect to `w_i`
/// (first `K` entries) and `mu_i` (last entry); also returns the row NLL.
pub(crate) fn row_value_and_gradient(
    w_i: &[f64],
    mu_i: f64,
    c: &DMatrix<f64>,
    row: &[(usize, usize)],
    tau: f64,
    q: &QuantizerSpec,
    grad: &mut [f64],
) -> f64 {
    let k = w_i.len();
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut value = 0.0;
    for &(j, label) in row {
        let cj = c.column(j);
        let cj = cj.as_slice();
        let z = dot(w_i, cj) + mu_i;
        let t = entry_terms(z, label, tau, q);
        value -= t.floored_log_prob();
        let r = tau * t.ratio();
        for kk in 0..k {
            grad[kk] += r * cj[kk];
        }
        grad[k] += r;
    }
    value
}

/// Gradient of the negative log-likelihood of question row `i` with respect
/// to its association vector `w_i`.
///
/// Equals `tau * C_obs * p`, where `p` stacks [`likelihood_ratio_term`] over
/// the observed learners of the row.
pub fn gradient_row(
    w_i: &DVector<f64>,
    mu_i: f64,
    c: &DMatrix<f64>,
    row: &[(usize, usize)],
    tau: f64,
    q: &QuantizerSpec,
) -> Result<DVector<f64>> {
    check_tau(tau)?;
    if w_i.len() != c.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "w_i has {} entries, C has {} rows",
            w_i.len(),
            c.nrows()
        )));
    }
    for &(j, label) in row {
        if j >= c.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "learner {j} outside C with {} columns",
                c.ncols()
            )));
        }
        q.check_label(label)?;
    }
    let k = w_i.len();
    let mut g = vec![0.0; k + 1];
    row_value_and_gradient(w_i.as_slice(), mu_i, c, row, tau, q, &mut g);
    g.truncate(k);
    Ok(DVector::from_vec(g))
}
