//! Accelerated proximal gradient (FISTA) solvers for the two convex
//! ordinal-regression subproblems: one question row `(w_i, mu_i)` with `C`
//! fixed, and the whole learner matrix `C` with `W`, `mu` fixed.

use nalgebra::{DMatrix, DVector};

use super::prox::{lipschitz_step, project_frobenius_mut, project_nuclear};
use crate::error::{invalid, Error, Result};
use crate::model::{dot, entry_terms, row_value_and_gradient, QuantizerSpec, ResponseMatrix, Thresholds};

/// Norm ball constraining `C`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormConstraint {
    Frobenius,
    Nuclear,
}

impl NormConstraint {
    pub fn norm(self, c: &DMatrix<f64>) -> f64 {
        match self {
            NormConstraint::Frobenius => c.norm(),
            NormConstraint::Nuclear => super::prox::nuclear_norm(c),
        }
    }

    pub fn project(self, c: &DMatrix<f64>, eta: f64) -> Result<DMatrix<f64>> {
        match self {
            NormConstraint::Frobenius => {
                let mut out = c.clone();
                project_frobenius_mut(&mut out, eta);
                Ok(out)
            }
            NormConstraint::Nuclear => project_nuclear(c, eta),
        }
    }
}

/// Iteration budget of one FISTA solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerOptions {
    pub max_iters: usize,
    /// Stop once the relative objective decrease of an accepted step is below this.
    pub rel_tol: f64,
}

impl Default for InnerOptions {
    fn default() -> Self {
        InnerOptions {
            max_iters: 100,
            rel_tol: 1e-6,
        }
    }
}

pub(crate) struct FistaOutcome {
    pub x: DMatrix<f64>,
    pub objective: f64,
}

/// FISTA with function-value restart. A step that would raise the objective
/// resets the momentum instead of being accepted, so the returned iterate
/// is the best one seen and never worse than `x0`.
pub(crate) fn fista(
    x0: DMatrix<f64>,
    step: f64,
    opts: &InnerOptions,
    mut smooth_grad: impl FnMut(&DMatrix<f64>, &mut DMatrix<f64>),
    mut objective: impl FnMut(&DMatrix<f64>) -> f64,
    mut prox: impl FnMut(&mut DMatrix<f64>, f64) -> Result<()>,
) -> Result<FistaOutcome> {
    let mut x = x0;
    let mut f_x = objective(&x);
    if !f_x.is_finite() {
        return Err(Error::Numerical(format!("objective {f_x} at the starting point")));
    }
    let mut x_prev = x.clone();
    let mut grad = DMatrix::zeros(x.nrows(), x.ncols());
    let mut t = 1.0_f64;
    let mut restarted = false;

    for _ in 0..opts.max_iters {
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        let y = &x + (&x - &x_prev) * beta;
        smooth_grad(&y, &mut grad);
        let mut candidate = y - &grad * step;
        prox(&mut candidate, step)?;
        let f_cand = objective(&candidate);

        if !(f_cand <= f_x) {
            if restarted {
                // a plain proximal step from the best point made no progress
                break;
            }
            t = 1.0;
            x_prev.copy_from(&x);
            restarted = true;
            continue;
        }
        restarted = false;
        let decrease = f_x - f_cand;
        x_prev = std::mem::replace(&mut x, candidate);
        f_x = f_cand;
        t = t_next;
        if decrease <= opts.rel_tol * f_x.abs().max(1.0) {
            break;
        }
    }
    Ok(FistaOutcome { x, objective: f_x })
}

/// Data and penalties of one question-row subproblem.
#[derive(Debug, Clone, Copy)]
pub struct RowProblem<'a> {
    /// `(learner, label)` observations of the row.
    pub row: &'a [(usize, usize)],
    pub c: &'a DMatrix<f64>,
    pub tau: f64,
    pub quantizer: &'a QuantizerSpec,
    /// l1 weight on untagged entries.
    pub lambda: f64,
    /// Ridge weight on tagged entries.
    pub gamma: f64,
    /// Per-concept tag flags; empty means no tags.
    pub tagged: &'a [bool],
}

impl RowProblem<'_> {
    fn is_tagged(&self, k: usize) -> bool {
        self.tagged.get(k).copied().unwrap_or(false)
    }

    /// Regularizer value of `w` (excludes `mu`, which is unpenalized).
    pub fn penalty(&self, w: &[f64]) -> f64 {
        w.iter()
            .enumerate()
            .map(|(k, &x)| {
                if self.is_tagged(k) {
                    0.5 * self.gamma * x * x
                } else {
                    self.lambda * x.abs()
                }
            })
            .sum()
    }

    /// Proximal step on the stacked `[w; mu]` vector.
    pub(crate) fn prox_in_place(&self, x: &mut [f64], step: f64) {
        let k = x.len() - 1;
        let ridge = 1.0 / (1.0 + self.gamma * step);
        let shift = self.lambda * step;
        for (kk, v) in x[..k].iter_mut().enumerate() {
            *v = if self.is_tagged(kk) {
                (*v * ridge).max(0.0)
            } else {
                (*v - shift).max(0.0)
            };
        }
    }

    /// Penalized row objective at `(w, mu)`.
    pub fn objective(&self, w: &[f64], mu: f64) -> f64 {
        crate::model::row_nll(w, mu, self.c, self.row, self.tau, self.quantizer) + self.penalty(w)
    }
}

/// Result of a row solve.
#[derive(Debug, Clone, PartialEq)]
pub struct RowSolution {
    pub w: DVector<f64>,
    pub mu: f64,
    pub objective: f64,
}

/// Step size for the row subproblems: `C` stacked with a row of ones for `mu`.
pub fn row_step(tau: f64, c: &DMatrix<f64>) -> Result<f64> {
    let augmented = c.clone().insert_row(c.nrows(), 1.0);
    lipschitz_step(tau, &augmented)
}

/// Minimizes the row negative log-likelihood plus penalties over `w >= 0`
/// and unconstrained `mu`, starting from `(w_init, mu_init)`.
pub fn solve_or_w(
    problem: &RowProblem<'_>,
    w_init: &DVector<f64>,
    mu_init: f64,
    step: f64,
    opts: &InnerOptions,
) -> Result<RowSolution> {
    let k = problem.c.nrows();
    if w_init.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "w_init has {} entries, C has {} rows",
            w_init.len(),
            k
        )));
    }
    if w_init.iter().any(|&x| !(x >= 0.0)) {
        return Err(invalid("w_init must be non-negative"));
    }
    if !(step > 0.0) {
        return Err(invalid(format!("step must be > 0, got {step}")));
    }
    let mut x0 = DMatrix::zeros(k + 1, 1);
    x0.as_mut_slice()[..k].copy_from_slice(w_init.as_slice());
    x0[k] = mu_init;

    let out = fista(
        x0,
        step,
        opts,
        |y, g| {
            let s = y.as_slice();
            row_value_and_gradient(
                &s[..k],
                s[k],
                problem.c,
                problem.row,
                problem.tau,
                problem.quantizer,
                g.as_mut_slice(),
            );
        },
        |x| {
            let s = x.as_slice();
            problem.objective(&s[..k], s[k])
        },
        |x, t| {
            problem.prox_in_place(x.as_mut_slice(), t);
            Ok(())
        },
    )?;
    let s = out.x.as_slice();
    Ok(RowSolution {
        w: DVector::from_column_slice(&s[..k]),
        mu: s[k],
        objective: out.objective,
    })
}

/// Data of the learner-matrix subproblem.
#[derive(Debug, Clone, Copy)]
pub struct ColumnProblem<'a> {
    pub responses: &'a ResponseMatrix,
    pub w: &'a DMatrix<f64>,
    pub mu: &'a DVector<f64>,
    pub tau: f64,
    pub thresholds: &'a Thresholds,
    pub constraint: NormConstraint,
    pub eta: f64,
}

impl ColumnProblem<'_> {
    fn check(&self, c: &DMatrix<f64>) -> Result<()> {
        let y = self.responses;
        if self.w.nrows() != y.num_questions()
            || c.ncols() != y.num_learners()
            || self.w.ncols() != c.nrows()
            || self.mu.len() != y.num_questions()
        {
            return Err(Error::DimensionMismatch(format!(
                "W {}x{}, C {}x{}, mu {}, responses {}x{}",
                self.w.nrows(),
                self.w.ncols(),
                c.nrows(),
                c.ncols(),
                self.mu.len(),
                y.num_questions(),
                y.num_learners()
            )));
        }
        if !(self.eta > 0.0) {
            return Err(invalid(format!("norm radius must be > 0, got {}", self.eta)));
        }
        Ok(())
    }

    /// Negative log-likelihood as a function of `C`; `w_t` is `W^T`.
    fn value_and_gradient(&self, w_t: &DMatrix<f64>, c: &DMatrix<f64>, grad: Option<&mut DMatrix<f64>>) -> f64 {
        let y = self.responses;
        let k = c.nrows();
        let mut value = 0.0;
        let mut grad = grad;
        let mut gj = vec![0.0; k];
        for j in 0..y.num_learners() {
            let cj = c.column(j);
            let cj = cj.as_slice();
            gj.iter_mut().for_each(|g| *g = 0.0);
            for &(i, label) in y.col(j) {
                let wi = w_t.column(i);
                let wi = wi.as_slice();
                let z = dot(wi, cj) + self.mu[i];
                let t = entry_terms(z, label, self.tau, self.thresholds.for_question(i));
                value -= t.floored_log_prob();
                if grad.is_some() {
                    let r = self.tau * t.ratio();
                    for kk in 0..k {
                        gj[kk] += r * wi[kk];
                    }
                }
            }
            if let Some(g) = grad.as_deref_mut() {
                g.column_mut(j).copy_from_slice(&gj);
            }
        }
        value
    }

    pub fn objective(&self, c: &DMatrix<f64>) -> f64 {
        let w_t = self.w.transpose();
        self.value_and_gradient(&w_t, c, None)
    }
}

/// Minimizes the negative log-likelihood over `C` in the norm ball, starting
/// from `c_init` (projected first if infeasible).
pub fn solve_or_c(problem: &ColumnProblem<'_>, c_init: &DMatrix<f64>, opts: &InnerOptions) -> Result<DMatrix<f64>> {
    problem.check(c_init)?;
    let x0 = problem.constraint.project(c_init, problem.eta)?;
    if problem.w.iter().all(|&x| x == 0.0) {
        // the likelihood does not depend on C
        return Ok(x0);
    }
    let step = lipschitz_step(problem.tau, problem.w)?;
    let w_t = problem.w.transpose();
    let out = fista(
        x0,
        step,
        opts,
        |c, g| {
            problem.value_and_gradient(&w_t, c, Some(g));
        },
        |c| problem.value_and_gradient(&w_t, c, None),
        |c, _| {
            match problem.constraint {
                NormConstraint::Frobenius => project_frobenius_mut(c, problem.eta),
                NormConstraint::Nuclear => *c = project_nuclear(c, problem.eta)?,
            }
            Ok(())
        },
    )?;
    Ok(out.x)
}
