//! Block coordinate descent over `C`, the rows of `(W, mu)`, and the
//! precision (or the bin boundaries).

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::inner::{row_step, solve_or_c, solve_or_w, ColumnProblem, InnerOptions, NormConstraint, RowProblem};
use super::precision::{estimate_precision, optimize_bins, BinSharing};
use super::tags::TagSupport;
use crate::error::{invalid, Error, Result};
use crate::model::{nll_unchecked, row_value_and_gradient, FactorModel, QuantizerSpec, ResponseMatrix, Thresholds};

/// How the noise level is handled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PrecisionMode {
    /// Keep `tau` at the given value.
    FixedTau(f64),
    /// Start at `tau = 1` and update it every outer iteration.
    EstimateTau,
    /// Keep `tau = 1` and learn one set of bin boundaries.
    LearnBinsShared,
    /// Keep `tau = 1` and learn bin boundaries for each question.
    LearnBinsPerQuestion,
}

/// Hyperparameters and iteration controls of a fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Number of latent concepts `K`.
    pub num_concepts: usize,
    /// l1 weight on (untagged) entries of `W`.
    pub lambda: f64,
    /// Ridge weight on tagged entries of `W`.
    pub gamma_ridge: f64,
    /// Radius of the norm ball constraining `C`.
    pub eta: f64,
    pub norm_constraint: NormConstraint,
    pub precision_mode: PrecisionMode,
    pub max_outer_iters: usize,
    pub inner: InnerOptions,
    /// Relative objective change that ends the outer loop.
    pub tol_objective: f64,
    pub seed: u64,
    /// Independent random starts; the fit with the lowest final objective wins.
    pub restarts: usize,
}

impl FitOptions {
    /// Defaults for `num_concepts` concepts and `num_learners` learners; the
    /// radius is the expected Frobenius norm of a standard normal `K x N` matrix.
    pub fn new(num_concepts: usize, num_learners: usize) -> Self {
        FitOptions {
            num_concepts,
            lambda: 1.0,
            gamma_ridge: 1e-6,
            eta: ((num_concepts * num_learners) as f64).sqrt(),
            norm_constraint: NormConstraint::Frobenius,
            precision_mode: PrecisionMode::EstimateTau,
            max_outer_iters: 100,
            inner: InnerOptions::default(),
            tol_objective: 1e-5,
            seed: 0,
            restarts: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_concepts == 0 {
            return Err(invalid("number of concepts must be >= 1"));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(invalid(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.gamma_ridge >= 0.0) || !self.gamma_ridge.is_finite() {
            return Err(invalid(format!("gamma must be >= 0, got {}", self.gamma_ridge)));
        }
        if !(self.eta > 0.0) {
            return Err(invalid(format!("eta must be > 0, got {}", self.eta)));
        }
        if self.max_outer_iters == 0 || self.inner.max_iters == 0 || self.restarts == 0 {
            return Err(invalid("iteration counts must be >= 1"));
        }
        if !(self.tol_objective >= 0.0) || !(self.inner.rel_tol >= 0.0) {
            return Err(invalid("tolerances must be >= 0"));
        }
        if let PrecisionMode::FixedTau(t) = self.precision_mode {
            if !(t > 0.0) || !t.is_finite() {
                return Err(invalid(format!("fixed tau must be positive, got {t}")));
            }
        }
        Ok(())
    }
}

/// Per-outer-iteration record of a fit.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FitTrace {
    /// Objective at the random initialization.
    pub initial_objective: f64,
    /// Objective after each outer iteration; non-increasing.
    pub objective_per_outer_iter: Vec<f64>,
    pub converged: bool,
    pub iterations_run: usize,
    /// Question rows without observations (factor entries left at initialization).
    pub empty_questions: Vec<usize>,
    /// Learner columns without observations.
    pub empty_learners: Vec<usize>,
    /// Block updates rejected because they would have raised the objective.
    pub rejected_blocks: usize,
    /// Precision updates whose secant iteration did not converge.
    pub precision_warnings: usize,
    /// Final objective of every random start, in start order.
    pub restart_objectives: Vec<f64>,
    /// Index of the start that produced the returned model.
    pub chosen_restart: usize,
}

/// Sparse ordinal factor analysis without tag information.
pub fn fit(y: &ResponseMatrix, quantizer: &QuantizerSpec, opts: &FitOptions) -> Result<(FactorModel, FitTrace)> {
    run(y, quantizer, None, opts)
}

/// Sparse ordinal factor analysis with `tags` as known support of `W`:
/// tagged entries get a ridge penalty, the rest the l1 penalty.
pub fn fit_tagged(
    y: &ResponseMatrix,
    quantizer: &QuantizerSpec,
    tags: &TagSupport,
    opts: &FitOptions,
) -> Result<(FactorModel, FitTrace)> {
    if tags.num_questions() != y.num_questions() {
        return Err(Error::DimensionMismatch(format!(
            "tags cover {} questions, responses have {}",
            tags.num_questions(),
            y.num_questions()
        )));
    }
    if tags.num_concepts() != opts.num_concepts {
        return Err(Error::DimensionMismatch(format!(
            "tags define {} concepts, options request {}",
            tags.num_concepts(),
            opts.num_concepts
        )));
    }
    run(y, quantizer, Some(tags), opts)
}

struct State {
    w: DMatrix<f64>,
    mu: DVector<f64>,
    c: DMatrix<f64>,
    tau: f64,
    thresholds: Thresholds,
}

struct Penalties<'a> {
    lambda: f64,
    gamma: f64,
    masks: &'a [Vec<bool>],
}

impl Penalties<'_> {
    fn mask(&self, i: usize) -> &[bool] {
        self.masks.get(i).map_or(&[], Vec::as_slice)
    }

    fn value(&self, w: &DMatrix<f64>) -> f64 {
        (0..w.nrows())
            .map(|i| {
                let mask = self.mask(i);
                (0..w.ncols())
                    .map(|k| {
                        let x = w[(i, k)];
                        if mask.get(k).copied().unwrap_or(false) {
                            0.5 * self.gamma * x * x
                        } else {
                            self.lambda * x.abs()
                        }
                    })
                    .sum::<f64>()
            })
            .sum()
    }
}

fn objective(y: &ResponseMatrix, s: &State, pen: &Penalties<'_>) -> f64 {
    let model = FactorModel {
        w: s.w.clone(),
        mu: s.mu.clone(),
        c: s.c.clone(),
        tau: s.tau,
        thresholds: s.thresholds.clone(),
    };
    nll_unchecked(&model, y) + pen.value(&s.w)
}

fn run(
    y: &ResponseMatrix,
    quantizer: &QuantizerSpec,
    tags: Option<&TagSupport>,
    opts: &FitOptions,
) -> Result<(FactorModel, FitTrace)> {
    opts.validate()?;
    y.check_labels(quantizer.num_labels())?;
    if y.num_observed() == 0 {
        return Err(invalid("no observed responses"));
    }
    let masks = tags.map(TagSupport::masks).unwrap_or_default();
    // the first start uses the seed itself, so restarts = 1 is a plain fit
    let fits: Vec<(FactorModel, FitTrace)> = (0..opts.restarts as u64)
        .into_par_iter()
        .map(|r| {
            let seed = if r == 0 { opts.seed } else { crate::evaluation::derive_seed(opts.seed, 7, r) };
            run_from(y, quantizer, &masks, opts, seed)
        })
        .collect::<Result<_>>()?;
    let finals: Vec<f64> = fits.iter().map(|(_, t)| final_objective(t)).collect();
    let best = (0..finals.len()).fold(0, |b, r| if finals[r] < finals[b] { r } else { b });
    let (model, mut trace) = fits.into_iter().nth(best).expect("at least one start");
    trace.restart_objectives = finals;
    trace.chosen_restart = best;
    Ok((model, trace))
}

fn final_objective(t: &FitTrace) -> f64 {
    t.objective_per_outer_iter.last().copied().unwrap_or(t.initial_objective)
}

fn run_from(
    y: &ResponseMatrix,
    quantizer: &QuantizerSpec,
    masks: &[Vec<bool>],
    opts: &FitOptions,
    seed: u64,
) -> Result<(FactorModel, FitTrace)> {
    let (nq, nl, k) = (y.num_questions(), y.num_learners(), opts.num_concepts);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = DMatrix::from_fn(nq, k, |_, _| {
        let v: f64 = StandardNormal.sample(&mut rng);
        v.abs()
    });
    // a tagged row starts on its tags only, which anchors concept identities
    for (i, mask) in masks.iter().enumerate() {
        if mask.iter().any(|&t| t) {
            for (kk, &t) in mask.iter().enumerate() {
                if !t {
                    w[(i, kk)] = 0.0;
                }
            }
        }
    }
    let c = DMatrix::from_fn(k, nl, |_, _| StandardNormal.sample(&mut rng));
    let c = opts.norm_constraint.project(&c, opts.eta)?;
    let tau = match opts.precision_mode {
        PrecisionMode::FixedTau(t) => t,
        _ => 1.0,
    };
    let thresholds = match opts.precision_mode {
        PrecisionMode::LearnBinsPerQuestion => Thresholds::PerQuestion(vec![quantizer.clone(); nq]),
        _ => Thresholds::Shared(quantizer.clone()),
    };
    let mut state = State {
        w,
        mu: DVector::zeros(nq),
        c,
        tau,
        thresholds,
    };

    let pen = Penalties {
        lambda: opts.lambda,
        gamma: opts.gamma_ridge,
        masks,
    };

    let mut trace = FitTrace {
        empty_questions: y.empty_rows(),
        empty_learners: y.empty_cols(),
        ..FitTrace::default()
    };
    if !trace.empty_questions.is_empty() || !trace.empty_learners.is_empty() {
        log::warn!(
            "{} questions and {} learners have no observations and keep their initial factors",
            trace.empty_questions.len(),
            trace.empty_learners.len()
        );
    }

    let mut current = objective(y, &state, &pen);
    trace.initial_objective = current;
    if !current.is_finite() {
        return Err(Error::Numerical(format!("initial objective is {current}")));
    }

    for _ in 0..opts.max_outer_iters {
        let start = current;

        // learner knowledge
        let problem = ColumnProblem {
            responses: y,
            w: &state.w,
            mu: &state.mu,
            tau: state.tau,
            thresholds: &state.thresholds,
            constraint: opts.norm_constraint,
            eta: opts.eta,
        };
        let c_new = solve_or_c(&problem, &state.c, &opts.inner)?;
        let c_old = std::mem::replace(&mut state.c, c_new);
        accept_or_revert(y, &mut state, &pen, &mut current, &mut trace, |s| s.c = c_old);

        // question rows, independently
        let step = row_step(state.tau, &state.c)?;
        let rows: Vec<Option<(DVector<f64>, f64)>> = (0..nq)
            .into_par_iter()
            .map(|i| {
                let row = y.row(i);
                if row.is_empty() {
                    return Ok(None);
                }
                let problem = RowProblem {
                    row,
                    c: &state.c,
                    tau: state.tau,
                    quantizer: state.thresholds.for_question(i),
                    lambda: pen.lambda,
                    gamma: pen.gamma,
                    tagged: pen.mask(i),
                };
                let w_init = state.w.row(i).transpose();
                let sol = solve_or_w(&problem, &w_init, state.mu[i], step, &opts.inner)?;
                Ok(Some((sol.w, sol.mu)))
            })
            .collect::<Result<_>>()?;
        let (w_old, mu_old) = (state.w.clone(), state.mu.clone());
        for (i, r) in rows.into_iter().enumerate() {
            if let Some((w_i, mu_i)) = r {
                state.w.set_row(i, &w_i.transpose());
                state.mu[i] = mu_i;
            }
        }
        accept_or_revert(y, &mut state, &pen, &mut current, &mut trace, |s| {
            s.w = w_old;
            s.mu = mu_old;
        });

        // precision or bin boundaries
        match opts.precision_mode {
            PrecisionMode::FixedTau(_) => {}
            PrecisionMode::EstimateTau => {
                let est = estimate_precision(y, &state.w, &state.c, &state.mu, &state.thresholds, state.tau)?;
                if !est.converged {
                    trace.precision_warnings += 1;
                }
                let old = std::mem::replace(&mut state.tau, est.tau);
                accept_or_revert(y, &mut state, &pen, &mut current, &mut trace, |s| s.tau = old);
            }
            PrecisionMode::LearnBinsShared | PrecisionMode::LearnBinsPerQuestion => {
                let sharing = if opts.precision_mode == PrecisionMode::LearnBinsShared {
                    BinSharing::Shared
                } else {
                    BinSharing::PerQuestion
                };
                let new = optimize_bins(y, &state.w, &state.c, &state.mu, &state.thresholds, state.tau, sharing)?;
                let old = std::mem::replace(&mut state.thresholds, new);
                accept_or_revert(y, &mut state, &pen, &mut current, &mut trace, |s| s.thresholds = old);
            }
        }

        if !current.is_finite() {
            return Err(Error::Numerical(format!(
                "objective became {current} after {} outer iterations",
                trace.iterations_run
            )));
        }
        trace.objective_per_outer_iter.push(current);
        trace.iterations_run += 1;
        if start - current <= opts.tol_objective * start.abs().max(1.0) {
            trace.converged = true;
            break;
        }
    }

    let model = FactorModel::new(state.w, state.mu, state.c, state.tau, state.thresholds)?;
    Ok((model, trace))
}

/// Keeps a block update if the full objective did not increase.
fn accept_or_revert(
    y: &ResponseMatrix,
    state: &mut State,
    pen: &Penalties<'_>,
    current: &mut f64,
    trace: &mut FitTrace,
    revert: impl FnOnce(&mut State),
) {
    let value = objective(y, state, pen);
    if value <= *current {
        *current = value;
    } else {
        revert(state);
        trace.rejected_blocks += 1;
    }
}

/// Norms of the proximal gradient mappings of a fitted model, one per block.
/// Both vanish exactly at a stationary point of the penalized objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stationarity {
    /// Over all `(w_i, mu_i)` rows.
    pub rows: f64,
    pub learners: f64,
}

/// Gradient-mapping norms of `model` for the problem described by `opts`.
pub fn stationarity(
    y: &ResponseMatrix,
    model: &FactorModel,
    opts: &FitOptions,
    tags: Option<&TagSupport>,
) -> Result<Stationarity> {
    crate::model::check_dims(model, y)?;
    let masks = tags.map(TagSupport::masks).unwrap_or_default();
    let k = model.num_concepts();
    let step = row_step(model.tau, &model.c)?;
    let mut rows = 0.0;
    let mut g = vec![0.0; k + 1];
    for i in 0..y.num_questions() {
        let problem = RowProblem {
            row: y.row(i),
            c: &model.c,
            tau: model.tau,
            quantizer: model.thresholds.for_question(i),
            lambda: opts.lambda,
            gamma: opts.gamma_ridge,
            tagged: masks.get(i).map_or(&[], Vec::as_slice),
        };
        let mut x: Vec<f64> = model.w.row(i).iter().copied().collect();
        x.push(model.mu[i]);
        row_value_and_gradient(&x[..k], x[k], &model.c, problem.row, model.tau, problem.quantizer, &mut g);
        let mut moved: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - step * b).collect();
        problem.prox_in_place(&mut moved, step);
        rows += x.iter().zip(&moved).map(|(a, b)| ((a - b) / step).powi(2)).sum::<f64>();
    }

    let learners = if model.w.iter().all(|&v| v == 0.0) {
        0.0
    } else {
        let step = super::prox::lipschitz_step(model.tau, &model.w)?;
        let w_t = model.w.transpose();
        let mut grad = DMatrix::zeros(k, y.num_learners());
        for j in 0..y.num_learners() {
            for &(i, label) in y.col(j) {
                let wi = w_t.column(i);
                let z = wi.dot(&model.c.column(j)) + model.mu[i];
                let t = crate::model::entry_terms(z, label, model.tau, model.thresholds.for_question(i));
                let r = model.tau * t.ratio();
                let mut col = grad.column_mut(j);
                col.axpy(r, &wi, 1.0);
            }
        }
        let moved = opts.norm_constraint.project(&(&model.c - grad * step), opts.eta)?;
        ((&model.c - moved) / step).norm()
    };
    Ok(Stationarity {
        rows: rows.sqrt(),
        learners,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Observation;

    fn tiny() -> (ResponseMatrix, QuantizerSpec) {
        let grid = vec![
            vec![Some(1), Some(2), Some(3), Some(3)],
            vec![Some(2), None, Some(3), Some(1)],
            vec![Some(3), Some(3), None, Some(2)],
        ];
        (ResponseMatrix::from_dense(&grid).unwrap(), QuantizerSpec::from_interior(&[-0.5, 0.5]).unwrap())
    }

    #[test]
    fn invalid_options_are_rejected() {
        let (y, q) = tiny();
        let mut o = FitOptions::new(2, 4);
        o.eta = 0.0;
        assert!(fit(&y, &q, &o).is_err());
        let mut o = FitOptions::new(2, 4);
        o.lambda = -1.0;
        assert!(fit(&y, &q, &o).is_err());
        let o = FitOptions::new(0, 4);
        assert!(fit(&y, &q, &o).is_err());
        let bad = ResponseMatrix::new(1, 1, [Observation { question: 0, learner: 0, label: 4 }]).unwrap();
        assert!(fit(&bad, &q, &FitOptions::new(1, 1)).is_err());
    }

    #[test]
    fn trace_is_monotone_and_model_feasible() {
        let (y, q) = tiny();
        for mode in [
            PrecisionMode::FixedTau(1.0),
            PrecisionMode::EstimateTau,
            PrecisionMode::LearnBinsShared,
            PrecisionMode::LearnBinsPerQuestion,
        ] {
            let mut o = FitOptions::new(2, 4);
            o.precision_mode = mode;
            o.lambda = 0.1;
            o.eta = 2.0;
            let (m, t) = fit(&y, &q, &o).unwrap();
            assert!(t.objective_per_outer_iter.windows(2).all(|w| w[1] <= w[0]));
            assert!(t.objective_per_outer_iter[0] <= t.initial_objective);
            assert!(m.w.iter().all(|&x| x >= 0.0));
            assert!(m.tau > 0.0);
            assert!(m.c.norm() <= 2.0 + 1e-8);
        }
    }

    #[test]
    fn deterministic_for_a_seed() {
        let (y, q) = tiny();
        let o = FitOptions::new(2, 4);
        let (a, _) = fit(&y, &q, &o).unwrap();
        let (b, _) = fit(&y, &q, &o).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_rows_keep_initialization() {
        let y = ResponseMatrix::from_dense(&[vec![Some(1), Some(2)], vec![None, None]]).unwrap();
        let q = QuantizerSpec::binary();
        let (_, t) = fit(&y, &q, &FitOptions::new(1, 2)).unwrap();
        assert_eq!(t.empty_questions, vec![1]);
    }
}
