use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::derive_seed;
use super::prediction::{predict_scores, PredictionRule};
use crate::error::{invalid, Error, Result};
use crate::model::{negative_log_likelihood, FactorModel, QuantizerSpec, ResponseMatrix};
use crate::solvers::{fit, fit_tagged, singular_values, FitOptions, NormConstraint, PrecisionMode, TagSupport};

/// Number of singular values above `rel_tol * sigma_max`.
pub fn numerical_rank(c: &DMatrix<f64>, rel_tol: f64) -> usize {
    if c.is_empty() {
        return 0;
    }
    let Ok(s) = singular_values(c) else {
        return 0;
    };
    let max = s[0];
    if max == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > rel_tol * max).count()
}

/// Relative singular-value cutoff used when counting the rank of `C`.
const RANK_TOL: f64 = 1e-3;

/// Effective number of free parameters of a fitted model.
fn effective_dimension(model: &FactorModel, opts: &FitOptions) -> usize {
    let (q, k, n) = (model.num_questions(), model.num_concepts(), model.num_learners());
    let c_dim = match opts.norm_constraint {
        NormConstraint::Frobenius => k * n,
        NormConstraint::Nuclear => {
            let r = numerical_rank(&model.c, RANK_TOL);
            r * (k + n - r)
        }
    };
    let interior = model.thresholds.num_labels().saturating_sub(1);
    let noise = match opts.precision_mode {
        PrecisionMode::FixedTau(_) => 0,
        PrecisionMode::EstimateTau => 1,
        PrecisionMode::LearnBinsShared => interior,
        PrecisionMode::LearnBinsPerQuestion => q * interior,
    };
    model.nnz_w() + q + c_dim + noise
}

/// `2 NLL + k_eff ln |observed|`; lower is better.
///
/// `k_eff` counts the nonzeros of `W`, one difficulty per question, `K N`
/// entries of `C` (or `r (K + N - r)` for a rank-`r` `C` under the nuclear
/// constraint), and whatever noise parameters `opts` lets the fit learn.
pub fn bic_score(model: &FactorModel, y: &ResponseMatrix, opts: &FitOptions) -> Result<f64> {
    let nll = negative_log_likelihood(model, y)?;
    let n_obs = y.num_observed().max(1) as f64;
    Ok(2.0 * nll + effective_dimension(model, opts) as f64 * n_obs.ln())
}

/// Candidate values of `(lambda, eta)`; every pair is tried.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperGrid {
    pub lambdas: Vec<f64>,
    pub etas: Vec<f64>,
}

impl HyperGrid {
    pub fn single(lambda: f64, eta: f64) -> Self {
        HyperGrid {
            lambdas: vec![lambda],
            etas: vec![eta],
        }
    }

    fn points(&self) -> Vec<(f64, f64)> {
        // simplest first: larger lambda, then smaller eta
        let mut lambdas = self.lambdas.clone();
        lambdas.sort_by(|a, b| b.total_cmp(a));
        let mut etas = self.etas.clone();
        etas.sort_by(f64::total_cmp);
        lambdas.iter().flat_map(|&l| etas.iter().map(move |&e| (l, e))).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    Bic,
    /// Pooled held-out RMSE of posterior-mean predictions over this many folds.
    CrossValidation { folds: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridScore {
    pub lambda: f64,
    pub eta: f64,
    /// `None` when every fit at this point failed.
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub options: FitOptions,
    /// Empty when the grid had a single point (nothing was fitted).
    pub scores: Vec<GridScore>,
    /// Under BIC, the winning fit on the full data.
    pub model: Option<FactorModel>,
}

/// Fold id in `0..folds` for each of `n` entries, as balanced as possible.
pub fn cv_folds(n: usize, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 || folds > n {
        return Err(invalid(format!("cannot split {n} entries into {folds} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold = vec![0; n];
    for (pos, &idx) in order.iter().enumerate() {
        fold[idx] = pos % folds;
    }
    Ok(fold)
}

fn fit_with(
    y: &ResponseMatrix,
    q: &QuantizerSpec,
    tags: Option<&TagSupport>,
    opts: &FitOptions,
) -> Result<FactorModel> {
    match tags {
        Some(t) => fit_tagged(y, q, t, opts),
        None => fit(y, q, opts),
    }
    .map(|(m, _)| m)
}

fn score_point(
    y: &ResponseMatrix,
    q: &QuantizerSpec,
    tags: Option<&TagSupport>,
    opts: &FitOptions,
    mode: SelectionMode,
    folds: Option<&[usize]>,
) -> Result<(f64, Option<FactorModel>)> {
    match mode {
        SelectionMode::Bic => {
            let model = fit_with(y, q, tags, opts)?;
            Ok((bic_score(&model, y, opts)?, Some(model)))
        }
        SelectionMode::CrossValidation { folds: k } => {
            let fold = folds.expect("fold ids computed for cross-validation");
            let mut sse = 0.0;
            for f in 0..k {
                let keep: Vec<bool> = fold.iter().map(|&g| g != f).collect();
                let model = fit_with(&y.subset(&keep)?, q, tags, opts)?;
                let held: Vec<_> = y.entries().iter().zip(&keep).filter(|(_, &k)| !k).map(|(e, _)| e).collect();
                let pairs: Vec<_> = held.iter().map(|e| (e.question, e.learner)).collect();
                let pred = predict_scores(&model, &pairs, PredictionRule::PosteriorMean)?;
                sse += pred.iter().zip(&held).map(|(p, e)| (p - e.label as f64).powi(2)).sum::<f64>();
            }
            Ok(((sse / y.num_observed() as f64).sqrt(), None))
        }
    }
}

/// Picks `(lambda, eta)` from `grid` by BIC on the full data or by
/// cross-validated RMSE; all other options come from `base`.
///
/// Ties (within `1e-12` relative) go to the larger `lambda`, then the
/// smaller `eta`.
pub fn select_hyperparams(
    y: &ResponseMatrix,
    q: &QuantizerSpec,
    base: &FitOptions,
    grid: &HyperGrid,
    mode: SelectionMode,
    tags: Option<&TagSupport>,
) -> Result<Selection> {
    if grid.lambdas.is_empty() || grid.etas.is_empty() {
        return Err(invalid("hyperparameter grid is empty"));
    }
    let points = grid.points();
    let with_point = |(lambda, eta): (f64, f64)| FitOptions {
        lambda,
        eta,
        ..base.clone()
    };
    if points.len() == 1 {
        let options = with_point(points[0]);
        options.validate()?;
        return Ok(Selection {
            options,
            scores: Vec::new(),
            model: None,
        });
    }
    let folds = match mode {
        SelectionMode::CrossValidation { folds } => Some(cv_folds(y.num_observed(), folds, derive_seed(base.seed, 7, 0))?),
        SelectionMode::Bic => None,
    };
    let mut results: Vec<Result<(f64, Option<FactorModel>)>> = points
        .par_iter()
        .map(|&p| score_point(y, q, tags, &with_point(p), mode, folds.as_deref()))
        .collect();

    let mut best: Option<(usize, f64)> = None;
    let mut last_error = None;
    let mut scores = Vec::with_capacity(points.len());
    for (idx, (&(lambda, eta), r)) in points.iter().zip(&results).enumerate() {
        let score = match r {
            Ok((s, _)) if s.is_finite() => Some(*s),
            Ok((s, _)) => {
                log::warn!("lambda={lambda} eta={eta}: non-finite score {s}");
                None
            }
            Err(e) => {
                log::warn!("lambda={lambda} eta={eta}: {e}");
                last_error = Some(e.to_string());
                None
            }
        };
        if let Some(s) = score {
            let better = match best {
                None => true,
                Some((_, b)) => s < b - 1e-12 * b.abs().max(1.0),
            };
            if better {
                best = Some((idx, s));
            }
        }
        scores.push(GridScore { lambda, eta, score });
    }
    match best {
        Some((idx, _)) => Ok(Selection {
            options: with_point(points[idx]),
            scores,
            model: results.swap_remove(idx).ok().and_then(|(_, m)| m),
        }),
        None => Err(Error::Numerical(format!(
            "no grid point produced a finite score (last error: {})",
            last_error.as_deref().unwrap_or("none")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Thresholds;
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    #[test]
    fn rank_counts_large_singular_values() {
        let c = DMatrix::from_diagonal(&DVector::from_vec(vec![5.0, 1e-2, 1e-4]));
        assert_eq!(numerical_rank(&c, 1e-3), 2);
        assert_eq!(numerical_rank(&DMatrix::zeros(2, 2), 1e-3), 0);
    }

    fn two_by_two() -> (FactorModel, ResponseMatrix) {
        let m = FactorModel::new(
            DMatrix::from_row_slice(2, 1, &[1.0, 0.0]),
            DVector::from_vec(vec![0.5, -0.5]),
            DMatrix::from_row_slice(1, 2, &[1.0, -1.0]),
            1.0,
            Thresholds::Shared(QuantizerSpec::binary()),
        )
        .unwrap();
        let y = ResponseMatrix::from_dense(&[vec![Some(2), Some(1)], vec![Some(1), None]]).unwrap();
        (m, y)
    }

    #[test]
    fn bic_hand_computation() {
        let (m, y) = two_by_two();
        let phi = |x: f64| crate::model::std_normal_cdf(x).unwrap();
        // z = 1.5, -0.5, -0.5 with labels 2, 1, 1 and boundary 0
        let nll = -(1.0 - phi(-1.5)).ln() - phi(0.5).ln() - phi(0.5).ln();
        let mut opts = FitOptions::new(1, 2);
        opts.precision_mode = PrecisionMode::FixedTau(1.0);
        // k_eff = nnz(W) 1 + Q 2 + K N 2
        assert_relative_eq!(bic_score(&m, &y, &opts).unwrap(), 2.0 * nll + 5.0 * 3f64.ln(), epsilon = 1e-12);
        opts.precision_mode = PrecisionMode::EstimateTau;
        assert_relative_eq!(bic_score(&m, &y, &opts).unwrap(), 2.0 * nll + 6.0 * 3f64.ln(), epsilon = 1e-12);
        opts.norm_constraint = NormConstraint::Nuclear;
        // rank 1: 1 * (1 + 2 - 1) = 2, same as K N here
        assert_relative_eq!(bic_score(&m, &y, &opts).unwrap(), 2.0 * nll + 6.0 * 3f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn bic_prefers_sparser_at_equal_fit() {
        let (m, y) = two_by_two();
        let mut dense = m.clone();
        dense.w[(1, 0)] = 1e-300; // same likelihood to machine precision, one more nonzero
        let opts = FitOptions::new(1, 2);
        assert!(bic_score(&m, &y, &opts).unwrap() < bic_score(&dense, &y, &opts).unwrap());
        let single = ResponseMatrix::from_dense(&[vec![Some(2), None], vec![None, None]]).unwrap();
        let nll = negative_log_likelihood(&m, &single).unwrap();
        assert_relative_eq!(bic_score(&m, &single, &opts).unwrap(), 2.0 * nll, epsilon = 1e-12);
    }

    #[test]
    fn folds_partition_entries() {
        let f = cv_folds(103, 4, 5).unwrap();
        let mut counts = [0; 4];
        for &g in &f {
            counts[g] += 1;
        }
        assert_eq!(counts.iter().sum::<usize>(), 103);
        assert!(counts.iter().all(|&c| c == 25 || c == 26));
        assert!(cv_folds(3, 4, 0).is_err());
        assert!(cv_folds(10, 1, 0).is_err());
    }

    #[test]
    fn singleton_and_empty_grids() {
        let (_, y) = two_by_two();
        let base = FitOptions::new(1, 2);
        let s = select_hyperparams(&y, &QuantizerSpec::binary(), &base, &HyperGrid::single(0.3, 2.0), SelectionMode::Bic, None)
            .unwrap();
        assert_eq!((s.options.lambda, s.options.eta), (0.3, 2.0));
        assert!(s.scores.is_empty());
        let empty = HyperGrid {
            lambdas: vec![],
            etas: vec![1.0],
        };
        assert!(select_hyperparams(&y, &QuantizerSpec::binary(), &base, &empty, SelectionMode::Bic, None).is_err());
    }

    #[test]
    fn ties_prefer_larger_lambda_then_smaller_eta() {
        let grid = HyperGrid {
            lambdas: vec![0.1, 2.0, 1.0],
            etas: vec![3.0, 1.0],
        };
        assert_eq!(grid.points()[0], (2.0, 1.0));
        assert_eq!(grid.points()[1], (2.0, 3.0));
        assert_eq!(grid.points()[5], (0.1, 3.0));
    }
}
