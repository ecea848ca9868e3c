use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::model::{entry_terms, FactorModel, ResponseMatrix};

/// Disjoint train/test masks over `ResponseMatrix::entries()`.
#[derive(Debug, Clone, PartialEq)]
pub struct HoldoutSplit {
    pub train_mask: Vec<bool>,
    pub test_mask: Vec<bool>,
    pub fraction: f64,
}

impl HoldoutSplit {
    pub fn train(&self, y: &ResponseMatrix) -> Result<ResponseMatrix> {
        y.subset(&self.train_mask)
    }

    /// `(question, learner, label)` of every held-out entry, in entry order.
    pub fn test_entries(&self, y: &ResponseMatrix) -> Vec<(usize, usize, usize)> {
        y.entries()
            .iter()
            .zip(&self.test_mask)
            .filter(|(_, &t)| t)
            .map(|(e, _)| (e.question, e.learner, e.label))
            .collect()
    }
}

/// Holds out `round(fraction * |observed|)` uniformly chosen entries.
pub fn holdout_split(y: &ResponseMatrix, fraction: f64, seed: u64) -> Result<HoldoutSplit> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(invalid(format!("holdout fraction {fraction} outside (0, 1)")));
    }
    let n = y.num_observed();
    let n_test = (fraction * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test_mask = vec![false; n];
    for &idx in &order[..n_test] {
        test_mask[idx] = true;
    }
    let train_mask = test_mask.iter().map(|t| !t).collect();
    Ok(HoldoutSplit {
        train_mask,
        test_mask,
        fraction,
    })
}

/// How a real-valued score is derived from the label distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PredictionRule {
    /// `sum_p p P(Y = p | z)`: minimizes expected squared error.
    #[default]
    PosteriorMean,
    /// The most probable label (lowest label on ties).
    MostProbable,
}

/// Predicted score of each `(question, learner)` pair under `model`.
pub fn predict_scores(model: &FactorModel, entries: &[(usize, usize)], rule: PredictionRule) -> Result<Vec<f64>> {
    model.validate()?;
    let (nq, nl) = (model.num_questions(), model.num_learners());
    entries
        .iter()
        .map(|&(i, j)| {
            if i >= nq || j >= nl {
                return Err(Error::DimensionMismatch(format!("entry ({i}, {j}) outside {nq}x{nl} model")));
            }
            let q = model.thresholds.for_question(i);
            let z = model.slack(i, j);
            let probs: Vec<f64> = (1..=q.num_labels())
                .map(|p| entry_terms(z, p, model.tau, q).prob())
                .collect();
            Ok(match rule {
                PredictionRule::PosteriorMean => {
                    let total: f64 = probs.iter().sum();
                    probs.iter().enumerate().map(|(p, pr)| (p + 1) as f64 * pr).sum::<f64>() / total
                }
                PredictionRule::MostProbable => {
                    let mut best = 0;
                    for (p, &pr) in probs.iter().enumerate() {
                        if pr > probs[best] {
                            best = p;
                        }
                    }
                    (best + 1) as f64
                }
            })
        })
        .collect()
}

/// Root mean squared difference between predictions and observed labels.
pub fn rmse(predictions: &[f64], labels: &[usize]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(invalid("RMSE of an empty set"));
    }
    if predictions.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let sse: f64 = predictions.iter().zip(labels).map(|(p, &y)| (p - y as f64).powi(2)).sum();
    Ok((sse / predictions.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{std_normal_cdf, QuantizerSpec, Thresholds};
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};
    use rand::Rng;

    fn model_with(w: DMatrix<f64>, c: DMatrix<f64>, mu: Vec<f64>, tau: f64, q: QuantizerSpec) -> FactorModel {
        FactorModel::new(w, DVector::from_vec(mu), c, tau, Thresholds::Shared(q)).unwrap()
    }

    #[test]
    fn holdout_sizes_and_disjointness() {
        let grid: Vec<Vec<Option<usize>>> = (0..10).map(|_| (0..10).map(|_| Some(1)).collect()).collect();
        let y = ResponseMatrix::from_dense(&grid).unwrap();
        let s = holdout_split(&y, 0.2, 1).unwrap();
        assert_eq!(s.test_mask.iter().filter(|&&t| t).count(), 20);
        assert!(s.train_mask.iter().zip(&s.test_mask).all(|(a, b)| a ^ b));
        assert_eq!(s, holdout_split(&y, 0.2, 1).unwrap());
        let splits: Vec<_> = (0..10).map(|k| holdout_split(&y, 0.2, k).unwrap().test_mask).collect();
        for a in 0..10 {
            for b in a + 1..10 {
                assert_ne!(splits[a], splits[b]);
            }
        }
        assert!(holdout_split(&y, 0.0, 1).is_err());
        assert!(holdout_split(&y, 1.0, 1).is_err());
    }

    #[test]
    fn posterior_mean_examples() {
        let m = model_with(DMatrix::zeros(1, 1), DMatrix::zeros(1, 1), vec![0.0], 1.0, QuantizerSpec::binary());
        assert_relative_eq!(predict_scores(&m, &[(0, 0)], PredictionRule::PosteriorMean).unwrap()[0], 1.5, epsilon = 1e-15);
        let q = QuantizerSpec::from_interior(&[-1.0, 0.0, 1.0]).unwrap();
        let far = model_with(DMatrix::zeros(1, 1), DMatrix::zeros(1, 1), vec![60.0], 1.0, q.clone());
        assert_relative_eq!(predict_scores(&far, &[(0, 0)], PredictionRule::PosteriorMean).unwrap()[0], 4.0, epsilon = 1e-12);
        let low = model_with(DMatrix::zeros(1, 1), DMatrix::zeros(1, 1), vec![-60.0], 1.0, q);
        assert_eq!(predict_scores(&low, &[(0, 0)], PredictionRule::MostProbable).unwrap()[0], 1.0);
        assert!(predict_scores(&low, &[(1, 0)], PredictionRule::PosteriorMean).is_err());
    }

    #[test]
    fn posterior_mean_matches_summation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = QuantizerSpec::from_interior(&[-2.1, -0.64, 0.64, 2.1]).unwrap();
        let w = DMatrix::from_fn(4, 2, |_, _| rng.random_range(0.0..2.0));
        let c = DMatrix::from_fn(2, 5, |_, _| rng.random_range(-2.0..2.0));
        let mu: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let m = model_with(w, c, mu, 1.7, q.clone());
        let entries: Vec<(usize, usize)> = (0..4).flat_map(|i| (0..5).map(move |j| (i, j))).collect();
        let got = predict_scores(&m, &entries, PredictionRule::PosteriorMean).unwrap();
        for (&(i, j), g) in entries.iter().zip(got) {
            let z = m.slack(i, j);
            let b = q.boundaries();
            let oracle: f64 = (1..=5)
                .map(|p| {
                    let hi = std_normal_cdf(1.7 * (b[p] - z)).unwrap();
                    let lo = std_normal_cdf(1.7 * (b[p - 1] - z)).unwrap();
                    p as f64 * (hi - lo)
                })
                .sum();
            assert_relative_eq!(g, oracle, epsilon = 1e-10);
            assert!((1.0..=5.0).contains(&g));
        }
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1, 2]).unwrap(), 0.0);
        assert_eq!(rmse(&[2.0, 3.0, 0.0], &[1, 2, 1]).unwrap(), 1.0);
        assert!(rmse(&[], &[]).is_err());
        assert!(rmse(&[1.0], &[1, 2]).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p: Vec<f64> = (0..50).map(|_| rng.random_range(1.0..5.0)).collect();
        let y: Vec<usize> = (0..50).map(|_| rng.random_range(1..=5)).collect();
        let mut acc = 0.0;
        for k in 0..50 {
            acc += (p[k] - y[k] as f64) * (p[k] - y[k] as f64);
        }
        assert_relative_eq!(rmse(&p, &y).unwrap(), (acc / 50.0).sqrt(), epsilon = 1e-12);
    }
}
