use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::derive_seed;
use super::prediction::{holdout_split, predict_scores, rmse, PredictionRule};
use super::report::{ExperimentReport, TrialFailure, TrialRecord};
use super::selection::{select_hyperparams, HyperGrid, SelectionMode};
use crate::error::{invalid, Result};
use crate::model::{QuantizerSpec, ResponseMatrix};
use crate::solvers::{fit, fit_tagged, FitOptions, NormConstraint, PrecisionMode, TagSupport};
use crate::synthetic::{
    align_factors, generate_ground_truth, generate_responses, make_even_bins, recovery_errors, GeneratorParams,
};

/// The quantity varied across the settings of a recovery sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Learners(Vec<usize>),
    Questions(Vec<usize>),
    /// Label counts; responses are quantized with [`make_even_bins`].
    Labels(Vec<usize>),
}

impl SweepAxis {
    fn values(&self) -> &[usize] {
        match self {
            SweepAxis::Learners(v) | SweepAxis::Questions(v) | SweepAxis::Labels(v) => v,
        }
    }

    /// Setting label, e.g. `N=50`.
    pub fn setting_name(&self, value: usize) -> String {
        let prefix = match self {
            SweepAxis::Learners(_) => "N",
            SweepAxis::Questions(_) => "Q",
            SweepAxis::Labels(_) => "P",
        };
        format!("{prefix}={value}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryVariant {
    /// No tags, precision estimated.
    Untagged,
    /// True support of `W` supplied as tags, precision estimated.
    Tagged,
    /// No tags, precision fixed at the generating value.
    KnownTau,
}

impl RecoveryVariant {
    pub fn name(self) -> &'static str {
        match self {
            RecoveryVariant::Untagged => "untagged",
            RecoveryVariant::Tagged => "tagged",
            RecoveryVariant::KnownTau => "known_tau",
        }
    }
}

fn default_size() -> usize {
    100
}
fn default_concepts() -> usize {
    5
}
fn default_trials() -> usize {
    25
}
fn default_lambda() -> f64 {
    3.0
}
fn default_sweep_gamma() -> f64 {
    0.1
}
fn default_one() -> f64 {
    1.0
}
fn default_outer() -> usize {
    100
}
fn default_sweep_restarts() -> usize {
    3
}
fn default_recovery_variants() -> Vec<RecoveryVariant> {
    vec![RecoveryVariant::Untagged]
}

/// Synthetic recovery experiment: generate, fit each variant, align, and
/// record `e_w`, `e_c`, `e_mu` for every setting of `axis`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoveryConfig {
    pub axis: SweepAxis,
    #[serde(default = "default_size")]
    pub questions: usize,
    #[serde(default = "default_size")]
    pub learners: usize,
    #[serde(default = "default_concepts")]
    pub concepts: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_recovery_variants")]
    pub variants: Vec<RecoveryVariant>,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// When nonempty, `lambda` is chosen per trial and variant from these
    /// values by BIC instead.
    #[serde(default)]
    pub lambda_grid: Vec<f64>,
    /// Ridge weight on tagged entries (tagged variant only).
    #[serde(default = "default_sweep_gamma")]
    pub gamma_ridge: f64,
    /// Frobenius radius; `None` uses `sqrt(K N)`.
    #[serde(default)]
    pub eta: Option<f64>,
    /// Generating noise precision.
    #[serde(default = "default_one")]
    pub tau: f64,
    #[serde(default = "default_one")]
    pub obs_fraction: f64,
    #[serde(default = "default_outer")]
    pub max_outer_iters: usize,
    /// Random starts per fit.
    #[serde(default = "default_sweep_restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub seed: u64,
}

impl RecoveryConfig {
    pub fn new(axis: SweepAxis) -> Self {
        RecoveryConfig {
            axis,
            questions: default_size(),
            learners: default_size(),
            concepts: default_concepts(),
            trials: default_trials(),
            variants: default_recovery_variants(),
            lambda: default_lambda(),
            lambda_grid: Vec::new(),
            gamma_ridge: default_sweep_gamma(),
            eta: None,
            tau: 1.0,
            obs_fraction: 1.0,
            max_outer_iters: default_outer(),
            restarts: default_sweep_restarts(),
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 || self.variants.is_empty() || self.axis.values().is_empty() {
            return Err(invalid("sweep needs at least one trial, variant and setting"));
        }
        let min = if matches!(self.axis, SweepAxis::Labels(_)) { 2 } else { 1 };
        if self.axis.values().iter().any(|&v| v < min) {
            return Err(invalid(format!("sweep values must be >= {min}")));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(invalid("generating precision must be positive and finite"));
        }
        Ok(())
    }
}

struct Outcome {
    records: Vec<TrialRecord>,
    failures: Vec<TrialFailure>,
}

fn recovery_trial(cfg: &RecoveryConfig, value: usize, trial: usize) -> Outcome {
    let setting = cfg.axis.setting_name(value);
    let (mut q, mut n) = (cfg.questions, cfg.learners);
    match cfg.axis {
        SweepAxis::Learners(_) => n = value,
        SweepAxis::Questions(_) => q = value,
        SweepAxis::Labels(_) => {}
    }
    let mut out = Outcome {
        records: Vec::new(),
        failures: Vec::new(),
    };
    let fail_all = |out: &mut Outcome, msg: String| {
        for v in &cfg.variants {
            out.failures.push(TrialFailure {
                setting: setting.clone(),
                variant: v.name().into(),
                trial,
                message: msg.clone(),
            });
        }
    };

    let mut params = GeneratorParams::standard(cfg.concepts);
    params.tau = cfg.tau;
    if let SweepAxis::Labels(_) = cfg.axis {
        match make_even_bins(value) {
            Ok(b) => params.bins = b,
            Err(e) => {
                fail_all(&mut out, e.to_string());
                return out;
            }
        }
    }
    let t = trial as u64;
    let data = generate_ground_truth(q, n, cfg.concepts, &params, derive_seed(cfg.seed, 1, t))
        .and_then(|gt| generate_responses(&gt, cfg.obs_fraction, derive_seed(cfg.seed, 2, t)).map(|y| (gt, y)));
    let (gt, y) = match data {
        Ok(d) => d,
        Err(e) => {
            fail_all(&mut out, e.to_string());
            return out;
        }
    };

    for &variant in &cfg.variants {
        let mut opts = FitOptions::new(cfg.concepts, n);
        opts.lambda = cfg.lambda;
        opts.gamma_ridge = cfg.gamma_ridge;
        if let Some(eta) = cfg.eta {
            opts.eta = eta;
        }
        opts.max_outer_iters = cfg.max_outer_iters;
        opts.restarts = cfg.restarts;
        opts.seed = derive_seed(cfg.seed, 3, t);
        if variant == RecoveryVariant::KnownTau {
            opts.precision_mode = PrecisionMode::FixedTau(gt.tau);
        }
        let grid = HyperGrid {
            lambdas: if cfg.lambda_grid.is_empty() { vec![cfg.lambda] } else { cfg.lambda_grid.clone() },
            etas: vec![opts.eta],
        };
        let result = (|| {
            let tags = match variant {
                RecoveryVariant::Tagged => Some(TagSupport::from_support(&gt.w)?),
                _ => None,
            };
            let sel = select_hyperparams(&y, &gt.bins, &opts, &grid, SelectionMode::Bic, tags.as_ref())?;
            match sel.model {
                Some(m) => Ok(m),
                None => match &tags {
                    Some(t) => fit_tagged(&y, &gt.bins, t, &sel.options).map(|r| r.0),
                    None => fit(&y, &gt.bins, &sel.options).map(|r| r.0),
                },
            }
        })()
        .and_then(|model| align_factors(&model, &gt))
        .and_then(|aligned| recovery_errors(&aligned, &gt));
        match result {
            Ok(e) => {
                for (metric, value) in [("e_w", e.e_w), ("e_c", e.e_c), ("e_mu", e.e_mu)] {
                    out.records.push(TrialRecord {
                        setting: setting.clone(),
                        variant: variant.name().into(),
                        trial,
                        metric: metric.into(),
                        value,
                    });
                }
            }
            Err(e) => out.failures.push(TrialFailure {
                setting: setting.clone(),
                variant: variant.name().into(),
                trial,
                message: e.to_string(),
            }),
        }
    }
    out
}

fn assemble(name: &str, config: serde_json::Value, trials: usize, outcomes: Vec<Outcome>) -> ExperimentReport {
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        records.extend(o.records);
        failures.extend(o.failures);
    }
    ExperimentReport::new(name, config, trials, records, failures)
}

/// Runs every `(setting, trial)` pair of a recovery sweep. Trial `t` uses the
/// same seeds at every setting, so settings are paired by trial.
pub fn run_recovery_sweep(cfg: &RecoveryConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize)> = cfg
        .axis
        .values()
        .iter()
        .flat_map(|&v| (0..cfg.trials).map(move |t| (v, t)))
        .collect();
    let outcomes: Vec<Outcome> = jobs.par_iter().map(|&(v, t)| recovery_trial(cfg, v, t)).collect();
    Ok(assemble("recovery", serde_json::to_value(cfg)?, cfg.trials, outcomes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionVariant {
    /// Frobenius-constrained `C`, precision estimated.
    Frobenius,
    /// Nuclear-norm-constrained `C`, precision estimated.
    Nuclear,
    /// Frobenius-constrained `C`, one learned set of bins.
    LearnBinsShared,
    /// Frobenius-constrained `C`, learned bins per question.
    LearnBinsPerQuestion,
}

impl PredictionVariant {
    pub fn name(self) -> &'static str {
        match self {
            PredictionVariant::Frobenius => "frobenius",
            PredictionVariant::Nuclear => "nuclear",
            PredictionVariant::LearnBinsShared => "learn_bins_shared",
            PredictionVariant::LearnBinsPerQuestion => "learn_bins_per_question",
        }
    }

    fn apply(self, opts: &mut FitOptions) {
        let (constraint, mode) = match self {
            PredictionVariant::Frobenius => (NormConstraint::Frobenius, PrecisionMode::EstimateTau),
            PredictionVariant::Nuclear => (NormConstraint::Nuclear, PrecisionMode::EstimateTau),
            PredictionVariant::LearnBinsShared => (NormConstraint::Frobenius, PrecisionMode::LearnBinsShared),
            PredictionVariant::LearnBinsPerQuestion => (NormConstraint::Frobenius, PrecisionMode::LearnBinsPerQuestion),
        };
        opts.norm_constraint = constraint;
        opts.precision_mode = mode;
    }
}

/// Name of the constant global-mean-label predictor recorded alongside the
/// fitted variants.
pub const BASELINE_VARIANT: &str = "baseline";

fn default_prediction_variants() -> Vec<PredictionVariant> {
    vec![
        PredictionVariant::Frobenius,
        PredictionVariant::Nuclear,
        PredictionVariant::LearnBinsShared,
        PredictionVariant::LearnBinsPerQuestion,
    ]
}
fn default_holdout() -> f64 {
    0.2
}
fn default_prediction_trials() -> usize {
    10
}
fn default_lambdas() -> Vec<f64> {
    vec![default_lambda()]
}
fn default_selection() -> SelectionMode {
    SelectionMode::CrossValidation { folds: 4 }
}

/// Holdout prediction study on a given response matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionConfig {
    #[serde(default = "default_prediction_variants")]
    pub variants: Vec<PredictionVariant>,
    #[serde(default = "default_holdout")]
    pub holdout_fraction: f64,
    #[serde(default = "default_prediction_trials")]
    pub trials: usize,
    #[serde(default = "default_concepts")]
    pub concepts: usize,
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
    /// Radius candidates; empty uses `sqrt(K N)`.
    #[serde(default)]
    pub etas: Vec<f64>,
    /// Only consulted when the grid has more than one point.
    #[serde(default = "default_selection")]
    pub selection: SelectionMode,
    #[serde(default = "default_outer")]
    pub max_outer_iters: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for PredictionConfig {
    fn default() -> Self {
        PredictionConfig {
            variants: default_prediction_variants(),
            holdout_fraction: default_holdout(),
            trials: default_prediction_trials(),
            concepts: default_concepts(),
            lambdas: default_lambdas(),
            etas: Vec::new(),
            selection: default_selection(),
            max_outer_iters: default_outer(),
            seed: 0,
        }
    }
}

fn prediction_trial(y: &ResponseMatrix, q: &QuantizerSpec, cfg: &PredictionConfig, trial: usize) -> Outcome {
    let setting = format!("holdout={}", cfg.holdout_fraction);
    let t = trial as u64;
    let mut out = Outcome {
        records: Vec::new(),
        failures: Vec::new(),
    };
    let record = |out: &mut Outcome, variant: &str, metric: &str, value: f64| {
        out.records.push(TrialRecord {
            setting: setting.clone(),
            variant: variant.into(),
            trial,
            metric: metric.into(),
            value,
        })
    };
    let prepared = holdout_split(y, cfg.holdout_fraction, derive_seed(cfg.seed, 4, t))
        .and_then(|split| split.train(y).map(|train| (train, split.test_entries(y))));
    let (train, test) = match prepared {
        Ok(p) => p,
        Err(e) => {
            for v in &cfg.variants {
                out.failures.push(TrialFailure {
                    setting: setting.clone(),
                    variant: v.name().into(),
                    trial,
                    message: e.to_string(),
                });
            }
            return out;
        }
    };
    let pairs: Vec<(usize, usize)> = test.iter().map(|&(i, j, _)| (i, j)).collect();
    let labels: Vec<usize> = test.iter().map(|&(_, _, l)| l).collect();

    let mean_label =
        train.entries().iter().map(|e| e.label as f64).sum::<f64>() / train.num_observed().max(1) as f64;
    if let Ok(r) = rmse(&vec![mean_label; labels.len()], &labels) {
        record(&mut out, BASELINE_VARIANT, "rmse", r);
    }

    let etas = if cfg.etas.is_empty() {
        vec![FitOptions::new(cfg.concepts, y.num_learners()).eta]
    } else {
        cfg.etas.clone()
    };
    let grid = HyperGrid {
        lambdas: cfg.lambdas.clone(),
        etas,
    };
    for &variant in &cfg.variants {
        let mut base = FitOptions::new(cfg.concepts, y.num_learners());
        variant.apply(&mut base);
        base.max_outer_iters = cfg.max_outer_iters;
        base.seed = derive_seed(cfg.seed, 5, t);
        let result = select_hyperparams(&train, q, &base, &grid, cfg.selection, None).and_then(|sel| {
            let model = match sel.model {
                Some(m) => m,
                None => fit(&train, q, &sel.options)?.0,
            };
            let pred = predict_scores(&model, &pairs, PredictionRule::PosteriorMean)?;
            Ok((rmse(&pred, &labels)?, sel.options))
        });
        match result {
            Ok((r, opts)) => {
                record(&mut out, variant.name(), "rmse", r);
                record(&mut out, variant.name(), "lambda", opts.lambda);
                record(&mut out, variant.name(), "eta", opts.eta);
            }
            Err(e) => out.failures.push(TrialFailure {
                setting: setting.clone(),
                variant: variant.name().into(),
                trial,
                message: e.to_string(),
            }),
        }
    }
    out
}

/// Repeated holdout: split, select hyperparameters on the training part, fit
/// each variant, and record held-out RMSE next to the global-mean baseline.
pub fn run_prediction_study(y: &ResponseMatrix, q: &QuantizerSpec, cfg: &PredictionConfig) -> Result<ExperimentReport> {
    if cfg.trials == 0 || cfg.variants.is_empty() {
        return Err(invalid("prediction study needs at least one trial and variant"));
    }
    if !(cfg.holdout_fraction > 0.0 && cfg.holdout_fraction < 1.0) {
        return Err(invalid(format!("holdout fraction {} outside (0, 1)", cfg.holdout_fraction)));
    }
    y.check_labels(q.num_labels())?;
    let outcomes: Vec<Outcome> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| prediction_trial(y, q, cfg, t))
        .collect();
    Ok(assemble("prediction", serde_json::to_value(cfg)?, cfg.trials, outcomes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_round_trip() {
        let cfg: RecoveryConfig = serde_json::from_str(r#"{"axis": {"learners": [50, 100]}}"#).unwrap();
        assert_eq!(cfg, RecoveryConfig::new(SweepAxis::Learners(vec![50, 100])));
        let back: RecoveryConfig = serde_json::from_value(serde_json::to_value(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert!(serde_json::from_str::<RecoveryConfig>(r#"{"axis": {"learners": [5]}, "bogus": 1}"#).is_err());
        let p: PredictionConfig = serde_json::from_str(r#"{"selection": "bic"}"#).unwrap();
        assert_eq!(p.selection, SelectionMode::Bic);
        assert_eq!(p.variants.len(), 4);
    }

    #[test]
    fn small_sweep_is_reproducible() {
        let mut cfg = RecoveryConfig::new(SweepAxis::Labels(vec![2, 4]));
        cfg.questions = 12;
        cfg.learners = 15;
        cfg.concepts = 2;
        cfg.trials = 1;
        cfg.max_outer_iters = 5;
        cfg.variants = vec![RecoveryVariant::Untagged, RecoveryVariant::Tagged, RecoveryVariant::KnownTau];
        let a = run_recovery_sweep(&cfg).unwrap();
        assert!(a.failures.is_empty(), "{:?}", a.failures);
        assert_eq!(a.records.len(), 2 * 3 * 3);
        assert_eq!(a, run_recovery_sweep(&cfg).unwrap());
        cfg.trials = 0;
        assert!(run_recovery_sweep(&cfg).is_err());
    }

    #[test]
    fn small_prediction_study_runs() {
        let gt = generate_ground_truth(12, 15, 2, &GeneratorParams::standard(2), 0).unwrap();
        let y = generate_responses(&gt, 1.0, 1).unwrap();
        let cfg = PredictionConfig {
            trials: 2,
            concepts: 2,
            max_outer_iters: 5,
            lambdas: vec![1.0, 3.0],
            ..PredictionConfig::default()
        };
        let r = run_prediction_study(&y, &gt.bins, &cfg).unwrap();
        assert!(r.failures.is_empty(), "{:?}", r.failures);
        assert_eq!(r.values("holdout=0.2", BASELINE_VARIANT, "rmse").len(), 2);
        assert_eq!(r.values("holdout=0.2", "nuclear", "rmse").len(), 2);
        assert_eq!(r, run_prediction_study(&y, &gt.bins, &cfg).unwrap());
    }
}
