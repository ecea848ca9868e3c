//! The `ordfactor` command line.
//!
//! ```text
//! ordfactor synth   --out data/
//! ordfactor fit     --responses data/responses.csv --tags data/tags.csv --out model/
//! ordfactor predict --model model/ --entries entries.csv --out predictions.csv
//! ordfactor graph   --model model/ --tags data/tags.csv --out graph.dot
//! ordfactor sweep   --config sweep.json --out report/
//! ```

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::error::{invalid, Result};
use crate::evaluation::{predict_scores, run_prediction_study, run_recovery_sweep, PredictionConfig, PredictionRule, RecoveryConfig};
use crate::io::{
    export_concept_graph, load_entries_csv, load_model, load_quantizer_json, load_responses_csv, load_tags_csv,
    parse_bins, save_model, write_matrix_csv, write_predictions_csv, write_report, write_responses_csv,
    write_tags_csv, ModelMeta, QuantizerConfig, DEFAULT_EDGE_THRESHOLD,
};
use crate::model::{QuantizerSpec, ResponseMatrix};
use crate::solvers::{fit, fit_tagged, FitOptions, NormConstraint, PrecisionMode, TagSupport};
use crate::synthetic::{generate_ground_truth, generate_responses, make_even_bins, GeneratorParams};

#[derive(Debug, Parser)]
#[command(name = "ordfactor", version, about = "Sparse factor analysis of ordinal graded responses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a model to a response CSV and write it to a directory.
    Fit(FitArgs),
    /// Predict scores for `question_id,learner_id` pairs with a saved model.
    Predict(PredictArgs),
    /// Generate a synthetic dataset with known factors.
    Synth(SynthArgs),
    /// Run a recovery sweep or a prediction study from a JSON config.
    Sweep(SweepArgs),
    /// Draw the question-concept graph of a saved model as Graphviz DOT.
    Graph(GraphArgs),
}

#[derive(Debug, Args)]
struct QuantizerArgs {
    /// JSON file with `boundaries` or `labels`.
    #[arg(long, conflicts_with_all = ["bins", "labels"])]
    quantizer: Option<PathBuf>,
    /// Comma-separated interior bin boundaries.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "labels")]
    bins: Option<String>,
    /// Number of labels, with normal-quantile boundaries.
    #[arg(long)]
    labels: Option<usize>,
}

impl QuantizerArgs {
    /// The configured quantizer, or normal-quantile bins for `fallback_labels`.
    fn resolve(&self, fallback_labels: usize) -> Result<QuantizerSpec> {
        if let Some(p) = &self.quantizer {
            load_quantizer_json(p)
        } else if let Some(b) = &self.bins {
            parse_bins(b)
        } else {
            make_even_bins(self.labels.unwrap_or(fallback_labels))
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Precision {
    /// Estimate the noise precision.
    Estimate,
    /// Keep the precision at `--tau`.
    Fixed,
    /// Learn one set of bin boundaries.
    BinsShared,
    /// Learn bin boundaries per question.
    BinsPerQuestion,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long)]
    responses: PathBuf,
    /// `question_id,tag_name` CSV; each tag becomes a concept.
    #[arg(long)]
    tags: Option<PathBuf>,
    #[command(flatten)]
    quantizer: QuantizerArgs,
    /// Number of concepts (defaults to the number of tags, or 5).
    #[arg(long)]
    concepts: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1e-6)]
    gamma: f64,
    /// Norm-ball radius for C (defaults to sqrt(K N)).
    #[arg(long)]
    eta: Option<f64>,
    /// Constrain the nuclear norm of C instead of its Frobenius norm.
    #[arg(long)]
    nuclear: bool,
    #[arg(long, value_enum, default_value_t = Precision::Estimate)]
    precision: Precision,
    /// Precision used with `--precision fixed`.
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    #[arg(long, default_value_t = 100)]
    max_outer: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Independent random starts; the lowest final objective wins.
    #[arg(long, default_value_t = 1)]
    restarts: usize,
    /// Output directory for W.csv, C.csv, mu.csv and meta.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// CSV with header `question_id,learner_id` (extra columns are ignored).
    #[arg(long)]
    entries: PathBuf,
    /// Output the most probable label instead of the expected label.
    #[arg(long)]
    map: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 100)]
    questions: usize,
    #[arg(long, default_value_t = 100)]
    learners: usize,
    #[arg(long, default_value_t = 5)]
    concepts: usize,
    #[command(flatten)]
    quantizer: QuantizerArgs,
    /// Noise precision (`inf` for noiseless responses).
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    #[arg(long, default_value_t = 1.0)]
    obs_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for responses.csv, tags.csv, quantizer.json and truth/.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// JSON: `{"recovery": {...}}` or `{"prediction": {...}}`.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for report.csv and report.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct GraphArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    tags: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_EDGE_THRESHOLD)]
    threshold: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum SweepFile {
    Recovery(RecoveryConfig),
    Prediction(PredictionFile),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredictionFile {
    /// Relative paths are resolved against the config file's directory.
    responses: PathBuf,
    #[serde(default)]
    quantizer: Option<QuantizerConfig>,
    #[serde(default)]
    study: PredictionConfig,
}

fn run_fit(a: &FitArgs) -> Result<()> {
    let data = load_responses_csv(&a.responses)?;
    let y = &data.responses;
    let quantizer = a.quantizer.resolve(y.max_label())?;
    let tags = a.tags.as_ref().map(|p| load_tags_csv(p, &data.question_ids)).transpose()?;
    let k = match (&tags, a.concepts) {
        (Some(t), Some(k)) if k != t.tag_names.len() => {
            return Err(invalid(format!("--concepts {k} but the tag file defines {} tags", t.tag_names.len())))
        }
        (Some(t), _) => t.tag_names.len(),
        (None, k) => k.unwrap_or(5),
    };
    let mut opts = FitOptions::new(k, y.num_learners());
    opts.lambda = a.lambda;
    opts.gamma_ridge = a.gamma;
    if let Some(eta) = a.eta {
        opts.eta = eta;
    }
    if a.nuclear {
        opts.norm_constraint = NormConstraint::Nuclear;
    }
    opts.precision_mode = match a.precision {
        Precision::Estimate => PrecisionMode::EstimateTau,
        Precision::Fixed => PrecisionMode::FixedTau(a.tau),
        Precision::BinsShared => PrecisionMode::LearnBinsShared,
        Precision::BinsPerQuestion => PrecisionMode::LearnBinsPerQuestion,
    };
    opts.max_outer_iters = a.max_outer;
    opts.seed = a.seed;
    opts.restarts = a.restarts;
    let (model, trace) = match &tags {
        Some(t) => fit_tagged(y, &quantizer, &t.tags, &opts)?,
        None => fit(y, &quantizer, &opts)?,
    };
    let meta = ModelMeta::new(&model, &opts, &trace, data.question_ids.clone(), data.learner_ids.clone());
    save_model(&a.out, &model, &meta)?;
    eprintln!(
        "fitted {}x{} responses with K={k}: objective {:.4} after {} outer iterations{}, tau {:.4}",
        y.num_questions(),
        y.num_learners(),
        trace.objective_per_outer_iter.last().copied().unwrap_or(trace.initial_objective),
        trace.iterations_run,
        if trace.converged { "" } else { " (not converged)" },
        model.tau
    );
    Ok(())
}

fn run_predict(a: &PredictArgs) -> Result<()> {
    let (model, meta) = load_model(&a.model)?;
    let entries = load_entries_csv(&a.entries, &meta.question_ids, &meta.learner_ids)?;
    let rule = if a.map {
        PredictionRule::MostProbable
    } else {
        PredictionRule::PosteriorMean
    };
    let pred = predict_scores(&model, &entries, rule)?;
    write_predictions_csv(&a.out, &entries, &pred, &meta.question_ids, &meta.learner_ids)
}

fn numbered(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

fn run_synth(a: &SynthArgs) -> Result<()> {
    let mut params = GeneratorParams::standard(a.concepts);
    params.tau = a.tau;
    let q = &a.quantizer;
    if q.quantizer.is_some() || q.bins.is_some() || q.labels.is_some() {
        params.bins = q.resolve(0)?;
    }
    let gt = generate_ground_truth(a.questions, a.learners, a.concepts, &params, a.seed)?;
    let y = generate_responses(&gt, a.obs_fraction, a.seed.wrapping_add(1))?;
    let (qids, lids, tag_names) = (numbered("q", a.questions), numbered("l", a.learners), numbered("concept", a.concepts));
    let truth = a.out.join("truth");
    fs::create_dir_all(&truth)?;
    write_responses_csv(a.out.join("responses.csv"), &y, &qids, &lids)?;
    write_tags_csv(a.out.join("tags.csv"), &TagSupport::from_support(&gt.w)?, &qids, &tag_names)?;
    let qcfg = QuantizerConfig {
        boundaries: Some(gt.bins.interior().to_vec()),
        labels: None,
    };
    fs::write(a.out.join("quantizer.json"), serde_json::to_string_pretty(&qcfg)? + "\n")?;
    write_matrix_csv(truth.join("W.csv"), &gt.w)?;
    write_matrix_csv(truth.join("C.csv"), &gt.c)?;
    write_matrix_csv(truth.join("mu.csv"), &nalgebra::DMatrix::from_column_slice(a.questions, 1, gt.mu.as_slice()))?;
    eprintln!("wrote {} responses over {}x{} to {}", y.num_observed(), a.questions, a.learners, a.out.display());
    Ok(())
}

fn resolve_relative(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.parent().unwrap_or(Path::new(".")).join(p)
    }
}

fn run_sweep(a: &SweepArgs) -> Result<()> {
    let cfg: SweepFile = serde_json::from_str(&crate::io::at_path(&a.config, fs::read_to_string(&a.config))?)?;
    let report = match cfg {
        SweepFile::Recovery(r) => run_recovery_sweep(&r)?,
        SweepFile::Prediction(p) => {
            let data = load_responses_csv(resolve_relative(&a.config, &p.responses))?;
            let y: &ResponseMatrix = &data.responses;
            let q = match &p.quantizer {
                Some(c) => c.build()?,
                None => make_even_bins(y.max_label())?,
            };
            run_prediction_study(y, &q, &p.study)?
        }
    };
    fs::create_dir_all(&a.out)?;
    write_report(&report, a.out.join("report.csv"), a.out.join("report.json"))?;
    for s in &report.summaries {
        println!("{:<14} {:<24} {:<6} median {:.4} (q1 {:.4}, q3 {:.4})", s.setting, s.variant, s.metric, s.median, s.q1, s.q3);
    }
    if !report.failures.is_empty() {
        eprintln!("{} trial(s) failed; see report.json", report.failures.len());
    }
    Ok(())
}

fn run_graph(a: &GraphArgs) -> Result<()> {
    let (model, meta) = load_model(&a.model)?;
    let tags = a.tags.as_ref().map(|p| load_tags_csv(p, &meta.question_ids)).transpose()?;
    let dot = export_concept_graph(
        &model,
        tags.as_ref().map(|t| &t.tags),
        tags.as_ref().map(|t| t.tag_names.as_slice()),
        Some(&meta.question_ids),
        a.threshold,
    )?;
    fs::write(&a.out, dot)?;
    Ok(())
}

/// Runs the command line; returns the process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::Fit(a) => run_fit(a),
        Command::Predict(a) => run_predict(a),
        Command::Synth(a) => run_synth(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Graph(a) => run_graph(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
