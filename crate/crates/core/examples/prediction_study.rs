// Repeated 20% holdout on one response matrix, comparing the model variants
// with a constant global-mean predictor.

use ordinal_factor::evaluation::{run_prediction_study, PredictionConfig, SelectionMode, BASELINE_VARIANT};
use ordinal_factor::synthetic::{generate_ground_truth, generate_responses, GeneratorParams};

fn main() -> ordinal_factor::Result<()> {
    let truth = generate_ground_truth(30, 50, 3, &GeneratorParams::standard(3), 5)?;
    let y = generate_responses(&truth, 1.0, 6)?;
    let cfg = PredictionConfig {
        trials: 3,
        concepts: 3,
        max_outer_iters: 30,
        selection: SelectionMode::Bic,
        ..PredictionConfig::default()
    };
    let report = run_prediction_study(&y, &truth.bins, &cfg)?;
    for s in report.summaries.iter().filter(|s| s.metric == "rmse") {
        let marker = if s.variant == BASELINE_VARIANT { " (constant)" } else { "" };
        println!("{:<24} median RMSE {:.4}  [{:.4}, {:.4}]{marker}", s.variant, s.median, s.q1, s.q3);
    }
    Ok(())
}
