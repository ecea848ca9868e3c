// The four ways of handling the noise level: fixed precision, estimated
// precision, and learned bin boundaries (shared or per question).

use ordinal_factor::evaluation::{holdout_split, predict_scores, rmse, PredictionRule};
use ordinal_factor::model::Thresholds;
use ordinal_factor::solvers::{fit, FitOptions, PrecisionMode};
use ordinal_factor::synthetic::{generate_ground_truth, generate_responses, GeneratorParams};

fn main() -> ordinal_factor::Result<()> {
    let (q, n, k) = (30, 60, 3);
    let mut params = GeneratorParams::standard(k);
    params.tau = 2.0;
    let truth = generate_ground_truth(q, n, k, &params, 11)?;
    let y = generate_responses(&truth, 1.0, 12)?;
    let split = holdout_split(&y, 0.2, 13)?;
    let train = split.train(&y)?;
    let test = split.test_entries(&y);
    let pairs: Vec<_> = test.iter().map(|&(i, j, _)| (i, j)).collect();
    let labels: Vec<_> = test.iter().map(|&(_, _, l)| l).collect();

    for mode in [
        PrecisionMode::FixedTau(1.0),
        PrecisionMode::EstimateTau,
        PrecisionMode::LearnBinsShared,
        PrecisionMode::LearnBinsPerQuestion,
    ] {
        let mut opts = FitOptions::new(k, n);
        opts.lambda = 3.0;
        opts.precision_mode = mode;
        opts.max_outer_iters = 40;
        let (model, trace) = fit(&train, &truth.bins, &opts)?;
        let pred = predict_scores(&model, &pairs, PredictionRule::PosteriorMean)?;
        let bins = match &model.thresholds {
            Thresholds::Shared(b) => format!("{:.2?}", b.interior()),
            Thresholds::PerQuestion(v) => format!("{} per-question sets, first {:.2?}", v.len(), v[0].interior()),
        };
        println!(
            "{mode:?}: tau {:.3}, objective {:.1}, held-out RMSE {:.4}, bins {bins}",
            model.tau,
            trace.objective_per_outer_iter.last().unwrap(),
            rmse(&pred, &labels)?
        );
    }
    Ok(())
}
