// Choosing the sparsity weight: BIC on the full data versus 4-fold
// cross-validated RMSE.

use ordinal_factor::evaluation::{select_hyperparams, HyperGrid, SelectionMode};
use ordinal_factor::solvers::FitOptions;
use ordinal_factor::synthetic::{generate_ground_truth, generate_responses, GeneratorParams};

fn main() -> ordinal_factor::Result<()> {
    let (q, n, k) = (24, 40, 2);
    let truth = generate_ground_truth(q, n, k, &GeneratorParams::standard(k), 21)?;
    let y = generate_responses(&truth, 1.0, 22)?;

    let mut base = FitOptions::new(k, n);
    base.max_outer_iters = 25;
    let grid = HyperGrid {
        lambdas: vec![0.5, 2.0, 6.0],
        etas: vec![base.eta],
    };
    for mode in [SelectionMode::Bic, SelectionMode::CrossValidation { folds: 4 }] {
        let sel = select_hyperparams(&y, &truth.bins, &base, &grid, mode, None)?;
        println!("{mode:?}");
        for s in &sel.scores {
            println!("  lambda {:>4}: {:?}", s.lambda, s.score);
        }
        println!("  selected lambda {}", sel.options.lambda);
    }
    Ok(())
}
