// Generate a synthetic response matrix, fit the model, and measure how well
// the true factors are recovered.

use ordinal_factor::solvers::{fit, FitOptions};
use ordinal_factor::synthetic::{align_factors, generate_ground_truth, generate_responses, recovery_errors, GeneratorParams};

fn main() -> ordinal_factor::Result<()> {
    let (q, n, k) = (40, 60, 3);
    let truth = generate_ground_truth(q, n, k, &GeneratorParams::standard(k), 7)?;
    // 80% of the cells observed
    let y = generate_responses(&truth, 0.8, 8)?;

    let mut opts = FitOptions::new(k, n);
    opts.lambda = 3.0;
    opts.max_outer_iters = 60;
    let (model, trace) = fit(&y, &truth.bins, &opts)?;

    println!(
        "{} observed responses, {} outer iterations, objective {:.2} -> {:.2}",
        y.num_observed(),
        trace.iterations_run,
        trace.initial_objective,
        trace.objective_per_outer_iter.last().unwrap()
    );
    println!("estimated tau {:.3} (true {:.3}), {} nonzeros in W", model.tau, truth.tau, model.nnz_w());

    let e = recovery_errors(&align_factors(&model, &truth)?, &truth)?;
    println!("E_W {:.4}  E_C {:.4}  E_mu {:.4}", e.e_w, e.e_c, e.e_mu);
    Ok(())
}
