// With a nuclear-norm ball on C, over-specifying the number of concepts
// still yields a low-rank knowledge matrix.

use nalgebra::DMatrix;
use ordinal_factor::evaluation::{numerical_rank, select_hyperparams, HyperGrid, SelectionMode};
use ordinal_factor::solvers::{singular_values, FitOptions, NormConstraint};
use ordinal_factor::synthetic::{generate_ground_truth, generate_responses, GeneratorParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> ordinal_factor::Result<()> {
    let (q, n, k) = (40, 50, 6);
    let mut truth = generate_ground_truth(q, n, k, &GeneratorParams::standard(k), 1)?;
    // replace C by a rank-2 matrix with unit-variance entries
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut draw = |r, c, s: f64| -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| {
            let x: f64 = StandardNormal.sample(&mut rng);
            s * x
        })
    };
    truth.c = draw(k, 2, 0.5f64.sqrt()) * draw(2, n, 1.0);
    let y = generate_responses(&truth, 1.0, 3)?;

    let mut base = FitOptions::new(k, n);
    base.lambda = 3.0;
    base.norm_constraint = NormConstraint::Nuclear;
    base.max_outer_iters = 40;
    let grid = HyperGrid {
        lambdas: vec![3.0],
        etas: [0.2, 0.5, 1.0].iter().map(|s| s * base.eta).collect(),
    };
    let sel = select_hyperparams(&y, &truth.bins, &base, &grid, SelectionMode::Bic, None)?;
    let model = sel.model.expect("BIC keeps the winning fit");
    let sv = singular_values(&model.c)?;
    println!("BIC-selected eta {:.2}", sel.options.eta);
    println!("singular values of C: {:.3?}", sv);
    println!("numerical rank {} (requested K = {k}, true rank 2)", numerical_rank(&model.c, 1e-3));
    Ok(())
}
