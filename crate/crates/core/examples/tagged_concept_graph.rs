// Fit with instructor tags as known support of W and draw the resulting
// question-concept graph: kept tags in black, tags the data rejects in
// dashed red, and discovered associations in green.

use ordinal_factor::io::{concept_graph, EdgeStatus, DEFAULT_EDGE_THRESHOLD};
use ordinal_factor::solvers::{fit_tagged, FitOptions, TagSupport};
use ordinal_factor::synthetic::{generate_ground_truth, generate_responses, GeneratorParams};

fn main() -> ordinal_factor::Result<()> {
    let (q, n, k) = (24, 80, 3);
    let truth = generate_ground_truth(q, n, k, &GeneratorParams::standard(k), 3)?;
    let y = generate_responses(&truth, 1.0, 4)?;

    // Imperfect tags: the true support, minus the first association of every
    // fourth question, plus one wrong tag on question 0.
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for i in 0..q {
        let support: Vec<usize> = (0..k).filter(|&c| truth.w[(i, c)] != 0.0).collect();
        let skip = if i % 4 == 0 { 1 } else { 0 };
        pairs.extend(support.into_iter().skip(skip).map(|c| (i, c)));
    }
    if let Some(wrong) = (0..k).find(|&c| truth.w[(0, c)] == 0.0) {
        pairs.push((0, wrong));
    }
    let tags = TagSupport::new(q, k, pairs)?;

    let mut opts = FitOptions::new(k, n);
    opts.lambda = 3.0;
    opts.gamma_ridge = 0.1;
    opts.max_outer_iters = 60;
    let (model, _) = fit_tagged(&y, &truth.bins, &tags, &opts)?;

    let names: Vec<String> = ["fractions", "equations", "geometry"].iter().map(|s| s.to_string()).collect();
    let graph = concept_graph(&model, Some(&tags), Some(&names), None, DEFAULT_EDGE_THRESHOLD)?;
    for status in [EdgeStatus::Kept, EdgeStatus::Removed, EdgeStatus::Discovered] {
        let count = graph.edges.iter().filter(|e| e.status == status).count();
        println!("{status:?}: {count}");
    }
    let dot = graph.to_dot();
    for line in dot.lines().take(8) {
        println!("{line}");
    }
    println!("... ({} lines; pipe through `dot -Tsvg` to render)", dot.lines().count());
    Ok(())
}
