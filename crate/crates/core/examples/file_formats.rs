// Round trip through the on-disk formats: long-format response and tag
// CSVs in, model directory out, predictions from the reloaded model.

use ordinal_factor::evaluation::{predict_scores, PredictionRule};
use ordinal_factor::io::{load_model, load_responses_csv, load_tags_csv, save_model, ModelMeta};
use ordinal_factor::model::QuantizerSpec;
use ordinal_factor::solvers::{fit_tagged, FitOptions};

const RESPONSES: &str = "question_id,learner_id,label
add,ann,4
add,bob,3
add,cid,4
sub,ann,3
sub,bob,1
sub,cid,2
mul,ann,4
mul,cid,1
div,bob,1
div,cid,1
";

const TAGS: &str = "question_id,tag_name
add,arithmetic
sub,arithmetic
mul,arithmetic
mul,products
div,products
";

fn main() -> ordinal_factor::Result<()> {
    let dir = tempfile::tempdir()?;
    std::fs::write(dir.path().join("responses.csv"), RESPONSES)?;
    std::fs::write(dir.path().join("tags.csv"), TAGS)?;

    let data = load_responses_csv(dir.path().join("responses.csv"))?;
    let tags = load_tags_csv(dir.path().join("tags.csv"), &data.question_ids)?;
    println!("questions {:?}, learners {:?}, tags {:?}", data.question_ids, data.learner_ids, tags.tag_names);

    let q = QuantizerSpec::from_interior(&[-1.0, 0.0, 1.0])?;
    let mut opts = FitOptions::new(tags.tag_names.len(), data.learner_ids.len());
    opts.max_outer_iters = 30;
    let (model, trace) = fit_tagged(&data.responses, &q, &tags.tags, &opts)?;

    let out = dir.path().join("model");
    save_model(&out, &model, &ModelMeta::new(&model, &opts, &trace, data.question_ids, data.learner_ids))?;
    let (reloaded, meta) = load_model(&out)?;
    assert_eq!(reloaded, model);

    // the unobserved cells
    let missing = [(2, 1), (3, 0)];
    let pred = predict_scores(&reloaded, &missing, PredictionRule::PosteriorMean)?;
    for (&(i, j), p) in missing.iter().zip(pred) {
        println!("{} by {}: expected label {p:.2}", meta.question_ids[i], meta.learner_ids[j]);
    }
    Ok(())
}
