use std::fs;
use std::path::Path;

use ordinal_factor::cli::cli_main;
use ordinal_factor::io::{load_model, load_responses_csv};

fn run(args: &[&str]) -> i32 {
    cli_main(std::iter::once("ordfactor").chain(args.iter().copied()))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn synth_fit_predict_graph_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let model = tmp.path().join("model");
    assert_eq!(
        run(&[
            "synth", "--questions", "15", "--learners", "25", "--concepts", "3", "--labels", "4", "--obs-fraction",
            "0.8", "--seed", "3", "--out", p(&data),
        ]),
        0
    );
    for f in ["responses.csv", "tags.csv", "quantizer.json", "truth/W.csv", "truth/C.csv", "truth/mu.csv"] {
        assert!(data.join(f).is_file(), "missing {f}");
    }
    let responses = load_responses_csv(data.join("responses.csv")).unwrap();
    assert_eq!(responses.question_ids.len(), 15);

    assert_eq!(
        run(&[
            "fit", "--responses", p(&data.join("responses.csv")), "--tags", p(&data.join("tags.csv")), "--quantizer",
            p(&data.join("quantizer.json")), "--lambda", "2", "--max-outer", "20", "--restarts", "2", "--out", p(&model),
        ]),
        0
    );
    let (fitted, meta) = load_model(&model).unwrap();
    assert_eq!(fitted.num_concepts(), 3);
    assert_eq!(meta.restarts, 2);
    assert_eq!(meta.question_ids, responses.question_ids);

    let entries = tmp.path().join("entries.csv");
    fs::write(&entries, "question_id,learner_id\nq1,l1\nq2,l5\n").unwrap();
    let preds = tmp.path().join("predictions.csv");
    assert_eq!(run(&["predict", "--model", p(&model), "--entries", p(&entries), "--out", p(&preds)]), 0);
    let text = fs::read_to_string(&preds).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    for row in rows {
        let value: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
        assert!((1.0..=4.0).contains(&value));
    }

    let dot = tmp.path().join("graph.dot");
    assert_eq!(
        run(&["graph", "--model", p(&model), "--tags", p(&data.join("tags.csv")), "--out", p(&dot)]),
        0
    );
    let dot = fs::read_to_string(&dot).unwrap();
    assert!(dot.starts_with("graph concepts {"));
    assert!(graphviz_rust::parse(&dot).is_ok());
}

#[test]
fn sweep_writes_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("sweep.json");
    fs::write(
        &config,
        r#"{"recovery": {"axis": {"learners": [10, 20]}, "questions": 12, "concepts": 2,
            "trials": 2, "max_outer_iters": 5, "restarts": 1}}"#,
    )
    .unwrap();
    let out = tmp.path().join("report");
    assert_eq!(run(&["sweep", "--config", p(&config), "--out", p(&out)]), 0);
    let csv = fs::read_to_string(out.join("report.csv")).unwrap();
    // 2 settings x 2 trials x 3 metrics
    assert_eq!(csv.lines().count(), 1 + 12);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["summaries"].as_array().unwrap().len(), 6);
}

#[test]
fn usage_and_runtime_errors_have_distinct_codes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run(&["--help"]), 0);
    assert_eq!(run(&["fit"]), 2);
    assert_eq!(run(&["fit", "--responses", "x.csv", "--precision", "sometimes", "--out", "m"]), 2);
    let missing = tmp.path().join("nope.csv");
    assert_eq!(run(&["fit", "--responses", p(&missing), "--out", p(&tmp.path().join("m"))]), 1);

    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, "question_id,learner_id,label\nq1,l1,0\n").unwrap();
    assert_eq!(run(&["fit", "--responses", p(&bad), "--out", p(&tmp.path().join("m"))]), 1);

    let config = tmp.path().join("sweep.json");
    fs::write(&config, r#"{"recovery": {"axis": {"learners": [10]}, "bogus": 1}}"#).unwrap();
    assert_eq!(run(&["sweep", "--config", p(&config), "--out", p(&tmp.path().join("r"))]), 1);
}
