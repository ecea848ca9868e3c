use std::collections::HashMap;
use std::path::Path;

use crate::error::{invalid, Error, Result};
use crate::model::{Observation, ResponseMatrix};
use crate::solvers::TagSupport;

/// Responses plus the external ids of their rows and columns, indexed in
/// first-appearance order.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledResponses {
    pub responses: ResponseMatrix,
    pub question_ids: Vec<String>,
    pub learner_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTags {
    pub tags: TagSupport,
    /// Concept `k` is named `tag_names[k]`.
    pub tag_names: Vec<String>,
}

fn parse_err(line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        line: line as usize,
        message: message.into(),
    }
}

fn reader(path: &Path, header: &[&str]) -> Result<csv::Reader<std::fs::File>> {
    let mut rdr = super::at_path(path, csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path))?;
    let got: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if got != header {
        return Err(parse_err(1, format!("expected header {}, found {}", header.join(","), got.join(","))));
    }
    Ok(rdr)
}

fn intern(ids: &mut Vec<String>, index: &mut HashMap<String, usize>, id: &str) -> usize {
    *index.entry(id.to_string()).or_insert_with(|| {
        ids.push(id.to_string());
        ids.len() - 1
    })
}

/// Reads `question_id,learner_id,label` rows (one per observed entry).
pub fn load_responses_csv(path: impl AsRef<Path>) -> Result<LabeledResponses> {
    let mut rdr = reader(path.as_ref(), &["question_id", "learner_id", "label"])?;
    let (mut qids, mut lids) = (Vec::new(), Vec::new());
    let (mut qidx, mut lidx) = (HashMap::new(), HashMap::new());
    let mut seen = HashMap::new();
    let mut entries = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 3 {
            return Err(parse_err(line, format!("expected 3 fields, found {}", rec.len())));
        }
        let label: usize = rec[2]
            .parse()
            .map_err(|_| parse_err(line, format!("label '{}' is not a positive integer", &rec[2])))?;
        if label == 0 {
            return Err(parse_err(line, "labels start at 1"));
        }
        if rec[0].is_empty() || rec[1].is_empty() {
            return Err(parse_err(line, "empty id"));
        }
        let question = intern(&mut qids, &mut qidx, &rec[0]);
        let learner = intern(&mut lids, &mut lidx, &rec[1]);
        if let Some(first) = seen.insert((question, learner), line) {
            return Err(parse_err(
                line,
                format!("duplicate response ({}, {}), first seen on line {first}", &rec[0], &rec[1]),
            ));
        }
        entries.push(Observation {
            question,
            learner,
            label,
        });
    }
    if entries.is_empty() {
        return Err(invalid("response file has no rows"));
    }
    Ok(LabeledResponses {
        responses: ResponseMatrix::new(qids.len(), lids.len(), entries)?,
        question_ids: qids,
        learner_ids: lids,
    })
}

fn check_ids(ids: &[String], expected: usize, what: &str) -> Result<()> {
    if ids.len() != expected {
        return Err(Error::DimensionMismatch(format!("{} {what} ids for {expected} {what}s", ids.len())));
    }
    Ok(())
}

pub fn write_responses_csv(
    path: impl AsRef<Path>,
    y: &ResponseMatrix,
    question_ids: &[String],
    learner_ids: &[String],
) -> Result<()> {
    check_ids(question_ids, y.num_questions(), "question")?;
    check_ids(learner_ids, y.num_learners(), "learner")?;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["question_id", "learner_id", "label"])?;
    for e in y.entries() {
        w.write_record([&question_ids[e.question], &learner_ids[e.learner], &e.label.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `question_id,tag_name` rows; distinct tag names become concepts in
/// first-appearance order.
pub fn load_tags_csv(path: impl AsRef<Path>, question_ids: &[String]) -> Result<LabeledTags> {
    let mut rdr = reader(path.as_ref(), &["question_id", "tag_name"])?;
    let qidx: HashMap<&str, usize> = question_ids.iter().enumerate().map(|(i, q)| (q.as_str(), i)).collect();
    let mut names = Vec::new();
    let mut nidx = HashMap::new();
    let mut pairs = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 2 {
            return Err(parse_err(line, format!("expected 2 fields, found {}", rec.len())));
        }
        let question = *qidx
            .get(&rec[0])
            .ok_or_else(|| parse_err(line, format!("unknown question id '{}'", &rec[0])))?;
        if rec[1].is_empty() {
            return Err(parse_err(line, "empty tag name"));
        }
        let concept = intern(&mut names, &mut nidx, &rec[1]);
        if pairs.contains(&(question, concept)) {
            return Err(parse_err(line, format!("duplicate tag ({}, {})", &rec[0], &rec[1])));
        }
        pairs.push((question, concept));
    }
    if pairs.is_empty() {
        return Err(invalid("tag file has no rows"));
    }
    Ok(LabeledTags {
        tags: TagSupport::new(question_ids.len(), names.len(), pairs)?,
        tag_names: names,
    })
}

pub fn write_tags_csv(path: impl AsRef<Path>, tags: &TagSupport, question_ids: &[String], tag_names: &[String]) -> Result<()> {
    check_ids(question_ids, tags.num_questions(), "question")?;
    if tag_names.len() != tags.num_concepts() {
        return Err(Error::DimensionMismatch(format!(
            "{} tag names for {} concepts",
            tag_names.len(),
            tags.num_concepts()
        )));
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["question_id", "tag_name"])?;
    for (i, k) in tags.pairs() {
        w.write_record([&question_ids[i], &tag_names[k]])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `question_id,learner_id` rows and resolves them against known ids.
pub fn load_entries_csv(
    path: impl AsRef<Path>,
    question_ids: &[String],
    learner_ids: &[String],
) -> Result<Vec<(usize, usize)>> {
    let path = path.as_ref();
    let mut rdr = super::at_path(
        path,
        csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_path(path),
    )?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.len() < 2 || header[0] != "question_id" || header[1] != "learner_id" {
        return Err(parse_err(1, "expected header starting with question_id,learner_id"));
    }
    let qidx: HashMap<&str, usize> = question_ids.iter().enumerate().map(|(i, q)| (q.as_str(), i)).collect();
    let lidx: HashMap<&str, usize> = learner_ids.iter().enumerate().map(|(i, q)| (q.as_str(), i)).collect();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() < 2 {
            return Err(parse_err(line, "expected at least 2 fields"));
        }
        let i = *qidx
            .get(&rec[0])
            .ok_or_else(|| parse_err(line, format!("unknown question id '{}'", &rec[0])))?;
        let j = *lidx
            .get(&rec[1])
            .ok_or_else(|| parse_err(line, format!("unknown learner id '{}'", &rec[1])))?;
        out.push((i, j));
    }
    Ok(out)
}

pub fn write_predictions_csv(
    path: impl AsRef<Path>,
    entries: &[(usize, usize)],
    predictions: &[f64],
    question_ids: &[String],
    learner_ids: &[String],
) -> Result<()> {
    if entries.len() != predictions.len() {
        return Err(Error::DimensionMismatch("one prediction per entry expected".into()));
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["question_id", "learner_id", "prediction"])?;
    for (&(i, j), p) in entries.iter().zip(predictions) {
        w.write_record([&question_ids[i], &learner_ids[j], &format!("{p:.6}")])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn three_rows_two_by_two() {
        let d = tempfile::tempdir().unwrap();
        let p = write(&d, "y.csv", "question_id,learner_id,label\nq1,l1,2\nq1,l2,1\nq2,l2,3\n");
        let r = load_responses_csv(&p).unwrap();
        assert_eq!(r.responses.num_observed(), 3);
        assert_eq!((r.responses.num_questions(), r.responses.num_learners()), (2, 2));
        assert_eq!(r.responses.get(1, 0), None);
        assert_eq!(r.responses.get(1, 1), Some(3));
        assert_eq!(r.question_ids, ["q1", "q2"]);
    }

    #[test]
    fn malformed_rows_name_the_line() {
        let d = tempfile::tempdir().unwrap();
        for (text, line) in [
            ("question_id,learner_id,label\nq1,l1,2\nq1,l1,3\n", 3),
            ("question_id,learner_id,label\nq1,l1,0\n", 2),
            ("question_id,learner_id,label\nq1,l1,2\nq2,l1,x\n", 3),
            ("question_id,learner_id,label\nq1,l1,-1\n", 2),
        ] {
            let p = write(&d, "bad.csv", text);
            match load_responses_csv(&p) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
        let p = write(&d, "short.csv", "question_id,learner_id,label\nq1,l1\n");
        assert!(load_responses_csv(&p).is_err());
        let p = write(&d, "hdr.csv", "q,l,y\nq1,l1,1\n");
        assert!(matches!(load_responses_csv(&p), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn tags_in_first_appearance_order() {
        let d = tempfile::tempdir().unwrap();
        let ids = vec!["q1".to_string(), "q2".to_string()];
        let p = write(&d, "t.csv", "question_id,tag_name\nq2,algebra\nq1,algebra\n");
        let t = load_tags_csv(&p, &ids).unwrap();
        assert_eq!(t.tag_names, ["algebra"]);
        assert_eq!(t.tags.len(), 2);
        assert_eq!(t, load_tags_csv(&p, &ids).unwrap());
        let p = write(&d, "u.csv", "question_id,tag_name\nq9,algebra\n");
        assert!(load_tags_csv(&p, &ids).is_err());
        let p = write(&d, "e.csv", "question_id,tag_name\n");
        assert!(load_tags_csv(&p, &ids).is_err());
    }
}
