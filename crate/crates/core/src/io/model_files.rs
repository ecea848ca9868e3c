use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FactorModel, QuantizerSpec, Thresholds};
use crate::solvers::{FitOptions, FitTrace, NormConstraint, PrecisionMode};

/// Interior bin boundaries (the outer edges are always `-inf` and `+inf`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoundariesJson {
    Shared(Vec<f64>),
    PerQuestion(Vec<Vec<f64>>),
}

/// Contents of `meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub tau: f64,
    #[serde(rename = "K")]
    pub num_concepts: usize,
    #[serde(rename = "P")]
    pub num_labels: usize,
    /// Interior boundaries; a list per question when bins were learned per question.
    pub boundaries: BoundariesJson,
    pub lambda: f64,
    pub gamma_ridge: f64,
    pub eta: f64,
    pub norm_constraint: NormConstraint,
    pub precision_mode: String,
    pub objective_trace: Vec<f64>,
    pub seed: u64,
    #[serde(default = "one")]
    pub restarts: usize,
    pub question_ids: Vec<String>,
    pub learner_ids: Vec<String>,
}

fn one() -> usize {
    1
}

fn mode_name(m: PrecisionMode) -> &'static str {
    match m {
        PrecisionMode::FixedTau(_) => "fixed_tau",
        PrecisionMode::EstimateTau => "estimate_tau",
        PrecisionMode::LearnBinsShared => "learn_bins_shared",
        PrecisionMode::LearnBinsPerQuestion => "learn_bins_per_question",
    }
}

impl ModelMeta {
    pub fn new(
        model: &FactorModel,
        opts: &FitOptions,
        trace: &FitTrace,
        question_ids: Vec<String>,
        learner_ids: Vec<String>,
    ) -> Self {
        let boundaries = match &model.thresholds {
            Thresholds::Shared(q) => BoundariesJson::Shared(q.interior().to_vec()),
            Thresholds::PerQuestion(v) => BoundariesJson::PerQuestion(v.iter().map(|q| q.interior().to_vec()).collect()),
        };
        ModelMeta {
            tau: model.tau,
            num_concepts: model.num_concepts(),
            num_labels: model.thresholds.num_labels(),
            boundaries,
            lambda: opts.lambda,
            gamma_ridge: opts.gamma_ridge,
            eta: opts.eta,
            norm_constraint: opts.norm_constraint,
            precision_mode: mode_name(opts.precision_mode).to_string(),
            objective_trace: trace.objective_per_outer_iter.clone(),
            seed: opts.seed,
            restarts: opts.restarts,
            question_ids,
            learner_ids,
        }
    }

    fn thresholds(&self) -> Result<Thresholds> {
        Ok(match &self.boundaries {
            BoundariesJson::Shared(b) => Thresholds::Shared(QuantizerSpec::from_interior(b)?),
            BoundariesJson::PerQuestion(v) => Thresholds::PerQuestion(
                v.iter().map(|b| QuantizerSpec::from_interior(b)).collect::<Result<_>>()?,
            ),
        })
    }
}

/// Writes a matrix as headerless CSV with 17 significant digits per value.
pub fn write_matrix_csv(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for row in m.row_iter() {
        w.write_record(row.iter().map(|x| format!("{x:.16e}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let mut rdr = super::at_path(path, csv::ReaderBuilder::new().has_headers(false).from_path(path))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line()) as usize;
        let row = rec
            .iter()
            .map(|s| {
                s.trim().parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("'{s}' is not a number"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_row_iterator(rows.len(), ncols, rows.into_iter().flatten()))
}

/// Writes `W.csv`, `C.csv`, `mu.csv` and `meta.json` into `dir`.
pub fn save_model(dir: impl AsRef<Path>, model: &FactorModel, meta: &ModelMeta) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    write_matrix_csv(dir.join("W.csv"), &model.w)?;
    write_matrix_csv(dir.join("C.csv"), &model.c)?;
    write_matrix_csv(dir.join("mu.csv"), &DMatrix::from_column_slice(model.mu.len(), 1, model.mu.as_slice()))?;
    fs::write(dir.join("meta.json"), serde_json::to_string_pretty(meta)? + "\n")?;
    Ok(())
}

pub fn load_model(dir: impl AsRef<Path>) -> Result<(FactorModel, ModelMeta)> {
    let dir = dir.as_ref();
    let meta_path = dir.join("meta.json");
    let meta: ModelMeta = serde_json::from_str(&super::at_path(&meta_path, fs::read_to_string(&meta_path))?)?;
    let w = read_matrix_csv(dir.join("W.csv"))?;
    let c = read_matrix_csv(dir.join("C.csv"))?;
    let mu = read_matrix_csv(dir.join("mu.csv"))?;
    if mu.ncols() != 1 {
        return Err(Error::DimensionMismatch("mu.csv must have one column".into()));
    }
    let model = FactorModel::new(w, DVector::from_column_slice(mu.as_slice()), c, meta.tau, meta.thresholds()?)?;
    if model.num_questions() != meta.question_ids.len() || model.num_learners() != meta.learner_ids.len() {
        return Err(Error::DimensionMismatch("id lists do not match the stored matrices".into()));
    }
    Ok((model, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matrices_round_trip_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = DMatrix::from_fn(4, 3, |_, _| rng.random_range(-1e3..1e3) * 10f64.powi(rng.random_range(-20..20)));
        let d = tempfile::tempdir().unwrap();
        let p = d.path().join("m.csv");
        write_matrix_csv(&p, &m).unwrap();
        assert_eq!(read_matrix_csv(&p).unwrap(), m);
    }

    #[test]
    fn model_round_trip() {
        let q = QuantizerSpec::from_interior(&[-1.0, 0.5]).unwrap();
        let model = FactorModel::new(
            DMatrix::from_row_slice(2, 1, &[0.25, 0.0]),
            DVector::from_vec(vec![0.1, -1.0 / 3.0]),
            DMatrix::from_row_slice(1, 3, &[1.0, -2.0, std::f64::consts::PI]),
            1.25,
            Thresholds::PerQuestion(vec![q.clone(), q]),
        )
        .unwrap();
        let meta = ModelMeta::new(
            &model,
            &FitOptions::new(1, 3),
            &FitTrace::default(),
            vec!["a".into(), "b".into()],
            vec!["x".into(), "y".into(), "z".into()],
        );
        let d = tempfile::tempdir().unwrap();
        save_model(d.path(), &model, &meta).unwrap();
        let (back, meta_back) = load_model(d.path()).unwrap();
        assert_eq!(back, model);
        assert_eq!(meta_back, meta);
        let json = fs::read_to_string(d.path().join("meta.json")).unwrap();
        assert!(json.contains("\"K\": 1") && json.contains("\"norm_constraint\": \"frobenius\""));
    }
}
