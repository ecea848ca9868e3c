use std::fmt::Write;

use crate::error::{invalid, Error, Result};
use crate::model::FactorModel;
use crate::solvers::TagSupport;

/// Weights at or below this are treated as absent when drawing.
pub const DEFAULT_EDGE_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeStatus {
    /// Tagged and estimated above the threshold.
    Kept,
    /// Tagged but estimated at or below the threshold.
    Removed,
    /// Not tagged but estimated above the threshold.
    Discovered,
}

impl EdgeStatus {
    fn style(self) -> (&'static str, &'static str) {
        match self {
            EdgeStatus::Kept => ("black", "solid"),
            EdgeStatus::Removed => ("red", "dashed"),
            EdgeStatus::Discovered => ("darkgreen", "solid"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphEdge {
    pub question: usize,
    pub concept: usize,
    pub weight: f64,
    pub status: EdgeStatus,
}

/// Bipartite question-concept association graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ConceptGraph {
    pub question_labels: Vec<String>,
    pub difficulties: Vec<f64>,
    pub concept_labels: Vec<String>,
    /// Sorted by question, then concept.
    pub edges: Vec<GraphEdge>,
}

/// Classifies every `(question, concept)` pair of `model.w` against `tags`
/// (no tags means every drawn edge is a discovered one).
pub fn concept_graph(
    model: &FactorModel,
    tags: Option<&TagSupport>,
    tag_names: Option<&[String]>,
    question_ids: Option<&[String]>,
    threshold: f64,
) -> Result<ConceptGraph> {
    if !(threshold >= 0.0) {
        return Err(invalid(format!("edge threshold must be >= 0, got {threshold}")));
    }
    let (nq, k) = (model.num_questions(), model.num_concepts());
    if let Some(t) = tags {
        if (t.num_questions(), t.num_concepts()) != (nq, k) {
            return Err(Error::DimensionMismatch(format!(
                "tags are {}x{}, W is {nq}x{k}",
                t.num_questions(),
                t.num_concepts()
            )));
        }
    }
    let concept_labels = match tag_names {
        Some(n) if n.len() == k => n.to_vec(),
        Some(n) => return Err(Error::DimensionMismatch(format!("{} tag names for {k} concepts", n.len()))),
        None => (1..=k).map(|c| format!("concept {c}")).collect(),
    };
    let question_labels = match question_ids {
        Some(q) if q.len() == nq => q.to_vec(),
        Some(q) => return Err(Error::DimensionMismatch(format!("{} question ids for {nq} questions", q.len()))),
        None => (1..=nq).map(|i| format!("Q{i}")).collect(),
    };
    let mut edges = Vec::new();
    for i in 0..nq {
        for c in 0..k {
            let weight = model.w[(i, c)];
            let tagged = tags.is_some_and(|t| t.contains(i, c));
            let status = match (tagged, weight > threshold) {
                (true, true) => EdgeStatus::Kept,
                (true, false) => EdgeStatus::Removed,
                (false, true) => EdgeStatus::Discovered,
                (false, false) => continue,
            };
            edges.push(GraphEdge {
                question: i,
                concept: c,
                weight,
                status,
            });
        }
    }
    Ok(ConceptGraph {
        question_labels,
        difficulties: model.mu.iter().copied().collect(),
        concept_labels,
        edges,
    })
}

fn quoted(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

impl ConceptGraph {
    /// Graphviz rendering: boxes are questions (labelled with difficulty),
    /// circles are concepts, pen width is proportional to the weight.
    pub fn to_dot(&self) -> String {
        let max_w = self.edges.iter().map(|e| e.weight).fold(0.0, f64::max);
        let mut s = String::from("graph concepts {\n  rankdir=LR;\n  node [fontsize=10];\n");
        for (i, (label, mu)) in self.question_labels.iter().zip(&self.difficulties).enumerate() {
            let _ = writeln!(s, "  q{i} [shape=box, label={}];", quoted(&format!("{label}\n{mu:.2}")));
        }
        for (c, label) in self.concept_labels.iter().enumerate() {
            let _ = writeln!(s, "  c{c} [shape=circle, label={}];", quoted(label));
        }
        for e in &self.edges {
            let (color, style) = e.status.style();
            let pen = if e.status == EdgeStatus::Removed || max_w == 0.0 {
                1.0
            } else {
                (4.0 * e.weight / max_w).max(0.25)
            };
            let _ = writeln!(
                s,
                "  q{} -- c{} [color={color}, style={style}, penwidth={pen:.3}, tooltip=\"{:.4}\"];",
                e.question, e.concept, e.weight
            );
        }
        s.push_str("}\n");
        s
    }
}

pub fn export_concept_graph(
    model: &FactorModel,
    tags: Option<&TagSupport>,
    tag_names: Option<&[String]>,
    question_ids: Option<&[String]>,
    threshold: f64,
) -> Result<String> {
    Ok(concept_graph(model, tags, tag_names, question_ids, threshold)?.to_dot())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{QuantizerSpec, Thresholds};
    use nalgebra::{DMatrix, DVector};

    fn model(w: DMatrix<f64>) -> FactorModel {
        let (q, k) = w.shape();
        FactorModel::new(w, DVector::from_element(q, 0.5), DMatrix::zeros(k, 2), 1.0, Thresholds::Shared(QuantizerSpec::binary()))
            .unwrap()
    }

    #[test]
    fn zero_w_removes_every_tag() {
        let tags = TagSupport::new(2, 2, [(0, 0), (1, 1)]).unwrap();
        let g = concept_graph(&model(DMatrix::zeros(2, 2)), Some(&tags), None, None, DEFAULT_EDGE_THRESHOLD).unwrap();
        assert_eq!(g.edges.len(), 2);
        assert!(g.edges.iter().all(|e| e.status == EdgeStatus::Removed));
        assert!(g.to_dot().matches("style=dashed").count() == 2);
    }

    #[test]
    fn status_rule() {
        let tags = TagSupport::new(2, 2, [(0, 0)]).unwrap();
        let w = DMatrix::from_row_slice(2, 2, &[0.7, 0.0, 0.0005, 0.2]);
        let g = concept_graph(&model(w), Some(&tags), Some(&["a".into(), "b \"x\"".into()]), None, 1e-3).unwrap();
        let statuses: Vec<_> = g.edges.iter().map(|e| (e.question, e.concept, e.status)).collect();
        assert_eq!(statuses, vec![(0, 0, EdgeStatus::Kept), (1, 1, EdgeStatus::Discovered)]);
        let dot = g.to_dot();
        assert!(dot.contains("label=\"Q1\\n0.50\""));
        assert!(dot.contains("label=\"b \\\"x\\\"\""));
        assert!(dot.contains("q1 -- c1 [color=darkgreen, style=solid"));
        assert!(concept_graph(&model(DMatrix::zeros(2, 2)), None, None, None, -1.0).is_err());
    }
}
