//! File formats: long-format response and tag CSVs, model directories,
//! quantizer configs, concept graphs (Graphviz DOT), and experiment reports.

mod graph;
mod model_files;
mod quantizer_config;
mod reports;
mod tables;

pub use graph::{concept_graph, export_concept_graph, ConceptGraph, EdgeStatus, GraphEdge, DEFAULT_EDGE_THRESHOLD};
pub use model_files::{load_model, save_model, read_matrix_csv, write_matrix_csv, ModelMeta};
pub use quantizer_config::{load_quantizer_json, parse_bins, QuantizerConfig};
pub use reports::write_report;
pub use tables::{
    load_entries_csv, load_responses_csv, load_tags_csv, write_predictions_csv, write_responses_csv, write_tags_csv,
    LabeledResponses, LabeledTags,
};

/// Prefixes I/O failures with the offending path.
pub(crate) fn at_path<T, E: Into<crate::Error>>(path: &std::path::Path, r: std::result::Result<T, E>) -> crate::Result<T> {
    r.map_err(|e| match e.into() {
        crate::Error::Io(io) => crate::Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        crate::Error::Csv(c) if c.is_io_error() => {
            crate::Error::Io(std::io::Error::other(format!("{}: {c}", path.display())))
        }
        other => other,
    })
}
