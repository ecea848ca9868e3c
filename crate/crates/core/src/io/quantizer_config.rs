use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::QuantizerSpec;
use crate::synthetic::make_even_bins;

/// Quantizer file: either explicit interior boundaries or a label count for
/// normal-quantile bins, e.g. `{"boundaries": [-2.1, -0.64, 0.64, 2.1]}` or
/// `{"labels": 4}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantizerConfig {
    #[serde(default)]
    pub boundaries: Option<Vec<f64>>,
    #[serde(default)]
    pub labels: Option<usize>,
}

impl QuantizerConfig {
    pub fn build(&self) -> Result<QuantizerSpec> {
        match (&self.boundaries, self.labels) {
            (Some(b), None) => QuantizerSpec::from_interior(b),
            (None, Some(p)) => make_even_bins(p),
            _ => Err(invalid("quantizer config needs exactly one of 'boundaries' or 'labels'")),
        }
    }
}

pub fn load_quantizer_json(path: impl AsRef<Path>) -> Result<QuantizerSpec> {
    let path = path.as_ref();
    let cfg: QuantizerConfig = serde_json::from_str(&super::at_path(path, std::fs::read_to_string(path))?)?;
    cfg.build()
}

/// Parses a comma-separated list of interior boundaries.
pub fn parse_bins(text: &str) -> Result<QuantizerSpec> {
    let values = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| invalid(format!("'{}' is not a boundary value", s.trim())))
        })
        .collect::<Result<Vec<_>>>()?;
    QuantizerSpec::from_interior(&values)
}
