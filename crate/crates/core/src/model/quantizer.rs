use crate::error::{invalid, Error, Result};

/// Ordered bin edges `w_0 < w_1 < ... < w_P` mapping reals to labels `1..=P`.
///
/// Bins are left-open and right-closed, so a value sitting exactly on an edge
/// belongs to the lower label.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizerSpec {
    boundaries: Vec<f64>,
}

impl QuantizerSpec {
    pub fn new(boundaries: Vec<f64>) -> Result<Self> {
        if boundaries.len() < 3 {
            return Err(invalid(format!(
                "quantizer needs at least 3 boundaries (P >= 2), got {}",
                boundaries.len()
            )));
        }
        if boundaries.iter().any(|b| b.is_nan()) {
            return Err(invalid("quantizer boundary is NaN"));
        }
        if let Some(w) = boundaries.windows(2).find(|w| w[0] >= w[1]) {
            return Err(invalid(format!(
                "quantizer boundaries not strictly increasing: {} >= {}",
                w[0], w[1]
            )));
        }
        Ok(QuantizerSpec { boundaries })
    }

    /// Builds `{-inf, interior..., +inf}`.
    pub fn from_interior(interior: &[f64]) -> Result<Self> {
        let mut b = Vec::with_capacity(interior.len() + 2);
        b.push(f64::NEG_INFINITY);
        b.extend_from_slice(interior);
        b.push(f64::INFINITY);
        Self::new(b)
    }

    /// Sign quantizer `{-inf, 0, +inf}`.
    pub fn binary() -> Self {
        QuantizerSpec {
            boundaries: vec![f64::NEG_INFINITY, 0.0, f64::INFINITY],
        }
    }

    pub fn num_labels(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn interior(&self) -> &[f64] {
        &self.boundaries[1..self.boundaries.len() - 1]
    }

    /// Label `p` with `w_{p-1} < x <= w_p`.
    pub fn quantize(&self, x: f64) -> Result<usize> {
        let lower = self.boundaries[0];
        let upper = *self.boundaries.last().unwrap();
        if x.is_nan() || x <= lower || x > upper {
            return Err(Error::OutOfDomain {
                value: x,
                lower,
                upper,
            });
        }
        Ok(self.boundaries.partition_point(|&w| w < x))
    }

    /// `(w_{y-1}, w_y)` for label `y`.
    pub fn label_bounds(&self, y: usize) -> Result<BoundsPair> {
        self.check_label(y)?;
        Ok(self.bounds_unchecked(y))
    }

    pub(crate) fn bounds_unchecked(&self, y: usize) -> BoundsPair {
        BoundsPair {
            lower: self.boundaries[y - 1],
            upper: self.boundaries[y],
        }
    }

    pub fn check_label(&self, y: usize) -> Result<()> {
        if y == 0 || y > self.num_labels() {
            return Err(Error::LabelOutOfRange {
                label: y,
                num_labels: self.num_labels(),
            });
        }
        Ok(())
    }

    pub(crate) fn set_boundary(&mut self, p: usize, value: f64) {
        debug_assert!(p > 0 && p < self.boundaries.len() - 1);
        debug_assert!(self.boundaries[p - 1] < value && value < self.boundaries[p + 1]);
        self.boundaries[p] = value;
    }
}

/// Lower and upper bin edge of an observed label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsPair {
    pub lower: f64,
    pub upper: f64,
}

/// Bin edges used by a fitted model: one set shared by every question, or one
/// set per question row.
#[derive(Debug, Clone, PartialEq)]
pub enum Thresholds {
    Shared(QuantizerSpec),
    PerQuestion(Vec<QuantizerSpec>),
}

impl Thresholds {
    #[inline]
    pub fn for_question(&self, i: usize) -> &QuantizerSpec {
        match self {
            Thresholds::Shared(q) => q,
            Thresholds::PerQuestion(v) => &v[i],
        }
    }

    pub fn num_labels(&self) -> usize {
        match self {
            Thresholds::Shared(q) => q.num_labels(),
            Thresholds::PerQuestion(v) => v.first().map_or(0, QuantizerSpec::num_labels),
        }
    }
}
