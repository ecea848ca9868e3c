use crate::error::{invalid, Error, Result};

/// One observed graded response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Observation {
    pub question: usize,
    pub learner: usize,
    pub label: usize,
}

/// Sparse `Q x N` grid of ordinal labels; only observed cells are stored.
///
/// Observations are kept sorted by `(question, learner)` and indexed by row
/// and by column so the per-question and per-learner subproblems can walk
/// their entries directly.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMatrix {
    num_questions: usize,
    num_learners: usize,
    entries: Vec<Observation>,
    rows: Vec<Vec<(usize, usize)>>,
    cols: Vec<Vec<(usize, usize)>>,
}

impl ResponseMatrix {
    pub fn new(
        num_questions: usize,
        num_learners: usize,
        entries: impl IntoIterator<Item = Observation>,
    ) -> Result<Self> {
        if num_questions == 0 || num_learners == 0 {
            return Err(invalid("response matrix needs Q >= 1 and N >= 1"));
        }
        let mut entries: Vec<Observation> = entries.into_iter().collect();
        for e in &entries {
            if e.question >= num_questions || e.learner >= num_learners {
                return Err(Error::DimensionMismatch(format!(
                    "entry ({}, {}) outside {}x{} grid",
                    e.question, e.learner, num_questions, num_learners
                )));
            }
            if e.label == 0 {
                return Err(invalid(format!(
                    "entry ({}, {}) has label 0; labels start at 1",
                    e.question, e.learner
                )));
            }
        }
        entries.sort_unstable();
        if let Some(w) = entries
            .windows(2)
            .find(|w| (w[0].question, w[0].learner) == (w[1].question, w[1].learner))
        {
            return Err(invalid(format!(
                "duplicate entry ({}, {})",
                w[0].question, w[0].learner
            )));
        }
        let mut rows = vec![Vec::new(); num_questions];
        let mut cols = vec![Vec::new(); num_learners];
        for e in &entries {
            rows[e.question].push((e.learner, e.label));
            cols[e.learner].push((e.question, e.label));
        }
        Ok(ResponseMatrix {
            num_questions,
            num_learners,
            entries,
            rows,
            cols,
        })
    }

    /// Builds from a dense grid where `None` marks an unobserved cell.
    pub fn from_dense(grid: &[Vec<Option<usize>>]) -> Result<Self> {
        let q = grid.len();
        let n = grid.first().map_or(0, Vec::len);
        if grid.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch("ragged response grid".into()));
        }
        let entries = grid.iter().enumerate().flat_map(|(i, row)| {
            row.iter().enumerate().filter_map(move |(j, y)| {
                y.map(|label| Observation {
                    question: i,
                    learner: j,
                    label,
                })
            })
        });
        Self::new(q, n, entries)
    }

    pub fn num_questions(&self) -> usize {
        self.num_questions
    }

    pub fn num_learners(&self) -> usize {
        self.num_learners
    }

    pub fn num_observed(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[Observation] {
        &self.entries
    }

    /// `(learner, label)` pairs observed for question `i`.
    pub fn row(&self, i: usize) -> &[(usize, usize)] {
        &self.rows[i]
    }

    /// `(question, label)` pairs observed for learner `j`.
    pub fn col(&self, j: usize) -> &[(usize, usize)] {
        &self.cols[j]
    }

    pub fn get(&self, i: usize, j: usize) -> Option<usize> {
        let row = self.rows.get(i)?;
        row.binary_search_by_key(&j, |&(c, _)| c)
            .ok()
            .map(|k| row[k].1)
    }

    pub fn max_label(&self) -> usize {
        self.entries.iter().map(|e| e.label).max().unwrap_or(0)
    }

    /// Checks every label lies in `1..=num_labels`.
    pub fn check_labels(&self, num_labels: usize) -> Result<()> {
        match self.entries.iter().find(|e| e.label > num_labels) {
            Some(e) => Err(Error::LabelOutOfRange {
                label: e.label,
                num_labels,
            }),
            None => Ok(()),
        }
    }

    /// Keeps the entries whose flag in `keep` (aligned with [`entries`]) is set.
    ///
    /// [`entries`]: ResponseMatrix::entries
    pub fn subset(&self, keep: &[bool]) -> Result<Self> {
        if keep.len() != self.entries.len() {
            return Err(Error::DimensionMismatch(format!(
                "mask has {} flags for {} entries",
                keep.len(),
                self.entries.len()
            )));
        }
        let kept = self
            .entries
            .iter()
            .zip(keep)
            .filter(|(_, &k)| k)
            .map(|(e, _)| *e);
        Self::new(self.num_questions, self.num_learners, kept)
    }

    /// Question rows without a single observation.
    pub fn empty_rows(&self) -> Vec<usize> {
        (0..self.num_questions)
            .filter(|&i| self.rows[i].is_empty())
            .collect()
    }

    /// Learner columns without a single observation.
    pub fn empty_cols(&self) -> Vec<usize> {
        (0..self.num_learners)
            .filter(|&j| self.cols[j].is_empty())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(question: usize, learner: usize, label: usize) -> Observation {
        Observation {
            question,
            learner,
            label,
        }
    }

    #[test]
    fn builds_row_and_column_views() {
        let y = ResponseMatrix::new(2, 2, [obs(1, 0, 2), obs(0, 0, 1), obs(0, 1, 3)]).unwrap();
        assert_eq!(y.num_observed(), 3);
        assert_eq!(y.row(0), &[(0, 1), (1, 3)]);
        assert_eq!(y.col(0), &[(0, 1), (1, 2)]);
        assert_eq!(y.get(1, 1), None);
        assert_eq!(y.get(0, 1), Some(3));
        assert_eq!(y.max_label(), 3);
        assert!(y.check_labels(2).is_err());
    }

    #[test]
    fn rejects_duplicates_and_bad_indices() {
        assert!(ResponseMatrix::new(2, 2, [obs(0, 0, 1), obs(0, 0, 2)]).is_err());
        assert!(ResponseMatrix::new(2, 2, [obs(2, 0, 1)]).is_err());
        assert!(ResponseMatrix::new(2, 2, [obs(0, 0, 0)]).is_err());
    }

    #[test]
    fn subset_and_empty_lines() {
        let y = ResponseMatrix::from_dense(&[vec![Some(1), None], vec![Some(2), Some(1)]]).unwrap();
        let s = y.subset(&[true, false, true]).unwrap();
        assert_eq!(s.num_observed(), 2);
        assert_eq!(s.empty_rows(), Vec::<usize>::new());
        assert_eq!(y.subset(&[false, true, false]).unwrap().empty_cols(), vec![1]);
    }
}
