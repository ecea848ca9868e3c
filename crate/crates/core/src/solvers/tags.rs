use std::collections::BTreeSet;

use crate::error::{invalid, Error, Result};

/// Instructor-asserted `(question, concept)` associations, one concept per tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagSupport {
    num_questions: usize,
    num_concepts: usize,
    pairs: BTreeSet<(usize, usize)>,
}

impl TagSupport {
    pub fn new(
        num_questions: usize,
        num_concepts: usize,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        if num_concepts == 0 {
            return Err(invalid("tag support needs at least one concept"));
        }
        let mut set = BTreeSet::new();
        for (i, k) in pairs {
            if i >= num_questions || k >= num_concepts {
                return Err(Error::DimensionMismatch(format!(
                    "tag pair ({i}, {k}) outside {num_questions} questions x {num_concepts} concepts"
                )));
            }
            if !set.insert((i, k)) {
                return Err(invalid(format!("duplicate tag pair ({i}, {k})")));
            }
        }
        let support = TagSupport {
            num_questions,
            num_concepts,
            pairs: set,
        };
        let unused = support.unused_concepts();
        if !unused.is_empty() {
            log::warn!("concepts {unused:?} carry no tagged question");
        }
        Ok(support)
    }

    /// Support equal to the nonzero pattern of a `Q x K` matrix.
    pub fn from_support(w: &nalgebra::DMatrix<f64>) -> Result<Self> {
        let pairs = (0..w.nrows())
            .flat_map(|i| (0..w.ncols()).map(move |k| (i, k)))
            .filter(|&(i, k)| w[(i, k)] != 0.0);
        Self::new(w.nrows(), w.ncols(), pairs)
    }

    pub fn num_questions(&self) -> usize {
        self.num_questions
    }

    pub fn num_concepts(&self) -> usize {
        self.num_concepts
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, question: usize, concept: usize) -> bool {
        self.pairs.contains(&(question, concept))
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().copied()
    }

    pub fn unused_concepts(&self) -> Vec<usize> {
        let used: BTreeSet<usize> = self.pairs.iter().map(|&(_, k)| k).collect();
        (0..self.num_concepts).filter(|k| !used.contains(k)).collect()
    }

    /// Row-major `Q x K` membership flags.
    pub(crate) fn masks(&self) -> Vec<Vec<bool>> {
        let mut m = vec![vec![false; self.num_concepts]; self.num_questions];
        for &(i, k) in &self.pairs {
            m[i][k] = true;
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_pairs() {
        assert!(TagSupport::new(2, 2, [(0, 0), (0, 0)]).is_err());
        assert!(TagSupport::new(2, 2, [(2, 0)]).is_err());
        let t = TagSupport::new(3, 2, [(0, 1), (2, 1)]).unwrap();
        assert_eq!(t.unused_concepts(), vec![0]);
        assert!(t.contains(2, 1));
        assert_eq!(t.masks()[0], vec![false, true]);
    }
}
