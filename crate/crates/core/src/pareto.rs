//! Non-dominated subsets of minimized objective vectors.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ParetoError {
    #[error("objective vector {index} has {got} values, expected {expected}")]
    Arity {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("objective vectors must be non-empty and finite (entry {0})")]
    Invalid(usize),
}

/// Objective values, all minimized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveVector {
    pub values: Vec<f64>,
}

impl ObjectiveVector {
    pub fn new(values: Vec<f64>) -> Self {
        ObjectiveVector { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// ≤ in every objective and < in at least one.
    pub fn dominates(&self, other: &ObjectiveVector) -> bool {
        let mut strict = false;
        for (a, b) in self.values.iter().zip(&other.values) {
            if a > b {
                return false;
            }
            strict |= a < b;
        }
        strict
    }

    fn lex_cmp(&self, other: &ObjectiveVector) -> Ordering {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    }
}

/// Frontier entries sorted lexicographically by objective values, with the
/// number of input entries that were dominated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParetoSet<K> {
    pub entries: Vec<(K, ObjectiveVector)>,
    pub dominated_count: usize,
}

impl<K> ParetoSet<K> {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }
}

/// Maximal non-dominated subset; exact duplicates of a frontier vector are
/// all kept. Quadratic pairwise scan.
pub fn pareto_front<K: Clone>(cells: &[(K, ObjectiveVector)]) -> Result<ParetoSet<K>, ParetoError> {
    if let Some((_, first)) = cells.first() {
        let k = first.len();
        for (i, (_, v)) in cells.iter().enumerate() {
            if v.len() != k {
                return Err(ParetoError::Arity {
                    index: i,
                    got: v.len(),
                    expected: k,
                });
            }
            if v.is_empty() || v.values.iter().any(|x| !x.is_finite()) {
                return Err(ParetoError::Invalid(i));
            }
        }
    }
    let mut entries: Vec<(K, ObjectiveVector)> = cells
        .iter()
        .filter(|(_, v)| !cells.iter().any(|(_, u)| u.dominates(v)))
        .cloned()
        .collect();
    entries.sort_by(|a, b| a.1.lex_cmp(&b.1));
    Ok(ParetoSet {
        dominated_count: cells.len() - entries.len(),
        entries,
    })
}
