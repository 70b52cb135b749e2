use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantify::ProbVector;

/// Tolerance on task-probability row sums.
pub const TASK_SUM_TOLERANCE: f64 = 1e-4;

/// Task-class and concept probabilities for every sample of a distribution
/// sample set, one row per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionMatrix {
    pub sample_ids: Vec<String>,
    pub class_names: Vec<String>,
    pub concept_names: Vec<String>,
    pub task: Array2<f64>,
    pub concepts: Array2<f64>,
}

impl PredictionMatrix {
    /// Validates shapes, name uniqueness, value ranges and task row sums.
    pub fn new(
        sample_ids: Vec<String>,
        class_names: Vec<String>,
        concept_names: Vec<String>,
        task: Array2<f64>,
        concepts: Array2<f64>,
    ) -> Result<Self> {
        let n = sample_ids.len();
        if task.nrows() != n || concepts.nrows() != n {
            return Err(Error::shape(format!(
                "{n} sample ids, {} task rows, {} concept rows",
                task.nrows(),
                concepts.nrows()
            )));
        }
        if task.ncols() != class_names.len() || concepts.ncols() != concept_names.len() {
            return Err(Error::shape("column count does not match names"));
        }
        let mut seen = std::collections::HashSet::new();
        for name in class_names.iter().map(|c| ("task", c)).chain(concept_names.iter().map(|c| ("concept", c))) {
            if !seen.insert(name) {
                return Err(Error::Table {
                    row: 0,
                    message: format!("duplicated column {}:{}", name.0, name.1),
                });
            }
        }
        for (row, (t, c)) in task.outer_iter().zip(concepts.outer_iter()).enumerate() {
            if let Some(v) = t.iter().chain(c.iter()).find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::Table {
                    row: row + 1,
                    message: format!("probability {v} outside [0, 1]"),
                });
            }
            if !class_names.is_empty() {
                let sum: f64 = t.sum();
                if (sum - 1.0).abs() > TASK_SUM_TOLERANCE {
                    return Err(Error::Table {
                        row: row + 1,
                        message: format!("task probabilities sum to {sum}"),
                    });
                }
            }
        }
        Ok(PredictionMatrix {
            sample_ids,
            class_names,
            concept_names,
            task,
            concepts,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn n_columns(&self) -> usize {
        self.class_names.len() + self.concept_names.len()
    }

    pub fn class_index(&self, name: &str) -> Result<usize> {
        self.class_names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownReference(format!("task:{name}")))
    }

    pub fn concept_index(&self, name: &str) -> Result<usize> {
        self.concept_names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownReference(format!("concept:{name}")))
    }

    pub fn task_column(&self, class: usize) -> Result<ProbVector> {
        if class >= self.task.ncols() {
            return Err(Error::IndexOutOfRange {
                index: class,
                valid: format!("0..{}", self.task.ncols()),
            });
        }
        ProbVector::new(self.task.column(class).to_vec())
    }

    pub fn concept_column(&self, concept: usize) -> Result<ProbVector> {
        if concept >= self.concepts.ncols() {
            return Err(Error::IndexOutOfRange {
                index: concept,
                valid: format!("0..{}", self.concepts.ncols()),
            });
        }
        ProbVector::new(self.concepts.column(concept).to_vec())
    }

    /// Argmax of the task probabilities per row, lowest index on ties.
    pub fn predicted_labels(&self) -> Vec<usize> {
        self.task.axis_iter(Axis(0)).map(|row| argmax(row.iter().copied())).collect()
    }
}

pub(crate) fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

pub(crate) fn default_sample_ids(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn validates_rows() {
        let ids = default_sample_ids(2);
        let ok = PredictionMatrix::new(
            ids.clone(),
            vec!["a".into(), "b".into()],
            vec!["c".into()],
            array![[0.3, 0.7], [1.0, 0.0]],
            array![[0.2], [0.9]],
        )
        .unwrap();
        assert_eq!(ok.predicted_labels(), vec![1, 0]);
        assert_eq!(ok.n_columns(), 3);

        let bad_sum = PredictionMatrix::new(
            ids.clone(),
            vec!["a".into(), "b".into()],
            vec![],
            array![[0.3, 0.5], [1.0, 0.0]],
            Array2::zeros((2, 0)),
        );
        assert!(matches!(bad_sum, Err(Error::Table { row: 1, .. })));

        let dup = PredictionMatrix::new(
            ids,
            vec!["a".into(), "a".into()],
            vec![],
            array![[0.3, 0.7], [1.0, 0.0]],
            Array2::zeros((2, 0)),
        );
        assert!(matches!(dup, Err(Error::Table { .. })));
    }
}
