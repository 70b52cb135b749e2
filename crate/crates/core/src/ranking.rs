//! Concept rankings per class and concept-sorted sample listings.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predictions::PredictionMatrix;
use crate::quantify::{relation_scores, ProbVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedConcept {
    pub concept: String,
    /// AUCs in relation order: necessary, sufficient, negative necessary,
    /// negative sufficient.
    pub aucs: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRanking {
    pub class: String,
    pub concepts: Vec<RankedConcept>,
}

/// Scores every (class, concept) pair of `pred`.
pub fn score_all(pred: &PredictionMatrix, grid_size: usize) -> Result<Vec<Vec<[f64; 4]>>> {
    (0..pred.class_names.len())
        .map(|k| {
            let task = pred.task_column(k)?;
            (0..pred.concept_names.len())
                .map(|j| Ok(relation_scores(&task, &pred.concept_column(j)?, grid_size)?.aucs()))
                .collect()
        })
        .collect()
}

/// Orders concepts by necessary AUC, highest first (ties by name), and keeps
/// at most `top_k` per class. `scores[class][concept]` as from [`score_all`].
pub fn rank_concepts(
    class_names: &[String],
    concept_names: &[String],
    scores: &[Vec<[f64; 4]>],
    top_k: usize,
) -> Result<Vec<ClassRanking>> {
    if scores.len() != class_names.len() || scores.iter().any(|row| row.len() != concept_names.len()) {
        return Err(Error::shape("score table does not match class and concept names"));
    }
    Ok(class_names
        .iter()
        .zip(scores)
        .map(|(class, row)| {
            let mut concepts: Vec<RankedConcept> = concept_names
                .iter()
                .zip(row)
                .map(|(c, aucs)| RankedConcept {
                    concept: c.clone(),
                    aucs: *aucs,
                })
                .collect();
            concepts.sort_by(|a, b| b.aucs[0].total_cmp(&a.aucs[0]).then_with(|| a.concept.cmp(&b.concept)));
            concepts.truncate(top_k);
            ClassRanking {
                class: class.clone(),
                concepts,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SortedSample {
    pub sample_id: String,
    pub output: f64,
}

/// The `k` lowest and `k` highest scoring samples, each list in increasing
/// order of concept output; ties keep sample-id order. With `2k >= n` the
/// two lists overlap.
pub fn extreme_samples(sample_ids: &[String], outputs: &ProbVector, k: usize) -> Result<(Vec<SortedSample>, Vec<SortedSample>)> {
    if sample_ids.len() != outputs.len() {
        return Err(Error::shape(format!(
            "{} sample ids for {} outputs",
            sample_ids.len(),
            outputs.len()
        )));
    }
    let mut order: Vec<usize> = (0..sample_ids.len()).collect();
    let v = outputs.as_slice();
    order.sort_by(|&a, &b| match v[a].total_cmp(&v[b]) {
        Ordering::Equal => sample_ids[a].cmp(&sample_ids[b]),
        o => o,
    });
    let pick = |idx: &[usize]| -> Vec<SortedSample> {
        idx.iter()
            .map(|&i| SortedSample {
                sample_id: sample_ids[i].clone(),
                output: v[i],
            })
            .collect()
    };
    let k = k.min(order.len());
    Ok((pick(&order[..k]), pick(&order[order.len() - k..])))
}
