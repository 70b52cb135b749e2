//! Quantification of set relations between a task class and a concept.
//!
//! Both inputs are per-sample probabilities over the distribution sample set.
//! A relation `A => B` is scored by sweeping a threshold `t`: the antecedent
//! is considered true when `A >= t` and the consequent when `B >= 1 - t`.
//! Samples with a true antecedent and a false consequent are counter-examples
//! (`f`); an adapted F1 rewards their absence, and the area under the
//! F1-versus-threshold curve summarizes the strength of the relation.
//!
//! The four relations between task `T` and concept `C` all reduce to the
//! same implication test:
//!
//! | relation            | antecedent | consequent |
//! |---------------------|------------|------------|
//! | necessary           | `T`        | `C`        |
//! | sufficient          | `C`        | `T`        |
//! | negative necessary  | `T`        | `1 - C`    |
//! | negative sufficient | `1 - C`    | `T`        |

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of evenly spaced thresholds, endpoints included.
pub const DEFAULT_GRID_SIZE: usize = 101;

/// AUC above this value is reported as evidence for a relation.
pub const EVIDENCE_FOR: f64 = 0.55;
/// AUC below this value is reported as evidence against a relation.
pub const EVIDENCE_AGAINST: f64 = 0.45;

/// Per-sample probabilities, every value in `[0, 1]`, at least one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("probability vector must not be empty"));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::domain(format!(
                "probability at index {i} is {v}, expected a value in [0, 1]"
            )));
        }
        Ok(ProbVector(values))
    }

    /// Elementwise `1 - v`.
    pub fn complement(&self) -> ProbVector {
        ProbVector(self.0.iter().map(|v| 1.0 - v).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for ProbVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        ProbVector::new(values)
    }
}

impl From<ProbVector> for Vec<f64> {
    fn from(p: ProbVector) -> Self {
        p.0
    }
}

/// Sample counts in the regions of the implication scatter plot at one
/// threshold. The four counts partition the sample set exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct QuadrantCounts {
    /// antecedent true, consequent true
    pub tp: usize,
    /// antecedent true, consequent false (counter-examples)
    pub f: usize,
    /// antecedent false, consequent false
    pub tn: usize,
    /// antecedent false, consequent true
    pub unused: usize,
}

impl QuadrantCounts {
    pub fn total(&self) -> usize {
        self.tp + self.f + self.tn + self.unused
    }

    /// `tp / (tp + f)`, vacuously 1 without any true antecedent.
    pub fn precision(&self) -> f64 {
        ratio_or_one(self.tp, self.tp + self.f)
    }

    /// `tn / (tn + f)`, vacuously 1 without any false consequent.
    pub fn recall(&self) -> f64 {
        ratio_or_one(self.tn, self.tn + self.f)
    }
}

fn ratio_or_one(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

fn check_pair(antecedent: &ProbVector, consequent: &ProbVector) -> Result<()> {
    if antecedent.len() != consequent.len() {
        return Err(Error::shape(format!(
            "antecedent has {} samples, consequent has {}",
            antecedent.len(),
            consequent.len()
        )));
    }
    Ok(())
}

fn check_grid(grid_size: usize) -> Result<()> {
    if grid_size < 2 {
        return Err(Error::domain(format!(
            "threshold grid needs at least 2 points, got {grid_size}"
        )));
    }
    Ok(())
}

/// Counts samples per region for the implication `antecedent => consequent`
/// at threshold `t`.
pub fn quadrant_counts(
    antecedent: &ProbVector,
    consequent: &ProbVector,
    t: f64,
) -> Result<QuadrantCounts> {
    check_pair(antecedent, consequent)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::domain(format!("threshold {t} outside [0, 1]")));
    }
    let cut = 1.0 - t;
    let mut q = QuadrantCounts::default();
    for (&a, &b) in antecedent.as_slice().iter().zip(consequent.as_slice()) {
        match (a >= t, b >= cut) {
            (true, true) => q.tp += 1,
            (true, false) => q.f += 1,
            (false, false) => q.tn += 1,
            (false, true) => q.unused += 1,
        }
    }
    Ok(q)
}

/// Harmonic mean of the counter-example-aware precision and recall; 0 when
/// both are 0.
pub fn adapted_f1(q: &QuadrantCounts) -> f64 {
    let p = q.precision();
    let r = q.recall();
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// `grid_size` evenly spaced thresholds from 0 to 1 inclusive.
pub fn threshold_grid(grid_size: usize) -> Vec<f64> {
    let last = (grid_size.max(2) - 1) as f64;
    (0..grid_size)
        .map(|i| if i + 1 == grid_size { 1.0 } else { i as f64 / last })
        .collect()
}

/// Trapezoidal integral of `ys` over `xs`.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| (x[1] - x[0]) * (y[0] + y[1]) * 0.5)
        .sum()
}

/// An F1-versus-threshold curve and its area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantCurve {
    pub thresholds: Vec<f64>,
    pub counts: Vec<QuadrantCounts>,
    pub f1: Vec<f64>,
    pub auc: f64,
}

impl QuantCurve {
    fn from_counts(thresholds: Vec<f64>, counts: Vec<QuadrantCounts>) -> Self {
        let f1: Vec<f64> = counts.iter().map(adapted_f1).collect();
        let auc = trapezoid(&thresholds, &f1).clamp(0.0, 1.0);
        QuantCurve {
            thresholds,
            counts,
            f1,
            auc,
        }
    }

    pub fn evidence(&self) -> Evidence {
        Evidence::from_auc(self.auc)
    }
}

/// Number of thresholds `t_k` with `t_k <= v` (so `v >= t_k` iff `k < result`).
fn rank_at_or_below(ascending: &[f64], v: f64) -> usize {
    ascending.partition_point(|&t| t <= v)
}

/// Curve of adapted F1 over `grid_size` thresholds for `antecedent => consequent`.
///
/// Each sample is mapped to the range of threshold indices for which its
/// antecedent and consequent hold, and the per-threshold counts are then
/// recovered from difference arrays, so the cost is `O(n log g + g)`.
pub fn implication_curve(
    antecedent: &ProbVector,
    consequent: &ProbVector,
    grid_size: usize,
) -> Result<QuantCurve> {
    check_pair(antecedent, consequent)?;
    check_grid(grid_size)?;
    let thresholds = threshold_grid(grid_size);
    let g = grid_size;
    // consequent cut 1 - t_k, non-increasing in k
    let cuts: Vec<f64> = thresholds.iter().map(|t| 1.0 - t).collect();

    // antecedent holds for k < ka; consequent holds for k >= kb
    let mut tp_diff = vec![0i64; g + 1];
    let mut tn_diff = vec![0i64; g + 1];
    let mut f_hist = vec![0usize; g + 1];
    for (&a, &b) in antecedent.as_slice().iter().zip(consequent.as_slice()) {
        let ka = rank_at_or_below(&thresholds, a);
        let kb = cuts.partition_point(|&c| c > b);
        if kb < ka {
            tp_diff[kb] += 1;
            tp_diff[ka] -= 1;
        }
        if ka < kb {
            tn_diff[ka] += 1;
            tn_diff[kb] -= 1;
        }
        // counter-example while k < min(ka, kb)
        f_hist[ka.min(kb)] += 1;
    }

    let n = antecedent.len();
    let mut counts = Vec::with_capacity(g);
    let (mut tp, mut tn) = (0i64, 0i64);
    let mut f_remaining = n - f_hist[0];
    for k in 0..g {
        tp += tp_diff[k];
        tn += tn_diff[k];
        let q = QuadrantCounts {
            tp: tp as usize,
            f: f_remaining,
            tn: tn as usize,
            unused: n - tp as usize - tn as usize - f_remaining,
        };
        counts.push(q);
        f_remaining -= f_hist[k + 1];
    }
    Ok(QuantCurve::from_counts(thresholds, counts))
}

/// The four set relations between a task class and a concept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Necessary,
    Sufficient,
    NegativeNecessary,
    NegativeSufficient,
}

impl Relation {
    pub const ALL: [Relation; 4] = [
        Relation::Necessary,
        Relation::Sufficient,
        Relation::NegativeNecessary,
        Relation::NegativeSufficient,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Relation::Necessary => "necessary",
            Relation::Sufficient => "sufficient",
            Relation::NegativeNecessary => "negative_necessary",
            Relation::NegativeSufficient => "negative_sufficient",
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationScores {
    pub necessary: QuantCurve,
    pub sufficient: QuantCurve,
    pub negative_necessary: QuantCurve,
    pub negative_sufficient: QuantCurve,
}

impl RelationScores {
    pub fn curve(&self, relation: Relation) -> &QuantCurve {
        match relation {
            Relation::Necessary => &self.necessary,
            Relation::Sufficient => &self.sufficient,
            Relation::NegativeNecessary => &self.negative_necessary,
            Relation::NegativeSufficient => &self.negative_sufficient,
        }
    }

    pub fn auc(&self, relation: Relation) -> f64 {
        self.curve(relation).auc
    }

    pub fn aucs(&self) -> [f64; 4] {
        Relation::ALL.map(|r| self.auc(r))
    }
}

pub fn relation_scores(
    task: &ProbVector,
    concept: &ProbVector,
    grid_size: usize,
) -> Result<RelationScores> {
    check_pair(task, concept)?;
    let not_concept = concept.complement();
    Ok(RelationScores {
        necessary: implication_curve(task, concept, grid_size)?,
        sufficient: implication_curve(concept, task, grid_size)?,
        negative_necessary: implication_curve(task, &not_concept, grid_size)?,
        negative_sufficient: implication_curve(&not_concept, task, grid_size)?,
    })
}

/// Adapted F1 over independent task and concept thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantSurface {
    pub t_task: Vec<f64>,
    pub t_concept: Vec<f64>,
    /// `f1[i][j]` at `(t_task[i], t_concept[j])`
    pub f1: Vec<Vec<f64>>,
    pub volume: f64,
}

impl QuantSurface {
    /// F1 along `t_concept = 1 - t_task`; only defined for square grids.
    pub fn anti_diagonal(&self) -> Option<Vec<f64>> {
        let g = self.t_task.len();
        (g == self.t_concept.len())
            .then(|| (0..g).map(|i| self.f1[i][g - 1 - i]).collect())
    }
}

/// Necessary-relation surface with separate thresholds for task and concept.
///
/// Concept thresholds are taken as `1 - t` over the reversed standard grid,
/// which keeps the anti-diagonal numerically identical to the thresholds
/// used by [`implication_curve`].
pub fn implication_surface(
    task: &ProbVector,
    concept: &ProbVector,
    grid_task: usize,
    grid_concept: usize,
) -> Result<QuantSurface> {
    check_pair(task, concept)?;
    check_grid(grid_task)?;
    check_grid(grid_concept)?;
    let t_task = threshold_grid(grid_task);
    let t_concept: Vec<f64> = threshold_grid(grid_concept)
        .iter()
        .rev()
        .map(|t| 1.0 - t)
        .collect();

    let (gt, gc) = (grid_task, grid_concept);
    // hist[ka][kc]: task holds for i < ka, concept holds for j < kc
    let stride = gc + 2;
    let mut prefix = vec![0usize; (gt + 2) * stride];
    for (&tv, &cv) in task.as_slice().iter().zip(concept.as_slice()) {
        let ka = rank_at_or_below(&t_task, tv);
        let kc = rank_at_or_below(&t_concept, cv);
        prefix[(ka + 1) * stride + kc + 1] += 1;
    }
    // prefix[a][c] = #{ka < a, kc < c}
    for a in 1..gt + 2 {
        for c in 1..gc + 2 {
            prefix[a * stride + c] += prefix[(a - 1) * stride + c]
                + prefix[a * stride + c - 1]
                - prefix[(a - 1) * stride + c - 1];
        }
    }
    let at = |a: usize, c: usize| prefix[a * stride + c];
    let n = task.len();

    let mut f1 = vec![vec![0.0; gc]; gt];
    for (i, row) in f1.iter_mut().enumerate() {
        let task_true = n - at(i + 1, gc + 1);
        for (j, cell) in row.iter_mut().enumerate() {
            let tn = at(i + 1, j + 1);
            let f = at(gt + 1, j + 1) - tn;
            let tp = task_true - f;
            let q = QuadrantCounts {
                tp,
                f,
                tn,
                unused: n - tp - f - tn,
            };
            *cell = adapted_f1(&q);
        }
    }

    let row_integrals: Vec<f64> = f1.iter().map(|row| trapezoid(&t_concept, row)).collect();
    let volume = trapezoid(&t_task, &row_integrals).clamp(0.0, 1.0);
    Ok(QuantSurface {
        t_task,
        t_concept,
        f1,
        volume,
    })
}

/// Coarse reading of an AUC against the 0.5 independence anchor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evidence {
    For,
    Against,
    NoMeasurableRelationship,
}

impl Evidence {
    pub fn from_auc(auc: f64) -> Self {
        if auc > EVIDENCE_FOR {
            Evidence::For
        } else if auc < EVIDENCE_AGAINST {
            Evidence::Against
        } else {
            Evidence::NoMeasurableRelationship
        }
    }
}

impl fmt::Display for Evidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Evidence::For => "evidence for",
            Evidence::Against => "evidence against",
            Evidence::NoMeasurableRelationship => "no measurable relationship",
        })
    }
}
