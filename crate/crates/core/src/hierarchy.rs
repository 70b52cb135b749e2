//! Decision trees over detected concepts that approximate a network's
//! predicted classes, and the compound concepts read off their leaves.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predictions::PredictionMatrix;
use crate::quantify::ProbVector;

pub const DEFAULT_MIN_PER_CLASS: usize = 2;
pub const DEFAULT_CONCEPT_THRESHOLD: f64 = 0.5;

/// How a concept's probability is discretized: one threshold gives a
/// present/absent flag, an ascending cut list gives severity levels
/// `0..=cuts.len()`. A value at or above a cut counts as above it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cut {
    Binary(f64),
    Ordinal(Vec<f64>),
}

impl Cut {
    fn values(&self) -> Vec<f64> {
        match self {
            Cut::Binary(t) => vec![*t],
            Cut::Ordinal(cuts) => cuts.clone(),
        }
    }

    fn style(&self) -> SplitStyle {
        match self {
            Cut::Binary(_) => SplitStyle::Presence,
            Cut::Ordinal(_) => SplitStyle::Ordinal,
        }
    }
}

/// Per-concept cuts with an optional fallback for unlisted concepts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Thresholds {
    pub per_concept: BTreeMap<String, Cut>,
    pub default: Option<Cut>,
}

impl Thresholds {
    pub fn uniform(t: f64) -> Self {
        Thresholds {
            per_concept: BTreeMap::new(),
            default: Some(Cut::Binary(t)),
        }
    }

    pub fn with(mut self, concept: impl Into<String>, cut: Cut) -> Self {
        self.per_concept.insert(concept.into(), cut);
        self
    }

    fn lookup(&self, concept: &str) -> Result<&Cut> {
        self.per_concept
            .get(concept)
            .or(self.default.as_ref())
            .ok_or_else(|| Error::UnknownReference(format!("threshold for concept `{concept}`")))
    }
}

impl Default for Cut {
    fn default() -> Self {
        Cut::Binary(DEFAULT_CONCEPT_THRESHOLD)
    }
}

/// Rendering of a split: `not(x)` / `x`, or `x <= v` / `x >  v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitStyle {
    Presence,
    Ordinal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptColumn {
    pub name: String,
    pub style: SplitStyle,
    /// Probability cut between level `k` and `k + 1`.
    pub cuts: Vec<f64>,
}

impl ConceptColumn {
    pub fn flag(name: impl Into<String>) -> Self {
        ConceptColumn {
            name: name.into(),
            style: SplitStyle::Presence,
            cuts: vec![DEFAULT_CONCEPT_THRESHOLD],
        }
    }

    pub fn n_levels(&self) -> u32 {
        self.cuts.len() as u32 + 1
    }
}

/// Discretized concept levels, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ConceptMatrix {
    pub concepts: Vec<ConceptColumn>,
    pub rows: Vec<Vec<u32>>,
}

impl ConceptMatrix {
    pub fn new(concepts: Vec<ConceptColumn>, rows: Vec<Vec<u32>>) -> Result<Self> {
        for (r, row) in rows.iter().enumerate() {
            if row.len() != concepts.len() {
                return Err(Error::shape(format!(
                    "row {r} has {} levels, expected {}",
                    row.len(),
                    concepts.len()
                )));
            }
            if let Some((j, &v)) = row.iter().enumerate().find(|(j, &v)| v >= concepts[*j].n_levels()) {
                return Err(Error::domain(format!(
                    "row {r}: level {v} out of range for concept `{}`",
                    concepts[j].name
                )));
            }
        }
        Ok(ConceptMatrix { concepts, rows })
    }

    /// Binary flags named by `names`.
    pub fn from_flags(names: &[String], flags: &[Vec<bool>]) -> Result<Self> {
        let concepts = names.iter().map(ConceptColumn::flag).collect();
        let rows = flags.iter().map(|r| r.iter().map(|&b| u32::from(b)).collect()).collect();
        ConceptMatrix::new(concepts, rows)
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn names(&self) -> Vec<String> {
        self.concepts.iter().map(|c| c.name.clone()).collect()
    }

    fn column_of(&self, name: &str) -> Option<usize> {
        self.concepts.iter().position(|c| c.name == name)
    }
}

/// Number of cuts at or below `v`.
fn level_of(v: f64, cuts: &[f64]) -> u32 {
    cuts.iter().filter(|&&c| v >= c).count() as u32
}

/// Hard-decides every concept column of `pred`.
pub fn binarize_concepts(pred: &PredictionMatrix, thresholds: &Thresholds) -> Result<ConceptMatrix> {
    let mut concepts = Vec::with_capacity(pred.concept_names.len());
    for name in &pred.concept_names {
        let cut = thresholds.lookup(name)?;
        let mut values = cut.values();
        if values.is_empty() {
            return Err(Error::domain(format!("empty cut list for `{name}`")));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain(format!("cuts for `{name}` must be strictly ascending")));
        }
        values.shrink_to_fit();
        concepts.push(ConceptColumn {
            name: name.clone(),
            style: cut.style(),
            cuts: values,
        });
    }
    let rows = pred
        .concepts
        .outer_iter()
        .map(|row| row.iter().zip(&concepts).map(|(&v, c)| level_of(v, &c.cuts)).collect())
        .collect();
    ConceptMatrix::new(concepts, rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    #[default]
    Gini,
    Entropy,
}

impl Criterion {
    fn impurity(self, counts: &[usize], total: usize) -> f64 {
        if total == 0 {
            return 0.0;
        }
        let n = total as f64;
        match self {
            Criterion::Gini => 1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>(),
            Criterion::Entropy => -counts
                .iter()
                .filter(|&&c| c > 0)
                .map(|&c| {
                    let p = c as f64 / n;
                    p * p.log2()
                })
                .sum::<f64>(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub min_per_class: usize,
    pub criterion: Criterion,
    pub max_depth: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            min_per_class: DEFAULT_MIN_PER_CLASS,
            criterion: Criterion::Gini,
            max_depth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TreeNode {
    Leaf {
        label: usize,
        counts: Vec<usize>,
    },
    /// Samples with level `>= cut` go right, the rest left.
    Split {
        concept: usize,
        cut: u32,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    fn predict(&self, levels: &[u32]) -> usize {
        match self {
            TreeNode::Leaf { label, .. } => *label,
            TreeNode::Split {
                concept,
                cut,
                left,
                right,
            } => {
                if levels[*concept] >= *cut {
                    right.predict(levels)
                } else {
                    left.predict(levels)
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    fn total_count(&self) -> usize {
        match self {
            TreeNode::Leaf { counts, .. } => counts.iter().sum(),
            TreeNode::Split { left, right, .. } => left.total_count() + right.total_count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptTree {
    pub concepts: Vec<ConceptColumn>,
    pub class_names: Vec<String>,
    /// Set for one-vs-rest trees: the class explained by label 1.
    pub target_class: Option<usize>,
    /// Optional caption, e.g. the explained class's name.
    pub title: Option<String>,
    pub root: TreeNode,
}

impl ConceptTree {
    pub fn n_leaves(&self) -> usize {
        self.root.n_leaves()
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    /// Number of samples the tree was fitted on.
    pub fn sample_count(&self) -> usize {
        self.root.total_count()
    }

    /// Label per row; concepts are matched by name.
    pub fn predict(&self, concepts: &ConceptMatrix) -> Result<Vec<usize>> {
        let mapping: Vec<usize> = self
            .concepts
            .iter()
            .map(|c| {
                concepts
                    .column_of(&c.name)
                    .ok_or_else(|| Error::UnknownReference(c.name.clone()))
            })
            .collect::<Result<_>>()?;
        Ok(concepts
            .rows
            .iter()
            .map(|row| {
                let levels: Vec<u32> = mapping.iter().map(|&j| row[j]).collect();
                self.root.predict(&levels)
            })
            .collect())
    }

    /// Compares structure, names and labels; ignores sample counts.
    pub fn same_structure(&self, other: &ConceptTree) -> bool {
        fn walk(a: &TreeNode, ta: &ConceptTree, b: &TreeNode, tb: &ConceptTree) -> bool {
            match (a, b) {
                (TreeNode::Leaf { label: la, .. }, TreeNode::Leaf { label: lb, .. }) => {
                    ta.class_names[*la] == tb.class_names[*lb]
                }
                (
                    TreeNode::Split {
                        concept: ca,
                        cut: xa,
                        left: l1,
                        right: r1,
                    },
                    TreeNode::Split {
                        concept: cb,
                        cut: xb,
                        left: l2,
                        right: r2,
                    },
                ) => {
                    let (ka, kb) = (&ta.concepts[*ca], &tb.concepts[*cb]);
                    ka.name == kb.name
                        && ka.style == kb.style
                        && xa == xb
                        && walk(l1, ta, l2, tb)
                        && walk(r1, ta, r2, tb)
                }
                _ => false,
            }
        }
        self.title == other.title && walk(&self.root, self, &other.root, other)
    }
}

fn check_fit_inputs(concepts: &ConceptMatrix, labels: &[usize], n_classes: usize) -> Result<()> {
    if concepts.n_rows() == 0 {
        return Err(Error::DegenerateDataset("no samples to fit a tree on".into()));
    }
    if labels.len() != concepts.n_rows() {
        return Err(Error::shape(format!(
            "{} labels for {} concept rows",
            labels.len(),
            concepts.n_rows()
        )));
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::IndexOutOfRange {
            index: l,
            valid: format!("0..{n_classes}"),
        });
    }
    Ok(())
}

struct Inducer<'a> {
    concepts: &'a ConceptMatrix,
    labels: &'a [usize],
    n_classes: usize,
    params: TreeParams,
}

impl Inducer<'_> {
    fn counts(&self, rows: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &r in rows {
            c[self.labels[r]] += 1;
        }
        c
    }

    fn leaf(counts: Vec<usize>) -> TreeNode {
        let label = crate::predictions::argmax(counts.iter().map(|&c| c as f64));
        TreeNode::Leaf { label, counts }
    }

    fn grow(&self, rows: Vec<usize>, depth: usize, used: &mut Vec<(usize, u32)>) -> TreeNode {
        let counts = self.counts(&rows);
        let present: Vec<usize> = counts.iter().copied().filter(|&c| c > 0).collect();
        if present.len() <= 1
            || present.iter().any(|&c| c < self.params.min_per_class)
            || self.params.max_depth.is_some_and(|d| depth >= d)
        {
            return Self::leaf(counts);
        }
        let parent = self.params.criterion.impurity(&counts, rows.len());
        let mut best: Option<(f64, usize, u32)> = None;
        for (j, col) in self.concepts.concepts.iter().enumerate() {
            for cut in 1..col.n_levels() {
                if used.contains(&(j, cut)) {
                    continue;
                }
                let mut right = vec![0; self.n_classes];
                let mut n_right = 0;
                for &r in &rows {
                    if self.concepts.rows[r][j] >= cut {
                        right[self.labels[r]] += 1;
                        n_right += 1;
                    }
                }
                let n_left = rows.len() - n_right;
                if n_left == 0 || n_right == 0 {
                    continue;
                }
                let left: Vec<usize> = counts.iter().zip(&right).map(|(a, b)| a - b).collect();
                let weighted = (n_left as f64 * self.params.criterion.impurity(&left, n_left)
                    + n_right as f64 * self.params.criterion.impurity(&right, n_right))
                    / rows.len() as f64;
                let gain = parent - weighted;
                if best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, j, cut));
                }
            }
        }
        match best {
            Some((gain, j, cut)) if gain > -1e-12 => {
                let (right, left): (Vec<usize>, Vec<usize>) =
                    rows.iter().partition(|&&r| self.concepts.rows[r][j] >= cut);
                used.push((j, cut));
                let l = self.grow(left, depth + 1, used);
                let r = self.grow(right, depth + 1, used);
                used.pop();
                TreeNode::Split {
                    concept: j,
                    cut,
                    left: Box::new(l),
                    right: Box::new(r),
                }
            }
            _ => Self::leaf(counts),
        }
    }
}

/// Greedy top-down induction of a multi-class tree predicting `labels`
/// (the network's predicted classes) from concept levels.
///
/// A node becomes a leaf when it is pure, when any class present in it has
/// fewer than `min_per_class` samples, at the depth limit, or when no split
/// separates its samples. Among splits of equal quality the lowest concept
/// index (then the lowest cut) wins.
pub fn fit_tree(
    concepts: &ConceptMatrix,
    labels: &[usize],
    class_names: &[String],
    params: &TreeParams,
) -> Result<ConceptTree> {
    check_fit_inputs(concepts, labels, class_names.len())?;
    let inducer = Inducer {
        concepts,
        labels,
        n_classes: class_names.len(),
        params: *params,
    };
    let root = inducer.grow((0..labels.len()).collect(), 0, &mut Vec::new());
    Ok(ConceptTree {
        concepts: concepts.concepts.clone(),
        class_names: class_names.to_vec(),
        target_class: None,
        title: None,
        root,
    })
}

/// One-vs-rest tree for `target_class` over all samples; leaf labels are
/// `False` / `True`.
pub fn fit_class_tree(
    concepts: &ConceptMatrix,
    labels: &[usize],
    class_names: &[String],
    target_class: usize,
    params: &TreeParams,
) -> Result<ConceptTree> {
    check_fit_inputs(concepts, labels, class_names.len())?;
    if !labels.contains(&target_class) {
        return Err(Error::DegenerateDataset(format!(
            "class `{}` is never predicted",
            class_names.get(target_class).map_or("?", String::as_str)
        )));
    }
    let binary: Vec<usize> = labels.iter().map(|&l| usize::from(l == target_class)).collect();
    let names = vec!["False".to_string(), "True".to_string()];
    let mut tree = fit_tree(concepts, &binary, &names, params)?;
    tree.target_class = Some(target_class);
    tree.title = Some(class_names[target_class].clone());
    Ok(tree)
}

fn merge_node(node: TreeNode) -> TreeNode {
    match node {
        TreeNode::Split {
            concept,
            cut,
            left,
            right,
        } => {
            let l = merge_node(*left);
            let r = merge_node(*right);
            match (&l, &r) {
                (TreeNode::Leaf { label: a, counts: ca }, TreeNode::Leaf { label: b, counts: cb }) if a == b => {
                    TreeNode::Leaf {
                        label: *a,
                        counts: ca.iter().zip(cb).map(|(x, y)| x + y).collect(),
                    }
                }
                _ => TreeNode::Split {
                    concept,
                    cut,
                    left: Box::new(l),
                    right: Box::new(r),
                },
            }
        }
        leaf => leaf,
    }
}

/// Collapses sibling leaves with identical labels, bottom-up to a fixpoint.
pub fn merge_leaves(tree: &ConceptTree) -> ConceptTree {
    ConceptTree {
        root: merge_node(tree.root.clone()),
        ..tree.clone()
    }
}

/// Fraction of rows where the tree agrees with the network's predicted
/// class. One-vs-rest trees compare against `label == target_class`.
pub fn faithfulness(tree: &ConceptTree, concepts: &ConceptMatrix, predicted_labels: &[usize]) -> Result<f64> {
    if predicted_labels.len() != concepts.n_rows() {
        return Err(Error::shape(format!(
            "{} labels for {} concept rows",
            predicted_labels.len(),
            concepts.n_rows()
        )));
    }
    if predicted_labels.is_empty() {
        return Err(Error::DegenerateDataset("no rows to evaluate".into()));
    }
    let predicted = tree.predict(concepts)?;
    let agree = predicted
        .iter()
        .zip(predicted_labels)
        .filter(|(p, &l)| match tree.target_class {
            Some(t) => **p == usize::from(l == t),
            None => **p == l,
        })
        .count();
    Ok(agree as f64 / predicted_labels.len() as f64)
}

/// One condition on a concept along a root-to-leaf path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Literal {
    Present { concept: String, threshold: f64 },
    Absent { concept: String, threshold: f64 },
    /// Level at least `level`, i.e. probability at or above `threshold`.
    AtLeast { concept: String, level: u32, threshold: f64 },
    /// Level below `level`, i.e. probability under `threshold`.
    Below { concept: String, level: u32, threshold: f64 },
}

impl Literal {
    pub fn concept(&self) -> &str {
        match self {
            Literal::Present { concept, .. }
            | Literal::Absent { concept, .. }
            | Literal::AtLeast { concept, .. }
            | Literal::Below { concept, .. } => concept,
        }
    }

    fn bounds(&self) -> (f64, f64) {
        match self {
            Literal::Present { threshold, .. } | Literal::AtLeast { threshold, .. } => (*threshold, f64::INFINITY),
            Literal::Absent { threshold, .. } | Literal::Below { threshold, .. } => (f64::NEG_INFINITY, *threshold),
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Present { concept, .. } => write!(f, "{concept}"),
            Literal::Absent { concept, .. } => write!(f, "not({concept})"),
            Literal::AtLeast { concept, level, .. } => write!(f, "{concept} > {:.2}", *level as f64 - 0.5),
            Literal::Below { concept, level, .. } => write!(f, "{concept} <= {:.2}", *level as f64 - 0.5),
        }
    }
}

/// Conjunction of literals, e.g. the path to one tree leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompoundConcept {
    pub literals: Vec<Literal>,
    /// Class predicted at the source leaf.
    pub label: String,
    /// Left-to-right index of the source leaf.
    pub source_leaf: usize,
}

impl CompoundConcept {
    pub fn new(literals: Vec<Literal>, label: impl Into<String>, source_leaf: usize) -> Result<Self> {
        if literals.is_empty() {
            return Err(Error::InconsistentCompound("a compound concept needs at least one literal".into()));
        }
        let mut ranges: HashMap<&str, (f64, f64)> = HashMap::new();
        for lit in &literals {
            let (lo, hi) = lit.bounds();
            let r = ranges.entry(lit.concept()).or_insert((f64::NEG_INFINITY, f64::INFINITY));
            r.0 = r.0.max(lo);
            r.1 = r.1.min(hi);
            if r.0 >= r.1 {
                return Err(Error::InconsistentCompound(format!(
                    "concept `{}` is required both present and absent",
                    lit.concept()
                )));
            }
        }
        Ok(CompoundConcept {
            literals,
            label: label.into(),
            source_leaf,
        })
    }

    pub fn name(&self) -> String {
        self.literals.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(" & ")
    }
}

/// One compound concept per leaf, left to right.
pub fn compound_concepts(tree: &ConceptTree) -> Result<Vec<CompoundConcept>> {
    fn walk(
        node: &TreeNode,
        tree: &ConceptTree,
        path: &mut Vec<Literal>,
        out: &mut Vec<Result<CompoundConcept>>,
    ) {
        match node {
            TreeNode::Leaf { label, .. } => {
                let idx = out.len();
                out.push(CompoundConcept::new(path.clone(), tree.class_names[*label].clone(), idx));
            }
            TreeNode::Split {
                concept,
                cut,
                left,
                right,
            } => {
                let col = &tree.concepts[*concept];
                let name = col.name.clone();
                let threshold = col.cuts.get(*cut as usize - 1).copied().unwrap_or(DEFAULT_CONCEPT_THRESHOLD);
                let (l, r) = match col.style {
                    SplitStyle::Presence => (
                        Literal::Absent {
                            concept: name.clone(),
                            threshold,
                        },
                        Literal::Present { concept: name, threshold },
                    ),
                    SplitStyle::Ordinal => (
                        Literal::Below {
                            concept: name.clone(),
                            level: *cut,
                            threshold,
                        },
                        Literal::AtLeast {
                            concept: name,
                            level: *cut,
                            threshold,
                        },
                    ),
                };
                path.push(l);
                walk(left, tree, path, out);
                path.pop();
                path.push(r);
                walk(right, tree, path, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    walk(&tree.root, tree, &mut Vec::new(), &mut out);
    out.into_iter().collect()
}

/// Aggregation of literal scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TNorm {
    #[default]
    Product,
    Min,
}

/// Soft membership of every sample in a compound concept: `p` for present
/// literals, `1 - p` for absent ones, a hard indicator for ordinal bounds,
/// combined with the chosen t-norm.
pub fn compound_probability(compound: &CompoundConcept, pred: &PredictionMatrix, tnorm: TNorm) -> Result<ProbVector> {
    let columns: Vec<usize> = compound
        .literals
        .iter()
        .map(|l| pred.concept_index(l.concept()))
        .collect::<Result<_>>()?;
    let scores: Vec<f64> = pred
        .concepts
        .outer_iter()
        .map(|row| {
            let parts = compound.literals.iter().zip(&columns).map(|(lit, &j)| {
                let p = row[j];
                match lit {
                    Literal::Present { .. } => p,
                    Literal::Absent { .. } => 1.0 - p,
                    Literal::AtLeast { threshold, .. } => f64::from(u8::from(p >= *threshold)),
                    Literal::Below { threshold, .. } => f64::from(u8::from(p < *threshold)),
                }
            });
            match tnorm {
                TNorm::Product => parts.product(),
                TNorm::Min => parts.fold(1.0, f64::min),
            }
        })
        .collect();
    ProbVector::new(scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{gen_boolean_task, truth_table, Formula};
    use crate::predictions::default_sample_ids;
    use ndarray::{array, Array2};

    fn names(n: &[&str]) -> Vec<String> {
        n.iter().map(|s| s.to_string()).collect()
    }

    fn replicated(n_flags: usize, times: usize) -> Vec<Vec<bool>> {
        truth_table(n_flags)
            .into_iter()
            .flat_map(|r| std::iter::repeat_n(r, times))
            .collect()
    }

    fn boolean_setup(vars: &[&str], formula: &str, times: usize) -> (ConceptMatrix, Vec<usize>) {
        let n = names(vars);
        let flags = replicated(vars.len(), times);
        let labels = gen_boolean_task(&flags, &n, &Formula::parse(formula).unwrap()).unwrap();
        (ConceptMatrix::from_flags(&n, &flags).unwrap(), labels)
    }

    fn pred_matrix(concepts: &[&str], values: Array2<f64>) -> PredictionMatrix {
        let n = values.nrows();
        PredictionMatrix::new(
            default_sample_ids(n),
            vec![],
            names(concepts),
            Array2::zeros((n, 0)),
            values,
        )
        .unwrap()
    }

    #[test]
    fn binarize_rules() {
        let pm = pred_matrix(&["a", "b"], array![[0.9, 0.3], [0.5, 0.49]]);
        let m = binarize_concepts(&pm, &Thresholds::uniform(0.5)).unwrap();
        assert_eq!(m.rows, vec![vec![1, 0], vec![1, 0]]);

        let t = Thresholds::uniform(0.5).with("b", Cut::Ordinal(vec![0.25, 0.4]));
        let m = binarize_concepts(&pm, &t).unwrap();
        assert_eq!(m.rows, vec![vec![1, 1], vec![1, 2]]);
        assert_eq!(m.concepts[1].style, SplitStyle::Ordinal);

        let missing = Thresholds::default().with("a", Cut::Binary(0.5));
        assert!(matches!(binarize_concepts(&pm, &missing), Err(Error::UnknownReference(_))));
    }

    #[test]
    fn ordinal_level_of_severity_value() {
        assert_eq!(level_of(1.2, &[0.5, 1.5]), 1);
        assert_eq!(level_of(1.5, &[0.5, 1.5]), 2);
        assert_eq!(level_of(0.1, &[0.5, 1.5]), 0);
    }

    #[test]
    fn conjunction_gives_depth_two_tree() {
        let (m, labels) = boolean_setup(&["A", "B"], "A & B", 2);
        let tree = fit_tree(&m, &labels, &names(&["0", "1"]), &TreeParams::default()).unwrap();
        assert_eq!(tree.depth(), 2);
        assert_eq!(faithfulness(&tree, &m, &labels).unwrap(), 1.0);
        assert_eq!(tree.sample_count(), 8);
    }

    #[test]
    fn xor_splits_on_first_concept() {
        let (m, labels) = boolean_setup(&["A", "B"], "A ^ B", 2);
        let tree = fit_tree(&m, &labels, &names(&["0", "1"]), &TreeParams::default()).unwrap();
        assert_eq!(tree.depth(), 2);
        assert!(matches!(tree.root, TreeNode::Split { concept: 0, .. }));
        assert_eq!(faithfulness(&tree, &m, &labels).unwrap(), 1.0);
    }

    #[test]
    fn two_conjunctions_recovered_exactly() {
        let (m, labels) = boolean_setup(&["A", "B", "C", "D"], "(A & B) | (C & D)", 4);
        let tree = fit_tree(&m, &labels, &names(&["0", "1"]), &TreeParams::default()).unwrap();
        assert_eq!(faithfulness(&tree, &m, &labels).unwrap(), 1.0);
        let table = ConceptMatrix::from_flags(&names(&["A", "B", "C", "D"]), &truth_table(4)).unwrap();
        let expected: Vec<usize> = truth_table(4)
            .iter()
            .map(|r| usize::from((r[0] && r[1]) || (r[2] && r[3])))
            .collect();
        assert_eq!(tree.predict(&table).unwrap(), expected);
    }

    #[test]
    fn class_tree_matches_zen_garden_rule() {
        let vars = ["patio", "step", "sidewalk", "house", "path", "beak"];
        let rule = "(patio & step) | (patio & sidewalk & !house) | (!patio & path & beak)";
        let (m, is_class) = boolean_setup(&vars, rule, 2);
        // class 2 is the explained class, others spread over 0 and 1
        let labels: Vec<usize> = is_class
            .iter()
            .enumerate()
            .map(|(i, &c)| if c == 1 { 2 } else { i % 2 })
            .collect();
        let tree = fit_class_tree(&m, &labels, &names(&["x", "y", "zen"]), 2, &TreeParams::default()).unwrap();
        assert_eq!(tree.title.as_deref(), Some("zen"));
        let table = ConceptMatrix::from_flags(&names(&vars), &truth_table(6)).unwrap();
        let want = gen_boolean_task(&truth_table(6), &names(&vars), &Formula::parse(rule).unwrap()).unwrap();
        assert_eq!(tree.predict(&table).unwrap(), want);
        assert_eq!(faithfulness(&tree, &m, &labels).unwrap(), 1.0);
        assert!(fit_class_tree(&m, &labels, &names(&["x", "y", "zen", "w"]), 3, &TreeParams::default()).is_err());
    }

    #[test]
    fn single_concept_class_is_depth_one() {
        let (m, labels) = boolean_setup(&["A", "B"], "A", 3);
        let tree = fit_class_tree(&m, &labels, &names(&["0", "1"]), 1, &TreeParams::default()).unwrap();
        assert_eq!(tree.depth(), 1);
    }

    #[test]
    fn min_per_class_stops_splitting() {
        let (m, labels) = boolean_setup(&["A", "B"], "A & B", 1);
        let tree = fit_tree(&m, &labels, &names(&["0", "1"]), &TreeParams::default()).unwrap();
        assert_eq!(tree.n_leaves(), 1);
        let loose = TreeParams {
            min_per_class: 1,
            ..TreeParams::default()
        };
        assert_eq!(fit_tree(&m, &labels, &names(&["0", "1"]), &loose).unwrap().depth(), 2);
    }

    #[test]
    fn fit_errors() {
        let m = ConceptMatrix::from_flags(&names(&["A"]), &[]).unwrap();
        assert!(fit_tree(&m, &[], &names(&["0"]), &TreeParams::default()).is_err());
        let m = ConceptMatrix::from_flags(&names(&["A"]), &[vec![true]]).unwrap();
        assert!(matches!(
            fit_tree(&m, &[0, 1], &names(&["0", "1"]), &TreeParams::default()),
            Err(Error::Shape(_))
        ));
    }

    fn leaf(label: usize, counts: Vec<usize>) -> Box<TreeNode> {
        Box::new(TreeNode::Leaf { label, counts })
    }

    fn tree_of(root: TreeNode) -> ConceptTree {
        ConceptTree {
            concepts: vec![ConceptColumn::flag("A"), ConceptColumn::flag("B")],
            class_names: names(&["0", "1", "2"]),
            target_class: None,
            title: None,
            root,
        }
    }

    #[test]
    fn merging_leaves() {
        let t = tree_of(TreeNode::Split {
            concept: 0,
            cut: 1,
            left: Box::new(TreeNode::Split {
                concept: 1,
                cut: 1,
                left: leaf(2, vec![0, 1, 3]),
                right: leaf(2, vec![0, 0, 2]),
            }),
            right: leaf(0, vec![4, 0, 0]),
        });
        let merged = merge_leaves(&t);
        assert_eq!(merged.n_leaves(), 2);
        assert_eq!(merged.sample_count(), t.sample_count());
        match &merged.root {
            TreeNode::Split { left, .. } => assert_eq!(**left, TreeNode::Leaf { label: 2, counts: vec![0, 1, 5] }),
            _ => panic!("root should stay a split"),
        }
        // different labels stay apart
        assert_eq!(merge_leaves(&merged), merged);

        let uniform = tree_of(TreeNode::Split {
            concept: 0,
            cut: 1,
            left: Box::new(TreeNode::Split {
                concept: 1,
                cut: 1,
                left: leaf(1, vec![0, 1, 0]),
                right: leaf(1, vec![0, 2, 0]),
            }),
            right: leaf(1, vec![0, 3, 0]),
        });
        let collapsed = merge_leaves(&uniform);
        assert_eq!(collapsed.root, TreeNode::Leaf { label: 1, counts: vec![0, 6, 0] });
    }

    #[test]
    fn constant_tree_faithfulness_on_balanced_labels() {
        let t = tree_of(*leaf(0, vec![2, 2, 0]));
        let m = ConceptMatrix::from_flags(&names(&["A", "B"]), &replicated(2, 1)).unwrap();
        assert_eq!(faithfulness(&t, &m, &[0, 1, 0, 1]).unwrap(), 0.5);
        assert!(faithfulness(&t, &m, &[0, 1]).is_err());
    }

    #[test]
    fn compounds_along_paths() {
        let (m, labels) = boolean_setup(&["A", "B"], "A & B", 2);
        let tree = fit_tree(&m, &labels, &names(&["no", "yes"]), &TreeParams::default()).unwrap();
        let compounds = compound_concepts(&tree).unwrap();
        let positive: Vec<_> = compounds.iter().filter(|c| c.label == "yes").collect();
        assert_eq!(positive.len(), 1);
        assert_eq!(positive[0].name(), "A & B");

        let single = tree_of(*leaf(0, vec![1, 0, 0]));
        assert!(matches!(compound_concepts(&single), Err(Error::InconsistentCompound(_))));
    }

    #[test]
    fn inconsistent_compound_is_rejected() {
        let lits = vec![
            Literal::Present {
                concept: "A".into(),
                threshold: 0.5,
            },
            Literal::Absent {
                concept: "A".into(),
                threshold: 0.5,
            },
        ];
        assert!(matches!(CompoundConcept::new(lits, "x", 0), Err(Error::InconsistentCompound(_))));
    }

    #[test]
    fn compound_scores() {
        let pm = pred_matrix(&["a", "b"], array![[0.5, 0.5], [0.9, 0.2], [0.3, 0.6]]);
        let present_a = CompoundConcept::new(
            vec![Literal::Present {
                concept: "a".into(),
                threshold: 0.5,
            }],
            "x",
            0,
        )
        .unwrap();
        assert_eq!(
            compound_probability(&present_a, &pm, TNorm::Product).unwrap().as_slice(),
            pm.concepts.column(0).to_vec().as_slice()
        );
        let both = CompoundConcept::new(
            vec![
                Literal::Present {
                    concept: "a".into(),
                    threshold: 0.5,
                },
                Literal::Absent {
                    concept: "b".into(),
                    threshold: 0.5,
                },
            ],
            "x",
            0,
        )
        .unwrap();
        let p = compound_probability(&both, &pm, TNorm::Product).unwrap();
        assert_eq!(p.as_slice()[0], 0.25);
        assert!((p.as_slice()[1] - 0.72).abs() < 1e-12);
        let q = compound_probability(&both, &pm, TNorm::Min).unwrap();
        assert!((q.as_slice()[1] - 0.8).abs() < 1e-12);

        let unknown = CompoundConcept::new(
            vec![Literal::Present {
                concept: "zz".into(),
                threshold: 0.5,
            }],
            "x",
            0,
        )
        .unwrap();
        assert!(compound_probability(&unknown, &pm, TNorm::Product).is_err());
    }
}
