//! Linear concept probes and directional-derivative (TCAV-style) scores,
//! kept for comparison against the nonlinear concept heads.

use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::ConceptDataset;
use crate::error::{Error, Result};
use crate::nnet::{binary_accuracy, split_concept_rows, ConceptHead, NetworkSplit, VALIDATION_FRACTION};

/// Default histogram resolution for derivative reports.
pub const DEFAULT_BINS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConcept {
    pub weights: Array1<f64>,
    pub bias: f64,
    pub validation_metric: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearConfig {
    pub epochs: usize,
    /// Step size relative to the logistic loss's smoothness bound.
    pub step_scale: f64,
    /// Ridge penalty on the weights (not the bias).
    pub l2: f64,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for LinearConfig {
    fn default() -> Self {
        LinearConfig {
            epochs: 500,
            step_scale: 1.0,
            l2: 0.0,
            validation_fraction: VALIDATION_FRACTION,
            seed: 0,
        }
    }
}

impl LinearConcept {
    pub fn logits(&self, activations: &Array2<f64>) -> Result<Array1<f64>> {
        if activations.ncols() != self.weights.len() {
            return Err(Error::shape(format!(
                "probe expects {} columns, got {}",
                self.weights.len(),
                activations.ncols()
            )));
        }
        Ok(activations.dot(&self.weights) + self.bias)
    }

    pub fn predict(&self, activations: &Array2<f64>) -> Result<Vec<f64>> {
        Ok(self.logits(activations)?.iter().map(|&z| sigmoid(z)).collect())
    }
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

fn fit_logistic(x: &Array2<f64>, y: &[bool], config: &LinearConfig) -> (Array1<f64>, f64) {
    let n = x.nrows().max(1) as f64;
    let mean_sq_norm = x.outer_iter().map(|r| r.dot(&r)).sum::<f64>() / n;
    let step = config.step_scale * 4.0 / (mean_sq_norm + 1.0 + 4.0 * config.l2);
    let targets = Array1::from_iter(y.iter().map(|&b| if b { 1.0 } else { 0.0 }));
    let mut w = Array1::zeros(x.ncols());
    let mut b = 0.0;
    for _ in 0..config.epochs {
        let z = x.dot(&w) + b;
        let residual = z.mapv(sigmoid) - &targets;
        let mut grad_w = x.t().dot(&residual) / n;
        grad_w.scaled_add(config.l2, &w);
        let grad_b = residual.sum() / n;
        w.scaled_add(-step, &grad_w);
        b -= step * grad_b;
    }
    (w, b)
}

/// Logistic regression by full-batch gradient descent from zero weights,
/// with a seeded stratified hold-out for the recorded accuracy.
pub fn train_linear_concept(
    activations: &Array2<f64>,
    labels: &[bool],
    config: &LinearConfig,
) -> Result<LinearConcept> {
    if labels.len() != activations.nrows() {
        return Err(Error::shape("label count differs from activation rows"));
    }
    let pick = |want: bool| {
        let rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == want).collect();
        activations.select(Axis(0), &rows)
    };
    let data = ConceptDataset {
        name: "linear".into(),
        positives: pick(true),
        negatives: pick(false),
    };
    train_linear_probe_rows(&data, config)
}

fn train_linear_probe_rows(data: &ConceptDataset, config: &LinearConfig) -> Result<LinearConcept> {
    let (xt, yt, xv, yv) = split_concept_rows(data, config.validation_fraction, config.seed)?;
    let (weights, bias) = fit_logistic(&xt, &yt, config);
    let mut lin = LinearConcept {
        weights,
        bias,
        validation_metric: 0.0,
    };
    let (ex, ey) = if yv.is_empty() { (&xt, &yt) } else { (&xv, &yv) };
    lin.validation_metric = binary_accuracy(&lin.predict(ex)?, ey);
    Ok(lin)
}

/// Linear probe on front-section activations of a concept dataset.
pub fn train_linear_probe(
    split: &NetworkSplit,
    data: &ConceptDataset,
    config: &LinearConfig,
) -> Result<LinearConcept> {
    let z = ConceptDataset {
        name: data.name.clone(),
        positives: split.activations(&data.positives)?,
        negatives: split.activations(&data.negatives)?,
    };
    train_linear_probe_rows(&z, config)
}

/// Concept positives against random counterexamples drawn without
/// replacement from `pool` (as many as there are positives, or the whole
/// pool if smaller), the usual negative set for a CAV.
pub fn random_counterexamples(positives: &Array2<f64>, pool: &Array2<f64>, name: &str, seed: u64) -> Result<ConceptDataset> {
    if pool.ncols() != positives.ncols() {
        return Err(Error::shape("counterexample pool differs in width from the positives"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = positives.nrows().min(pool.nrows());
    let rows = rand::seq::index::sample(&mut rng, pool.nrows(), n).into_vec();
    ConceptDataset::new(name, positives.clone(), pool.select(Axis(0), &rows))
}

/// Unit normal of the probe's decision boundary.
pub fn cav_direction(lin: &LinearConcept) -> Result<Array1<f64>> {
    let norm = lin.weights.dot(&lin.weights).sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::domain("probe weights have zero norm"));
    }
    Ok(&lin.weights / norm)
}

/// Per-sample derivative of the head's `class_id` logit along `direction`
/// in activation space.
pub fn directional_derivatives(
    split: &NetworkSplit,
    class_id: usize,
    activations: &Array2<f64>,
    direction: &Array1<f64>,
) -> Result<Vec<f64>> {
    if direction.len() != activations.ncols() {
        return Err(Error::shape(format!(
            "direction has {} entries, activations {} columns",
            direction.len(),
            activations.ncols()
        )));
    }
    let grad = split.head.logit_input_gradient(activations, class_id)?;
    Ok(grad.dot(direction).to_vec())
}

/// Per-sample dot product of the class-logit gradient with the concept
/// head's logit gradient, both taken with respect to the activations.
pub fn directional_derivatives_nonlinear(
    split: &NetworkSplit,
    class_id: usize,
    activations: &Array2<f64>,
    concept: &ConceptHead,
) -> Result<Vec<f64>> {
    if concept.split_layer != split.split_layer {
        return Err(Error::shape("concept head belongs to a different split"));
    }
    let task = split.head.logit_input_gradient(activations, class_id)?;
    let conc = concept.net.logit_input_gradient(activations, 0)?;
    Ok(task
        .outer_iter()
        .zip(conc.outer_iter())
        .map(|(a, b)| a.dot(&b))
        .collect())
}

/// Fraction of strictly positive derivatives.
pub fn tcav_score(derivatives: &[f64]) -> Result<f64> {
    if derivatives.is_empty() {
        return Err(Error::domain("no directional derivatives to score"));
    }
    let positive = derivatives.iter().filter(|&&d| d > 0.0).count();
    Ok(positive as f64 / derivatives.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` ascending bin edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Equal-width histogram over the data range; the last bin is closed.
pub fn histogram(values: &[f64], bins: usize) -> Result<Histogram> {
    if values.is_empty() || bins == 0 {
        return Err(Error::domain("histogram needs values and at least one bin"));
    }
    let (mut lo, mut hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins)
        .map(|i| if i == bins { hi } else { lo + width * i as f64 })
        .collect();
    let mut counts = vec![0; bins];
    for &v in values {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    Ok(Histogram { edges, counts })
}
