//! Dense feedforward networks with the split / transfer / freeze protocol
//! used to probe a layer for a concept.
//!
//! A network `g(f(x))` is split after some layer into a front section `f`
//! and a head `g`. A concept head copies every layer of `g` except the
//! output layer, which is replaced by a single sigmoid unit, and is trained
//! on the front's activations while the front stays frozen.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::datagen::ConceptDataset;
use crate::error::{Error, Result};
use crate::predictions::{argmax, default_sample_ids, PredictionMatrix};

/// Default held-out accuracy a concept head must reach to count as present.
pub const DEFAULT_GATE: f64 = 0.8;
/// Fraction of each concept class held out for validation.
pub const VALIDATION_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
    Softmax,
}

impl Activation {
    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
            Activation::Sigmoid => 2,
            Activation::Softmax => 3,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => Activation::Identity,
            1 => Activation::Relu,
            2 => Activation::Sigmoid,
            3 => Activation::Softmax,
            _ => return None,
        })
    }

    fn apply(self, z: &mut Array2<f64>) {
        match self {
            Activation::Identity => {}
            Activation::Relu => z.mapv_inplace(|v| v.max(0.0)),
            Activation::Sigmoid => z.mapv_inplace(sigmoid),
            Activation::Softmax => {
                for mut row in z.axis_iter_mut(Axis(0)) {
                    let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                    row.mapv_inplace(|v| (v - max).exp());
                    let sum = row.sum();
                    row.mapv_inplace(|v| v / sum);
                }
            }
        }
    }

    /// Elementwise derivative given pre-activation `z` and output `a`.
    /// Softmax has no elementwise derivative and is only allowed as output.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Softmax => unreachable!("softmax is only valid on the output layer"),
        }
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

/// Fully connected layer computing `act(x W + b)`; `weights` is `in x out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn new(weights: Array2<f64>, biases: Array1<f64>, activation: Activation) -> Result<Self> {
        if weights.ncols() != biases.len() {
            return Err(Error::shape(format!(
                "weights have {} outputs, biases {}",
                weights.ncols(),
                biases.len()
            )));
        }
        Ok(Dense {
            weights,
            biases,
            activation,
        })
    }

    /// He-scaled Gaussian weights for ReLU layers, Glorot-style otherwise;
    /// zero biases.
    pub fn random(inputs: usize, outputs: usize, activation: Activation, rng: &mut ChaCha8Rng) -> Self {
        let gain = if activation == Activation::Relu { 2.0 } else { 1.0 };
        Self::gaussian(inputs, outputs, activation, (gain / inputs.max(1) as f64).sqrt(), rng)
    }

    fn gaussian(
        inputs: usize,
        outputs: usize,
        activation: Activation,
        std: f64,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let normal = Normal::new(0.0, std).expect("finite std");
        let weights = Array2::from_shape_simple_fn((inputs, outputs), || normal.sample(rng));
        Dense {
            weights,
            biases: Array1::zeros(outputs),
            activation,
        }
    }

    pub fn input_width(&self) -> usize {
        self.weights.nrows()
    }

    pub fn output_width(&self) -> usize {
        self.weights.ncols()
    }

    fn pre_activation(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.weights) + &self.biases
    }

    fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut z = self.pre_activation(x);
        self.activation.apply(&mut z);
        z
    }
}

/// Per-layer parameter gradients, in layer order.
#[derive(Debug, Clone)]
pub struct LayerGradient {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            learning_rate: 0.01,
            momentum: 0.9,
            batch_size: 32,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: FeedforwardNet,
    /// Full-dataset loss after each epoch.
    pub losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedforwardNet {
    layers: Vec<Dense>,
    seed: u64,
}

impl FeedforwardNet {
    pub fn new(layers: Vec<Dense>, seed: u64) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::shape("network needs at least one layer"));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].output_width() != pair[1].input_width() {
                return Err(Error::shape(format!(
                    "layer {i} outputs {} values but layer {} expects {}",
                    pair[0].output_width(),
                    i + 1,
                    pair[1].input_width()
                )));
            }
        }
        let last = layers.len() - 1;
        if let Some(i) = layers[..last]
            .iter()
            .position(|l| l.activation == Activation::Softmax)
        {
            return Err(Error::shape(format!(
                "softmax is only supported on the output layer, found at layer {i}"
            )));
        }
        Ok(FeedforwardNet { layers, seed })
    }

    /// Seeded random network; `widths` has one more entry than `activations`.
    pub fn random(widths: &[usize], activations: &[Activation], seed: u64) -> Result<Self> {
        if widths.len() != activations.len() + 1 {
            return Err(Error::shape("need exactly one activation per layer"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = widths
            .windows(2)
            .zip(activations)
            .map(|(w, &act)| Dense::random(w[0], w[1], act, &mut rng))
            .collect();
        FeedforwardNet::new(layers, seed)
    }

    /// Classifier with an identity embedding layer, ReLU hidden layers and
    /// a softmax output.
    pub fn classifier(input: usize, embed: usize, hidden: &[usize], classes: usize, seed: u64) -> Result<Self> {
        let mut widths = vec![input, embed];
        widths.extend_from_slice(hidden);
        widths.push(classes);
        let mut acts = vec![Activation::Identity];
        acts.extend(hidden.iter().map(|_| Activation::Relu));
        acts.push(Activation::Softmax);
        FeedforwardNet::random(&widths, &acts, seed)
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].input_width()
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].output_width()
    }

    pub fn output_activation(&self) -> Activation {
        self.layers[self.layers.len() - 1].activation
    }

    fn check_input(&self, inputs: &Array2<f64>) -> Result<()> {
        if inputs.ncols() != self.input_width() {
            return Err(Error::shape(format!(
                "network expects {} input columns, got {}",
                self.input_width(),
                inputs.ncols()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, inputs: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_input(inputs)?;
        let mut x = self.layers[0].forward(inputs);
        for layer in &self.layers[1..] {
            x = layer.forward(&x);
        }
        Ok(x)
    }

    /// Output-layer pre-activations.
    pub fn logits(&self, inputs: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_input(inputs)?;
        let last = self.layers.len() - 1;
        let mut x = inputs.to_owned();
        for layer in &self.layers[..last] {
            x = layer.forward(&x);
        }
        Ok(self.layers[last].pre_activation(&x))
    }

    /// Row-wise argmax of the outputs.
    pub fn predict_labels(&self, inputs: &Array2<f64>) -> Result<Vec<usize>> {
        let out = self.forward(inputs)?;
        Ok(out.axis_iter(Axis(0)).map(|r| argmax(r.iter().copied())).collect())
    }

    pub fn accuracy(&self, inputs: &Array2<f64>, labels: &[usize]) -> Result<f64> {
        if labels.len() != inputs.nrows() {
            return Err(Error::shape("label count differs from input rows"));
        }
        let predicted = self.predict_labels(inputs)?;
        let hits = predicted.iter().zip(labels).filter(|(p, l)| p == l).count();
        Ok(hits as f64 / labels.len().max(1) as f64)
    }

    /// (pre-activations, outputs) per layer; `outputs[0]` is the input.
    fn trace(&self, inputs: &Array2<f64>) -> (Vec<Array2<f64>>, Vec<Array2<f64>>) {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut out = Vec::with_capacity(self.layers.len() + 1);
        out.push(inputs.to_owned());
        for layer in &self.layers {
            let z = layer.pre_activation(out.last().expect("non-empty"));
            let mut a = z.clone();
            layer.activation.apply(&mut a);
            pre.push(z);
            out.push(a);
        }
        (pre, out)
    }

    fn check_targets(&self, inputs: &Array2<f64>, targets: &Array2<f64>) -> Result<()> {
        self.check_input(inputs)?;
        if targets.nrows() != inputs.nrows() || targets.ncols() != self.output_width() {
            return Err(Error::shape(format!(
                "targets are {}x{}, expected {}x{}",
                targets.nrows(),
                targets.ncols(),
                inputs.nrows(),
                self.output_width()
            )));
        }
        Ok(())
    }

    /// Mean loss over the rows: cross-entropy for softmax and sigmoid
    /// outputs, half squared error otherwise.
    pub fn loss(&self, inputs: &Array2<f64>, targets: &Array2<f64>) -> Result<f64> {
        self.check_targets(inputs, targets)?;
        let z = self.logits(inputs)?;
        Ok(loss_from_logits(self.output_activation(), &z, targets))
    }

    /// Mean loss and its gradient with respect to every parameter.
    pub fn loss_and_gradients(
        &self,
        inputs: &Array2<f64>,
        targets: &Array2<f64>,
    ) -> Result<(f64, Vec<LayerGradient>)> {
        self.check_targets(inputs, targets)?;
        let n = inputs.nrows().max(1) as f64;
        let (pre, out) = self.trace(inputs);
        let last = self.layers.len() - 1;
        let act = self.layers[last].activation;
        let loss = loss_from_logits(act, &pre[last], targets);

        let mut delta = &out[last + 1] - targets;
        if matches!(act, Activation::Identity | Activation::Relu) {
            ndarray::Zip::from(&mut delta)
                .and(&pre[last])
                .and(&out[last + 1])
                .for_each(|d, &z, &a| *d *= act.derivative(z, a));
        }
        delta /= n;

        let mut grads = Vec::with_capacity(self.layers.len());
        for l in (0..self.layers.len()).rev() {
            let weights = out[l].t().dot(&delta);
            let biases = delta.sum_axis(Axis(0));
            grads.push(LayerGradient { weights, biases });
            if l > 0 {
                let mut back = delta.dot(&self.layers[l].weights.t());
                let prev_act = self.layers[l - 1].activation;
                ndarray::Zip::from(&mut back)
                    .and(&pre[l - 1])
                    .and(&out[l])
                    .for_each(|d, &z, &a| *d *= prev_act.derivative(z, a));
                delta = back;
            }
        }
        grads.reverse();
        Ok((loss, grads))
    }

    /// Gradient of output pre-activation `unit` with respect to the inputs,
    /// one row per input row.
    pub fn logit_input_gradient(&self, inputs: &Array2<f64>, unit: usize) -> Result<Array2<f64>> {
        self.check_input(inputs)?;
        if unit >= self.output_width() {
            return Err(Error::IndexOutOfRange {
                index: unit,
                valid: format!("0..{}", self.output_width()),
            });
        }
        let (pre, out) = self.trace(inputs);
        let last = self.layers.len() - 1;
        let mut delta = Array2::zeros((inputs.nrows(), self.output_width()));
        delta.column_mut(unit).fill(1.0);
        for l in (0..=last).rev() {
            let mut back = delta.dot(&self.layers[l].weights.t());
            if l > 0 {
                let prev_act = self.layers[l - 1].activation;
                ndarray::Zip::from(&mut back)
                    .and(&pre[l - 1])
                    .and(&out[l])
                    .for_each(|d, &z, &a| *d *= prev_act.derivative(z, a));
            }
            delta = back;
        }
        Ok(delta)
    }

    /// Minibatch SGD with momentum. Batch order is drawn from `config.seed`,
    /// so the run is reproducible bit for bit.
    pub fn train(
        &self,
        inputs: &Array2<f64>,
        targets: &Array2<f64>,
        config: &TrainConfig,
    ) -> Result<TrainOutcome> {
        self.check_targets(inputs, targets)?;
        if inputs.nrows() == 0 {
            return Err(Error::DegenerateDataset("no training rows".into()));
        }
        let mut net = self.clone();
        let mut velocity: Vec<LayerGradient> = net
            .layers
            .iter()
            .map(|l| LayerGradient {
                weights: Array2::zeros(l.weights.raw_dim()),
                biases: Array1::zeros(l.biases.raw_dim()),
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut order: Vec<usize> = (0..inputs.nrows()).collect();
        let batch = config.batch_size.max(1);
        let mut losses = Vec::with_capacity(config.epochs);

        for epoch in 0..config.epochs {
            order.shuffle(&mut rng);
            for chunk in order.chunks(batch) {
                let x = inputs.select(Axis(0), chunk);
                let y = targets.select(Axis(0), chunk);
                let (_, grads) = net.loss_and_gradients(&x, &y)?;
                for ((layer, v), g) in net.layers.iter_mut().zip(&mut velocity).zip(&grads) {
                    v.weights *= config.momentum;
                    v.weights.scaled_add(-config.learning_rate, &g.weights);
                    v.biases *= config.momentum;
                    v.biases.scaled_add(-config.learning_rate, &g.biases);
                    layer.weights += &v.weights;
                    layer.biases += &v.biases;
                }
            }
            let loss = net.loss(inputs, targets)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, loss });
            }
            losses.push(loss);
        }
        Ok(TrainOutcome { net, losses })
    }

    /// FNV-1a digest over every parameter's bit pattern.
    pub fn parameter_digest(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |bytes: &[u8]| {
            for b in bytes {
                h ^= *b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        for layer in &self.layers {
            feed(&[layer.activation.code()]);
            for v in layer.weights.iter().chain(layer.biases.iter()) {
                feed(&v.to_bits().to_le_bytes());
            }
        }
        h
    }
}

fn loss_from_logits(act: Activation, z: &Array2<f64>, targets: &Array2<f64>) -> f64 {
    let n = z.nrows().max(1) as f64;
    let total: f64 = match act {
        Activation::Softmax => z
            .axis_iter(Axis(0))
            .zip(targets.axis_iter(Axis(0)))
            .map(|(row, y)| {
                let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                let log_sum = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
                row.iter().zip(y).map(|(v, t)| -t * (v - log_sum)).sum::<f64>()
            })
            .sum(),
        Activation::Sigmoid => z
            .iter()
            .zip(targets)
            .map(|(&v, &t)| v.max(0.0) - v * t + (-v.abs()).exp().ln_1p())
            .sum(),
        Activation::Identity | Activation::Relu => {
            let mut out = z.clone();
            act.apply(&mut out);
            out.iter().zip(targets).map(|(o, t)| 0.5 * (o - t).powi(2)).sum()
        }
    };
    total / n
}

/// One-hot encoding of class ids.
pub fn one_hot(labels: &[usize], classes: usize) -> Result<Array2<f64>> {
    let mut m = Array2::zeros((labels.len(), classes));
    for (i, &l) in labels.iter().enumerate() {
        if l >= classes {
            return Err(Error::IndexOutOfRange {
                index: l,
                valid: format!("0..{classes}"),
            });
        }
        m[[i, l]] = 1.0;
    }
    Ok(m)
}

/// A network cut into a front section and a head.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSplit {
    pub front: FeedforwardNet,
    pub head: FeedforwardNet,
    pub split_layer: usize,
}

impl NetworkSplit {
    /// Front-section activations `z = f(x)`.
    pub fn activations(&self, inputs: &Array2<f64>) -> Result<Array2<f64>> {
        self.front.forward(inputs)
    }
}

/// Splits after the first `layer_index` layers.
pub fn split_at(net: &FeedforwardNet, layer_index: usize) -> Result<NetworkSplit> {
    if layer_index == 0 || layer_index >= net.n_layers() {
        return Err(Error::IndexOutOfRange {
            index: layer_index,
            valid: format!("1..{}", net.n_layers()),
        });
    }
    let (front, head) = net.layers.split_at(layer_index);
    Ok(NetworkSplit {
        front: FeedforwardNet::new(front.to_vec(), net.seed)?,
        head: FeedforwardNet::new(head.to_vec(), net.seed)?,
        split_layer: layer_index,
    })
}

/// Concept classifier sharing the head's architecture, with a one-unit
/// sigmoid output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptHead {
    pub net: FeedforwardNet,
    pub split_layer: usize,
    pub trained: bool,
    pub validation_metric: Option<f64>,
}

impl ConceptHead {
    /// Concept probability per activation row.
    pub fn predict(&self, activations: &Array2<f64>) -> Result<Vec<f64>> {
        Ok(self.net.forward(activations)?.column(0).to_vec())
    }
}

/// Copies the head's non-output layers verbatim and attaches a freshly
/// initialized single sigmoid unit.
pub fn make_concept_head(split: &NetworkSplit, seed: u64) -> ConceptHead {
    let head_layers = split.head.layers();
    let keep = &head_layers[..head_layers.len() - 1];
    let out_in = head_layers[head_layers.len() - 1].input_width();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std = 0.1 / (out_in.max(1) as f64).sqrt();
    let mut layers = keep.to_vec();
    layers.push(Dense::gaussian(out_in, 1, Activation::Sigmoid, std, &mut rng));
    ConceptHead {
        net: FeedforwardNet::new(layers, seed).expect("head layers chain"),
        split_layer: split.split_layer,
        trained: false,
        validation_metric: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub train: TrainConfig,
    pub validation_fraction: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            train: TrainConfig {
                epochs: 60,
                learning_rate: 0.01,
                momentum: 0.9,
                batch_size: 32,
                seed: 0,
            },
            validation_fraction: VALIDATION_FRACTION,
        }
    }
}

/// Stratified train/validation split of a concept dataset's rows, seeded.
/// Returns (train inputs, train labels, validation inputs, validation labels).
pub(crate) fn split_concept_rows(
    data: &ConceptDataset,
    fraction: f64,
    seed: u64,
) -> Result<(Array2<f64>, Vec<bool>, Array2<f64>, Vec<bool>)> {
    if data.positives.nrows() == 0 || data.negatives.nrows() == 0 {
        return Err(Error::DegenerateDataset(format!(
            "concept `{}` needs positive and negative samples ({} / {})",
            data.name,
            data.positives.nrows(),
            data.negatives.nrows()
        )));
    }
    if data.positives.ncols() != data.negatives.ncols() {
        return Err(Error::shape("positives and negatives differ in width"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_rows = Vec::new();
    let mut val_rows = Vec::new();
    for (matrix, label) in [(&data.positives, true), (&data.negatives, false)] {
        let mut idx: Vec<usize> = (0..matrix.nrows()).collect();
        idx.shuffle(&mut rng);
        let n_val = ((matrix.nrows() as f64) * fraction).round() as usize;
        let n_val = n_val.min(matrix.nrows().saturating_sub(1));
        for (k, &i) in idx.iter().enumerate() {
            let row = (matrix.row(i), label);
            if k < n_val {
                val_rows.push(row);
            } else {
                train_rows.push(row);
            }
        }
    }
    let stack = |rows: &[(ndarray::ArrayView1<f64>, bool)]| -> (Array2<f64>, Vec<bool>) {
        let width = data.positives.ncols();
        let mut m = Array2::zeros((rows.len(), width));
        for (i, (r, _)) in rows.iter().enumerate() {
            m.row_mut(i).assign(r);
        }
        (m, rows.iter().map(|(_, l)| *l).collect())
    };
    let (xt, yt) = stack(&train_rows);
    let (xv, yv) = stack(&val_rows);
    Ok((xt, yt, xv, yv))
}

pub(crate) fn binary_accuracy(probabilities: &[f64], labels: &[bool]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = probabilities
        .iter()
        .zip(labels)
        .filter(|(&p, &l)| (p >= 0.5) == l)
        .count();
    hits as f64 / labels.len() as f64
}

/// Trains only the concept head on frozen front activations and records
/// held-out accuracy.
pub fn train_concept_head(
    head: &ConceptHead,
    split: &NetworkSplit,
    data: &ConceptDataset,
    config: &ProbeConfig,
) -> Result<ConceptHead> {
    if head.split_layer != split.split_layer {
        return Err(Error::shape(format!(
            "head was made for split {}, given split {}",
            head.split_layer, split.split_layer
        )));
    }
    let (xt, yt, xv, yv) = split_concept_rows(data, config.validation_fraction, config.train.seed)?;
    let zt = split.activations(&xt)?;
    let targets = Array2::from_shape_fn((yt.len(), 1), |(i, _)| if yt[i] { 1.0 } else { 0.0 });
    let outcome = head.net.train(&zt, &targets, &config.train)?;
    let trained = ConceptHead {
        net: outcome.net,
        split_layer: head.split_layer,
        trained: true,
        validation_metric: None,
    };
    let eval_x = if xv.nrows() > 0 { xv } else { xt };
    let eval_y = if !yv.is_empty() { yv } else { yt };
    let probs = trained.predict(&split.activations(&eval_x)?)?;
    Ok(ConceptHead {
        validation_metric: Some(binary_accuracy(&probs, &eval_y)),
        ..trained
    })
}

/// True when the head's held-out accuracy reaches `gate` (inclusive).
pub fn concept_present(head: &ConceptHead, gate: f64) -> Result<bool> {
    match (head.trained, head.validation_metric) {
        (true, Some(metric)) => Ok(metric >= gate),
        _ => Err(Error::UntrainedHead),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerProbe {
    pub split_layer: usize,
    pub validation_accuracy: f64,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub enum LayerSearch {
    Found {
        split_layer: usize,
        head: ConceptHead,
        profile: Vec<LayerProbe>,
    },
    /// No layer passed the gate: the concept is too complex to be detected
    /// by the network.
    Absent { profile: Vec<LayerProbe> },
}

impl LayerSearch {
    pub fn profile(&self) -> &[LayerProbe] {
        match self {
            LayerSearch::Found { profile, .. } | LayerSearch::Absent { profile } => profile,
        }
    }
}

fn probe_layer(
    net: &FeedforwardNet,
    layer: usize,
    data: &ConceptDataset,
    config: &ProbeConfig,
) -> Result<ConceptHead> {
    let split = split_at(net, layer)?;
    let head = make_concept_head(&split, config.train.seed.wrapping_add(layer as u64));
    train_concept_head(&head, &split, data, config)
}

/// Probes split points from the deepest to the shallowest and stops at the
/// first whose concept head passes `gate`.
pub fn locate_concept_layer(
    net: &FeedforwardNet,
    data: &ConceptDataset,
    gate: f64,
    config: &ProbeConfig,
) -> Result<LayerSearch> {
    if net.n_layers() < 2 {
        return Err(Error::shape("need at least two layers to split"));
    }
    let mut profile = Vec::new();
    for layer in (1..net.n_layers()).rev() {
        let head = probe_layer(net, layer, data, config)?;
        let accuracy = head.validation_metric.unwrap_or(0.0);
        let passed = concept_present(&head, gate)?;
        profile.push(LayerProbe {
            split_layer: layer,
            validation_accuracy: accuracy,
            passed,
        });
        if passed {
            return Ok(LayerSearch::Found {
                split_layer: layer,
                head,
                profile,
            });
        }
    }
    Ok(LayerSearch::Absent { profile })
}

/// Held-out probe accuracy at every split point, deepest first.
pub fn probe_profile(
    net: &FeedforwardNet,
    data: &ConceptDataset,
    gate: f64,
    config: &ProbeConfig,
) -> Result<Vec<LayerProbe>> {
    (1..net.n_layers())
        .rev()
        .map(|layer| {
            let head = probe_layer(net, layer, data, config)?;
            let accuracy = head.validation_metric.unwrap_or(0.0);
            Ok(LayerProbe {
                split_layer: layer,
                validation_accuracy: accuracy,
                passed: accuracy >= gate,
            })
        })
        .collect()
}

/// Task probabilities and concept-head probabilities for every input row.
pub fn predict_matrices(
    split: &NetworkSplit,
    class_names: &[String],
    heads: &[(String, &ConceptHead)],
    inputs: &Array2<f64>,
) -> Result<PredictionMatrix> {
    if class_names.len() != split.head.output_width() {
        return Err(Error::shape(format!(
            "{} class names for {} outputs",
            class_names.len(),
            split.head.output_width()
        )));
    }
    if let Some((name, h)) = heads.iter().find(|(_, h)| h.split_layer != split.split_layer) {
        return Err(Error::shape(format!(
            "concept head `{name}` belongs to split {}, expected {}",
            h.split_layer, split.split_layer
        )));
    }
    let z = split.activations(inputs)?;
    let task = split.head.forward(&z)?;
    let mut concepts = Array2::zeros((inputs.nrows(), heads.len()));
    for (j, (_, h)) in heads.iter().enumerate() {
        let out = h.net.forward(&z)?;
        concepts.column_mut(j).assign(&out.column(0));
    }
    PredictionMatrix::new(
        default_sample_ids(inputs.nrows()),
        class_names.to_vec(),
        heads.iter().map(|(n, _)| n.clone()).collect(),
        task,
        concepts,
    )
}
