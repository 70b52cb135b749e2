//! Synthetic datasets with planted concept/class structure.
//!
//! Samples are feature vectors made of a class-indicative *glyph* (or
//! *content*) block followed by a hint block: a 2D color for the color
//! datasets, a scaled caption token for the caption datasets. With
//! `correlated = true` the hint is tied to the class; otherwise it is drawn
//! independently of the class.
//!
//! Every class's glyph prototype is a fixed permutation of one shared base
//! vector, so shuffling a glyph's coordinates yields the same distribution
//! whatever the class.

use std::f64::consts::PI;
use std::fmt;

use ndarray::{s, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PROTOTYPE_SEED: u64 = 0x5eed_0f_c0ffee;

/// Positive concept samples against non-concept samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ConceptDataset {
    pub name: String,
    pub positives: Array2<f64>,
    pub negatives: Array2<f64>,
}

impl ConceptDataset {
    pub fn new(name: impl Into<String>, positives: Array2<f64>, negatives: Array2<f64>) -> Result<Self> {
        let name = name.into();
        if positives.nrows() == 0 || negatives.nrows() == 0 {
            return Err(Error::DegenerateDataset(format!(
                "concept `{name}` needs positive and negative samples"
            )));
        }
        if positives.ncols() != negatives.ncols() {
            return Err(Error::shape(format!(
                "positives have {} columns, negatives {}",
                positives.ncols(),
                negatives.ncols()
            )));
        }
        Ok(ConceptDataset {
            name,
            positives,
            negatives,
        })
    }

    pub fn width(&self) -> usize {
        self.positives.ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_classes: usize,
    pub glyph_dim: usize,
    pub color_noise: f64,
    pub glyph_noise: f64,
    pub samples_per_class: usize,
    pub correlated: bool,
    pub seed: u64,
    /// Width of each token slot in the caption block.
    pub caption_width: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_classes: 10,
            glyph_dim: 32,
            color_noise: 0.03,
            glyph_noise: 1.2,
            samples_per_class: 1000,
            correlated: true,
            seed: 0,
            caption_width: 8,
        }
    }
}

impl SyntheticSpec {
    pub fn caption_defaults() -> Self {
        SyntheticSpec {
            n_classes: 2,
            ..SyntheticSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 {
            return Err(Error::domain("need at least 2 classes"));
        }
        if self.glyph_dim == 0 || self.samples_per_class == 0 || self.caption_width == 0 {
            return Err(Error::domain("dimensions and sample counts must be at least 1"));
        }
        if !(self.color_noise >= 0.0 && self.glyph_noise >= 0.0) {
            return Err(Error::domain("noise levels must be non-negative"));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        SyntheticSpec { seed, ..self }
    }

    pub fn color_width(&self) -> usize {
        self.glyph_dim + 2
    }

    pub fn caption_input_width(&self) -> usize {
        self.glyph_dim + self.n_classes * self.caption_width
    }

    /// Name of the analogous benchmark dataset.
    pub fn color_analog(&self) -> &'static str {
        if self.correlated {
            "ColorDataset1"
        } else {
            "ColorDataset2"
        }
    }

    pub fn caption_analog(&self) -> &'static str {
        if self.correlated {
            "CaptionDataset1"
        } else {
            "CaptionDataset2"
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColorData {
    pub inputs: Array2<f64>,
    pub labels: Vec<usize>,
    /// Color pair index planted in each sample.
    pub pairs: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaptionData {
    pub inputs: Array2<f64>,
    pub labels: Vec<usize>,
    pub tokens: Vec<usize>,
}

/// Glyph prototypes: one fixed permutation of a half-ones base vector per
/// class. Independent of the sample seed so that datasets drawn with
/// different seeds share glyph shapes.
pub fn glyph_prototypes(n_classes: usize, glyph_dim: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(PROTOTYPE_SEED ^ ((n_classes as u64) << 32) ^ glyph_dim as u64);
    let base: Vec<f64> = (0..glyph_dim)
        .map(|k| if k < glyph_dim.div_ceil(2) { 1.0 } else { 0.0 })
        .collect();
    (0..n_classes)
        .map(|_| {
            let mut p = base.clone();
            p.shuffle(&mut rng);
            p
        })
        .collect()
}

/// Unit direction of color pair `pair`; the pair's two colors are `±u`.
pub fn pair_direction(pair: usize, n_pairs: usize) -> [f64; 2] {
    let angle = PI * pair as f64 / n_pairs as f64;
    [angle.cos(), angle.sin()]
}

/// Nearest color pair for a 2D color.
pub fn read_color_pair(color: [f64; 2], n_pairs: usize) -> usize {
    let angle = color[1].atan2(color[0]).rem_euclid(PI);
    ((angle / (PI / n_pairs as f64)).round() as usize) % n_pairs
}

fn normal(std: f64) -> Normal<f64> {
    Normal::new(0.0, std).expect("finite non-negative std")
}

fn sample_color(pair: usize, n_pairs: usize, noise: f64, rng: &mut ChaCha8Rng) -> [f64; 2] {
    let [ux, uy] = pair_direction(pair, n_pairs);
    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
    let nd = normal(noise);
    [sign * ux + nd.sample(rng), sign * uy + nd.sample(rng)]
}

fn fill_glyph(row: &mut [f64], prototype: &[f64], noise: f64, rng: &mut ChaCha8Rng) {
    let nd = normal(noise);
    for (v, p) in row.iter_mut().zip(prototype) {
        *v = p + nd.sample(rng);
    }
}

fn other_index(exclude: usize, n: usize, rng: &mut ChaCha8Rng) -> usize {
    let k = rng.random_range(0..n - 1);
    if k >= exclude {
        k + 1
    } else {
        k
    }
}

fn color_rows(
    spec: &SyntheticSpec,
    classes: impl Iterator<Item = usize>,
    mut pair_for: impl FnMut(usize, &mut ChaCha8Rng) -> usize,
    rng: &mut ChaCha8Rng,
) -> ColorData {
    let prototypes = glyph_prototypes(spec.n_classes, spec.glyph_dim);
    let classes: Vec<usize> = classes.collect();
    let mut inputs = Array2::zeros((classes.len(), spec.color_width()));
    let mut pairs = Vec::with_capacity(classes.len());
    for (i, &class) in classes.iter().enumerate() {
        let mut row = vec![0.0; spec.color_width()];
        fill_glyph(&mut row[..spec.glyph_dim], &prototypes[class], spec.glyph_noise, rng);
        let pair = pair_for(class, rng);
        let color = sample_color(pair, spec.n_classes, spec.color_noise, rng);
        row[spec.glyph_dim] = color[0];
        row[spec.glyph_dim + 1] = color[1];
        inputs.row_mut(i).assign(&ndarray::ArrayView1::from(&row));
        pairs.push(pair);
    }
    ColorData {
        inputs,
        labels: classes,
        pairs,
    }
}

/// Colored-glyph dataset: `samples_per_class` rows per class, shuffled.
pub fn gen_color_dataset(spec: &SyntheticSpec) -> Result<ColorData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut classes: Vec<usize> = (0..spec.n_classes)
        .flat_map(|c| std::iter::repeat_n(c, spec.samples_per_class))
        .collect();
    classes.shuffle(&mut rng);
    let n = spec.n_classes;
    let correlated = spec.correlated;
    Ok(color_rows(
        spec,
        classes.into_iter(),
        |class, rng| if correlated { class } else { rng.random_range(0..n) },
        &mut rng,
    ))
}

/// Color samples where `focus_class` makes up half of the rows and, for
/// uncorrelated specs, `focus_pair` independently colors half of the rows.
pub fn gen_balanced_color_samples(
    spec: &SyntheticSpec,
    focus_class: usize,
    focus_pair: usize,
    n: usize,
) -> Result<ColorData> {
    spec.validate()?;
    if focus_class >= spec.n_classes || focus_pair >= spec.n_classes {
        return Err(Error::IndexOutOfRange {
            index: focus_class.max(focus_pair),
            valid: format!("0..{}", spec.n_classes),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let k = spec.n_classes;
    let classes: Vec<usize> = (0..n)
        .map(|_| {
            if rng.random::<bool>() {
                focus_class
            } else {
                other_index(focus_class, k, &mut rng)
            }
        })
        .collect();
    let correlated = spec.correlated;
    Ok(color_rows(
        spec,
        classes.into_iter(),
        |class, rng| {
            if correlated {
                class
            } else if rng.random::<bool>() {
                focus_pair
            } else {
                other_index(focus_pair, k, rng)
            }
        },
        &mut rng,
    ))
}

fn caption_row(
    spec: &SyntheticSpec,
    prototypes: &[Vec<f64>],
    class: usize,
    token: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let mut row = vec![0.0; spec.caption_input_width()];
    fill_glyph(&mut row[..spec.glyph_dim], &prototypes[class], spec.glyph_noise, rng);
    plant_caption(&mut row[spec.glyph_dim..], spec, token, rng);
    row
}

/// Writes token `token` into a caption block with a random scale.
fn plant_caption(block: &mut [f64], spec: &SyntheticSpec, token: usize, rng: &mut ChaCha8Rng) {
    block.fill(0.0);
    let scale = rng.random_range(0.5..1.5);
    let nd = normal(0.05);
    let start = token * spec.caption_width;
    for v in &mut block[start..start + spec.caption_width] {
        *v = scale + nd.sample(rng);
    }
}

/// Token whose caption slot carries the most mass.
pub fn read_caption_token(block: &[f64], spec: &SyntheticSpec) -> usize {
    let sums = block.chunks(spec.caption_width).map(|c| c.iter().sum::<f64>());
    crate::predictions::argmax(sums)
}

/// Captioned-content dataset with one token per class.
pub fn gen_caption_dataset(spec: &SyntheticSpec) -> Result<CaptionData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let prototypes = glyph_prototypes(spec.n_classes, spec.glyph_dim);
    let mut classes: Vec<usize> = (0..spec.n_classes)
        .flat_map(|c| std::iter::repeat_n(c, spec.samples_per_class))
        .collect();
    classes.shuffle(&mut rng);
    let mut inputs = Array2::zeros((classes.len(), spec.caption_input_width()));
    let mut tokens = Vec::with_capacity(classes.len());
    for (i, &class) in classes.iter().enumerate() {
        let token = if spec.correlated {
            class
        } else {
            rng.random_range(0..spec.n_classes)
        };
        let row = caption_row(spec, &prototypes, class, token, &mut rng);
        inputs.row_mut(i).assign(&ndarray::ArrayView1::from(&row));
        tokens.push(token);
    }
    Ok(CaptionData {
        inputs,
        labels: classes,
        tokens,
    })
}

/// Feature planted into shuffled content to build a concept set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConceptFeature {
    ColorPair { spec: SyntheticSpec, pair: usize },
    CaptionToken { spec: SyntheticSpec, token: usize },
}

impl ConceptFeature {
    fn spec(&self) -> &SyntheticSpec {
        match self {
            ConceptFeature::ColorPair { spec, .. } | ConceptFeature::CaptionToken { spec, .. } => spec,
        }
    }

    pub fn name(&self) -> String {
        match self {
            ConceptFeature::ColorPair { pair, .. } => format!("color_pair_{pair}"),
            ConceptFeature::CaptionToken { token, .. } => format!("caption_{token}"),
        }
    }

    fn input_width(&self) -> usize {
        match self {
            ConceptFeature::ColorPair { spec, .. } => spec.color_width(),
            ConceptFeature::CaptionToken { spec, .. } => spec.caption_input_width(),
        }
    }

    fn plant(&self, hint: &mut [f64], positive: bool, rng: &mut ChaCha8Rng) {
        match *self {
            ConceptFeature::ColorPair { spec, pair } => {
                let p = if positive { pair } else { other_index(pair, spec.n_classes, rng) };
                let c = sample_color(p, spec.n_classes, spec.color_noise, rng);
                hint.copy_from_slice(&c);
            }
            ConceptFeature::CaptionToken { spec, token } => {
                let t = if positive { token } else { other_index(token, spec.n_classes, rng) };
                plant_caption(hint, &spec, t, rng);
            }
        }
    }
}

/// Builds a concept set from donor rows: each sample's glyph block is
/// independently permuted and the concept feature (positives) or a
/// different feature of the same kind (negatives) is planted in the hint
/// block. Produces `n_per_side` positives and as many negatives.
pub fn make_concept_set(
    inputs: &Array2<f64>,
    feature: &ConceptFeature,
    n_per_side: usize,
    seed: u64,
) -> Result<ConceptDataset> {
    let spec = feature.spec();
    spec.validate()?;
    if inputs.nrows() == 0 || n_per_side == 0 {
        return Err(Error::DegenerateDataset("empty selection for concept set".into()));
    }
    if inputs.ncols() != feature.input_width() {
        return Err(Error::shape(format!(
            "donor rows have {} columns, feature expects {}",
            inputs.ncols(),
            feature.input_width()
        )));
    }
    match *feature {
        ConceptFeature::ColorPair { pair, .. } | ConceptFeature::CaptionToken { token: pair, .. }
            if pair >= spec.n_classes =>
        {
            return Err(Error::IndexOutOfRange {
                index: pair,
                valid: format!("0..{}", spec.n_classes),
            })
        }
        _ => {}
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = spec.glyph_dim;
    let build = |positive: bool, rng: &mut ChaCha8Rng| {
        let mut m = Array2::zeros((n_per_side, inputs.ncols()));
        for i in 0..n_per_side {
            let donor = rng.random_range(0..inputs.nrows());
            let mut row = inputs.row(donor).to_vec();
            row[..g].shuffle(rng);
            feature.plant(&mut row[g..], positive, rng);
            m.row_mut(i).assign(&ndarray::ArrayView1::from(&row));
        }
        m
    };
    let positives = build(true, &mut rng);
    let negatives = build(false, &mut rng);
    ConceptDataset::new(feature.name(), positives, negatives)
}

/// Glyph block of every row.
pub fn glyph_block(inputs: &Array2<f64>, spec: &SyntheticSpec) -> Array2<f64> {
    inputs.slice(s![.., ..spec.glyph_dim]).to_owned()
}

/// Boolean expression over named concept flags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Formula {
    Const(bool),
    Var(String),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Xor(Box<Formula>, Box<Formula>),
}

impl Formula {
    /// Parses `!`, `&`, `^`, `|` (tightest first), parentheses, `true`,
    /// `false` and identifiers. The symbols `¬ ∧ ⊕ ∨` are accepted too.
    pub fn parse(text: &str) -> Result<Formula> {
        let tokens = tokenize(text)?;
        let mut p = FormulaParser { tokens, pos: 0 };
        let f = p.or()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Parse {
                line: 1,
                message: format!("unexpected token {:?}", p.tokens[p.pos]),
            });
        }
        Ok(f)
    }

    pub fn variables(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Formula::Const(_) => {}
            Formula::Var(v) => {
                if !out.contains(&v.as_str()) {
                    out.push(v)
                }
            }
            Formula::Not(a) => a.collect_vars(out),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Xor(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    fn eval(&self, lookup: &dyn Fn(&str) -> bool) -> bool {
        match self {
            Formula::Const(b) => *b,
            Formula::Var(v) => lookup(v),
            Formula::Not(a) => !a.eval(lookup),
            Formula::And(a, b) => a.eval(lookup) && b.eval(lookup),
            Formula::Or(a, b) => a.eval(lookup) || b.eval(lookup),
            Formula::Xor(a, b) => a.eval(lookup) ^ b.eval(lookup),
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Const(b) => write!(f, "{b}"),
            Formula::Var(v) => f.write_str(v),
            Formula::Not(a) => write!(f, "!{a}"),
            Formula::And(a, b) => write!(f, "({a} & {b})"),
            Formula::Or(a, b) => write!(f, "({a} | {b})"),
            Formula::Xor(a, b) => write!(f, "({a} ^ {b})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Not,
    And,
    Or,
    Xor,
    Open,
    Close,
}

fn tokenize(text: &str) -> Result<Vec<Tok>> {
    let mut out = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        let tok = match c {
            c if c.is_whitespace() => continue,
            '!' | '¬' | '~' => Tok::Not,
            '&' | '∧' => Tok::And,
            '|' | '∨' => Tok::Or,
            '^' | '⊕' => Tok::Xor,
            '(' => Tok::Open,
            ')' => Tok::Close,
            c if c.is_alphanumeric() || c == '_' => {
                let mut ident = c.to_string();
                while let Some(&(_, n)) = chars.peek() {
                    if n.is_alphanumeric() || n == '_' {
                        ident.push(n);
                        chars.next();
                    } else {
                        break;
                    }
                }
                Tok::Ident(ident)
            }
            other => {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("unexpected character {other:?} at column {}", i + 1),
                })
            }
        };
        out.push(tok);
    }
    Ok(out)
}

struct FormulaParser {
    tokens: Vec<Tok>,
    pos: usize,
}

impl FormulaParser {
    fn eat(&mut self, tok: &Tok) -> bool {
        if self.tokens.get(self.pos) == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn or(&mut self) -> Result<Formula> {
        let mut left = self.xor()?;
        while self.eat(&Tok::Or) {
            left = Formula::Or(Box::new(left), Box::new(self.xor()?));
        }
        Ok(left)
    }

    fn xor(&mut self) -> Result<Formula> {
        let mut left = self.and()?;
        while self.eat(&Tok::Xor) {
            left = Formula::Xor(Box::new(left), Box::new(self.and()?));
        }
        Ok(left)
    }

    fn and(&mut self) -> Result<Formula> {
        let mut left = self.unary()?;
        while self.eat(&Tok::And) {
            left = Formula::And(Box::new(left), Box::new(self.unary()?));
        }
        Ok(left)
    }

    fn unary(&mut self) -> Result<Formula> {
        if self.eat(&Tok::Not) {
            return Ok(Formula::Not(Box::new(self.unary()?)));
        }
        if self.eat(&Tok::Open) {
            let inner = self.or()?;
            if !self.eat(&Tok::Close) {
                return Err(Error::Parse {
                    line: 1,
                    message: "missing closing parenthesis".into(),
                });
            }
            return Ok(inner);
        }
        match self.tokens.get(self.pos).cloned() {
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                Ok(match name.as_str() {
                    "true" => Formula::Const(true),
                    "false" => Formula::Const(false),
                    _ => Formula::Var(name),
                })
            }
            other => Err(Error::Parse {
                line: 1,
                message: format!("expected an operand, found {other:?}"),
            }),
        }
    }
}

/// Evaluates `formula` on every row of `flags`; column `j` is named
/// `names[j]`. Returns 1 where the formula holds, else 0.
pub fn gen_boolean_task(flags: &[Vec<bool>], names: &[String], formula: &Formula) -> Result<Vec<usize>> {
    let columns: Vec<usize> = formula
        .variables()
        .iter()
        .map(|v| {
            names
                .iter()
                .position(|n| n == v)
                .ok_or_else(|| Error::UnknownReference((*v).to_string()))
        })
        .collect::<Result<_>>()?;
    let vars = formula.variables();
    flags
        .iter()
        .enumerate()
        .map(|(r, row)| {
            if row.len() != names.len() {
                return Err(Error::shape(format!(
                    "row {r} has {} flags, expected {}",
                    row.len(),
                    names.len()
                )));
            }
            let lookup = |v: &str| {
                let k = vars.iter().position(|x| *x == v).expect("collected variable");
                row[columns[k]]
            };
            Ok(usize::from(formula.eval(&lookup)))
        })
        .collect()
}

/// Every combination of `n` flags, in binary counting order with the first
/// flag as the most significant bit.
pub fn truth_table(n: usize) -> Vec<Vec<bool>> {
    (0..1usize << n)
        .map(|bits| (0..n).map(|j| bits >> (n - 1 - j) & 1 == 1).collect())
        .collect()
}

/// Inputs where each of `n_concepts` binary flags is encoded in its own
/// block as `±pattern + noise`, followed by a pure-noise block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlagSpec {
    pub n_concepts: usize,
    pub block_dim: usize,
    pub noise_dim: usize,
    pub noise: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for FlagSpec {
    fn default() -> Self {
        FlagSpec {
            n_concepts: 4,
            block_dim: 6,
            noise_dim: 8,
            noise: 0.5,
            n_samples: 2000,
            seed: 0,
        }
    }
}

impl FlagSpec {
    pub fn input_width(&self) -> usize {
        self.n_concepts * self.block_dim + self.noise_dim
    }

    fn patterns(&self) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(PROTOTYPE_SEED ^ 0xf1a6);
        (0..self.n_concepts)
            .map(|_| {
                (0..self.block_dim)
                    .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
                    .collect()
            })
            .collect()
    }

    fn row(&self, flags: &[bool], patterns: &[Vec<f64>], rng: &mut ChaCha8Rng) -> Vec<f64> {
        let nd = normal(self.noise);
        let mut row = Vec::with_capacity(self.input_width());
        for (flag, p) in flags.iter().zip(patterns) {
            let sign = if *flag { 1.0 } else { -1.0 };
            row.extend(p.iter().map(|v| sign * v + nd.sample(rng)));
        }
        row.extend((0..self.noise_dim).map(|_| nd.sample(rng)));
        row
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlagData {
    pub inputs: Array2<f64>,
    pub flags: Vec<Vec<bool>>,
}

/// Samples with independent fair-coin flags.
pub fn gen_flag_dataset(spec: &FlagSpec) -> Result<FlagData> {
    if spec.n_concepts == 0 || spec.block_dim == 0 || spec.n_samples == 0 {
        return Err(Error::domain("flag dataset needs concepts, block width and samples"));
    }
    let patterns = spec.patterns();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut inputs = Array2::zeros((spec.n_samples, spec.input_width()));
    let mut flags = Vec::with_capacity(spec.n_samples);
    for i in 0..spec.n_samples {
        let f: Vec<bool> = (0..spec.n_concepts).map(|_| rng.random()).collect();
        let row = spec.row(&f, &patterns, &mut rng);
        inputs.row_mut(i).assign(&ndarray::ArrayView1::from(&row));
        flags.push(f);
    }
    Ok(FlagData { inputs, flags })
}

/// Concept set for flag `concept`: positives have it set, negatives unset,
/// every other flag random.
pub fn flag_concept_set(spec: &FlagSpec, concept: usize, name: &str, n_per_side: usize, seed: u64) -> Result<ConceptDataset> {
    if concept >= spec.n_concepts {
        return Err(Error::IndexOutOfRange {
            index: concept,
            valid: format!("0..{}", spec.n_concepts),
        });
    }
    let patterns = spec.patterns();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut build = |value: bool| {
        let mut m = Array2::zeros((n_per_side, spec.input_width()));
        for i in 0..n_per_side {
            let mut f: Vec<bool> = (0..spec.n_concepts).map(|_| rng.random()).collect();
            f[concept] = value;
            let row = spec.row(&f, &patterns, &mut rng);
            m.row_mut(i).assign(&ndarray::ArrayView1::from(&row));
        }
        m
    };
    let positives = build(true);
    let negatives = build(false);
    ConceptDataset::new(name, positives, negatives)
}
