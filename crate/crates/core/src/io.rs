//! On-disk formats: CBE1 matrices, prediction tables, networks, concept
//! heads and concept trees.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hierarchy::{ConceptColumn, ConceptTree, SplitStyle, TreeNode};
use crate::nnet::{Activation, ConceptHead, Dense, FeedforwardNet};
use crate::predictions::PredictionMatrix;

pub const CBE1_MAGIC: &[u8; 4] = b"CBE1";
pub const CBE1_VERSION: u8 = 1;
pub const CBE1_HEADER_LEN: usize = 13;
const NET_MAGIC: &[u8; 4] = b"CCLN";
const HEAD_MAGIC: &[u8; 4] = b"CCLH";
const NET_VERSION: u8 = 1;

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Little-endian cursor that reports byte offsets in its errors.
struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    fn error(&self, offset: usize, message: impl Into<String>) -> Error {
        Error::Format {
            offset: offset as u64,
            message: message.into(),
        }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(self.error(
                self.bytes.len(),
                format!("truncated {what}: need {n} bytes at offset {}", self.pos),
            )),
        }
    }

    fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let got = self.take(4, "magic")?;
        if let Some(i) = got.iter().zip(expected).position(|(a, b)| a != b) {
            return Err(self.error(
                i,
                format!("bad magic {:?}, expected {:?}", String::from_utf8_lossy(got), String::from_utf8_lossy(expected)),
            ));
        }
        Ok(())
    }

    fn version(&mut self, expected: u8) -> Result<()> {
        let at = self.pos;
        let v = self.u8("version")?;
        if v != expected {
            return Err(self.error(at, format!("unsupported version {v}")));
        }
        Ok(())
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let len = n
            .checked_mul(8)
            .ok_or_else(|| self.error(self.pos, format!("{what} size overflows")))?;
        let start = self.pos;
        let raw = self.take(len, what)?;
        let values: Vec<f64> = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(self.error(start + 8 * i, format!("non-finite value in {what}")));
        }
        Ok(values)
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(self.error(self.pos, format!("{} trailing bytes", self.bytes.len() - self.pos)));
        }
        Ok(())
    }
}

/// Encodes a matrix as CBE1: magic, version byte, row and column counts
/// (u32 LE), then row-major f32 LE values.
pub fn encode_cbe1(matrix: &Array2<f32>) -> Result<Vec<u8>> {
    let (rows, cols) = matrix.dim();
    let r = u32::try_from(rows).map_err(|_| Error::domain(format!("{rows} rows exceed the u32 range")))?;
    let c = u32::try_from(cols).map_err(|_| Error::domain(format!("{cols} columns exceed the u32 range")))?;
    if let Some(v) = matrix.iter().find(|v| !v.is_finite()) {
        return Err(Error::domain(format!("non-finite value {v} cannot be stored")));
    }
    let mut out = Vec::with_capacity(CBE1_HEADER_LEN + rows * cols * 4);
    out.extend_from_slice(CBE1_MAGIC);
    out.push(CBE1_VERSION);
    out.extend_from_slice(&r.to_le_bytes());
    out.extend_from_slice(&c.to_le_bytes());
    for v in matrix.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_cbe1(bytes: &[u8]) -> Result<Array2<f32>> {
    let mut r = Reader::new(bytes);
    r.magic(CBE1_MAGIC)?;
    r.version(CBE1_VERSION)?;
    let rows = r.u32("row count")? as usize;
    let cols = r.u32("column count")? as usize;
    let len = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| r.error(5, format!("{rows}x{cols} payload size overflows")))?;
    if bytes.len() < CBE1_HEADER_LEN + len {
        return Err(r.error(
            bytes.len(),
            format!("truncated payload: {rows}x{cols} needs {len} bytes, found {}", bytes.len() - CBE1_HEADER_LEN),
        ));
    }
    let raw = r.take(len, "payload")?;
    r.finish()?;
    let mut values = Vec::with_capacity(rows * cols);
    for (i, c) in raw.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(c.try_into().unwrap());
        if !v.is_finite() {
            return Err(r.error(CBE1_HEADER_LEN + 4 * i, "non-finite value in payload"));
        }
        values.push(v);
    }
    Ok(Array2::from_shape_vec((rows, cols), values).expect("payload length checked"))
}

pub fn write_cbe1(matrix: &Array2<f32>, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_cbe1(matrix)?)
}

pub fn read_cbe1(path: impl AsRef<Path>) -> Result<Array2<f32>> {
    decode_cbe1(&read_file(path.as_ref())?)
}

pub fn to_f32(matrix: &Array2<f64>) -> Array2<f32> {
    matrix.mapv(|v| v as f32)
}

pub fn to_f64(matrix: &Array2<f32>) -> Array2<f64> {
    matrix.mapv(f64::from)
}

pub const TASK_PREFIX: &str = "task:";
pub const CONCEPT_PREFIX: &str = "concept:";

/// Shortest decimal of `v` rounded to 9 significant digits.
pub fn format_sig9(v: f64) -> String {
    let rounded: f64 = format!("{v:.8e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

pub fn write_prediction_table_to(pred: &PredictionMatrix, writer: impl std::io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| Error::Table {
        row: 0,
        message: e.to_string(),
    };
    let header: Vec<String> = std::iter::once("sample_id".to_string())
        .chain(pred.class_names.iter().map(|c| format!("{TASK_PREFIX}{c}")))
        .chain(pred.concept_names.iter().map(|c| format!("{CONCEPT_PREFIX}{c}")))
        .collect();
    w.write_record(&header).map_err(csv_err)?;
    for (i, id) in pred.sample_ids.iter().enumerate() {
        let record: Vec<String> = std::iter::once(id.clone())
            .chain(pred.task.row(i).iter().map(|&v| format_sig9(v)))
            .chain(pred.concepts.row(i).iter().map(|&v| format_sig9(v)))
            .collect();
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Table {
        row: 0,
        message: e.to_string(),
    })
}

pub fn write_prediction_table(pred: &PredictionMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_prediction_table_to(pred, &mut buf)?;
    write_file(path, &buf)
}

enum Role {
    Task(usize),
    Concept(usize),
}

/// Parses a prediction table. Data rows are numbered from 1 in errors; the
/// header is row 0.
pub fn read_prediction_table_from(reader: impl std::io::Read) -> Result<PredictionMatrix> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = r
        .headers()
        .map_err(|e| Error::Table {
            row: 0,
            message: e.to_string(),
        })?
        .clone();
    if header.get(0).map(str::trim) != Some("sample_id") {
        return Err(Error::Table {
            row: 0,
            message: "first column must be `sample_id`".into(),
        });
    }
    let (mut classes, mut concepts, mut roles) = (Vec::new(), Vec::new(), Vec::new());
    for name in header.iter().skip(1) {
        let name = name.trim();
        if let Some(c) = name.strip_prefix(TASK_PREFIX) {
            roles.push(Role::Task(classes.len()));
            classes.push(c.to_string());
        } else if let Some(c) = name.strip_prefix(CONCEPT_PREFIX) {
            roles.push(Role::Concept(concepts.len()));
            concepts.push(c.to_string());
        } else {
            return Err(Error::Table {
                row: 0,
                message: format!("column `{name}` lacks a `task:` or `concept:` prefix"),
            });
        }
    }
    let (mut ids, mut task, mut conc) = (Vec::new(), Vec::new(), Vec::new());
    for (i, rec) in r.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Table {
            row,
            message: e.to_string(),
        })?;
        if rec.len() != roles.len() + 1 {
            return Err(Error::Table {
                row,
                message: format!("{} cells, expected {}", rec.len(), roles.len() + 1),
            });
        }
        ids.push(rec[0].to_string());
        let mut t = vec![0.0; classes.len()];
        let mut c = vec![0.0; concepts.len()];
        for (cell, role) in rec.iter().skip(1).zip(&roles) {
            let v: f64 = cell.trim().parse().map_err(|_| Error::Table {
                row,
                message: format!("`{cell}` is not a number"),
            })?;
            match role {
                Role::Task(j) => t[*j] = v,
                Role::Concept(j) => c[*j] = v,
            }
        }
        task.extend(t);
        conc.extend(c);
    }
    let n = ids.len();
    let task = Array2::from_shape_vec((n, classes.len()), task).expect("row widths fixed");
    let conc = Array2::from_shape_vec((n, concepts.len()), conc).expect("row widths fixed");
    PredictionMatrix::new(ids, classes, concepts, task, conc)
}

pub fn read_prediction_table(path: impl AsRef<Path>) -> Result<PredictionMatrix> {
    let path = path.as_ref();
    read_prediction_table_from(read_file(path)?.as_slice())
}

fn encode_net_body(net: &FeedforwardNet, out: &mut Vec<u8>) {
    out.extend_from_slice(&net.seed().to_le_bytes());
    out.extend_from_slice(&(net.n_layers() as u32).to_le_bytes());
    for layer in net.layers() {
        out.push(layer.activation.code());
        out.extend_from_slice(&(layer.input_width() as u32).to_le_bytes());
        out.extend_from_slice(&(layer.output_width() as u32).to_le_bytes());
        for v in layer.weights.iter().chain(layer.biases.iter()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

fn decode_net_body(r: &mut Reader<'_>) -> Result<FeedforwardNet> {
    let seed = r.u64("seed")?;
    let n_layers = r.u32("layer count")?;
    let mut layers = Vec::new();
    for _ in 0..n_layers {
        let at = r.pos;
        let code = r.u8("activation")?;
        let activation = Activation::from_code(code).ok_or_else(|| r.error(at, format!("unknown activation code {code}")))?;
        let inputs = r.u32("input width")? as usize;
        let outputs = r.u32("output width")? as usize;
        let n = inputs
            .checked_mul(outputs)
            .ok_or_else(|| r.error(at, "layer size overflows"))?;
        let weights = Array2::from_shape_vec((inputs, outputs), r.f64s(n, "weights")?).expect("length checked");
        let biases = r.f64s(outputs, "biases")?.into();
        layers.push(Dense::new(weights, biases, activation).map_err(|e| r.error(at, e.to_string()))?);
    }
    FeedforwardNet::new(layers, seed).map_err(|e| r.error(0, e.to_string()))
}

/// Binary network file; weights are stored as f64 so loading is lossless.
pub fn encode_network(net: &FeedforwardNet) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(NET_MAGIC);
    out.push(NET_VERSION);
    encode_net_body(net, &mut out);
    out
}

pub fn decode_network(bytes: &[u8]) -> Result<FeedforwardNet> {
    let mut r = Reader::new(bytes);
    r.magic(NET_MAGIC)?;
    r.version(NET_VERSION)?;
    let net = decode_net_body(&mut r)?;
    r.finish()?;
    Ok(net)
}

pub fn save_network(net: &FeedforwardNet, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_network(net))
}

pub fn load_network(path: impl AsRef<Path>) -> Result<FeedforwardNet> {
    decode_network(&read_file(path.as_ref())?)
}

pub fn encode_concept_head(head: &ConceptHead) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(HEAD_MAGIC);
    out.push(NET_VERSION);
    out.extend_from_slice(&(head.split_layer as u32).to_le_bytes());
    out.push(u8::from(head.trained));
    out.extend_from_slice(&head.validation_metric.unwrap_or(f64::NAN).to_le_bytes());
    encode_net_body(&head.net, &mut out);
    out
}

pub fn decode_concept_head(bytes: &[u8]) -> Result<ConceptHead> {
    let mut r = Reader::new(bytes);
    r.magic(HEAD_MAGIC)?;
    r.version(NET_VERSION)?;
    let split_layer = r.u32("split layer")? as usize;
    let at = r.pos;
    let trained = match r.u8("trained flag")? {
        0 => false,
        1 => true,
        b => return Err(r.error(at, format!("invalid trained flag {b}"))),
    };
    let metric = f64::from_le_bytes(r.take(8, "validation metric")?.try_into().unwrap());
    let net = decode_net_body(&mut r)?;
    r.finish()?;
    Ok(ConceptHead {
        net,
        split_layer,
        trained,
        validation_metric: (!metric.is_nan()).then_some(metric),
    })
}

pub fn save_concept_head(head: &ConceptHead, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_concept_head(head))
}

pub fn load_concept_head(path: impl AsRef<Path>) -> Result<ConceptHead> {
    decode_concept_head(&read_file(path.as_ref())?)
}

fn branch_labels(col: &ConceptColumn, cut: u32) -> (String, String) {
    match col.style {
        SplitStyle::Presence => (format!("not({})", col.name), col.name.clone()),
        SplitStyle::Ordinal => {
            let v = cut as f64 - 0.5;
            (format!("{} <= {v:.2}", col.name), format!("{} >  {v:.2}", col.name))
        }
    }
}

/// Renders a tree as indented `|- ` lines, negative branch first.
pub fn export_tree_text(tree: &ConceptTree) -> String {
    fn walk(node: &TreeNode, tree: &ConceptTree, depth: usize, out: &mut String) {
        let indent = "| ".repeat(depth);
        match node {
            TreeNode::Leaf { label, .. } => {
                out.push_str(&format!("{indent}|- class: {}\n", tree.class_names[*label]));
            }
            TreeNode::Split {
                concept,
                cut,
                left,
                right,
            } => {
                let (l, r) = branch_labels(&tree.concepts[*concept], *cut);
                out.push_str(&format!("{indent}|- {l}\n"));
                walk(left, tree, depth + 1, out);
                out.push_str(&format!("{indent}|- {r}\n"));
                walk(right, tree, depth + 1, out);
            }
        }
    }
    let mut out = String::new();
    if let Some(title) = &tree.title {
        out.push_str(&format!("class: {title}\n"));
    }
    walk(&tree.root, tree, 0, &mut out);
    out
}

enum Branch {
    Leaf(String),
    Negative { name: String, style: SplitStyle, cut: u32 },
    Positive { name: String, style: SplitStyle, cut: u32 },
}

struct TextLine {
    number: usize,
    depth: usize,
    branch: Branch,
}

fn parse_cut_value(text: &str, line: usize) -> Result<u32> {
    let v: f64 = text.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("bad cut value `{text}`"),
    })?;
    let k = v + 0.5;
    if k < 1.0 || (k - k.round()).abs() > 1e-6 {
        return Err(Error::Parse {
            line,
            message: format!("cut {v} is not between two severity levels"),
        });
    }
    Ok(k.round() as u32)
}

fn parse_line(raw: &str, number: usize) -> Result<TextLine> {
    let mut rest = raw;
    let mut depth = 0;
    while let Some(r) = rest.strip_prefix("| ") {
        depth += 1;
        rest = r;
    }
    let body = rest.strip_prefix("|- ").ok_or_else(|| Error::Parse {
        line: number,
        message: "malformed indentation: expected `| ` groups followed by `|- `".into(),
    })?;
    let body = body.trim_end();
    let branch = if let Some(label) = body.strip_prefix("class:") {
        Branch::Leaf(label.trim().to_string())
    } else if let Some(inner) = body.strip_prefix("not(").and_then(|b| b.strip_suffix(')')) {
        Branch::Negative {
            name: inner.to_string(),
            style: SplitStyle::Presence,
            cut: 1,
        }
    } else if let Some((name, v)) = body.split_once(" <= ") {
        Branch::Negative {
            name: name.trim().to_string(),
            style: SplitStyle::Ordinal,
            cut: parse_cut_value(v, number)?,
        }
    } else if let Some((name, v)) = body.split_once(" > ") {
        Branch::Positive {
            name: name.trim().to_string(),
            style: SplitStyle::Ordinal,
            cut: parse_cut_value(v, number)?,
        }
    } else if body.is_empty() || body.contains(['(', ')']) {
        return Err(Error::Parse {
            line: number,
            message: format!("unknown node tag `{body}`"),
        });
    } else {
        Branch::Positive {
            name: body.to_string(),
            style: SplitStyle::Presence,
            cut: 1,
        }
    };
    Ok(TextLine { number, depth, branch })
}

struct TextParser {
    lines: Vec<TextLine>,
    pos: usize,
    concepts: Vec<ConceptColumn>,
    classes: Vec<String>,
    last_line: usize,
}

impl TextParser {
    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    fn next_at(&mut self, depth: usize) -> Result<&TextLine> {
        let line = self
            .lines
            .get(self.pos)
            .ok_or_else(|| Error::Parse {
                line: self.last_line + 1,
                message: format!("unexpected end of tree, expected a node at depth {depth}"),
            })?;
        if line.depth != depth {
            return Err(self.err(
                line.number,
                format!("malformed indentation: depth {} where {depth} was expected", line.depth),
            ));
        }
        self.pos += 1;
        Ok(&self.lines[self.pos - 1])
    }

    fn class_id(&mut self, label: &str) -> usize {
        match self.classes.iter().position(|c| c == label) {
            Some(i) => i,
            None => {
                self.classes.push(label.to_string());
                self.classes.len() - 1
            }
        }
    }

    fn concept_id(&mut self, name: &str, style: SplitStyle, cut: u32, line: usize) -> Result<usize> {
        let idx = match self.concepts.iter().position(|c| c.name == name) {
            Some(i) => {
                if self.concepts[i].style != style {
                    return Err(self.err(line, format!("concept `{name}` used with two split styles")));
                }
                i
            }
            None => {
                self.concepts.push(ConceptColumn {
                    name: name.to_string(),
                    style,
                    cuts: Vec::new(),
                });
                self.concepts.len() - 1
            }
        };
        let col = &mut self.concepts[idx];
        while col.cuts.len() < cut as usize {
            col.cuts.push(col.cuts.len() as f64 + 0.5);
        }
        Ok(idx)
    }

    fn node(&mut self, depth: usize) -> Result<TreeNode> {
        let (number, branch) = {
            let l = self.next_at(depth)?;
            (l.number, &l.branch)
        };
        match branch {
            Branch::Leaf(label) => {
                let label = label.clone();
                let label = self.class_id(&label);
                Ok(TreeNode::Leaf { label, counts: Vec::new() })
            }
            Branch::Positive { .. } => Err(self.err(number, "positive branch must follow its negative branch")),
            Branch::Negative { name, style, cut } => {
                let (name, style, cut) = (name.clone(), *style, *cut);
                let left = self.node(depth + 1)?;
                let pos_line = self.next_at(depth)?;
                let matches = matches!(&pos_line.branch,
                    Branch::Positive { name: n, style: s, cut: c } if *n == name && *s == style && *c == cut);
                if !matches {
                    let n = pos_line.number;
                    return Err(self.err(n, format!("expected the positive branch of `{name}`")));
                }
                let right = self.node(depth + 1)?;
                let concept = self.concept_id(&name, style, cut, number)?;
                Ok(TreeNode::Split {
                    concept,
                    cut,
                    left: Box::new(left),
                    right: Box::new(right),
                })
            }
        }
    }
}

fn fill_counts(node: &mut TreeNode, n_classes: usize) {
    match node {
        TreeNode::Leaf { counts, .. } => *counts = vec![0; n_classes],
        TreeNode::Split { left, right, .. } => {
            fill_counts(left, n_classes);
            fill_counts(right, n_classes);
        }
    }
}

/// Parses the text rendering back into a tree. Leaf sample counts are not
/// part of the text and come back as zeros; class and concept registries
/// are ordered by first appearance.
pub fn parse_tree_text(text: &str) -> Result<ConceptTree> {
    let mut title = None;
    let mut lines = Vec::new();
    let mut last_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let number = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        last_line = number;
        if lines.is_empty() && title.is_none() {
            if let Some(t) = raw.strip_prefix("class:") {
                title = Some(t.trim().to_string());
                continue;
            }
        }
        lines.push(parse_line(raw, number)?);
    }
    let mut p = TextParser {
        lines,
        pos: 0,
        concepts: Vec::new(),
        classes: Vec::new(),
        last_line,
    };
    let mut root = p.node(0)?;
    if let Some(extra) = p.lines.get(p.pos) {
        return Err(p.err(extra.number, "content after the end of the tree"));
    }
    fill_counts(&mut root, p.classes.len());
    Ok(ConceptTree {
        concepts: p.concepts,
        class_names: p.classes,
        target_class: None,
        title,
        root,
    })
}

pub fn export_tree_json(tree: &ConceptTree) -> Result<String> {
    Ok(serde_json::to_string_pretty(tree)?)
}

pub fn parse_tree_json(text: &str) -> Result<ConceptTree> {
    let tree: ConceptTree = serde_json::from_str(text)?;
    validate_tree(&tree)?;
    Ok(tree)
}

fn validate_tree(tree: &ConceptTree) -> Result<()> {
    fn walk(node: &TreeNode, tree: &ConceptTree) -> Result<()> {
        match node {
            TreeNode::Leaf { label, counts } => {
                if *label >= tree.class_names.len() || counts.len() != tree.class_names.len() {
                    return Err(Error::domain(format!("leaf label {label} or counts do not match the class list")));
                }
                Ok(())
            }
            TreeNode::Split {
                concept,
                cut,
                left,
                right,
            } => {
                let col = tree
                    .concepts
                    .get(*concept)
                    .ok_or_else(|| Error::domain(format!("split on unknown concept {concept}")))?;
                if *cut == 0 || *cut >= col.n_levels() {
                    return Err(Error::domain(format!("cut {cut} invalid for `{}`", col.name)));
                }
                walk(left, tree)?;
                walk(right, tree)
            }
        }
    }
    walk(&tree.root, tree)
}

/// Sidecar listing the files of one export with their checksums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub model: String,
    pub layer: Option<String>,
    pub n_samples: usize,
    /// Shape of one sample's activation before flattening, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<Vec<usize>>,
    pub files: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the manifest's directory.
    pub path: String,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

impl Manifest {
    /// Manifest for `files` (relative to `dir`), hashing each one.
    pub fn describe(model: impl Into<String>, layer: Option<String>, n_samples: usize, dir: &Path, files: &[&str]) -> Result<Self> {
        let files = files
            .iter()
            .map(|f| {
                Ok(ManifestEntry {
                    path: (*f).to_string(),
                    sha256: sha256_hex(&read_file(&dir.join(f))?),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Manifest {
            model: model.into(),
            layer,
            n_samples,
            layout: None,
            files,
        })
    }

    /// Checks every listed file against its checksum, and CBE1 files
    /// against the sample count.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for entry in &self.files {
            let path = dir.join(&entry.path);
            let bytes = read_file(&path)?;
            if sha256_hex(&bytes) != entry.sha256.to_ascii_lowercase() {
                return Err(Error::Format {
                    offset: 0,
                    message: format!("checksum mismatch for {}", entry.path),
                });
            }
            if entry.path.ends_with(".cbe1") {
                let rows = decode_cbe1(&bytes)?.nrows();
                if rows != self.n_samples {
                    return Err(Error::Format {
                        offset: 5,
                        message: format!("{} has {rows} rows, manifest says {}", entry.path, self.n_samples),
                    });
                }
            }
        }
        Ok(())
    }
}

pub fn write_manifest(manifest: &Manifest, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), serde_json::to_string_pretty(manifest)?.as_bytes())
}

/// Reads a manifest and verifies the files it lists.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let manifest: Manifest = serde_json::from_slice(&read_file(path)?)?;
    manifest.verify(path.parent().unwrap_or(Path::new(".")))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::{fit_class_tree, ConceptMatrix, TreeParams};
    use crate::datagen::{gen_boolean_task, truth_table, Formula};
    use ndarray::array;

    #[test]
    fn cbe1_round_trip_and_header() {
        let m = array![[1.5f32, -2.0, 0.1], [3.25, 1e-30, 7.0]];
        let bytes = encode_cbe1(&m).unwrap();
        assert_eq!(bytes.len(), CBE1_HEADER_LEN + 24);
        assert_eq!(&bytes[..5], b"CBE1\x01");
        assert_eq!(decode_cbe1(&bytes).unwrap(), m);

        let empty = encode_cbe1(&Array2::zeros((0, 0))).unwrap();
        assert_eq!(empty.len(), 13);
        assert_eq!(decode_cbe1(&empty).unwrap().dim(), (0, 0));
    }

    #[test]
    fn cbe1_rejects_corruption() {
        let mut bytes = encode_cbe1(&array![[1.0f32, 2.0]]).unwrap();
        bytes[2] = b'X';
        assert!(matches!(decode_cbe1(&bytes), Err(Error::Format { offset: 2, .. })));

        let bytes = encode_cbe1(&array![[1.0f32, 2.0]]).unwrap();
        assert!(matches!(decode_cbe1(&bytes[..bytes.len() - 1]), Err(Error::Format { .. })));
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(decode_cbe1(&long), Err(Error::Format { offset: 21, .. })));

        let mut huge = bytes[..5].to_vec();
        huge.extend_from_slice(&u32::MAX.to_le_bytes());
        huge.extend_from_slice(&u32::MAX.to_le_bytes());
        assert!(decode_cbe1(&huge).is_err());

        assert!(encode_cbe1(&array![[f32::NAN]]).is_err());
    }

    #[test]
    fn sig9_formatting() {
        assert_eq!(format_sig9(0.7), "0.7");
        assert_eq!(format_sig9(0.123456789123), "0.123456789");
        assert_eq!(format_sig9(1.0), "1");
        assert_eq!(format_sig9(0.0), "0");
    }

    #[test]
    fn prediction_table_parse_and_errors() {
        let ok = "sample_id,task:a,task:b,concept:c\n0,0.3,0.7,0.1\n1,1,0,0.5\n2,0.5,0.5,1\n";
        let p = read_prediction_table_from(ok.as_bytes()).unwrap();
        assert_eq!((p.n_samples(), p.n_columns()), (3, 3));

        let bad = "sample_id,task:a,task:b,concept:c\n0,0.3,0.7,0.1\n1,0.5,0.3,0.5\n";
        assert!(matches!(read_prediction_table_from(bad.as_bytes()), Err(Error::Table { row: 2, .. })));

        let range = "sample_id,concept:c\n0,1.2\n";
        assert!(matches!(read_prediction_table_from(range.as_bytes()), Err(Error::Table { row: 1, .. })));

        let dup = "sample_id,concept:c,concept:c\n0,0.1,0.2\n";
        assert!(matches!(read_prediction_table_from(dup.as_bytes()), Err(Error::Table { row: 0, .. })));

        let prefix = "sample_id,c\n0,0.1\n";
        assert!(read_prediction_table_from(prefix.as_bytes()).is_err());
        let nan = "sample_id,concept:c\n0,abc\n";
        assert!(matches!(read_prediction_table_from(nan.as_bytes()), Err(Error::Table { row: 1, .. })));
    }

    #[test]
    fn prediction_table_round_trip() {
        let p = PredictionMatrix::new(
            vec!["s0".into(), "s,1".into()],
            vec!["x".into(), "y".into()],
            vec!["c".into()],
            array![[0.1234567891, 0.8765432109], [0.5, 0.5]],
            array![[0.3333333333], [1.0]],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_prediction_table_to(&p, &mut buf).unwrap();
        let q = read_prediction_table_from(buf.as_slice()).unwrap();
        assert_eq!(q.sample_ids, p.sample_ids);
        for (a, b) in p.task.iter().chain(p.concepts.iter()).zip(q.task.iter().chain(q.concepts.iter())) {
            assert!((a - b).abs() <= 5e-9 * a.abs());
        }
        let mut again = Vec::new();
        write_prediction_table_to(&q, &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn network_round_trip() {
        let net = FeedforwardNet::classifier(5, 4, &[6, 3], 3, 11).unwrap();
        let bytes = encode_network(&net);
        assert_eq!(decode_network(&bytes).unwrap(), net);
        let mut bad = bytes.clone();
        bad[0] = b'x';
        assert!(matches!(decode_network(&bad), Err(Error::Format { offset: 0, .. })));
        assert!(decode_network(&bytes[..bytes.len() - 3]).is_err());
    }

    fn zen_tree() -> ConceptTree {
        let vars: Vec<String> = ["patio", "step", "sidewalk", "house", "path", "beak"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let rule = Formula::parse("(patio & step) | (patio & sidewalk & !house) | (!patio & path & beak)").unwrap();
        let flags: Vec<Vec<bool>> = truth_table(6).into_iter().flat_map(|r| [r.clone(), r]).collect();
        let labels = gen_boolean_task(&flags, &vars, &rule).unwrap();
        let m = ConceptMatrix::from_flags(&vars, &flags).unwrap();
        fit_class_tree(&m, &labels, &["other".into(), "zen_garden".into()], 1, &TreeParams::default()).unwrap()
    }

    #[test]
    fn tree_text_round_trip() {
        let tree = zen_tree();
        let text = export_tree_text(&tree);
        assert!(text.starts_with("class: zen_garden\n|- not(patio)\n"));
        let parsed = parse_tree_text(&text).unwrap();
        assert!(parsed.same_structure(&tree));
        assert_eq!(export_tree_text(&parsed), text);
    }

    #[test]
    fn tree_json_round_trip() {
        let tree = zen_tree();
        let json = export_tree_json(&tree).unwrap();
        assert_eq!(parse_tree_json(&json).unwrap(), tree);
    }

    #[test]
    fn single_leaf_tree_text() {
        let tree = ConceptTree {
            concepts: vec![],
            class_names: vec!["a".into()],
            target_class: None,
            title: None,
            root: TreeNode::Leaf {
                label: 0,
                counts: vec![3],
            },
        };
        assert_eq!(export_tree_text(&tree), "|- class: a\n");
        assert!(parse_tree_text("|- class: a\n").unwrap().same_structure(&tree));
    }

    #[test]
    fn ordinal_split_text() {
        let tree = ConceptTree {
            concepts: vec![ConceptColumn {
                name: "xrscfm".into(),
                style: SplitStyle::Ordinal,
                cuts: vec![0.5, 1.5],
            }],
            class_names: vec!["0".into(), "1".into()],
            target_class: None,
            title: None,
            root: TreeNode::Split {
                concept: 0,
                cut: 1,
                left: Box::new(TreeNode::Leaf {
                    label: 0,
                    counts: vec![2, 0],
                }),
                right: Box::new(TreeNode::Leaf {
                    label: 1,
                    counts: vec![0, 2],
                }),
            },
        };
        let text = export_tree_text(&tree);
        assert_eq!(text, "|- xrscfm <= 0.50\n| |- class: 0\n|- xrscfm >  0.50\n| |- class: 1\n");
        assert!(parse_tree_text(&text).unwrap().same_structure(&tree));
    }

    #[test]
    fn tree_text_errors() {
        assert!(matches!(
            parse_tree_text("|- not(a)\n|- class: x\n|- a\n| |- class: y\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(parse_tree_text("- class: x\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(
            parse_tree_text("|- not(a)\n| |- class: x\n|- b\n| |- class: y\n"),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(matches!(parse_tree_text("|- not(a)\n| |- class: x\n"), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(parse_tree_text("|- (weird\n"), Err(Error::Parse { line: 1, .. })));
        assert!(parse_tree_text("|- class: x\n|- class: y\n").is_err());
    }

    #[test]
    fn manifest_checksums() {
        let dir = tempfile::tempdir().unwrap();
        write_cbe1(&Array2::<f32>::zeros((4, 3)), dir.path().join("acts.cbe1")).unwrap();
        let m = Manifest::describe("toy", Some("fc1".into()), 4, dir.path(), &["acts.cbe1"]).unwrap();
        write_manifest(&m, dir.path().join("manifest.json")).unwrap();
        assert_eq!(read_manifest(dir.path().join("manifest.json")).unwrap(), m);
        let mut bytes = fs::read(dir.path().join("acts.cbe1")).unwrap();
        bytes[20] ^= 1;
        fs::write(dir.path().join("acts.cbe1"), bytes).unwrap();
        assert!(matches!(m.verify(dir.path()), Err(Error::Format { .. })));
        let short = Manifest { n_samples: 5, ..m };
        write_cbe1(&Array2::<f32>::zeros((4, 3)), dir.path().join("acts.cbe1")).unwrap();
        assert!(short.verify(dir.path()).is_err());
    }
}
