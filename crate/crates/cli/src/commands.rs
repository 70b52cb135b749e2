use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ccl_core::baselines::{
    cav_direction, directional_derivatives, directional_derivatives_nonlinear, histogram, random_counterexamples,
    tcav_score, train_linear_probe, LinearConfig,
};
use ccl_core::datagen::{
    flag_concept_set, gen_boolean_task, gen_caption_dataset, gen_color_dataset, gen_flag_dataset, make_concept_set,
    ConceptDataset, ConceptFeature, FlagSpec, Formula, SyntheticSpec,
};
use ccl_core::hierarchy::{
    binarize_concepts, compound_concepts, compound_probability, faithfulness, fit_class_tree, fit_tree, merge_leaves,
    Criterion, TNorm, TreeParams,
};
use ccl_core::io::{self, format_sig9, to_f32, Manifest};
use ccl_core::nnet::{
    locate_concept_layer, make_concept_head, one_hot, predict_matrices, split_at, train_concept_head, ConceptHead,
    FeedforwardNet, LayerProbe, LayerSearch, NetworkSplit, ProbeConfig, TrainConfig,
};
use ccl_core::quantify::{implication_surface, relation_scores, ProbVector, Relation};
use ccl_core::ranking::{extreme_samples, rank_concepts};
use ccl_core::{report, PredictionMatrix};
use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::files::{out_dir, parse_thresholds, read_labels, read_matrix, slug, stem, write_json, write_text};
use crate::{
    Cli, Command, CriterionArg, Global, PredictArgs, ProbeArgs, QuantifyArgs, RankArgs, SortArgs, SynthArgs, SynthKind,
    TNormArg, TcavArgs, TrainArgs, TreeArgs, TreeMode,
};

#[derive(Debug)]
pub enum CliError {
    Core(ccl_core::Error),
    Usage(String),
    Absent(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Absent(m) => write!(f, "concept absent: {m}"),
        }
    }
}

impl From<ccl_core::Error> for CliError {
    fn from(e: ccl_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use ccl_core::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Absent(_) => 7,
            CliError::Core(e) => match e {
                E::Io { .. } => 3,
                E::Format { .. } | E::Parse { .. } | E::Table { .. } | E::Json(_) => 4,
                E::Divergence { .. } => 6,
                E::Shape(_)
                | E::Domain(_)
                | E::DegenerateDataset(_)
                | E::IndexOutOfRange { .. }
                | E::UntrainedHead
                | E::UnknownReference(_)
                | E::InconsistentCompound(_) => 5,
            },
        }
    }
}

type Res<T = ()> = Result<T, CliError>;

fn init_threads() -> Res {
    let Ok(v) = std::env::var("CCL_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("CCL_THREADS must be a positive integer, got `{v}`")))?;
    // a second initialization in the same process is harmless
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn run(cli: &Cli) -> Res {
    init_threads()?;
    let g = &cli.global;
    if g.gate.is_nan() || g.gate < 0.0 {
        return Err(CliError::Usage(format!("gate {} must not be negative", g.gate)));
    }
    for m in &g.manifests {
        io::read_manifest(m)?;
    }
    match &cli.command {
        Command::Synth(a) => synth(g, a),
        Command::Train(a) => train(g, a),
        Command::Probe(a) => probe(g, a),
        Command::Predict(a) => predict(g, a),
        Command::Quantify(a) => quantify(g, a),
        Command::Tree(a) => tree(g, a),
        Command::Rank(a) => rank(g, a),
        Command::Sort(a) => sort(g, a),
        Command::Tcav(a) => tcav(g, a),
    }
}

fn write_concept_set(dir: &Path, set: &ConceptDataset, files: &mut Vec<String>) -> Res {
    for (side, m) in [("pos", &set.positives), ("neg", &set.negatives)] {
        let rel = format!("concepts/{}.{side}.cbe1", slug(&set.name));
        io::write_cbe1(&to_f32(m), dir.join(&rel))?;
        files.push(rel);
    }
    Ok(())
}

fn labels_csv(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for (i, r) in rows.enumerate() {
        let _ = writeln!(out, "{i},{}", r.join(","));
    }
    out
}

fn synth(g: &Global, a: &SynthArgs) -> Res {
    let dir = out_dir(&g.out)?;
    std::fs::create_dir_all(dir.join("concepts")).map_err(|e| crate::files::io_err(&dir, e))?;
    let mut files = vec!["inputs.cbe1".to_string(), "labels.csv".to_string(), "spec.json".to_string()];
    let n_samples;
    match a.kind {
        SynthKind::Color | SynthKind::Caption => {
            let base = if a.kind == SynthKind::Color {
                SyntheticSpec::default()
            } else {
                SyntheticSpec::caption_defaults()
            };
            let spec = SyntheticSpec {
                n_classes: a.classes.unwrap_or(base.n_classes),
                samples_per_class: a.samples_per_class,
                glyph_noise: a.glyph_noise.unwrap_or(base.glyph_noise),
                correlated: a.correlated,
                seed: g.seed,
                ..base
            };
            let (inputs, labels, feature, analog, column) = if a.kind == SynthKind::Color {
                let d = gen_color_dataset(&spec)?;
                (d.inputs, d.labels, d.pairs, spec.color_analog(), "pair")
            } else {
                let d = gen_caption_dataset(&spec)?;
                (d.inputs, d.labels, d.tokens, spec.caption_analog(), "token")
            };
            n_samples = inputs.nrows();
            io::write_cbe1(&to_f32(&inputs), dir.join("inputs.cbe1"))?;
            let rows = labels.iter().zip(&feature).map(|(l, f)| vec![l.to_string(), f.to_string()]);
            write_text(&dir.join("labels.csv"), &labels_csv(&["sample_id", "label", column], rows))?;
            for k in 0..spec.n_classes {
                let f = if a.kind == SynthKind::Color {
                    ConceptFeature::ColorPair { spec, pair: k }
                } else {
                    ConceptFeature::CaptionToken { spec, token: k }
                };
                let set = make_concept_set(&inputs, &f, a.concept_per_side, g.seed.wrapping_add(1 + k as u64))?;
                write_concept_set(&dir, &set, &mut files)?;
            }
            let kind = if a.kind == SynthKind::Color { "color" } else { "caption" };
            write_json(&dir.join("spec.json"), &json!({ "kind": kind, "analog": analog, "spec": spec }))?;
        }
        SynthKind::Flags => {
            let spec = FlagSpec {
                n_samples: a.samples,
                seed: g.seed,
                ..FlagSpec::default()
            };
            let formula = Formula::parse(&a.formula)?;
            let data = gen_flag_dataset(&spec)?;
            let mut names: Vec<String> = formula.variables().iter().map(|s| s.to_string()).collect();
            if names.len() > spec.n_concepts {
                return Err(CliError::Usage(format!(
                    "formula uses {} variables, flag datasets have {}",
                    names.len(),
                    spec.n_concepts
                )));
            }
            for k in names.len()..spec.n_concepts {
                names.push(format!("flag{k}"));
            }
            let labels = gen_boolean_task(&data.flags, &names, &formula)?;
            n_samples = data.inputs.nrows();
            io::write_cbe1(&to_f32(&data.inputs), dir.join("inputs.cbe1"))?;
            let mut header = vec!["sample_id", "label"];
            header.extend(names.iter().map(String::as_str));
            let rows = labels.iter().zip(&data.flags).map(|(l, f)| {
                std::iter::once(l.to_string())
                    .chain(f.iter().map(|b| u8::from(*b).to_string()))
                    .collect()
            });
            write_text(&dir.join("labels.csv"), &labels_csv(&header, rows))?;
            for (k, name) in names.iter().enumerate() {
                let set = flag_concept_set(&spec, k, name, a.concept_per_side, g.seed.wrapping_add(1 + k as u64))?;
                write_concept_set(&dir, &set, &mut files)?;
            }
            write_json(
                &dir.join("spec.json"),
                &json!({ "kind": "flags", "formula": a.formula, "concepts": names, "spec": spec }),
            )?;
        }
    }
    let refs: Vec<&str> = files.iter().map(String::as_str).collect();
    let manifest = Manifest::describe("synthetic", None, n_samples, &dir, &refs)?;
    // concept sets have their own row counts, so only the inputs are row-checked
    let manifest = Manifest {
        files: manifest
            .files
            .into_iter()
            .filter(|f| !f.path.starts_with("concepts/"))
            .collect(),
        ..manifest
    };
    io::write_manifest(&manifest, dir.join("manifest.json"))?;
    Ok(())
}

fn train(g: &Global, a: &TrainArgs) -> Res {
    let x = read_matrix(&a.inputs)?;
    let labels = read_labels(&a.labels)?;
    if labels.labels.len() != x.nrows() {
        return Err(ccl_core::Error::Shape(format!("{} labels for {} input rows", labels.labels.len(), x.nrows())).into());
    }
    let classes = labels.labels.iter().max().map_or(0, |m| m + 1).max(2);
    let net = FeedforwardNet::classifier(x.ncols(), a.embed.unwrap_or(x.ncols()), &a.hidden, classes, g.seed)?;
    let config = TrainConfig {
        epochs: a.epochs,
        learning_rate: a.lr,
        momentum: a.momentum,
        batch_size: a.batch_size,
        seed: g.seed,
    };
    let outcome = net.train(&x, &one_hot(&labels.labels, classes)?, &config)?;
    let accuracy = outcome.net.accuracy(&x, &labels.labels)?;
    let dir = out_dir(&g.out)?;
    io::save_network(&outcome.net, dir.join("net.bin"))?;
    write_json(
        &dir.join("train.json"),
        &json!({ "classes": classes, "train_accuracy": accuracy, "losses": outcome.losses, "config": config }),
    )
}

fn probe_config(g: &Global, epochs: usize) -> ProbeConfig {
    let base = ProbeConfig::default();
    ProbeConfig {
        train: TrainConfig {
            epochs,
            seed: g.seed,
            ..base.train
        },
        ..base
    }
}

fn profile_csv(profile: &[LayerProbe]) -> String {
    let mut out = String::from("split_layer,accuracy,passed\n");
    for p in profile {
        let _ = writeln!(out, "{},{},{}", p.split_layer, format_sig9(p.validation_accuracy), p.passed);
    }
    out
}

fn probe(g: &Global, a: &ProbeArgs) -> Res {
    let net = io::load_network(&a.net)?;
    let name = a.name.clone().unwrap_or_else(|| stem(&a.positives));
    let data = ConceptDataset::new(name.clone(), read_matrix(&a.positives)?, read_matrix(&a.negatives)?)?;
    let config = probe_config(g, a.epochs);
    let (head, profile) = if a.sweep {
        match locate_concept_layer(&net, &data, g.gate, &config)? {
            LayerSearch::Found { head, profile, .. } => (Some(head), profile),
            LayerSearch::Absent { profile } => (None, profile),
        }
    } else {
        let layer = a.layer.expect("clap requires --layer without --sweep");
        let split = split_at(&net, layer)?;
        let head = train_concept_head(&make_concept_head(&split, g.seed), &split, &data, &config)?;
        let accuracy = head.validation_metric.unwrap_or(0.0);
        let passed = accuracy >= g.gate;
        let p = LayerProbe {
            split_layer: layer,
            validation_accuracy: accuracy,
            passed,
        };
        (passed.then_some(head), vec![p])
    };
    let dir = out_dir(&g.out)?;
    let base = slug(&name);
    write_text(&dir.join(format!("probe_{base}.csv")), &profile_csv(&profile))?;
    write_json(
        &dir.join(format!("probe_{base}.json")),
        &json!({
            "concept": name,
            "gate": g.gate,
            "present": head.is_some(),
            "split_layer": head.as_ref().map(|h| h.split_layer),
            "profile": profile,
        }),
    )?;
    match head {
        Some(h) => {
            io::save_concept_head(&h, dir.join(format!("head_{base}.bin")))?;
            Ok(())
        }
        None => Err(CliError::Absent(format!("`{name}` did not reach gate {} at any probed split", g.gate))),
    }
}

fn parse_named(spec: &str) -> Res<(String, PathBuf)> {
    spec.split_once('=')
        .map(|(n, p)| (n.trim().to_string(), PathBuf::from(p.trim())))
        .ok_or_else(|| CliError::Usage(format!("`{spec}` is not <name>=<path>")))
}

fn sample_ids(ids: Option<&Path>, n: usize) -> Res<Vec<String>> {
    match ids {
        Some(p) => {
            let l = read_labels(p)?;
            if l.ids.len() != n {
                return Err(ccl_core::Error::Shape(format!("{} sample ids for {n} rows", l.ids.len())).into());
            }
            Ok(l.ids)
        }
        None => Ok((0..n).map(|i| i.to_string()).collect()),
    }
}

fn predict(g: &Global, a: &PredictArgs) -> Res {
    let net = io::load_network(&a.net)?;
    let x = read_matrix(&a.inputs)?;
    let mut heads = Vec::new();
    for spec in &a.heads {
        let (name, path) = parse_named(spec)?;
        heads.push((name, io::load_concept_head(&path)?));
    }
    let layer = heads.first().map_or(a.layer, |(_, h)| h.split_layer);
    let split = split_at(&net, layer)?;
    let classes = a
        .class_names
        .clone()
        .unwrap_or_else(|| (0..net.output_width()).map(|k| k.to_string()).collect());
    let refs: Vec<(String, &ConceptHead)> = heads.iter().map(|(n, h)| (n.clone(), h)).collect();
    let mut pred = predict_matrices(&split, &classes, &refs, &x)?;
    pred.sample_ids = sample_ids(a.ids.as_deref(), x.nrows())?;
    let dir = out_dir(&g.out)?;
    io::write_prediction_table(&pred, dir.join(&a.name))?;
    Ok(())
}

#[derive(Serialize)]
struct RelationReport {
    relation: &'static str,
    auc: f64,
    evidence: ccl_core::quantify::Evidence,
}

fn relation_report(scores: &ccl_core::RelationScores) -> Vec<RelationReport> {
    Relation::ALL
        .iter()
        .map(|r| RelationReport {
            relation: r.name(),
            auc: scores.auc(*r),
            evidence: scores.curve(*r).evidence(),
        })
        .collect()
}

fn quantify(g: &Global, a: &QuantifyArgs) -> Res {
    let pred = io::read_prediction_table(&a.predictions)?;
    let task = pred.task_column(pred.class_index(&a.class)?)?;
    let concept = pred.concept_column(pred.concept_index(&a.concept)?)?;
    let scores = relation_scores(&task, &concept, g.grid_size)?;
    let dir = out_dir(&g.out)?;
    let base = format!("{}_{}", slug(&a.class), slug(&a.concept));
    let title = format!("{} / {}", a.class, a.concept);
    write_text(&dir.join(format!("curves_{base}.csv")), &report::curves_csv(&scores))?;
    write_text(&dir.join(format!("curves_{base}.svg")), &report::curves_svg(&scores, &title))?;
    write_text(&dir.join(format!("scatter_{base}.csv")), &report::scatter_csv(&pred.sample_ids, &task, &concept)?)?;
    write_text(&dir.join(format!("scatter_{base}.svg")), &report::scatter_svg(&task, &concept, &title)?)?;
    let mut summary = json!({
        "class": a.class,
        "concept": a.concept,
        "grid_size": g.grid_size,
        "n_samples": pred.n_samples(),
        "relations": relation_report(&scores),
    });
    if a.surface {
        let surface = implication_surface(&task, &concept, g.grid_size, g.grid_size)?;
        write_text(&dir.join(format!("surface_{base}.csv")), &report::surface_csv(&surface))?;
        summary["surface_volume"] = json!(surface.volume);
    }
    write_json(&dir.join(format!("quantify_{base}.json")), &summary)
}

fn tree(g: &Global, a: &TreeArgs) -> Res {
    let pred = io::read_prediction_table(&a.predictions)?;
    let concepts = binarize_concepts(&pred, &parse_thresholds(&g.thresholds)?)?;
    let labels = pred.predicted_labels();
    let params = TreeParams {
        min_per_class: g.min_per_class,
        criterion: match a.criterion {
            CriterionArg::Gini => Criterion::Gini,
            CriterionArg::Entropy => Criterion::Entropy,
        },
        max_depth: a.max_depth,
    };
    let finish = |t: ccl_core::hierarchy::ConceptTree| if a.no_merge { t } else { merge_leaves(&t) };
    let dir = out_dir(&g.out)?;
    let mut report_rows = Vec::new();
    let mut compounds = String::from("class,leaf,label,compound");
    for r in Relation::ALL {
        compounds.push(',');
        compounds.push_str(r.name());
    }
    compounds.push('\n');
    let trees = match a.mode {
        TreeMode::Multi => vec![("tree".to_string(), finish(fit_tree(&concepts, &labels, &pred.class_names, &params)?))],
        TreeMode::PerClass => {
            let mut out = Vec::new();
            for k in 0..pred.class_names.len() {
                if !labels.contains(&k) {
                    continue;
                }
                let t = finish(fit_class_tree(&concepts, &labels, &pred.class_names, k, &params)?);
                out.push((format!("tree_{}", slug(&pred.class_names[k])), t));
            }
            out
        }
    };
    let tnorm = match a.tnorm {
        TNormArg::Product => TNorm::Product,
        TNormArg::Min => TNorm::Min,
    };
    for (base, t) in &trees {
        write_text(&dir.join(format!("{base}.txt")), &io::export_tree_text(t))?;
        write_text(&dir.join(format!("{base}.json")), &io::export_tree_json(t)?)?;
        report_rows.push(json!({
            "file": base,
            "class": t.title,
            "leaves": t.n_leaves(),
            "depth": t.depth(),
            "faithfulness": faithfulness(t, &concepts, &labels)?,
        }));
        if a.compound {
            let Some(target) = t.target_class else {
                continue;
            };
            let task = pred.task_column(target)?;
            if t.n_leaves() < 2 {
                continue;
            }
            for c in compound_concepts(t)? {
                let scores = relation_scores(&task, &compound_probability(&c, &pred, tnorm)?, g.grid_size)?;
                let _ = write!(compounds, "{},{},{},\"{}\"", pred.class_names[target], c.source_leaf, c.label, c.name());
                for auc in scores.aucs() {
                    compounds.push(',');
                    compounds.push_str(&format_sig9(auc));
                }
                compounds.push('\n');
            }
        }
    }
    if a.compound {
        write_text(&dir.join("compounds.csv"), &compounds)?;
    }
    write_json(&dir.join("faithfulness.json"), &json!({ "mode": format!("{:?}", a.mode), "trees": report_rows }))
}

/// Concatenates the concept columns of several tables over the same samples
/// and classes; with more than one table, concept names gain a file prefix.
fn merge_tables(paths: &[PathBuf]) -> Res<PredictionMatrix> {
    let tables: Vec<PredictionMatrix> = paths.iter().map(io::read_prediction_table).collect::<Result<_, _>>()?;
    let first = &tables[0];
    if tables.len() == 1 {
        return Ok(first.clone());
    }
    let mut names = Vec::new();
    let mut cols = Vec::new();
    for (t, p) in tables.iter().zip(paths) {
        if t.sample_ids != first.sample_ids || t.class_names != first.class_names {
            return Err(ccl_core::Error::Shape(format!(
                "{} does not share samples and classes with {}",
                p.display(),
                paths[0].display()
            ))
            .into());
        }
        let prefix = stem(p);
        names.extend(t.concept_names.iter().map(|c| format!("{prefix}:{c}")));
        cols.push(t.concepts.view());
    }
    let concepts = ndarray::concatenate(Axis(1), &cols).expect("row counts checked");
    Ok(PredictionMatrix::new(
        first.sample_ids.clone(),
        first.class_names.clone(),
        names,
        first.task.clone(),
        concepts,
    )?)
}

fn rank(g: &Global, a: &RankArgs) -> Res {
    let pred = merge_tables(&a.predictions)?;
    let (nk, nc) = (pred.class_names.len(), pred.concept_names.len());
    let flat: Vec<[f64; 4]> = (0..nk * nc)
        .into_par_iter()
        .map(|i| {
            let task = pred.task_column(i / nc)?;
            Ok(relation_scores(&task, &pred.concept_column(i % nc)?, g.grid_size)?.aucs())
        })
        .collect::<Result<_, ccl_core::Error>>()?;
    let scores: Vec<Vec<[f64; 4]>> = flat.chunks(nc.max(1)).take(nk).map(<[_]>::to_vec).collect();
    let scores = if nc == 0 { vec![Vec::new(); nk] } else { scores };
    let ranking = rank_concepts(&pred.class_names, &pred.concept_names, &scores, a.top_k)?;
    let mut csv = String::from("class,rank,concept");
    for r in Relation::ALL {
        csv.push(',');
        csv.push_str(r.name());
    }
    csv.push('\n');
    for cr in &ranking {
        for (i, c) in cr.concepts.iter().enumerate() {
            let _ = write!(csv, "{},{},{}", cr.class, i + 1, c.concept);
            for v in c.aucs {
                csv.push(',');
                csv.push_str(&format_sig9(v));
            }
            csv.push('\n');
        }
    }
    let dir = out_dir(&g.out)?;
    write_text(&dir.join("ranking.csv"), &csv)?;
    write_json(&dir.join("ranking.json"), &ranking)
}

fn sort(g: &Global, a: &SortArgs) -> Res {
    let head = io::load_concept_head(&a.head)?;
    let z = match (&a.net, &a.inputs, &a.activations) {
        (Some(net), Some(inputs), _) => {
            let split = split_at(&io::load_network(net)?, head.split_layer)?;
            split.activations(&read_matrix(inputs)?)?
        }
        (_, _, Some(acts)) => read_matrix(acts)?,
        _ => return Err(CliError::Usage("give --net with --inputs, or --activations".into())),
    };
    let out = ProbVector::new(head.predict(&z)?)?;
    let ids = sample_ids(a.ids.as_deref(), z.nrows())?;
    let (low, high) = extreme_samples(&ids, &out, a.k)?;
    let mut csv = String::from("end,rank,sample_id,output\n");
    for (end, list) in [("min", &low), ("max", &high)] {
        for (i, s) in list.iter().enumerate() {
            let _ = writeln!(csv, "{end},{},{},{}", i + 1, s.sample_id, format_sig9(s.output));
        }
    }
    let dir = out_dir(&g.out)?;
    write_text(&dir.join(format!("sorted_{}.csv", slug(&stem(&a.head)))), &csv)
}

#[derive(Serialize)]
struct Variant {
    tcav_score: f64,
    concept_accuracy: f64,
    n_derivatives: usize,
}

fn tcav(g: &Global, a: &TcavArgs) -> Res {
    let net = io::load_network(&a.net)?;
    let dist = read_matrix(&a.inputs)?;
    let positives = read_matrix(&a.positives)?;
    let name = a.name.clone().unwrap_or_else(|| stem(&a.positives));
    let concept_set = match &a.negatives {
        Some(p) => ConceptDataset::new(name.clone(), positives.clone(), read_matrix(p)?)?,
        None => random_counterexamples(&positives, &dist, &name, g.seed)?,
    };
    let config = probe_config(g, ProbeConfig::default().train.epochs);
    let (split, head): (NetworkSplit, ConceptHead) = match a.layer {
        Some(layer) => {
            let split = split_at(&net, layer)?;
            let head = train_concept_head(&make_concept_head(&split, g.seed), &split, &concept_set, &config)?;
            (split, head)
        }
        None => match locate_concept_layer(&net, &concept_set, g.gate, &config)? {
            LayerSearch::Found { split_layer, head, .. } => (split_at(&net, split_layer)?, head),
            LayerSearch::Absent { .. } => {
                return Err(CliError::Absent(format!("`{name}` did not reach gate {} at any split", g.gate)))
            }
        },
    };
    if a.class >= net.output_width() {
        return Err(ccl_core::Error::IndexOutOfRange {
            index: a.class,
            valid: format!("0..{}", net.output_width()),
        }
        .into());
    }
    let z = split.activations(&dist)?;
    let task = split.head.forward(&z)?;
    let scores = relation_scores(
        &ProbVector::new(task.column(a.class).to_vec())?,
        &ProbVector::new(head.predict(&z)?)?,
        g.grid_size,
    )?;
    let zs: Array2<f64> = if a.class_only {
        let labels = split.head.predict_labels(&z)?;
        let rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == a.class).collect();
        z.select(Axis(0), &rows)
    } else {
        z
    };
    let cav_set = random_counterexamples(&positives, &dist, &name, g.seed.wrapping_add(1))?;
    let lin = train_linear_probe(&split, &cav_set, &LinearConfig { seed: g.seed, ..LinearConfig::default() })?;
    let d_lin = directional_derivatives(&split, a.class, &zs, &cav_direction(&lin)?)?;
    let d_non = directional_derivatives_nonlinear(&split, a.class, &zs, &head)?;
    let dir = out_dir(&g.out)?;
    let base = slug(&name);
    for (kind, d) in [("linear", &d_lin), ("nonlinear", &d_non)] {
        let h = histogram(d, a.bins)?;
        write_text(&dir.join(format!("tcav_{base}_{kind}.csv")), &report::histogram_csv(&h))?;
        let title = format!("{kind} directional derivatives, {name}");
        write_text(&dir.join(format!("tcav_{base}_{kind}.svg")), &report::histogram_svg(&h, &title))?;
    }
    write_json(
        &dir.join(format!("tcav_{base}.json")),
        &json!({
            "concept": name,
            "class": a.class,
            "split_layer": split.split_layer,
            "class_only": a.class_only,
            "linear": Variant { tcav_score: tcav_score(&d_lin)?, concept_accuracy: lin.validation_metric, n_derivatives: d_lin.len() },
            "nonlinear": Variant {
                tcav_score: tcav_score(&d_non)?,
                concept_accuracy: head.validation_metric.unwrap_or(0.0),
                n_derivatives: d_non.len(),
            },
            "relations": relation_report(&scores),
        }),
    )
}
