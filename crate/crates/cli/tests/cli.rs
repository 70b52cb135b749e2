use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn ccl(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ccl"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = ccl(dir, args);
    assert!(
        out.status.success(),
        "ccl {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn read(dir: &Path, rel: &str) -> String {
    std::fs::read_to_string(dir.join(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

const SMALL: &[&str] = &["--samples-per-class", "40", "--concept-per-side", "60", "--classes", "3"];

fn synth(dir: &Path, out: &str, seed: &str, extra: &[&str]) {
    let mut args = vec!["--out", out, "--seed", seed, "synth"];
    args.extend_from_slice(SMALL);
    args.extend_from_slice(extra);
    ok(dir, &args);
}

#[test]
fn synth_is_deterministic_per_seed() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    synth(d, "a", "3", &[]);
    synth(d, "b", "3", &[]);
    synth(d, "c", "4", &[]);
    for f in ["inputs.cbe1", "labels.csv", "concepts/color_pair_1.pos.cbe1", "manifest.json"] {
        assert_eq!(std::fs::read(d.join("a").join(f)).unwrap(), std::fs::read(d.join("b").join(f)).unwrap(), "{f}");
    }
    assert_ne!(read(d, "a/manifest.json"), read(d, "c/manifest.json"));
    assert_eq!(read(d, "a/labels.csv").lines().count(), 1 + 3 * 40);
}

#[test]
fn uncorrelated_synth_is_recorded_in_sidecar() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    synth(d, "u", "0", &["--correlated", "false"]);
    synth(d, "k", "0", &["--kind", "caption"]);
    let spec: serde_json::Value = serde_json::from_str(&read(d, "u/spec.json")).unwrap();
    assert_eq!(spec["analog"], "ColorDataset2");
    assert_eq!(spec["spec"]["correlated"], false);
    let spec: serde_json::Value = serde_json::from_str(&read(d, "k/spec.json")).unwrap();
    assert_eq!(spec["kind"], "caption");
    assert!(d.join("k/concepts/caption_0.neg.cbe1").exists());
}

#[test]
fn flag_synth_writes_one_concept_set_per_flag() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(d, &["--out", "f", "synth", "--kind", "flags", "--samples", "64", "--concept-per-side", "10"]);
    let header = read(d, "f/labels.csv").lines().next().unwrap().to_string();
    assert!(header.starts_with("sample_id,label,A,B,C,D"), "{header}");
    for name in ["A", "B", "C", "D"] {
        assert!(d.join(format!("f/concepts/{name}.pos.cbe1")).exists());
    }
    let bad = ccl(d, &["--out", "g", "synth", "--kind", "flags", "--formula", "A &"]);
    assert_eq!(code(&bad), 4);
}

/// Synthetic data, a trained net, one head per class concept at split 3,
/// and a prediction table. Gate 0 so every head is kept.
fn pipeline() -> TempDir {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    synth(d, "d", "0", &[]);
    ok(d, &["--out", "m", "train", "--inputs", "d/inputs.cbe1", "--labels", "d/labels.csv", "--hidden", "16,16", "--epochs", "5"]);
    let mut predict = vec!["--out", "m", "predict", "--net", "m/net.bin", "--inputs", "d/inputs.cbe1", "--ids", "d/labels.csv"];
    let specs: Vec<String> = (0..3).map(|k| format!("p{k}=m/head_color_pair_{k}.bin")).collect();
    for k in 0..3 {
        let pos = format!("d/concepts/color_pair_{k}.pos.cbe1");
        let neg = format!("d/concepts/color_pair_{k}.neg.cbe1");
        let args = ["--out", "m", "--gate", "0", "probe", "--net", "m/net.bin", "--positives", &pos, "--negatives", &neg];
        ok(d, &[&args[..], &["--layer", "3", "--epochs", "5"]].concat());
    }
    for s in &specs {
        predict.extend(["--head", s.as_str()]);
    }
    ok(d, &predict);
    tmp
}

#[test]
fn unreachable_gate_reports_absent_concept() {
    let tmp = pipeline();
    let d = tmp.path();
    let out = ccl(
        d,
        &[
            "--out", "m", "--gate", "1.01", "probe", "--net", "m/net.bin", "--positives",
            "d/concepts/color_pair_0.pos.cbe1", "--negatives", "d/concepts/color_pair_0.neg.cbe1", "--sweep", "--epochs", "2",
        ],
    );
    assert_eq!(code(&out), 7, "{}", String::from_utf8_lossy(&out.stderr));
    let profile = read(d, "m/probe_color_pair_0.csv");
    assert_eq!(profile.lines().count(), 1 + 3, "every split probed: {profile}");
    assert!(profile.lines().skip(1).all(|l| l.ends_with("false")));
}

#[test]
fn quantify_writes_curves_and_parseable_svg() {
    let tmp = pipeline();
    let d = tmp.path();
    ok(d, &["--out", "q", "--grid-size", "21", "quantify", "--predictions", "m/predictions.csv", "--class", "0", "--concept", "p0", "--surface"]);
    for f in ["curves_0_p0.svg", "scatter_0_p0.svg"] {
        let svg = read(d, &format!("q/{f}"));
        let doc = roxmltree::Document::parse(&svg).unwrap_or_else(|e| panic!("{f}: {e}"));
        assert_eq!(doc.root_element().tag_name().name(), "svg");
    }
    assert_eq!(read(d, "q/curves_0_p0.csv").lines().count(), 1 + 21);
    let summary: serde_json::Value = serde_json::from_str(&read(d, "q/quantify_0_p0.json")).unwrap();
    let rel = summary["relations"].as_array().unwrap();
    assert_eq!(rel.len(), 4);
    // necessary and negative sufficient are mirror images
    let (nec, negsuf) = (rel[0]["auc"].as_f64().unwrap(), rel[3]["auc"].as_f64().unwrap());
    assert!((0.0..=1.0).contains(&nec) && (0.0..=1.0).contains(&negsuf));
    assert!(summary["surface_volume"].as_f64().is_some());

    let missing = ccl(d, &["--out", "q", "quantify", "--predictions", "m/predictions.csv", "--class", "0", "--concept", "nope"]);
    assert_eq!(code(&missing), 5);
}

#[test]
fn per_class_trees_write_one_file_per_class() {
    let tmp = pipeline();
    let d = tmp.path();
    ok(d, &["--out", "t", "--threshold", "p0=0.3", "tree", "--predictions", "m/predictions.csv", "--mode", "per-class", "--compound"]);
    let labels: std::collections::BTreeSet<String> = read(d, "d/labels.csv")
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().to_string())
        .collect();
    let report: serde_json::Value = serde_json::from_str(&read(d, "t/faithfulness.json")).unwrap();
    let trees = report["trees"].as_array().unwrap();
    assert!(!trees.is_empty() && trees.len() <= labels.len());
    for t in trees {
        let file = t["file"].as_str().unwrap();
        assert!(read(d, &format!("t/{file}.txt")).starts_with(&format!("class: {}", t["class"].as_str().unwrap())));
        assert!(d.join(format!("t/{file}.json")).exists());
        assert!((0.0..=1.0).contains(&t["faithfulness"].as_f64().unwrap()));
    }
    assert!(read(d, "t/compounds.csv").starts_with("class,leaf,label,compound,necessary"));

    ok(d, &["--out", "t2", "tree", "--predictions", "m/predictions.csv"]);
    assert!(d.join("t2/tree.txt").exists());
    let bad = ccl(d, &["--out", "t3", "--threshold", "p0", "tree", "--predictions", "m/predictions.csv"]);
    assert_eq!(code(&bad), 2);
}

#[test]
fn rank_clamps_top_k_and_merges_tables() {
    let tmp = pipeline();
    let d = tmp.path();
    ok(d, &["--out", "r", "rank", "--predictions", "m/predictions.csv", "--top-k", "50"]);
    let csv = read(d, "r/ranking.csv");
    assert_eq!(csv.lines().count(), 1 + 3 * 3, "three concepts per class: {csv}");
    ok(d, &["--out", "r1", "rank", "--predictions", "m/predictions.csv", "--top-k", "1"]);
    assert_eq!(read(d, "r1/ranking.csv").lines().count(), 1 + 3);

    std::fs::copy(d.join("m/predictions.csv"), d.join("m/other.csv")).unwrap();
    ok(d, &["--out", "r2", "rank", "--predictions", "m/predictions.csv", "--predictions", "m/other.csv"]);
    let merged = read(d, "r2/ranking.csv");
    assert_eq!(merged.lines().count(), 1 + 3 * 6);
    assert!(merged.contains("other:p0") && merged.contains("predictions:p0"));

    // same result with a single worker
    let single = Command::new(env!("CARGO_BIN_EXE_ccl"))
        .current_dir(d)
        .env("CCL_THREADS", "1")
        .args(["--out", "r3", "rank", "--predictions", "m/predictions.csv", "--top-k", "50"])
        .output()
        .unwrap();
    assert!(single.status.success());
    assert_eq!(read(d, "r3/ranking.csv"), csv);
}

#[test]
fn sort_lists_k_lowest_and_highest() {
    let tmp = pipeline();
    let d = tmp.path();
    ok(d, &["--out", "s", "sort", "--head", "m/head_color_pair_1.bin", "--net", "m/net.bin", "--inputs", "d/inputs.cbe1"]);
    let csv = read(d, "s/sorted_head_color_pair_1.csv");
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 10);
    assert_eq!(rows.iter().filter(|r| r[0] == "min").count(), 5);
    let outputs: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    assert!(outputs[..5].windows(2).all(|w| w[0] <= w[1]));
    assert!(outputs[5..].windows(2).all(|w| w[0] <= w[1]));
    assert!(outputs[4] <= outputs[5]);

    ok(d, &["--out", "s2", "sort", "--head", "m/head_color_pair_1.bin", "--net", "m/net.bin", "--inputs", "d/inputs.cbe1", "-k", "1000"]);
    assert_eq!(read(d, "s2/sorted_head_color_pair_1.csv").lines().count(), 1 + 2 * 120);

    let usage = ccl(d, &["--out", "s3", "sort", "--head", "m/head_color_pair_1.bin"]);
    assert_eq!(code(&usage), 2);
}

#[test]
fn tcav_reports_both_variants_with_default_bins() {
    let tmp = pipeline();
    let d = tmp.path();
    ok(
        d,
        &["--out", "v", "tcav", "--net", "m/net.bin", "--positives", "d/concepts/color_pair_0.pos.cbe1", "--inputs", "d/inputs.cbe1", "--class", "0", "--layer", "3"],
    );
    for kind in ["linear", "nonlinear"] {
        assert_eq!(read(d, &format!("v/tcav_color_pair_0_{kind}.csv")).lines().count(), 1 + 50);
        roxmltree::Document::parse(&read(d, &format!("v/tcav_color_pair_0_{kind}.svg"))).unwrap();
    }
    let report: serde_json::Value = serde_json::from_str(&read(d, "v/tcav_color_pair_0.json")).unwrap();
    for kind in ["linear", "nonlinear"] {
        let s = report[kind]["tcav_score"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&s));
        assert_eq!(report[kind]["n_derivatives"], 120);
    }
    assert_eq!(report["relations"].as_array().unwrap().len(), 4);

    let out_of_range = ccl(
        d,
        &["--out", "v", "tcav", "--net", "m/net.bin", "--positives", "d/concepts/color_pair_0.pos.cbe1", "--inputs", "d/inputs.cbe1", "--class", "9", "--layer", "3"],
    );
    assert_eq!(code(&out_of_range), 5);
}

#[test]
fn exit_codes_follow_error_kinds() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    assert_eq!(code(&ccl(d, &["quantify"])), 2);
    assert_eq!(code(&ccl(d, &["rank", "--predictions", "missing.csv"])), 3);

    std::fs::write(d.join("bad.cbe1"), b"XBE1\x01\0\0\0\0\0\0\0\0").unwrap();
    let bad = ccl(d, &["sort", "--head", "bad.cbe1", "--activations", "bad.cbe1"]);
    assert_eq!(code(&bad), 4);
    std::fs::write(d.join("p.csv"), "sample_id,task:a,concept:c\n0,1,2\n").unwrap();
    assert_eq!(code(&ccl(d, &["rank", "--predictions", "p.csv"])), 4);

    synth(d, "d", "0", &[]);
    ok(d, &["--manifest", "d/manifest.json", "--out", "r", "synth", "--samples-per-class", "2", "--concept-per-side", "2"]);
    std::fs::write(d.join("d/labels.csv"), "sample_id,label\n").unwrap();
    let tampered = ccl(d, &["--manifest", "d/manifest.json", "--out", "r", "synth"]);
    assert_eq!(code(&tampered), 4, "{}", String::from_utf8_lossy(&tampered.stderr));

    let threads = Command::new(env!("CARGO_BIN_EXE_ccl"))
        .current_dir(d)
        .env("CCL_THREADS", "zero")
        .args(["rank", "--predictions", "p.csv"])
        .output()
        .unwrap();
    assert_eq!(code(&threads), 2);
}
