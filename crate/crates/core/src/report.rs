//! Plain-text report artifacts: CSV tables and standalone SVG plots.

use std::fmt::Write as _;

use crate::baselines::Histogram;
use crate::error::{Error, Result};
use crate::io::format_sig9;
use crate::quantify::{ProbVector, QuantSurface, Relation, RelationScores};

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 48.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

pub fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
        .replace('\'', "&apos;")
}

/// One row per threshold, one column per relation.
pub fn curves_csv(scores: &RelationScores) -> String {
    let mut out = String::from("threshold");
    for r in Relation::ALL {
        out.push(',');
        out.push_str(r.name());
    }
    out.push('\n');
    let ts = &scores.necessary.thresholds;
    for (k, t) in ts.iter().enumerate() {
        out.push_str(&format_sig9(*t));
        for r in Relation::ALL {
            out.push(',');
            out.push_str(&format_sig9(scores.curve(r).f1[k]));
        }
        out.push('\n');
    }
    out
}

pub fn surface_csv(surface: &QuantSurface) -> String {
    let mut out = String::from("t_task,t_concept,f1\n");
    for (i, tt) in surface.t_task.iter().enumerate() {
        for (j, tc) in surface.t_concept.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", format_sig9(*tt), format_sig9(*tc), format_sig9(surface.f1[i][j]));
        }
    }
    out
}

pub fn scatter_csv(sample_ids: &[String], task: &ProbVector, concept: &ProbVector) -> Result<String> {
    if sample_ids.len() != task.len() || task.len() != concept.len() {
        return Err(Error::shape("scatter columns differ in length"));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let table_err = |e: csv::Error| Error::Table {
        row: 0,
        message: e.to_string(),
    };
    w.write_record(["sample_id", "task", "concept"]).map_err(table_err)?;
    for ((id, t), c) in sample_ids.iter().zip(task.as_slice()).zip(concept.as_slice()) {
        w.write_record([id.as_str(), &format_sig9(*t), &format_sig9(*c)]).map_err(table_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Table {
        row: 0,
        message: e.to_string(),
    })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn histogram_csv(h: &Histogram) -> String {
    let mut out = String::from("lower,upper,count\n");
    for (k, c) in h.counts.iter().enumerate() {
        let _ = writeln!(out, "{},{},{c}", format_sig9(h.edges[k]), format_sig9(h.edges[k + 1]));
    }
    out
}

fn px(x: f64, lo: f64, hi: f64) -> f64 {
    MARGIN + (x - lo) / (hi - lo).max(f64::MIN_POSITIVE) * (WIDTH - 2.0 * MARGIN)
}

fn py(y: f64, lo: f64, hi: f64) -> f64 {
    HEIGHT - MARGIN - (y - lo) / (hi - lo).max(f64::MIN_POSITIVE) * (HEIGHT - 2.0 * MARGIN)
}

fn svg_open(title: &str) -> String {
    let mut s = format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    );
    let _ = writeln!(s, "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>",
        WIDTH / 2.0,
        xml_escape(title)
    );
    s
}

fn axes(s: &mut String, x_label: &str, y_label: &str) {
    let (x0, y0, x1, y1) = (MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN, MARGIN);
    let _ = writeln!(
        s,
        "<path d=\"M{x0} {y1} L{x0} {y0} L{x1} {y0}\" fill=\"none\" stroke=\"black\"/>"
    );
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"11\">{}</text>",
        WIDTH / 2.0,
        HEIGHT - MARGIN + 28.0,
        xml_escape(x_label)
    );
    let _ = writeln!(
        s,
        "<text x=\"14\" y=\"{}\" font-size=\"11\" transform=\"rotate(-90 14 {})\" text-anchor=\"middle\">{}</text>",
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        xml_escape(y_label)
    );
}

/// The four quantification curves with their AUCs listed below the plot.
pub fn curves_svg(scores: &RelationScores, title: &str) -> String {
    let mut s = svg_open(title);
    axes(&mut s, "threshold", "F1");
    for (r, color) in Relation::ALL.into_iter().zip(COLORS) {
        let c = scores.curve(r);
        let points: Vec<String> = c
            .thresholds
            .iter()
            .zip(&c.f1)
            .map(|(t, f)| format!("{:.2},{:.2}", px(*t, 0.0, 1.0), py(*f, 0.0, 1.0)))
            .collect();
        let _ = writeln!(
            s,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
            points.join(" ")
        );
    }
    let legend: Vec<String> = Relation::ALL
        .iter()
        .map(|r| format!("{}: AUC={:.2}", r.name(), scores.auc(*r)))
        .collect();
    for (k, (line, color)) in legend.iter().zip(COLORS).enumerate() {
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" font-size=\"10\" fill=\"{color}\">{}</text>",
            MARGIN + (k % 2) as f64 * 200.0,
            HEIGHT - 10.0 - (1 - k / 2) as f64 * 12.0,
            xml_escape(line)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Task probability against concept probability, one dot per sample.
pub fn scatter_svg(task: &ProbVector, concept: &ProbVector, title: &str) -> Result<String> {
    if task.len() != concept.len() {
        return Err(Error::shape("scatter columns differ in length"));
    }
    let mut s = svg_open(title);
    axes(&mut s, "concept", "task");
    for (t, c) in task.as_slice().iter().zip(concept.as_slice()) {
        let _ = writeln!(
            s,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"1.5\" fill=\"#1f77b4\" fill-opacity=\"0.5\"/>",
            px(*c, 0.0, 1.0),
            py(*t, 0.0, 1.0)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn histogram_svg(h: &Histogram, title: &str) -> String {
    let mut s = svg_open(title);
    axes(&mut s, "directional derivative", "count");
    let (lo, hi) = (h.edges[0], *h.edges.last().expect("histogram has edges"));
    let top = h.counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    for (k, &c) in h.counts.iter().enumerate() {
        let (x0, x1) = (px(h.edges[k], lo, hi), px(h.edges[k + 1], lo, hi));
        let y = py(c as f64, 0.0, top);
        let _ = writeln!(
            s,
            "<rect x=\"{x0:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#1f77b4\"/>",
            (x1 - x0).max(0.0),
            (HEIGHT - MARGIN - y).max(0.0)
        );
    }
    if lo < 0.0 && hi > 0.0 {
        let z = px(0.0, lo, hi);
        let _ = writeln!(
            s,
            "<line x1=\"{z:.2}\" y1=\"{MARGIN}\" x2=\"{z:.2}\" y2=\"{}\" stroke=\"black\" stroke-dasharray=\"4 2\"/>",
            HEIGHT - MARGIN
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::histogram;
    use crate::quantify::{implication_surface, relation_scores};

    fn pv(v: &[f64]) -> ProbVector {
        ProbVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn svg_documents_parse() {
        let t = pv(&[0.1, 0.9, 0.4, 0.7]);
        let c = pv(&[0.2, 0.8, 0.5, 0.3]);
        let scores = relation_scores(&t, &c, 11).unwrap();
        for doc in [
            curves_svg(&scores, "class <a> & \"b\""),
            scatter_svg(&t, &c, "s").unwrap(),
            histogram_svg(&histogram(&[-1.0, 0.5, 2.0], 5).unwrap(), "h"),
        ] {
            roxmltree::Document::parse(&doc).unwrap();
        }
    }

    #[test]
    fn csv_shapes() {
        let t = pv(&[0.1, 0.9]);
        let scores = relation_scores(&t, &t, 11).unwrap();
        let csv = curves_csv(&scores);
        assert_eq!(csv.lines().count(), 12);
        assert!(csv.starts_with("threshold,necessary,sufficient,negative_necessary,negative_sufficient\n"));
        let surf = implication_surface(&t, &t, 3, 4).unwrap();
        assert_eq!(surface_csv(&surf).lines().count(), 13);
        let sc = scatter_csv(&["a".into(), "b".into()], &t, &t).unwrap();
        assert_eq!(sc, "sample_id,task,concept\na,0.1,0.1\nb,0.9,0.9\n");
        let h = histogram(&[0.0, 1.0], 2).unwrap();
        assert_eq!(histogram_csv(&h).lines().count(), 3);
    }
}
