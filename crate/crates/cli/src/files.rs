use std::path::{Path, PathBuf};

use ccl_core::hierarchy::{Cut, Thresholds, DEFAULT_CONCEPT_THRESHOLD};
use ccl_core::io::{read_cbe1, to_f64};
use ndarray::Array2;
use serde::Serialize;

use crate::commands::CliError;

pub fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Core(ccl_core::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

pub fn read_matrix(path: &Path) -> Result<Array2<f64>, CliError> {
    Ok(to_f64(&read_cbe1(path)?))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(ccl_core::Error::from)?;
    write_text(path, &(text + "\n"))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn out_dir(dir: &Path) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    Ok(dir.to_path_buf())
}

/// File-name-safe form of a class or concept name.
pub fn slug(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

pub fn stem(path: &Path) -> String {
    let name = path.file_name().and_then(|s| s.to_str()).unwrap_or("concept");
    name.split('.').next().unwrap_or(name).to_string()
}

pub struct Labels {
    pub ids: Vec<String>,
    pub labels: Vec<usize>,
}

/// Reads `sample_id` and `label` columns; other columns are ignored.
pub fn read_labels(path: &Path) -> Result<Labels, CliError> {
    let table = |row: usize, message: String| CliError::Core(ccl_core::Error::Table { row, message });
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => io_err(path, io),
        other => table(0, format!("{other:?}")),
    })?;
    let header = r.headers().map_err(|e| table(0, e.to_string()))?.clone();
    let find = |name: &str| header.iter().position(|h| h.trim() == name);
    let id_col = find("sample_id").ok_or_else(|| table(0, "missing `sample_id` column".into()))?;
    let label_col = find("label");
    let (mut ids, mut labels) = (Vec::new(), Vec::new());
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| table(i + 1, e.to_string()))?;
        ids.push(rec.get(id_col).unwrap_or_default().to_string());
        if let Some(c) = label_col {
            let cell = rec.get(c).unwrap_or_default();
            labels.push(cell.trim().parse().map_err(|_| table(i + 1, format!("label `{cell}` is not a class index")))?);
        }
    }
    if label_col.is_none() {
        labels.clear();
    }
    Ok(Labels { ids, labels })
}

pub fn parse_thresholds(specs: &[String]) -> Result<Thresholds, CliError> {
    let mut t = Thresholds::uniform(DEFAULT_CONCEPT_THRESHOLD);
    for spec in specs {
        let (name, value) = spec
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("threshold `{spec}` is not <concept>=<value>")))?;
        let values: Vec<f64> = value
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| CliError::Usage(format!("threshold `{spec}` has a non-numeric value")))?;
        let cut = if values.len() == 1 { Cut::Binary(values[0]) } else { Cut::Ordinal(values) };
        t = t.with(name.trim(), cut);
    }
    Ok(t)
}
