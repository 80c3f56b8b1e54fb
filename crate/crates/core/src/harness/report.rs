//! CSV tables and SVG charts from experiment results.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::svg::{BarChart, BarSeries, LineChart, Series};
use super::{CellResult, ExperimentResults};
use crate::error::{Error, Result};

pub const RESULTS_FILE: &str = "results.json";

pub fn save_results(results: &ExperimentResults, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(RESULTS_FILE);
    let text = serde_json::to_string(results)?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Read `results.json` from a directory (or the file itself).
pub fn load_results(path: impl AsRef<Path>) -> Result<ExperimentResults> {
    let path = path.as_ref();
    let file = if path.is_dir() { path.join(RESULTS_FILE) } else { path.to_path_buf() };
    let text = fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
    serde_json::from_str(&text).map_err(|e| Error::malformed(&file, e.to_string()))
}

fn field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn coords(c: &CellResult) -> String {
    format!(
        "{},{},{},{},{},{},{}",
        c.dataset.name(),
        c.method.name(),
        c.test.name(),
        field(&c.shift_label()),
        c.intensity_label(),
        c.delta(),
        c.sample_size
    )
}

const COORDS: &str = "dataset,method,test,shift_kind,intensity,delta,sample_size";

pub(crate) fn accuracy_csv(results: &ExperimentResults) -> String {
    let cfg = &results.config;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# accuracy = correct runs / runs, where a run is correct if it detects a present shift or stays silent \
         without one; ci95 = Student-t half-width over {} repetition accuracies of {} runs each",
        cfg.repetitions, cfg.runs_per_cell
    );
    let _ = writeln!(out, "{COORDS},runs,accuracy,ci95,mean_p");
    for c in &results.cells {
        let _ = writeln!(out, "{},{},{:.6},{:.6},{:.6}", coords(c), c.runs, c.accuracy, c.ci95, c.mean_p);
    }
    out
}

pub(crate) fn css_csv(results: &ExperimentResults) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{COORDS},concept,css_mean,css_ci95");
    for c in &results.cells {
        for s in c.css.iter().flatten() {
            let _ = writeln!(out, "{},{},{:.6},{:.6}", coords(c), field(&s.concept), s.mean, s.ci95);
        }
    }
    out
}

pub(crate) fn pvalues_csv(results: &ExperimentResults) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{COORDS},repetition,mean_p,median_p");
    for c in &results.cells {
        for (r, (m, med)) in c.repetition_mean_p.iter().zip(&c.repetition_median_p).enumerate() {
            let _ = writeln!(out, "{},{r},{m:.6},{med:.6}", coords(c));
        }
    }
    out
}

fn slug(s: &str) -> String {
    let mut out: String = s
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect();
    while out.contains("__") {
        out = out.replace("__", "_");
    }
    out.trim_matches('_').to_string()
}

/// Shift configurations in order of first appearance.
fn shift_groups(results: &ExperimentResults) -> Vec<Vec<&CellResult>> {
    let mut groups: Vec<Vec<&CellResult>> = Vec::new();
    for c in &results.cells {
        match groups.iter_mut().find(|g| g[0].shift == c.shift) {
            Some(g) => g.push(c),
            None => groups.push(vec![c]),
        }
    }
    groups
}

fn charts(results: &ExperimentResults) -> Vec<(String, String)> {
    let mut files = Vec::new();
    for (i, group) in shift_groups(results).iter().enumerate() {
        let first = group[0];
        let label = if first.shift.is_none() {
            "no shift".to_string()
        } else {
            format!("{} {} delta={}", first.shift_label(), first.intensity_label(), first.delta())
        };
        let name = slug(&format!("{} {} {}", first.shift_label(), first.intensity_label(), first.delta()));

        let mut series: Vec<Series> = Vec::new();
        for c in group {
            let key = format!("{}/{}", c.method.name(), c.test.name());
            let point = (c.sample_size as f64, c.accuracy);
            match series.iter_mut().find(|s| s.name == key) {
                Some(s) => s.points.push(point),
                None => series.push(Series { name: key, points: vec![point] }),
            }
        }
        let line = LineChart {
            title: format!("Detection accuracy: {label}"),
            x_label: "test sample size".into(),
            y_label: "accuracy".into(),
            log_x: true,
            y_range: Some((0.0, 1.0)),
            series,
        };
        files.push((format!("accuracy_{i:02}_{name}.svg"), line.render()));

        let max_size = group.iter().map(|c| c.sample_size).max().unwrap_or(0);
        let concept_cells: Vec<&&CellResult> =
            group.iter().filter(|c| c.css.is_some() && c.sample_size == max_size).collect();
        if let Some(head) = concept_cells.first() {
            let categories: Vec<String> = head.css.iter().flatten().map(|s| s.concept.clone()).collect();
            let series = concept_cells
                .iter()
                .map(|c| {
                    let css = c.css.as_ref().expect("filtered");
                    BarSeries {
                        name: format!("{}/{}", c.method.name(), c.test.name()),
                        values: css.iter().map(|s| s.mean).collect(),
                        errors: Some(css.iter().map(|s| s.ci95).collect()),
                    }
                })
                .collect();
            let bar = BarChart {
                title: format!("Concept shift score: {label}, n={max_size}"),
                y_label: "CSS".into(),
                categories,
                series,
            };
            files.push((format!("css_{i:02}_{name}.svg"), bar.render()));
        }
    }
    files
}

/// Write `accuracy.csv`, `css.csv`, `pvalues.csv` and SVG charts; returns the paths written.
pub fn emit_reports(results: &ExperimentResults, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    if results.cells.is_empty() {
        return Err(Error::InvalidArgument("no cells to report".into()));
    }
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = vec![
        ("accuracy.csv".to_string(), accuracy_csv(results)),
        ("css.csv".to_string(), css_csv(results)),
        ("pvalues.csv".to_string(), pvalues_csv(results)),
    ];
    files.extend(charts(results));
    let mut written = Vec::with_capacity(files.len());
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
