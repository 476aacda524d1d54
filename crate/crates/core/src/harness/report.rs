use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::run::Manifest;
use super::HarnessError;
use crate::eval::MetricReport;

/// One (strategy, model) cell on the token-cost / score plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub dataset: String,
    pub strategy: String,
    pub model_id: String,
    pub mean_total_tokens_per_task: f64,
    /// In [0, 1].
    pub score: f64,
    pub token_unit: String,
}

impl ParetoPoint {
    pub fn from_report(r: &MetricReport) -> Self {
        Self {
            dataset: r.dataset.clone(),
            strategy: r.strategy_label.clone(),
            model_id: r.model_id.clone(),
            mean_total_tokens_per_task: r.mean_total_tokens(),
            score: r.headline(),
            token_unit: r.token_unit.clone(),
        }
    }

    fn dominates(&self, other: &Self) -> bool {
        let t = (self.mean_total_tokens_per_task, other.mean_total_tokens_per_task);
        let s = (self.score, other.score);
        t.0 <= t.1 && s.0 >= s.1 && (t.0 < t.1 || s.0 > s.1)
    }
}

/// Non-dominated points sorted by tokens ascending (score descending on ties).
pub fn compute_pareto(points: &[ParetoPoint]) -> Vec<ParetoPoint> {
    let mut front: Vec<ParetoPoint> = points
        .iter()
        .filter(|p| !points.iter().any(|q| q.dominates(p)))
        .cloned()
        .collect();
    front.sort_by(|a, b| {
        a.mean_total_tokens_per_task
            .total_cmp(&b.mean_total_tokens_per_task)
            .then(b.score.total_cmp(&a.score))
    });
    front
}

/// Reports of a run directory, in manifest order when a manifest exists.
pub fn load_reports(run_dir: &Path) -> Result<Vec<MetricReport>, HarnessError> {
    let manifest_path = run_dir.join("manifest.json");
    let files: Vec<PathBuf> = if manifest_path.is_file() {
        let text = fs::read_to_string(&manifest_path).map_err(|e| HarnessError::io(&manifest_path, e))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| HarnessError::Corrupt {
            path: manifest_path.clone(),
            message: e.to_string(),
        })?;
        manifest.reports.iter().map(|r| run_dir.join(r)).collect()
    } else {
        let dir = run_dir.join("reports");
        let mut files: Vec<PathBuf> = match fs::read_dir(&dir) {
            Ok(entries) => entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect(),
            Err(_) => Vec::new(),
        };
        files.sort();
        files
    };
    if files.is_empty() {
        return Err(HarnessError::EmptyRunDir(run_dir.to_path_buf()));
    }
    files
        .into_iter()
        .map(|path| {
            let text = fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
            serde_json::from_str(&text).map_err(|e| HarnessError::Corrupt {
                path,
                message: e.to_string(),
            })
        })
        .collect()
}

fn push_unique(v: &mut Vec<String>, s: &str) {
    if !v.iter().any(|x| x == s) {
        v.push(s.to_string());
    }
}

fn cell_text(value: f64, spread: Option<f64>) -> String {
    match spread {
        Some(s) => format!("{:.1} ± {:.1}", value * 100.0, s * 100.0),
        None => format!("{:.1}", value * 100.0),
    }
}

/// Markdown table: strategies as rows, datasets as columns, a row average,
/// and every column maximum in bold (ties all bold). Values are scores × 100
/// at one decimal; bolding compares the displayed values.
pub fn render_table(reports: &[MetricReport]) -> String {
    let mut datasets = Vec::new();
    let mut models = Vec::new();
    for r in reports {
        push_unique(&mut datasets, &r.dataset);
        push_unique(&mut models, &r.model_id);
    }
    let row_key = |r: &MetricReport| {
        if models.len() > 1 {
            format!("{} [{}]", r.strategy_label, r.model_id)
        } else {
            r.strategy_label.clone()
        }
    };
    let mut rows = Vec::new();
    for r in reports {
        push_unique(&mut rows, &row_key(r));
    }

    // values[row][col]; last column is the average
    let ncols = datasets.len() + 1;
    let mut values: Vec<Vec<Option<(f64, Option<f64>)>>> = vec![vec![None; ncols]; rows.len()];
    for r in reports {
        let ri = rows.iter().position(|x| *x == row_key(r)).unwrap();
        let ci = datasets.iter().position(|x| *x == r.dataset).unwrap();
        values[ri][ci] = Some((r.headline(), r.repeats.as_ref().map(|s| s.spread)));
    }
    for row in &mut values {
        let present: Vec<f64> = row[..ncols - 1].iter().flatten().map(|(v, _)| *v).collect();
        if !present.is_empty() {
            row[ncols - 1] = Some((present.iter().sum::<f64>() / present.len() as f64, None));
        }
    }
    let shown = |v: f64| (v * 1000.0).round() as i64;
    let best: Vec<Option<i64>> = (0..ncols)
        .map(|c| values.iter().filter_map(|row| row[c].map(|(v, _)| shown(v))).max())
        .collect();

    let mut header = vec!["Method".to_string()];
    for d in &datasets {
        let metric = reports.iter().find(|r| r.dataset == *d).map(|r| r.metric.label()).unwrap_or("");
        header.push(format!("{d} ({metric})"));
    }
    header.push("Avg.".into());
    let mut out = format!("| {} |\n", header.join(" | "));
    out.push_str(&format!("|:---|{}\n", "---:|".repeat(ncols)));
    for (ri, label) in rows.iter().enumerate() {
        let mut cells = vec![label.clone()];
        for (c, v) in values[ri].iter().enumerate() {
            cells.push(match v {
                None => "-".into(),
                Some((v, spread)) => {
                    let text = cell_text(*v, *spread);
                    if Some(shown(*v)) == best[c] {
                        format!("**{text}**")
                    } else {
                        text
                    }
                }
            });
        }
        out.push_str(&format!("| {} |\n", cells.join(" | ")));
    }
    out
}

fn pareto_csv(reports: &[MetricReport]) -> Result<String, HarnessError> {
    let points: Vec<ParetoPoint> = reports.iter().map(ParetoPoint::from_report).collect();
    let mut datasets = Vec::new();
    for p in &points {
        push_unique(&mut datasets, &p.dataset);
    }
    let front: Vec<ParetoPoint> = datasets
        .iter()
        .flat_map(|d| {
            let subset: Vec<_> = points.iter().filter(|p| p.dataset == *d).cloned().collect();
            compute_pareto(&subset)
        })
        .collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| HarnessError::Config(e.to_string());
    w.write_record([
        "dataset",
        "strategy",
        "model_id",
        "mean_total_tokens_per_task",
        "score",
        "token_unit",
        "on_frontier",
    ])
    .map_err(csv_err)?;
    for p in &points {
        w.write_record([
            p.dataset.clone(),
            p.strategy.clone(),
            p.model_id.clone(),
            format!("{:.2}", p.mean_total_tokens_per_task),
            format!("{:.4}", p.score),
            format!("{} tokens per task", p.token_unit),
            front.contains(p).to_string(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Debug, Clone)]
pub struct ReportFiles {
    pub markdown: PathBuf,
    pub pareto_csv: PathBuf,
}

/// Writes `report.md` and `pareto.csv` into the run directory.
pub fn cmd_report(run_dir: &Path) -> Result<ReportFiles, HarnessError> {
    let reports = load_reports(run_dir)?;
    let mut md = String::from("# Results\n\n");
    md.push_str(&render_table(&reports));
    let mut notes = Vec::new();
    for r in &reports {
        for n in &r.notes {
            notes.push(format!("- {} / {}: {n}", r.dataset, r.strategy_label));
        }
    }
    if !notes.is_empty() {
        md.push_str("\nNotes:\n");
        md.push_str(&notes.join("\n"));
        md.push('\n');
    }
    let files = ReportFiles {
        markdown: run_dir.join("report.md"),
        pareto_csv: run_dir.join("pareto.csv"),
    };
    fs::write(&files.markdown, md).map_err(|e| HarnessError::io(&files.markdown, e))?;
    let csv = pareto_csv(&reports)?;
    fs::write(&files.pareto_csv, csv).map_err(|e| HarnessError::io(&files.pareto_csv, e))?;
    Ok(files)
}
