//! Evaluation report files and their aggregation into ranked tables.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bundle::binio::{read_json, write_json};
use crate::error::{Error, Result};
use crate::metrics::{average_rank, EvalReport, MeanStd, Metric, MetricTable};

pub const SCHEMA_VERSION: u32 = 1;
pub const REPORT_SUFFIX: &str = ".report.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub schema_version: u32,
    pub method: String,
    pub dataset: String,
    pub depth: Option<String>,
    pub split: String,
    pub metrics: BTreeMap<Metric, MeanStd>,
    pub eval: EvalReport,
    pub n_boot: usize,
    pub seed: u64,
    /// Full effective configuration of the run that produced this report.
    pub config: serde_json::Value,
}

impl MethodReport {
    pub fn new(
        method: &str,
        dataset: &str,
        depth: Option<String>,
        split: &str,
        eval: EvalReport,
        config: serde_json::Value,
    ) -> Self {
        let metrics = BTreeMap::from([
            (Metric::RocAuc, eval.roc_auc),
            (Metric::Aurc, eval.aurc),
            (Metric::Ece, eval.ece),
        ]);
        MethodReport {
            schema_version: SCHEMA_VERSION,
            method: method.to_string(),
            dataset: dataset.to_string(),
            depth,
            split: split.to_string(),
            metrics,
            n_boot: eval.n_boot,
            seed: eval.seed,
            eval,
            config,
        }
    }

    pub fn file_name(&self) -> String {
        format!("{}{REPORT_SUFFIX}", self.method)
    }

    pub fn metric(&self, m: Metric) -> Option<MeanStd> {
        self.metrics.get(&m).copied()
    }
}

pub fn write_report(report: &MethodReport, dir: &Path) -> Result<PathBuf> {
    let path = dir.join(report.file_name());
    write_json(&path, report)?;
    Ok(path)
}

fn read_report(path: &Path) -> Result<MethodReport> {
    let raw: serde_json::Value = read_json(path)?;
    let version = raw.get("schema_version").and_then(|v| v.as_u64());
    if version != Some(SCHEMA_VERSION as u64) {
        return Err(Error::Format(format!(
            "{}: schema_version {} does not match {SCHEMA_VERSION}",
            path.display(),
            version.map_or("missing".to_string(), |v| v.to_string())
        )));
    }
    serde_json::from_value(raw).map_err(|e| Error::json(path, e))
}

/// Every `*.report.json` in an eval output directory, sorted by file name.
pub fn read_reports(dir: &Path) -> Result<Vec<MethodReport>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with(REPORT_SUFFIX))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::MissingData(format!(
            "no report files in {}",
            dir.display()
        )));
    }
    paths.iter().map(|p| read_report(p)).collect()
}

fn pct(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

/// Reports grouped into one table per metric, methods in first-seen order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub schema_version: u32,
    pub methods: Vec<String>,
    pub datasets: Vec<String>,
    pub tables: Vec<AggregateTable>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateTable {
    pub metric: Metric,
    /// `cells[m][d]`.
    pub cells: Vec<Vec<Option<MeanStd>>>,
    pub ranks: Vec<f64>,
}

/// Dataset label of a report: the dataset name plus the depth tag, if any.
fn dataset_key(r: &MethodReport) -> String {
    match &r.depth {
        Some(d) => format!("{}@{d}", r.dataset),
        None => r.dataset.clone(),
    }
}

pub fn aggregate(reports: &[MethodReport]) -> Result<Aggregate> {
    let mut methods: Vec<String> = Vec::new();
    let mut datasets: Vec<String> = Vec::new();
    for r in reports {
        if r.schema_version != SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "report for `{}` has schema_version {}, expected {SCHEMA_VERSION}",
                r.method, r.schema_version
            )));
        }
        if !methods.contains(&r.method) {
            methods.push(r.method.clone());
        }
        let key = dataset_key(r);
        if !datasets.contains(&key) {
            datasets.push(key);
        }
    }
    let mut tables = Vec::new();
    for metric in Metric::ALL {
        let mut cells = vec![vec![None; datasets.len()]; methods.len()];
        for r in reports {
            let m = methods.iter().position(|x| x == &r.method).expect("collected");
            let d = datasets.iter().position(|x| *x == dataset_key(r)).expect("collected");
            if cells[m][d].is_some() {
                return Err(Error::InvalidInput(format!(
                    "duplicate report for `{}` on `{}`",
                    r.method, datasets[d]
                )));
            }
            cells[m][d] = r.metric(metric);
        }
        let table = MetricTable {
            metric,
            methods: methods.clone(),
            datasets: datasets.clone(),
            values: cells
                .iter()
                .map(|row| row.iter().map(|c| c.map(|v| v.mean)).collect())
                .collect(),
        };
        let ranks = average_rank(&table)?.into_iter().map(|(_, r)| r).collect();
        tables.push(AggregateTable {
            metric,
            cells,
            ranks,
        });
    }
    Ok(Aggregate {
        schema_version: SCHEMA_VERSION,
        methods,
        datasets,
        tables,
    })
}

impl Aggregate {
    pub fn table(&self, metric: Metric) -> &AggregateTable {
        self.tables
            .iter()
            .find(|t| t.metric == metric)
            .expect("every metric tabulated")
    }

    /// One markdown table per metric: "mean ± std" on a 0–100 scale plus
    /// the average rank column.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        for t in &self.tables {
            out.push_str(&format!("### {}\n\n| Method |", t.metric.label()));
            for d in &self.datasets {
                out.push_str(&format!(" {d} |"));
            }
            out.push_str(" Rank |\n|---|");
            out.push_str(&"---:|".repeat(self.datasets.len() + 1));
            out.push('\n');
            for (m, method) in self.methods.iter().enumerate() {
                out.push_str(&format!("| {method} |"));
                for cell in &t.cells[m] {
                    match cell {
                        Some(v) => out.push_str(&format!(" {} ± {} |", pct(v.mean), pct(v.std))),
                        None => out.push_str(" – |"),
                    }
                }
                out.push_str(&format!(" {:.2} |\n", t.ranks[m]));
            }
            out.push('\n');
        }
        out
    }
}
