use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IouUnit {
    #[default]
    Fraction,
    Percent,
}

/// Outcome of one training run, as logged and reported.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsRecord {
    pub benchmark: String,
    /// `source_only`, `advent` or `advent_aug`.
    pub mode: String,
    pub seed: u64,
    /// Segmenter inputs were augmented.
    #[serde(default)]
    pub augmented: bool,
    #[serde(default)]
    pub unit: IouUnit,
    /// Target-val IoU per class, background first.
    #[serde(default)]
    pub class_iou: Vec<f64>,
    pub iou_building: f64,
    #[serde(default)]
    pub source_val_iou: Option<f64>,
    #[serde(default)]
    pub delta_iou: Option<f64>,
    #[serde(default)]
    pub iterations: u64,
    #[serde(default)]
    pub monitor: String,
    #[serde(default)]
    pub overfit_detected: bool,
}

impl MetricsRecord {
    pub fn is_adapted(&self) -> bool {
        self.mode != "source_only"
    }

    fn column_key(&self) -> (String, bool) {
        (self.benchmark.clone(), self.augmented || self.mode == "advent_aug")
    }

    fn percent(&self, v: f64) -> f64 {
        match self.unit {
            IouUnit::Fraction => v * 100.0,
            IouUnit::Percent => v,
        }
    }
}

pub const ROW_ADAPTED: &str = "IoU (ADVENT)";
pub const ROW_SOURCE_ONLY: &str = "IoU (src-only)";
pub const ROW_DELTA: &str = "Δ IoU";
pub const LONG_CSV_HEADER: &str = "benchmark,mode,seed,iou_building,iou_background,delta_iou";

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    /// Aligned text table, benchmarks as columns.
    pub text: String,
    /// The same table as CSV.
    pub csv: String,
    /// One row per record.
    pub long_csv: String,
}

struct Column {
    label: String,
    adapted: Vec<f64>,
    source_only: Vec<f64>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn cells(col: &Column) -> [String; 3] {
    let (a, s) = (mean(&col.adapted), mean(&col.source_only));
    let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.2}"));
    let delta = match (a, s) {
        (Some(a), Some(s)) => format!("{:+.2}", super::delta_iou(a, s)),
        _ => "n/a".into(),
    };
    [fmt(a), fmt(s), delta]
}

/// Building IoU table with the adapted, source-only and difference rows.
/// Seeds sharing a column are averaged; values are printed in percent.
pub fn render_report(records: &[MetricsRecord]) -> Result<Report> {
    let first = records.first().ok_or_else(|| Error::invalid("no records to report"))?;
    if records.iter().any(|r| r.unit != first.unit) {
        return Err(Error::invalid("records mix fraction and percent IoU units"));
    }
    let mut keys: Vec<(String, bool)> = Vec::new();
    let mut columns: Vec<Column> = Vec::new();
    for r in records {
        let key = r.column_key();
        let i = match keys.iter().position(|k| *k == key) {
            Some(i) => i,
            None => {
                let label = if key.1 { format!("{} +aug", key.0) } else { key.0.clone() };
                keys.push(key);
                columns.push(Column {
                    label,
                    adapted: Vec::new(),
                    source_only: Vec::new(),
                });
                columns.len() - 1
            }
        };
        let v = r.percent(r.iou_building);
        if r.is_adapted() {
            columns[i].adapted.push(v)
        } else {
            columns[i].source_only.push(v)
        }
    }
    let body: Vec<[String; 3]> = columns.iter().map(cells).collect();
    let labels = [ROW_ADAPTED, ROW_SOURCE_ONLY, ROW_DELTA];
    let width = |s: &str| s.chars().count();
    let label_w = labels.iter().map(|l| width(l)).max().unwrap_or(0);
    let col_w: Vec<usize> = columns
        .iter()
        .zip(&body)
        .map(|(c, b)| b.iter().map(|s| width(s)).chain([width(&c.label)]).max().unwrap_or(0))
        .collect();

    let mut text = String::new();
    let pad = |s: &str, w: usize| format!("{}{s}", " ".repeat(w - width(s)));
    text.push_str(&" ".repeat(label_w));
    for (c, w) in columns.iter().zip(&col_w) {
        write!(text, "  {}", pad(&c.label, *w)).unwrap();
    }
    text.push('\n');
    for (row, label) in labels.iter().enumerate() {
        write!(text, "{label}{}", " ".repeat(label_w - width(label))).unwrap();
        for (b, w) in body.iter().zip(&col_w) {
            write!(text, "  {}", pad(&b[row], *w)).unwrap();
        }
        text.push('\n');
    }
    text.push_str("IoU in percent, building class, pixels accumulated over all target-val tiles.\n");

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(std::iter::once("").chain(columns.iter().map(|c| c.label.as_str())))?;
    for (row, label) in labels.iter().enumerate() {
        w.write_record(std::iter::once(*label).chain(body.iter().map(|b| b[row].as_str())))?;
    }
    let csv = String::from_utf8(w.into_inner().map_err(|e| Error::invalid(e.to_string()))?).expect("utf8");

    let mut long = csv::Writer::from_writer(Vec::new());
    long.write_record(LONG_CSV_HEADER.split(','))?;
    for r in records {
        long.write_record([
            r.benchmark.clone(),
            r.mode.clone(),
            r.seed.to_string(),
            r.iou_building.to_string(),
            r.class_iou.first().map(|v| v.to_string()).unwrap_or_default(),
            r.delta_iou.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    let long_csv = String::from_utf8(long.into_inner().map_err(|e| Error::invalid(e.to_string()))?).expect("utf8");
    Ok(Report { text, csv, long_csv })
}
