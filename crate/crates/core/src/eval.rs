//! Confusion matrices, class-wise metrics and the result grid.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{BinaryLabel, FeatureMethod};
use crate::models::ModelType;

/// Counts with M as the positive class. The T view swaps roles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp_m: u64,
    pub fp_m: u64,
    pub fn_m: u64,
    pub tn_m: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp_m + self.fp_m + self.fn_m + self.tn_m
    }

    /// (tp, fp, fn, tn) with `c` as the positive class.
    pub fn view(&self, c: BinaryLabel) -> (u64, u64, u64, u64) {
        match c {
            BinaryLabel::M => (self.tp_m, self.fp_m, self.fn_m, self.tn_m),
            BinaryLabel::T => (self.tn_m, self.fn_m, self.fp_m, self.tp_m),
        }
    }

    /// The same predictions with class names exchanged.
    pub fn swapped(&self) -> ConfusionMatrix {
        ConfusionMatrix {
            tp_m: self.tn_m,
            fp_m: self.fn_m,
            fn_m: self.fp_m,
            tn_m: self.tp_m,
        }
    }

    /// Gold examples per class.
    pub fn support(&self, c: BinaryLabel) -> u64 {
        let (tp, _, fn_, _) = self.view(c);
        tp + fn_
    }
}

pub fn confusion(preds: &[BinaryLabel], golds: &[BinaryLabel]) -> Result<ConfusionMatrix> {
    if preds.len() != golds.len() {
        return Err(Error::Contract(format!(
            "{} predictions for {} gold labels",
            preds.len(),
            golds.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::Contract("no predictions to evaluate".into()));
    }
    let mut cm = ConfusionMatrix::default();
    for (p, g) in preds.iter().zip(golds) {
        match (p, g) {
            (BinaryLabel::M, BinaryLabel::M) => cm.tp_m += 1,
            (BinaryLabel::M, BinaryLabel::T) => cm.fp_m += 1,
            (BinaryLabel::T, BinaryLabel::M) => cm.fn_m += 1,
            (BinaryLabel::T, BinaryLabel::T) => cm.tn_m += 1,
        }
    }
    Ok(cm)
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall and F1 for class `c`. A zero denominator yields 0.
pub fn class_metrics(cm: &ConfusionMatrix, c: BinaryLabel) -> ClassMetrics {
    let (tp, fp, fn_, _) = cm.view(c);
    if tp + fp == 0 && tp + fn_ > 0 {
        log::warn!("no predictions of class {c}; precision reported as 0");
    }
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    ClassMetrics { precision, recall, f1 }
}

/// Accuracy as the mean of the per-class accuracies, and macro-F1.
pub fn aggregate(cm: &ConfusionMatrix) -> (f64, f64) {
    let total = cm.total();
    let acc = |c| {
        let (tp, _, _, tn) = cm.view(c);
        ratio(tp + tn, total)
    };
    let accuracy = (acc(BinaryLabel::M) + acc(BinaryLabel::T)) / 2.0;
    let macro_f1 = (class_metrics(cm, BinaryLabel::M).f1 + class_metrics(cm, BinaryLabel::T).f1) / 2.0;
    (accuracy, macro_f1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_class: BTreeMap<BinaryLabel, ClassMetrics>,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub support: BTreeMap<BinaryLabel, u64>,
    pub confusion: ConfusionMatrix,
}

impl EvalReport {
    pub fn from_confusion(cm: ConfusionMatrix) -> Self {
        let (accuracy, macro_f1) = aggregate(&cm);
        let classes = [BinaryLabel::M, BinaryLabel::T];
        EvalReport {
            per_class: classes.iter().map(|&c| (c, class_metrics(&cm, c))).collect(),
            accuracy,
            macro_f1,
            support: classes.iter().map(|&c| (c, cm.support(c))).collect(),
            confusion: cm,
        }
    }

    pub fn evaluate(preds: &[BinaryLabel], golds: &[BinaryLabel]) -> Result<Self> {
        Ok(EvalReport::from_confusion(confusion(preds, golds)?))
    }

    pub fn class(&self, c: BinaryLabel) -> ClassMetrics {
        self.per_class[&c]
    }
}

/// One grid cell: a report, or the reason the combination failed.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Report(EvalReport),
    Error(String),
}

pub type Grid = BTreeMap<(ModelType, FeatureMethod), Cell>;

pub const GRID_CSV_HEADER: &str = "model,method,p_m,r_m,f1_m,p_t,r_t,f1_t,accuracy,macro_f1";

const NUMERIC_COLUMNS: usize = 8;

fn report_values(r: &EvalReport) -> [f64; NUMERIC_COLUMNS] {
    let (m, t) = (r.class(BinaryLabel::M), r.class(BinaryLabel::T));
    [m.precision, m.recall, m.f1, t.precision, t.recall, t.f1, r.accuracy, r.macro_f1]
}

/// Three decimals without the leading zero, e.g. `.677`.
fn table_metric(x: f64) -> String {
    let s = format!("{x:.3}");
    match s.strip_prefix('0') {
        Some(rest) => rest.to_string(),
        None => s,
    }
}

fn table_accuracy(x: f64) -> String {
    format!("{x:.2}")
}

/// Aligned text table, rows grouped by model.
pub fn render_table(grid: &Grid) -> String {
    let header = [
        "Model", "Method", "P(M)", "R(M)", "F1(M)", "P(T)", "R(T)", "F1(T)", "Accuracy", "Macro-F1",
    ];
    let mut rows: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for ((model, method), cell) in grid {
        let mut row = vec![model.display_name().to_string(), method.display_name().to_string()];
        match cell {
            Cell::Report(r) => {
                let v = report_values(r);
                row.extend(v[..6].iter().map(|&x| table_metric(x)));
                row.push(table_accuracy(v[6]));
                row.push(table_metric(v[7]));
            }
            Cell::Error(_) => row.extend(std::iter::repeat_n("error".to_string(), NUMERIC_COLUMNS)),
        }
        rows.push(row);
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|i| rows.iter().map(|r| r[i].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (k, row) in rows.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(i, s)| if i < 2 { format!("{s:<w$}", w = widths[i]) } else { format!("{s:>w$}", w = widths[i]) })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
        if k == 0 {
            let total: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
            out.push_str(&"-".repeat(total));
            out.push('\n');
        }
    }
    out
}

/// CSV with every metric at three decimals; failed cells hold `error`.
pub fn render_csv(grid: &Grid) -> String {
    let mut out = String::from(GRID_CSV_HEADER);
    out.push('\n');
    for ((model, method), cell) in grid {
        let _ = write!(out, "{},{}", model.key(), method.key());
        match cell {
            Cell::Report(r) => {
                for x in report_values(r) {
                    let _ = write!(out, ",{x:.3}");
                }
            }
            Cell::Error(_) => {
                for _ in 0..NUMERIC_COLUMNS {
                    out.push_str(",error");
                }
            }
        }
        out.push('\n');
    }
    out
}

/// Both renderings of the grid: `(text, csv)`.
pub fn render_grid(grid: &Grid) -> (String, String) {
    (render_table(grid), render_csv(grid))
}

/// One parsed CSV row; `None` values are failed cells.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub model: ModelType,
    pub method: FeatureMethod,
    pub values: Option<[f64; NUMERIC_COLUMNS]>,
}

pub fn parse_grid_csv(text: &str) -> Result<Vec<GridRow>> {
    let bad = |line: usize, msg: String| Error::Validation(format!("grid csv line {line}: {msg}"));
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == GRID_CSV_HEADER => {}
        other => return Err(bad(1, format!("unexpected header {other:?}"))),
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let n = i + 2;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 + NUMERIC_COLUMNS {
            return Err(bad(n, format!("{} fields", fields.len())));
        }
        let model = fields[0].parse().map_err(|e: Error| bad(n, e.to_string()))?;
        let method = fields[1].parse().map_err(|e: Error| bad(n, e.to_string()))?;
        let values = if fields[2..].iter().all(|f| *f == "error") {
            None
        } else {
            let mut v = [0.0; NUMERIC_COLUMNS];
            for (slot, f) in v.iter_mut().zip(&fields[2..]) {
                *slot = f.parse().map_err(|_| bad(n, format!("not a number: {f:?}")))?;
            }
            Some(v)
        };
        out.push(GridRow { model, method, values });
    }
    Ok(out)
}
