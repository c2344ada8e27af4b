//! Accuracy, precision, recall and F1 with label 1 (inconsistent) as the
//! positive class.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::CommentType;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("no predictions to score")]
    Empty,
    #[error("{pred} predictions but {gold} gold labels")]
    LengthMismatch { pred: usize, gold: usize },
    #[error("label {0} is not 0 or 1")]
    BadLabel(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Scores {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn confusion(pred: &[u8], gold: &[u8]) -> Result<ConfusionCounts, MetricsError> {
    if pred.len() != gold.len() {
        return Err(MetricsError::LengthMismatch { pred: pred.len(), gold: gold.len() });
    }
    if pred.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut c = ConfusionCounts::default();
    for (&p, &g) in pred.iter().zip(gold) {
        match (p, g) {
            (1, 1) => c.tp += 1,
            (1, 0) => c.fp += 1,
            (0, 0) => c.tn += 1,
            (0, 1) => c.fn_ += 1,
            (0 | 1, bad) | (bad, _) => return Err(MetricsError::BadLabel(bad)),
        }
    }
    Ok(c)
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Zero denominators yield 0.
pub fn scores(c: &ConfusionCounts) -> Scores {
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    // Same value as 2PR / (P + R), computed from integer counts.
    let f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_);
    Scores { accuracy: ratio(c.tp + c.tn, c.total()), precision, recall, f1 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub name: String,
    pub count: u64,
    pub confusion: ConfusionCounts,
    pub scores: Scores,
}

/// Per comment type rows followed by an `All` row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

impl Report {
    pub fn build(items: &[(CommentType, u8, u8)]) -> Result<Self, MetricsError> {
        let mut groups: BTreeMap<CommentType, (Vec<u8>, Vec<u8>)> = BTreeMap::new();
        for &(ty, pred, gold) in items {
            let e = groups.entry(ty).or_default();
            e.0.push(pred);
            e.1.push(gold);
        }
        let mut rows = Vec::new();
        for (ty, (pred, gold)) in &groups {
            let c = confusion(pred, gold)?;
            rows.push(ReportRow { name: ty.to_string(), count: c.total(), confusion: c, scores: scores(&c) });
        }
        let pred: Vec<u8> = items.iter().map(|x| x.1).collect();
        let gold: Vec<u8> = items.iter().map(|x| x.2).collect();
        let c = confusion(&pred, &gold)?;
        rows.push(ReportRow { name: "All".into(), count: c.total(), confusion: c, scores: scores(&c) });
        Ok(Self { rows })
    }

    pub fn all(&self) -> &ReportRow {
        self.rows.last().expect("report always has an All row")
    }

    /// Aligned text table, metrics as percentages with two decimals.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<10} {:>7} {:>9} {:>10} {:>8} {:>8}",
            "Type", "N", "Accuracy", "Precision", "Recall", "F1"
        );
        for r in &self.rows {
            let s = r.scores;
            let _ = writeln!(
                out,
                "{:<10} {:>7} {:>9.2} {:>10.2} {:>8.2} {:>8.2}",
                r.name,
                r.count,
                100.0 * s.accuracy,
                100.0 * s.precision,
                100.0 * s.recall,
                100.0 * s.f1
            );
        }
        out
    }
}
