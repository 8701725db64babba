use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::hetgraph::Label;

/// Thresholded and ranking metrics with Real as the positive class.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    /// `None` when the labels hold a single class.
    pub auc: Option<f64>,
    pub n_pos: usize,
    pub n_neg: usize,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl MetricsReport {
    pub const POSITIVE_CLASS: Label = Label::Real;

    pub fn auc(&self) -> Result<f64> {
        self.auc.ok_or(Error::AucUndefined)
    }
}

fn check_inputs(scores: &[f64], labels: &[Label]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.is_empty() {
        return Err(Error::Precondition("no scores to evaluate".into()));
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::Domain(format!("non-finite score {s}")));
    }
    Ok(())
}

fn class_counts(labels: &[Label]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&l| l == MetricsReport::POSITIVE_CLASS).count();
    (pos, labels.len() - pos)
}

/// Mann-Whitney AUC with average ranks for ties.
fn rank_auc(scores: &[f64], labels: &[Label]) -> Option<f64> {
    let (n_pos, n_neg) = class_counts(labels);
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based positions i+1 ..= j+1 share their mean rank
        let rank = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            if labels[k] == MetricsReport::POSITIVE_CLASS {
                rank_sum += rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos * n_neg) as f64)
}

pub fn compute_metrics(scores: &[f64], labels: &[Label], threshold: f64) -> Result<MetricsReport> {
    check_inputs(scores, labels)?;
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&s, &l) in scores.iter().zip(labels) {
        let predicted_pos = s >= threshold;
        let pos = l == MetricsReport::POSITIVE_CLASS;
        match (predicted_pos, pos) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    let (n_pos, n_neg) = class_counts(labels);
    Ok(MetricsReport {
        precision,
        recall,
        f1,
        accuracy: ratio(tp + tn, labels.len()),
        auc: rank_auc(scores, labels),
        n_pos,
        n_neg,
        tp,
        fp,
        tn,
        fn_,
    })
}

/// O(n^2) reference AUC: share of (Real, Fake) pairs ranked correctly,
/// ties counting one half.
pub fn auc_bruteforce(scores: &[f64], labels: &[Label]) -> Result<f64> {
    check_inputs(scores, labels)?;
    let (n_pos, n_neg) = class_counts(labels);
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::AucUndefined);
    }
    let mut won = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        if li != MetricsReport::POSITIVE_CLASS {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj == MetricsReport::POSITIVE_CLASS {
                continue;
            }
            if scores[i] > scores[j] {
                won += 1.0;
            } else if scores[i] == scores[j] {
                won += 0.5;
            }
        }
    }
    Ok(won / (n_pos * n_neg) as f64)
}

/// Mean and 95% normal-approximation half-width over repeated runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub mean: f64,
    pub half_width: f64,
    pub n: usize,
}

pub fn mean_interval(values: &[f64]) -> Result<Interval> {
    if values.is_empty() {
        return Err(Error::Precondition("no values to summarize".into()));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let half_width = if n < 2 {
        0.0
    } else {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        1.96 * var.sqrt() / (n as f64).sqrt()
    };
    Ok(Interval {
        mean,
        half_width,
        n,
    })
}

/// One row of the metrics table.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub run_id: String,
    pub config_hash: String,
    pub report: MetricsReport,
}

pub const METRICS_HEADER: &str = "run_id,config_hash,precision,recall,f1,accuracy,auc";

fn csv_value(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

pub fn write_metrics_csv(rows: &[MetricsRow], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "{METRICS_HEADER}")?;
    for r in rows {
        let m = &r.report;
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.run_id,
            r.config_hash,
            csv_value(Some(m.precision)),
            csv_value(Some(m.recall)),
            csv_value(Some(m.f1)),
            csv_value(Some(m.accuracy)),
            csv_value(m.auc)
        )?;
    }
    w.flush()
}

pub fn save_metrics_csv(rows: &[MetricsRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_metrics_csv(rows, std::io::BufWriter::new(file)).map_err(|e| Error::io(path, e))
}
