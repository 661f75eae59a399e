//! Sentence-level detection and correction metrics.
//!
//! Per sentence, a true positive needs gold errors and an exact match: the
//! detected position set equals the gold error set (detection), and the
//! predicted sentence equals the target (correction). A sentence with
//! predicted changes that is not a TP is a false positive; one with gold
//! errors that is not a TP is a false negative. A sentence with gold errors
//! whose wrong changes miss is therefore counted both FP and FN; such
//! sentences are tallied in `mismatched`.

use std::collections::HashMap;
use std::fmt;
use std::fmt::Write as _;

use thiserror::Error;

use crate::corpus::{Corpus, Sample};
use crate::model::Prediction;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("prediction ids do not match gold ids: {0}")]
    IdMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EvalLevel {
    Detection,
    Correction,
}

impl fmt::Display for EvalLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalLevel::Detection => "detection",
            EvalLevel::Correction => "correction",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub level: EvalLevel,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
    /// Sentences counted as both FP and FN.
    pub mismatched: usize,
    pub n_sentences: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl EvalReport {
    pub fn from_counts(level: EvalLevel, tp: usize, fp: usize, fn_: usize, tn: usize, mismatched: usize, n: usize) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            level,
            accuracy: ratio(tp + tn, n),
            precision,
            recall,
            f1,
            tp,
            fp,
            fn_,
            tn,
            mismatched,
            n_sentences: n,
        }
    }
}

/// Sentence-level outcome. `Mismatch` counts as both FP and FN.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    TruePositive,
    FalsePositive,
    FalseNegative,
    TrueNegative,
    Mismatch,
}

pub fn classify(prediction: &Prediction, gold: &Sample, level: EvalLevel) -> Outcome {
    let has_gold = !gold.error_positions().is_empty();
    let has_pred = !prediction.detected_positions.is_empty();
    let hit = has_gold
        && prediction.detected_positions == gold.error_positions()
        && (level == EvalLevel::Detection || prediction.predicted == gold.target());
    match (hit, has_gold, has_pred) {
        (true, _, _) => Outcome::TruePositive,
        (false, true, true) => Outcome::Mismatch,
        (false, true, false) => Outcome::FalseNegative,
        (false, false, true) => Outcome::FalsePositive,
        (false, false, false) => Outcome::TrueNegative,
    }
}

/// Classify every sentence at `level` and aggregate.
pub fn evaluate(predictions: &[Prediction], gold: &Corpus, level: EvalLevel) -> Result<EvalReport, MetricsError> {
    if predictions.len() != gold.len() {
        return Err(MetricsError::IdMismatch(format!(
            "{} predictions for {} gold sentences",
            predictions.len(),
            gold.len()
        )));
    }
    let mut seen: HashMap<&str, ()> = HashMap::with_capacity(predictions.len());
    let (mut tp, mut fp, mut fn_, mut tn, mut both) = (0, 0, 0, 0, 0);
    for p in predictions {
        let sample = gold
            .get(&p.sample_id)
            .ok_or_else(|| MetricsError::IdMismatch(format!("unknown id `{}`", p.sample_id)))?;
        if seen.insert(&p.sample_id, ()).is_some() {
            return Err(MetricsError::IdMismatch(format!("repeated id `{}`", p.sample_id)));
        }
        if p.predicted.len() != sample.len() {
            return Err(MetricsError::IdMismatch(format!("length of prediction `{}` differs from gold", p.sample_id)));
        }
        match classify(p, sample, level) {
            Outcome::TruePositive => tp += 1,
            Outcome::Mismatch => {
                fp += 1;
                fn_ += 1;
                both += 1;
            }
            Outcome::FalseNegative => fn_ += 1,
            Outcome::FalsePositive => fp += 1,
            Outcome::TrueNegative => tn += 1,
        }
    }
    Ok(EvalReport::from_counts(level, tp, fp, fn_, tn, both, predictions.len()))
}

/// Detection and correction reports in one call.
pub fn evaluate_both(predictions: &[Prediction], gold: &Corpus) -> Result<(EvalReport, EvalReport), MetricsError> {
    Ok((
        evaluate(predictions, gold, EvalLevel::Detection)?,
        evaluate(predictions, gold, EvalLevel::Correction)?,
    ))
}

pub const REPORT_HEADER: &str = "level\taccuracy\tprecision\trecall\tf1\ttp\tfp\tfn\ttn\tn";

/// Report TSV with a header; metrics at four decimal places.
pub fn write_reports(reports: &[&EvalReport]) -> String {
    let mut out = format!("{REPORT_HEADER}\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{}\t{}\t{}\t{}\t{}",
            r.level, r.accuracy, r.precision, r.recall, r.f1, r.tp, r.fp, r.fn_, r.tn, r.n_sentences
        );
    }
    out
}

/// One row per labelled correction-level report, with the F1 difference
/// against the first row.
pub fn compare_runs(reports: &[(String, EvalReport)]) -> String {
    let mut out = String::from("label\taccuracy\tprecision\trecall\tf1\tdelta\n");
    let Some((_, baseline)) = reports.first() else {
        return out;
    };
    for (label, r) in reports {
        let _ = writeln!(
            out,
            "{label}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:+.4}",
            r.accuracy,
            r.precision,
            r.recall,
            r.f1,
            r.f1 - baseline.f1
        );
    }
    out
}
