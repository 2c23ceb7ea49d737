//! Detection (per-idiom, macro-averaged) and localization (per-instance set overlap) metrics.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::reward::{harmonic_f1, instance_reward};

/// Per-idiom confusion counts. A positive is any instance with at least one flagged line.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IdiomDetection {
    pub idiom_code: String,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub precision: f64,
    pub recall: f64,
    /// Set when the idiom was never predicted positive, so precision is 0/0 and reported as 0.
    pub precision_undefined: bool,
    /// Set when the idiom has no gold positives, so recall is 0/0 and reported as 0.
    pub recall_undefined: bool,
}

impl IdiomDetection {
    pub fn support(&self) -> usize {
        self.tp + self.fn_
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectionMetrics {
    pub per_idiom: Vec<IdiomDetection>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

/// `(idiom_code, gold, pred)` triples; the idiom universe is every code that appears.
pub fn detection_metrics<'a, I>(instances: I) -> DetectionMetrics
where
    I: IntoIterator<Item = (&'a str, &'a BTreeSet<usize>, &'a BTreeSet<usize>)>,
{
    let mut counts: BTreeMap<&str, IdiomDetection> = BTreeMap::new();
    for (code, gold, pred) in instances {
        let c = counts.entry(code).or_default();
        match (!gold.is_empty(), !pred.is_empty()) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (true, false) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    let per_idiom: Vec<IdiomDetection> = counts
        .into_iter()
        .map(|(code, mut c)| {
            c.idiom_code = code.to_string();
            (c.precision, c.precision_undefined) = ratio(c.tp, c.tp + c.fp);
            (c.recall, c.recall_undefined) = ratio(c.tp, c.tp + c.fn_);
            c
        })
        .collect();
    if per_idiom.is_empty() {
        return DetectionMetrics::default();
    }
    let m = per_idiom.len() as f64;
    let precision = per_idiom.iter().map(|c| c.precision).sum::<f64>() / m;
    let recall = per_idiom.iter().map(|c| c.recall).sum::<f64>() / m;
    DetectionMetrics {
        f1: harmonic_f1(precision, recall),
        per_idiom,
        precision,
        recall,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalizationMode {
    /// Every instance counts; an empty gold with an empty prediction scores 1.
    IncludeNegatives,
    /// Only instances with at least one gold line count.
    PositivesOnly,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LocalizationMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub instances: usize,
}

/// Mean per-instance set precision and recall, with F1 taken from the two means.
pub fn localization_metrics<'a, I>(instances: I, mode: LocalizationMode) -> LocalizationMetrics
where
    I: IntoIterator<Item = (&'a BTreeSet<usize>, &'a BTreeSet<usize>)>,
{
    let (mut p, mut r, mut n) = (0.0, 0.0, 0usize);
    for (gold, pred) in instances {
        if mode == LocalizationMode::PositivesOnly && gold.is_empty() {
            continue;
        }
        let t = instance_reward(gold, pred);
        p += t.precision;
        r += t.recall;
        n += 1;
    }
    if n == 0 {
        return LocalizationMetrics::default();
    }
    let (precision, recall) = (p / n as f64, r / n as f64);
    LocalizationMetrics {
        precision,
        recall,
        f1: harmonic_f1(precision, recall),
        instances: n,
    }
}
