//! Line-overlap reward: set precision, recall and F1 between gold and predicted lines.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardTriple {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RewardTriple {
    pub const PERFECT: RewardTriple = RewardTriple {
        precision: 1.0,
        recall: 1.0,
        f1: 1.0,
    };
}

/// Harmonic mean, 0 when both inputs are 0.
pub fn harmonic_f1(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// Both sets empty scores (1, 1, 1): a correct "no violations" answer is fully rewarded.
/// When only one side is empty, the term that would divide by zero is 0.
pub fn instance_reward(gold: &BTreeSet<usize>, pred: &BTreeSet<usize>) -> RewardTriple {
    if gold.is_empty() && pred.is_empty() {
        return RewardTriple::PERFECT;
    }
    let hits = gold.intersection(pred).count() as f64;
    let precision = if pred.is_empty() {
        0.0
    } else {
        hits / pred.len() as f64
    };
    let recall = if gold.is_empty() {
        0.0
    } else {
        hits / gold.len() as f64
    };
    RewardTriple {
        precision,
        recall,
        f1: harmonic_f1(precision, recall),
    }
}
