//! Metrics reports: overall, per transfer split, both localization modes, parse-failure counts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::codec::ParseStatus;
use crate::dataset::Split;
use crate::error::{Error, Result};
use crate::reward::instance_reward;

use super::metrics::{
    detection_metrics, localization_metrics, DetectionMetrics, LocalizationMetrics, LocalizationMode,
};

/// One scored (instance, prediction) pair. Failed parses carry an empty prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalInstance {
    pub instance_id: String,
    pub idiom_code: String,
    pub split: Split,
    pub gold: BTreeSet<usize>,
    pub pred: BTreeSet<usize>,
    pub parse_status: ParseStatus,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub instances: usize,
    pub parse_failures: usize,
    pub relaxed_parses: usize,
    pub detection: DetectionMetrics,
    pub localization: BTreeMap<LocalizationMode, LocalizationMetrics>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub splits: BTreeMap<Split, MetricsReport>,
}

fn summarize(instances: &[&EvalInstance]) -> MetricsReport {
    let detection = detection_metrics(
        instances
            .iter()
            .map(|i| (i.idiom_code.as_str(), &i.gold, &i.pred)),
    );
    let localization = [LocalizationMode::IncludeNegatives, LocalizationMode::PositivesOnly]
        .into_iter()
        .map(|mode| {
            (
                mode,
                localization_metrics(instances.iter().map(|i| (&i.gold, &i.pred)), mode),
            )
        })
        .collect();
    MetricsReport {
        instances: instances.len(),
        parse_failures: instances
            .iter()
            .filter(|i| i.parse_status == ParseStatus::Failed)
            .count(),
        relaxed_parses: instances
            .iter()
            .filter(|i| i.parse_status == ParseStatus::Relaxed)
            .count(),
        detection,
        localization,
        splits: BTreeMap::new(),
    }
}

pub fn build_report(instances: &[EvalInstance]) -> MetricsReport {
    let all: Vec<&EvalInstance> = instances.iter().collect();
    let mut report = summarize(&all);
    let mut by_split: BTreeMap<Split, Vec<&EvalInstance>> = BTreeMap::new();
    for i in instances {
        by_split.entry(i.split).or_default().push(i);
    }
    report.splits = by_split
        .into_iter()
        .map(|(split, group)| (split, summarize(&group)))
        .collect();
    report
}

impl MetricsReport {
    /// Checks ranges and the F-from-P/R identities, recursively.
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::DataIntegrity(format!("malformed metrics report: {what}")));
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        let d = &self.detection;
        if ![d.precision, d.recall, d.f1].into_iter().all(unit) {
            return bad("detection value outside [0, 1]");
        }
        if (d.f1 - crate::reward::harmonic_f1(d.precision, d.recall)).abs() > 1e-12 {
            return bad("detection F1 is not the harmonic mean of P and R");
        }
        if d.per_idiom.iter().any(|c| !unit(c.precision) || !unit(c.recall)) {
            return bad("per-idiom value outside [0, 1]");
        }
        for (mode, l) in &self.localization {
            if ![l.precision, l.recall, l.f1].into_iter().all(unit) {
                return bad(&format!("{mode:?} localization value outside [0, 1]"));
            }
        }
        if self.parse_failures + self.relaxed_parses > self.instances {
            return bad("more parse outcomes than instances");
        }
        let split_total: usize = self.splits.values().map(|s| s.instances).sum();
        if !self.splits.is_empty() && split_total != self.instances {
            return bad("split instance counts do not add up");
        }
        self.splits.values().try_for_each(MetricsReport::validate)
    }

    /// Aligned plain-text rendering.
    pub fn to_table(&self) -> String {
        let mut rows: Vec<(String, &MetricsReport)> = vec![("all".into(), self)];
        rows.extend(self.splits.iter().map(|(s, r)| (s.as_str().to_string(), r)));
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<14} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6} {:>7}",
            "split", "n", "P_det", "R_det", "F_det", "P_loc", "R_loc", "F_loc", "F_loc+", "fail", "relaxed"
        );
        for (name, r) in rows {
            let all = r.localization.get(&LocalizationMode::IncludeNegatives).cloned().unwrap_or_default();
            let pos = r.localization.get(&LocalizationMode::PositivesOnly).cloned().unwrap_or_default();
            let _ = writeln!(
                out,
                "{:<14} {:>6} {:>6.3} {:>6.3} {:>6.3} {:>6.3} {:>6.3} {:>6.3} {:>6.3} {:>6} {:>7}",
                name,
                r.instances,
                r.detection.precision,
                r.detection.recall,
                r.detection.f1,
                all.precision,
                all.recall,
                all.f1,
                pos.f1,
                r.parse_failures,
                r.relaxed_parses
            );
        }
        out.push('\n');
        let _ = writeln!(out, "{:<10} {:>5} {:>5} {:>5} {:>5} {:>6} {:>6}", "idiom", "tp", "fp", "fn", "tn", "P", "R");
        for c in &self.detection.per_idiom {
            let _ = writeln!(
                out,
                "{:<10} {:>5} {:>5} {:>5} {:>5} {:>6} {:>6}",
                c.idiom_code,
                c.tp,
                c.fp,
                c.fn_,
                c.tn,
                fmt_flagged(c.precision, c.precision_undefined),
                fmt_flagged(c.recall, c.recall_undefined),
            );
        }
        out
    }
}

fn fmt_flagged(v: f64, undefined: bool) -> String {
    if undefined {
        format!("{v:.3}*")
    } else {
        format!("{v:.3}")
    }
}

/// Per-instance scores kept for paired significance tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceScore {
    pub instance_id: String,
    pub idiom_code: String,
    pub split: Split,
    pub f1: f64,
    pub detection_correct: bool,
}

pub fn instance_scores(instances: &[EvalInstance]) -> Vec<InstanceScore> {
    instances
        .iter()
        .map(|i| InstanceScore {
            instance_id: i.instance_id.clone(),
            idiom_code: i.idiom_code.clone(),
            split: i.split,
            f1: instance_reward(&i.gold, &i.pred).f1,
            detection_correct: i.gold.is_empty() == i.pred.is_empty(),
        })
        .collect()
}
