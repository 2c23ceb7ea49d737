//! Detection and localization metrics, reports and paired significance tests.

pub mod metrics;
pub mod report;
pub mod significance;

pub use metrics::{
    detection_metrics, localization_metrics, DetectionMetrics, IdiomDetection, LocalizationMetrics,
    LocalizationMode,
};
pub use report::{build_report, instance_scores, EvalInstance, InstanceScore, MetricsReport};
pub use significance::{bonferroni, significance_table, wilcoxon_signed_rank, SignificanceRow, WilcoxonResult};
