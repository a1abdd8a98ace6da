//! Precision/recall/F1, confusion matrices, the k-fold harness and the
//! results-table renderer.

mod cv;
mod metrics;
mod report;

pub use cv::{fold_seed, run_cv, run_cv_detailed, score_names, sha256_hex, training_hash, CvReport, FoldPredictions, FoldRecord, Task};
pub use metrics::{confusion, f1_score, score, weighted_f1, ClassMetrics, Scores};
pub use report::{render_model_table, render_report, ReportStyle, AVERAGE_LABEL, SCENARIOS};
