//! Automatic evaluation: Distinct-n, A-SAR, skeleton retention, perplexity
//! and report files.

mod conflict;
mod metrics;
mod report;

pub use conflict::ConflictMatrix;
pub use metrics::{a_sar, distinct_n, perplexity, skeleton_retention, StylePredictor};
pub use report::{EvalReport, MetricRow, OVERALL};
