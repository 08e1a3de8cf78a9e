//! Metrics, ROC sweeps, precision at fixed FPR, public pinball-loss
//! diagnostics, group FPR audits, and report emission.

mod metrics;
mod report;
mod roc;

pub use metrics::{confusion, group_fpr_audit, pinball_on_public, AttackMetrics, GroupAuditRow};
pub use report::{level_key, AttackReport, PrecisionAtTable};
pub use roc::{precision_at_fpr, roc_sweep, OperatingPoint, RocCurve, RocPoint};
