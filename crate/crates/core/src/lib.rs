//! Membership-inference audit toolkit.
//!
//! Attacks a classifier through its confidence scores alone: a single
//! quantile-regression model trained on public scores supplies per-example
//! decision thresholds, next to a marginal constant-threshold baseline and a
//! shadow-model likelihood-ratio baseline. Calibration corrections restore
//! target false positive rates marginally and per group, and the evaluation
//! suite reports ROC curves, precision at fixed FPR, public pinball-loss
//! diagnostics, and group-conditional FPR audits.
//!
//! The numeric core is generic over the scalar type via [`Float`]; `f64` is
//! the reference configuration and the `*F64` aliases at the crate root name
//! the concrete types most callers want.

pub mod attacks;
pub mod data;
pub mod error;
pub mod eval;
pub mod float;
pub mod learners;
pub mod scoring;
pub mod seed;
pub mod stats;

pub use error::{Error, Result};
pub use float::Float;

pub use attacks::{
    conformal_shift, group_shift_correct, lira_attack, lira_fit, lira_quantile_model, lira_score,
    marginal_attack, quantile_attack, train_shadow_ensemble, Attack, GroupShiftOutcome,
    LiraEntry, LiraGaussians, ShadowEnsemble, ThresholdRule, VarianceMode, Verdict,
};
pub use data::{
    evaluate_group, generate_synthetic, load_csv, save_csv, split_dataset, split_manifest, CmpOp,
    CsvSchema,
    Dataset, Example, GroupPredicate, GroupSpec, SplitManifest, SplitSpec, SyntheticSpec,
};
pub use eval::{
    confusion, group_fpr_audit, level_key, pinball_on_public, precision_at_fpr, roc_sweep,
    AttackMetrics, AttackReport, GroupAuditRow, OperatingPoint, PrecisionAtTable, RocCurve,
    RocPoint,
};
pub use learners::{
    fit_constant_quantile, fit_gaussian_regressor, fit_gbdt_classifier, fit_gbdt_quantile,
    fit_gbdt_quantile_multi, gaussian_quantile, mean_pinball, pinball_loss, tune_hyperparameters,
    ClassifierFile, FeatureRow, GaussianScoreModel, GbdtClassifier, GbdtHyperParams, GbdtQuantile,
    ModelFile,
    QuantileLevel, QuantileModel, TuneObjective, TuneResult,
};
pub use scoring::{
    confidence_logit_score, join_scores, logit_gap_score, score_dataset, Membership,
    PredictionMatrix, ScoreKind, ScoreRecord, ScoreSet, ScoredRow,
};

/// Concrete `f64` aliases for the common types.
pub type DatasetF64 = Dataset<f64>;
pub type ScoreSetF64 = ScoreSet<f64>;
pub type QuantileModelF64 = QuantileModel<f64>;
pub type AttackF64 = Attack<f64>;
pub type GroupSpecF64 = GroupSpec<f64>;
pub type ShadowEnsembleF64 = ShadowEnsemble<f64>;
pub type LiraGaussiansF64 = LiraGaussians<f64>;
