//! Decision rules over confidence scores: the marginal baseline, the
//! quantile-regression attack, the shadow-model likelihood-ratio baseline,
//! and additive-shift recalibrations (marginal and group-conditional).

mod decision;
mod lira;
mod shadow;
mod shift;

pub use decision::{lira_attack, marginal_attack, quantile_attack, Attack, ThresholdRule, Verdict};
pub use lira::{lira_fit, lira_quantile_model, lira_score, LiraEntry, LiraGaussians, VarianceMode};
pub use shadow::{train_shadow_ensemble, ShadowEnsemble};
pub use shift::{conformal_shift, group_shift_correct, GroupShiftOutcome, GroupShiftRound};
