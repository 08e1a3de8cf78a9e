use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{evaluate_group, GroupSpec};
use crate::error::{Error, Result};
use crate::float::Float;
use crate::learners::{FeatureRow, QuantileLevel, QuantileModel};
use crate::scoring::ScoreSet;

/// Outcome of the hypothesis test: `AcceptNull` keeps the example presumed
/// unseen; `RejectNull` accuses it of being a training member.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    AcceptNull,
    RejectNull,
}

/// Where an attack's per-example threshold comes from.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum ThresholdRule<T> {
    /// A quantile model read at one level. The model is shared so sweeps
    /// across many levels stay cheap.
    Quantile {
        model: Arc<QuantileModel<T>>,
        level: QuantileLevel,
    },
    /// A fixed threshold on an already-transformed score (the
    /// likelihood-ratio attack thresholds log-LR values this way).
    Fixed { value: T },
}

/// A decision rule `A(x, s)`: reject the null (accuse) exactly when the
/// score reaches the effective threshold
/// `q(x) + shift + sum(eta_g * g(x))`. The boundary `s = threshold` rejects.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Attack<T> {
    pub rule: ThresholdRule<T>,
    /// Global additive correction (conformal shift).
    pub shift: T,
    /// Per-group additive corrections.
    pub group_shifts: Vec<(GroupSpec<T>, T)>,
}

impl<T: Float> Attack<T> {
    pub fn new(rule: ThresholdRule<T>) -> Self {
        Attack {
            rule,
            shift: T::zero(),
            group_shifts: Vec::new(),
        }
    }

    /// The coverage level this attack was built at, when it has one.
    pub fn level(&self) -> Option<QuantileLevel> {
        match &self.rule {
            ThresholdRule::Quantile { level, .. } => Some(*level),
            ThresholdRule::Fixed { .. } => None,
        }
    }

    pub fn model(&self) -> Option<&Arc<QuantileModel<T>>> {
        match &self.rule {
            ThresholdRule::Quantile { model, .. } => Some(model),
            ThresholdRule::Fixed { .. } => None,
        }
    }

    /// Effective threshold at `x`, including all shifts.
    pub fn effective_threshold(&self, x: FeatureRow<'_, T>) -> Result<T> {
        let base = match &self.rule {
            ThresholdRule::Quantile { model, level } => model.predict(x, *level)?,
            ThresholdRule::Fixed { value } => *value,
        };
        let mut threshold = base + self.shift;
        for (group, eta) in &self.group_shifts {
            if evaluate_group(group, x.features)? == 1 {
                threshold += *eta;
            }
        }
        if !threshold.is_finite() {
            return Err(Error::InvalidInput(format!(
                "effective threshold is not finite at id {:?}",
                x.id
            )));
        }
        Ok(threshold)
    }

    /// Decide membership for a scored example. `s >= threshold` rejects the
    /// null; the boundary itself rejects.
    pub fn decide(&self, x: FeatureRow<'_, T>, score: T) -> Result<Verdict> {
        let threshold = self.effective_threshold(x)?;
        Ok(if score >= threshold {
            Verdict::RejectNull
        } else {
            Verdict::AcceptNull
        })
    }
}

/// The marginal baseline: one constant threshold, the rank-rule quantile of
/// the public nonmember scores at the requested level. Its empirical FPR on
/// the fitting sample is at most `alpha + 1/(n+1)` by construction.
pub fn marginal_attack<T: Float>(
    public_scores: &ScoreSet<T>,
    level: QuantileLevel,
) -> Result<Attack<T>> {
    if public_scores.is_empty() {
        return Err(Error::EmptyInput("marginal attack needs public scores".into()));
    }
    if public_scores
        .records
        .iter()
        .any(|r| r.membership != crate::scoring::Membership::NonMember)
    {
        return Err(Error::InvalidInput(
            "marginal attack must be fit on nonmember scores".into(),
        ));
    }
    let model = QuantileModel::fit_constant(&public_scores.scores(), &[level])?;
    Ok(Attack::new(ThresholdRule::Quantile {
        model: Arc::new(model),
        level,
    }))
}

/// Wrap a quantile model as an attack at one of its supported levels.
pub fn quantile_attack<T: Float>(
    model: Arc<QuantileModel<T>>,
    level: QuantileLevel,
) -> Result<Attack<T>> {
    if !model.support().answers(level) {
        return Err(Error::UnsupportedLevel {
            level: level.value(),
        });
    }
    Ok(Attack::new(ThresholdRule::Quantile { model, level }))
}

/// The likelihood-ratio attack as a decision rule over log-LR scores:
/// feed it scores already mapped through `lira_score`.
pub fn lira_attack<T: Float>(lr_threshold: T) -> Attack<T> {
    Attack::new(ThresholdRule::Fixed {
        value: lr_threshold,
    })
}
