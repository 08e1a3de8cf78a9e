use serde::{Deserialize, Serialize};

use crate::attacks::{Attack, Verdict};
use crate::data::{evaluate_group, GroupSpec};
use crate::error::{Error, Result};
use crate::float::Float;
use crate::learners::{pinball_loss, FeatureRow, QuantileLevel, QuantileModel};
use crate::scoring::{Membership, ScoredRow};

/// Confusion counts and derived rates for one operating point.
///
/// `precision` is `tpr / (tpr + fpr)`: the accuracy of the attack
/// conditioned on a positive prediction under balanced priors. It is `None`
/// when the attack rejects nothing (no positive predictions to condition
/// on).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackMetrics {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    pub fpr: f64,
    pub tpr: f64,
    pub precision: Option<f64>,
}

impl AttackMetrics {
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> Result<Self> {
        if tp + fn_ == 0 || fp + tn == 0 {
            return Err(Error::EmptyInput(
                "confusion needs both members and nonmembers".into(),
            ));
        }
        let tpr = tp as f64 / (tp + fn_) as f64;
        let fpr = fp as f64 / (fp + tn) as f64;
        let precision = if tpr + fpr > 0.0 {
            Some(tpr / (tpr + fpr))
        } else {
            None
        };
        Ok(AttackMetrics {
            tp,
            fp,
            tn,
            fn_,
            fpr,
            tpr,
            precision,
        })
    }
}

fn check_tags<T: Float>(rows: &[ScoredRow<'_, T>], tag: Membership, what: &str) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::EmptyInput(format!("{what} set is empty")));
    }
    if rows.iter().any(|r| r.membership != tag) {
        return Err(Error::InvalidInput(format!(
            "{what} set contains records not tagged {}",
            tag.as_str()
        )));
    }
    Ok(())
}

/// Evaluate an attack on member and nonmember rows.
pub fn confusion<T: Float>(
    attack: &Attack<T>,
    members: &[ScoredRow<'_, T>],
    nonmembers: &[ScoredRow<'_, T>],
) -> Result<AttackMetrics> {
    check_tags(members, Membership::Member, "member")?;
    check_tags(nonmembers, Membership::NonMember, "nonmember")?;
    let rejects = |rows: &[ScoredRow<'_, T>]| -> Result<usize> {
        let mut n = 0;
        for r in rows {
            if attack.decide(FeatureRow::new(r.id, r.features), r.score)? == Verdict::RejectNull {
                n += 1;
            }
        }
        Ok(n)
    };
    let tp = rejects(members)?;
    let fp = rejects(nonmembers)?;
    AttackMetrics::from_counts(tp, fp, nonmembers.len() - fp, members.len() - tp)
}

/// Mean pinball loss of a threshold model on public rows, per level.
///
/// Every model kind goes through the same sample and levels, so the results
/// are directly comparable across methods; the method with the smallest
/// public pinball loss is expected to be the stronger attack.
pub fn pinball_on_public<T: Float>(
    model: &QuantileModel<T>,
    public: &[ScoredRow<'_, T>],
    levels: &[QuantileLevel],
) -> Result<Vec<(QuantileLevel, f64)>> {
    if public.is_empty() {
        return Err(Error::EmptyInput("pinball diagnostic needs public rows".into()));
    }
    levels
        .iter()
        .map(|&level| {
            let mut sum = 0.0f64;
            for r in public {
                let q = model.predict(FeatureRow::new(r.id, r.features), level)?;
                sum += pinball_loss(q, r.score, level).as_f64();
            }
            Ok((level, sum / public.len() as f64))
        })
        .collect()
}

/// One row of the group-conditional FPR audit. Groups with no members in
/// the audited sample keep their row with `fpr`/`deviation` unset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupAuditRow {
    pub group: String,
    pub n: usize,
    pub fpr: Option<f64>,
    pub deviation: Option<f64>,
}

/// Per-group empirical FPR of the attack on nonmember rows, with deviation
/// from the attack's target `alpha`.
pub fn group_fpr_audit<T: Float>(
    attack: &Attack<T>,
    groups: &[GroupSpec<T>],
    public: &[ScoredRow<'_, T>],
) -> Result<Vec<GroupAuditRow>> {
    check_tags(public, Membership::NonMember, "audit")?;
    let alpha = attack
        .level()
        .ok_or_else(|| Error::InvalidInput("group audit needs a quantile-level attack".into()))?
        .alpha();
    groups
        .iter()
        .map(|g| {
            let mut n = 0usize;
            let mut rejected = 0usize;
            for r in public {
                if evaluate_group(g, r.features)? == 1 {
                    n += 1;
                    if attack.decide(FeatureRow::new(r.id, r.features), r.score)?
                        == Verdict::RejectNull
                    {
                        rejected += 1;
                    }
                }
            }
            if n == 0 {
                return Ok(GroupAuditRow {
                    group: g.name.clone(),
                    n: 0,
                    fpr: None,
                    deviation: None,
                });
            }
            let fpr = rejected as f64 / n as f64;
            Ok(GroupAuditRow {
                group: g.name.clone(),
                n,
                fpr: Some(fpr),
                deviation: Some(fpr - alpha),
            })
        })
        .collect()
}
