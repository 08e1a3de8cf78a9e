use serde::{Deserialize, Serialize};

use crate::attacks::Attack;
use crate::error::Result;
use crate::float::Float;
use crate::scoring::ScoredRow;

use super::metrics::confusion;

/// One swept operating point. `param` is the sweep parameter (a quantile
/// level or a log-LR threshold); the two synthetic endpoints carry no
/// parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    pub param: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub precision: Option<f64>,
}

/// An ROC curve: fpr-sorted points bracketed by (0,0) and (1,1), with
/// trapezoid AUC.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// Sweep a family of attacks over member/nonmember rows: one point per
/// grid entry plus the two trivial endpoints, sorted by (fpr, tpr), with
/// trapezoid AUC.
pub fn roc_sweep<T: Float>(
    family: &[(f64, Attack<T>)],
    members: &[ScoredRow<'_, T>],
    nonmembers: &[ScoredRow<'_, T>],
) -> Result<RocCurve> {
    let mut points = Vec::with_capacity(family.len() + 2);
    points.push(RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        param: None,
        precision: None,
    });
    for (param, attack) in family {
        let m = confusion(attack, members, nonmembers)?;
        points.push(RocPoint {
            fpr: m.fpr,
            tpr: m.tpr,
            param: Some(*param),
            precision: m.precision,
        });
    }
    points.push(RocPoint {
        fpr: 1.0,
        tpr: 1.0,
        param: None,
        precision: None,
    });
    points.sort_by(|a, b| {
        a.fpr
            .partial_cmp(&b.fpr)
            .unwrap()
            .then(a.tpr.partial_cmp(&b.tpr).unwrap())
    });
    let auc = trapezoid_auc(&points);
    Ok(RocCurve { points, auc })
}

fn trapezoid_auc(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) / 2.0)
        .sum()
}

/// The realized operating point chosen for a target FPR, when one exists.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub precision: Option<f64>,
    pub achieved_fpr: Option<f64>,
    pub param: Option<f64>,
}

impl OperatingPoint {
    pub fn undefined() -> Self {
        OperatingPoint {
            precision: None,
            achieved_fpr: None,
            param: None,
        }
    }
}

/// Precision at a target FPR, from realized operating points only.
///
/// Selects the swept point whose empirical FPR is the largest value in
/// `(0, target]` (ties prefer higher TPR); decisions are never interpolated
/// between points, and a point must have rejected at least one nonmember to
/// qualify, so the rank granularity of the nonmember sample bounds what
/// targets are answerable. Reports the achieved FPR alongside.
pub fn precision_at_fpr(curve: &RocCurve, target_fpr: f64) -> OperatingPoint {
    assert!(
        target_fpr > 0.0 && target_fpr < 1.0,
        "target fpr must lie in (0,1)"
    );
    let mut chosen: Option<&RocPoint> = None;
    for p in &curve.points {
        if p.param.is_none() || !(p.fpr > 0.0 && p.fpr <= target_fpr) {
            continue;
        }
        let better = match chosen {
            None => true,
            Some(c) => p.fpr > c.fpr || (p.fpr == c.fpr && p.tpr > c.tpr),
        };
        if better {
            chosen = Some(p);
        }
    }
    match chosen {
        None => OperatingPoint::undefined(),
        Some(p) => OperatingPoint {
            precision: Some(p.tpr / (p.tpr + p.fpr)),
            achieved_fpr: Some(p.fpr),
            param: p.param,
        },
    }
}
