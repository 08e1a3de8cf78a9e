use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::float::Float;

/// Comparison operator of a group predicate. Boundary comparisons are
/// strict on the `Gt` side, so `Gt` and `Le` with the same threshold form
/// a complementary pair that partitions any dataset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CmpOp {
    Gt,
    Le,
}

/// Declarative membership rule over a single feature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupPredicate<T> {
    /// Every example belongs (the trivial group).
    All,
    Threshold {
        feature: usize,
        cmp: CmpOp,
        threshold: T,
    },
}

/// A named group: an indicator function over feature vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec<T> {
    pub name: String,
    pub predicate: GroupPredicate<T>,
}

impl<T: Float> GroupSpec<T> {
    pub fn always(name: impl Into<String>) -> Self {
        GroupSpec {
            name: name.into(),
            predicate: GroupPredicate::All,
        }
    }

    pub fn threshold(name: impl Into<String>, feature: usize, cmp: CmpOp, threshold: T) -> Self {
        GroupSpec {
            name: name.into(),
            predicate: GroupPredicate::Threshold {
                feature,
                cmp,
                threshold,
            },
        }
    }

    /// The complementary group (same threshold, opposite side).
    pub fn complement(&self, name: impl Into<String>) -> Result<Self> {
        match self.predicate {
            GroupPredicate::All => Err(Error::InvalidGroup(
                "the trivial group has no complement".into(),
            )),
            GroupPredicate::Threshold {
                feature,
                cmp,
                threshold,
            } => Ok(GroupSpec::threshold(
                name,
                feature,
                match cmp {
                    CmpOp::Gt => CmpOp::Le,
                    CmpOp::Le => CmpOp::Gt,
                },
                threshold,
            )),
        }
    }

    pub fn contains(&self, features: &[T]) -> Result<bool> {
        evaluate_group(self, features).map(|v| v == 1)
    }
}

/// Evaluate a group indicator on a feature vector; pure function of `x`.
pub fn evaluate_group<T: Float>(group: &GroupSpec<T>, features: &[T]) -> Result<u8> {
    match group.predicate {
        GroupPredicate::All => Ok(1),
        GroupPredicate::Threshold {
            feature,
            cmp,
            threshold,
        } => {
            if feature >= features.len() {
                return Err(Error::InvalidGroup(format!(
                    "group `{}` tests feature {feature} but the vector has dimension {}",
                    group.name,
                    features.len()
                )));
            }
            let v = features[feature];
            let hit = match cmp {
                CmpOp::Gt => v > threshold,
                CmpOp::Le => v <= threshold,
            };
            Ok(u8::from(hit))
        }
    }
}
