//! Test statistics computed from target-model outputs, and labeled score
//! sets.
//!
//! The score file format (`id,score,membership`) is the ingress point for
//! auditing external black-box models: any system able to emit that CSV can
//! be attacked and evaluated by this toolkit.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::float::{self, Float};

/// Probability clamp for degenerate confidences of exactly 0 or 1.
pub const CONFIDENCE_EPS: f64 = 1e-6;

/// Which statistic a score set holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    /// True-class logit minus the best other logit.
    LogitGap,
    /// Logit transform of the true-class confidence.
    ConfidenceLogit,
    /// True-class confidence, untransformed.
    RawConfidence,
}

impl ScoreKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScoreKind::LogitGap => "logit_gap",
            ScoreKind::ConfidenceLogit => "confidence_logit",
            ScoreKind::RawConfidence => "raw_confidence",
        }
    }
}

/// Ground-truth membership tag carried alongside each score.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    Member,
    NonMember,
    Unknown,
}

impl Membership {
    pub fn as_str(&self) -> &'static str {
        match self {
            Membership::Member => "member",
            Membership::NonMember => "nonmember",
            Membership::Unknown => "unknown",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "member" => Some(Membership::Member),
            "nonmember" => Some(Membership::NonMember),
            "unknown" => Some(Membership::Unknown),
            _ => None,
        }
    }
}

/// Per-example model outputs aligned to a dataset, either raw logits or
/// normalized probabilities.
#[derive(Clone, Debug, PartialEq)]
pub enum PredictionMatrix<T> {
    Logits(Vec<Vec<T>>),
    Probabilities(Vec<Vec<T>>),
}

impl<T: Float> PredictionMatrix<T> {
    pub fn num_rows(&self) -> usize {
        match self {
            PredictionMatrix::Logits(r) | PredictionMatrix::Probabilities(r) => r.len(),
        }
    }

    /// Check row count, width, finiteness, and (for probabilities)
    /// non-negativity and normalization within 1e-6.
    pub fn validate(&self, num_rows: usize, num_classes: usize) -> Result<()> {
        let rows = match self {
            PredictionMatrix::Logits(r) | PredictionMatrix::Probabilities(r) => r,
        };
        if rows.len() != num_rows {
            return Err(Error::Representation(format!(
                "prediction matrix has {} rows, dataset has {num_rows}",
                rows.len()
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != num_classes {
                return Err(Error::Representation(format!(
                    "row {i} has {} entries, expected {num_classes}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Representation(format!("row {i} has a non-finite value")));
            }
        }
        if let PredictionMatrix::Probabilities(rows) = self {
            for (i, row) in rows.iter().enumerate() {
                if row.iter().any(|&p| p < T::zero()) {
                    return Err(Error::Representation(format!("row {i} has a negative probability")));
                }
                let sum: T = row.iter().copied().sum();
                if (sum - T::one()).abs() > T::cast(1e-6) {
                    return Err(Error::Representation(format!(
                        "row {i} probabilities sum to {sum}, expected 1"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One scored example with its membership ground truth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord<T> {
    pub example_id: u64,
    pub score: T,
    pub membership: Membership,
}

/// A set of score records of one kind from one source model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet<T> {
    pub records: Vec<ScoreRecord<T>>,
    pub score_kind: ScoreKind,
    pub source: String,
}

impl<T: Float> ScoreSet<T> {
    pub fn new(
        records: Vec<ScoreRecord<T>>,
        score_kind: ScoreKind,
        source: impl Into<String>,
    ) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if !r.score.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "score for example {} is not finite",
                    r.example_id
                )));
            }
            if !seen.insert(r.example_id) {
                return Err(Error::InvalidInput(format!(
                    "duplicate example id {} in score set",
                    r.example_id
                )));
            }
        }
        Ok(ScoreSet {
            records,
            score_kind,
            source: source.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn scores(&self) -> Vec<T> {
        self.records.iter().map(|r| r.score).collect()
    }

    /// Write as `id,score,membership` CSV (shortest-round-trip floats).
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("id,score,membership\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{}\n",
                r.example_id,
                r.score,
                r.membership.as_str()
            ));
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Read an `id,score,membership` CSV.
    pub fn load_csv(
        path: impl AsRef<Path>,
        score_kind: ScoreKind,
        source: impl Into<String>,
    ) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines();
        let header = lines.next().unwrap_or("").trim_end_matches('\r');
        if header != "id,score,membership" {
            return Err(Error::Parse {
                row: 0,
                msg: format!("expected header `id,score,membership`, got `{header}`"),
            });
        }
        let mut records = Vec::new();
        for (i, line) in lines.enumerate() {
            let row = i + 1;
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(Error::Parse {
                    row,
                    msg: format!("expected 3 fields, found {}", fields.len()),
                });
            }
            let example_id: u64 = fields[0].trim().parse().map_err(|_| Error::Parse {
                row,
                msg: format!("bad id `{}`", fields[0]),
            })?;
            let score: f64 = fields[1].trim().parse().map_err(|_| Error::Parse {
                row,
                msg: format!("bad score `{}`", fields[1]),
            })?;
            let membership =
                Membership::parse(fields[2].trim()).ok_or_else(|| Error::Parse {
                    row,
                    msg: format!("bad membership `{}`", fields[2]),
                })?;
            records.push(ScoreRecord {
                example_id,
                score: T::cast(score),
                membership,
            });
        }
        ScoreSet::new(records, score_kind, source)
    }
}

/// Logit gap: true-class logit minus the largest other logit.
pub fn logit_gap_score<T: Float>(logits: &[T], true_label: usize) -> Result<T> {
    if logits.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "logit gap needs at least 2 classes, got {}",
            logits.len()
        )));
    }
    if true_label >= logits.len() {
        return Err(Error::InvalidInput(format!(
            "true label {true_label} out of range for {} classes",
            logits.len()
        )));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("logits must be finite".into()));
    }
    let mut best_other = T::neg_infinity();
    for (k, &z) in logits.iter().enumerate() {
        if k != true_label && z > best_other {
            best_other = z;
        }
    }
    Ok(logits[true_label] - best_other)
}

/// Logit transform of a confidence, with probabilities clamped into
/// `[eps, 1 - eps]` so degenerate 0/1 confidences stay finite.
pub fn confidence_logit_score<T: Float>(p: T) -> Result<T> {
    if !(p >= T::zero() && p <= T::one()) {
        return Err(Error::InvalidInput(format!(
            "confidence must lie in [0,1], got {p}"
        )));
    }
    let eps = T::cast(CONFIDENCE_EPS);
    let clamped = p.max(eps).min(T::one() - eps);
    Ok(float::ln(clamped) - float::ln(T::one() - clamped))
}

/// Score every example of a dataset with aligned model outputs.
///
/// `LogitGap` requires logits; `ConfidenceLogit` and `RawConfidence` require
/// probabilities. Output order matches dataset order.
pub fn score_dataset<T: Float>(
    preds: &PredictionMatrix<T>,
    data: &Dataset<T>,
    kind: ScoreKind,
    membership: Membership,
    source: impl Into<String>,
) -> Result<ScoreSet<T>> {
    preds.validate(data.len(), data.num_classes)?;
    let records: Vec<ScoreRecord<T>> = match (kind, preds) {
        (ScoreKind::LogitGap, PredictionMatrix::Logits(rows)) => data
            .examples
            .iter()
            .zip(rows)
            .map(|(ex, row)| {
                Ok(ScoreRecord {
                    example_id: ex.id,
                    score: logit_gap_score(row, ex.label)?,
                    membership,
                })
            })
            .collect::<Result<_>>()?,
        (ScoreKind::ConfidenceLogit, PredictionMatrix::Probabilities(rows)) => data
            .examples
            .iter()
            .zip(rows)
            .map(|(ex, row)| {
                Ok(ScoreRecord {
                    example_id: ex.id,
                    score: confidence_logit_score(row[ex.label])?,
                    membership,
                })
            })
            .collect::<Result<_>>()?,
        (ScoreKind::RawConfidence, PredictionMatrix::Probabilities(rows)) => data
            .examples
            .iter()
            .zip(rows)
            .map(|(ex, row)| {
                Ok(ScoreRecord {
                    example_id: ex.id,
                    score: row[ex.label],
                    membership,
                })
            })
            .collect::<Result<_>>()?,
        (kind, _) => {
            return Err(Error::Representation(format!(
                "score kind {} needs {} rows",
                kind.as_str(),
                if kind == ScoreKind::LogitGap {
                    "logit"
                } else {
                    "probability"
                }
            )));
        }
    };
    ScoreSet::new(records, kind, source)
}

/// A score record joined with its feature vector.
#[derive(Clone, Copy, Debug)]
pub struct ScoredRow<'a, T> {
    pub id: u64,
    pub features: &'a [T],
    pub score: T,
    pub membership: Membership,
}

/// Join a score set against the dataset it was computed from, by example id,
/// preserving record order.
pub fn join_scores<'a, T: Float>(
    data: &'a Dataset<T>,
    scores: &ScoreSet<T>,
) -> Result<Vec<ScoredRow<'a, T>>> {
    let index = data.id_index();
    scores
        .records
        .iter()
        .map(|r| {
            let &i = index.get(&r.example_id).ok_or_else(|| {
                Error::InvalidInput(format!(
                    "score for id {} has no matching example",
                    r.example_id
                ))
            })?;
            Ok(ScoredRow {
                id: r.example_id,
                features: data.examples[i].features.as_slice(),
                score: r.score,
                membership: r.membership,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticSpec};

    #[test]
    fn logit_gap_hand_values() {
        assert_eq!(logit_gap_score(&[2.0, 1.0, 0.0], 0).unwrap(), 1.0);
        assert_eq!(logit_gap_score(&[3.0, 3.0, 3.0], 1).unwrap(), 0.0);
        assert_eq!(logit_gap_score(&[0.0, 3.0, 1.0], 0).unwrap(), -3.0);
        assert!(logit_gap_score(&[1.0], 0).is_err());
    }

    #[test]
    fn confidence_logit_hand_values() {
        assert_eq!(confidence_logit_score(0.5f64).unwrap(), 0.0);
        assert!((confidence_logit_score(0.9f64).unwrap() - 9.0f64.ln()).abs() < 1e-12);
        let hi = confidence_logit_score(1.0f64).unwrap();
        let bound = ((1.0 - CONFIDENCE_EPS) / CONFIDENCE_EPS).ln();
        assert!((hi - bound).abs() < 1e-9, "clamped value {hi} vs {bound}");
        assert!((hi - 13.8155).abs() < 1e-3);
        assert!(confidence_logit_score(1.5f64).is_err());
        assert!(confidence_logit_score(-0.1f64).is_err());
    }

    fn small_dataset() -> Dataset<f64> {
        generate_synthetic(&SyntheticSpec {
            num_examples: 3,
            num_classes: 3,
            feature_dim: 2,
            class_separation: 1.0,
            noise_scale_heterogeneity: 0.0,
            seed: 2,
        })
        .unwrap()
    }

    #[test]
    fn score_dataset_matches_rowwise_oracle() {
        let data = small_dataset();
        let logits = vec![
            vec![2.0, 1.0, 0.0],
            vec![0.0, 3.0, 1.0],
            vec![-1.0, -1.0, 4.0],
        ];
        let preds = PredictionMatrix::Logits(logits.clone());
        let set =
            score_dataset(&preds, &data, ScoreKind::LogitGap, Membership::Member, "t").unwrap();
        assert_eq!(set.len(), 3);
        for (rec, (row, ex)) in set.records.iter().zip(logits.iter().zip(&data.examples)) {
            assert_eq!(rec.score, logit_gap_score(row, ex.label).unwrap());
            assert_eq!(rec.membership, Membership::Member);
        }
    }

    #[test]
    fn unnormalized_probabilities_are_rejected() {
        let data = small_dataset();
        let preds = PredictionMatrix::Probabilities(vec![
            vec![0.5, 0.2, 0.2],
            vec![0.3, 0.3, 0.4],
            vec![0.1, 0.1, 0.8],
        ]);
        let err = score_dataset(
            &preds,
            &data,
            ScoreKind::ConfidenceLogit,
            Membership::NonMember,
            "t",
        )
        .unwrap_err();
        assert!(matches!(err, Error::Representation(_)));
    }

    #[test]
    fn kind_and_representation_must_match() {
        let data = small_dataset();
        let preds = PredictionMatrix::Logits(vec![vec![0.0; 3]; 3]);
        assert!(matches!(
            score_dataset(
                &preds,
                &data,
                ScoreKind::ConfidenceLogit,
                Membership::Unknown,
                "t"
            ),
            Err(Error::Representation(_))
        ));
    }

    #[test]
    fn score_csv_round_trip() {
        let set = ScoreSet::new(
            vec![
                ScoreRecord {
                    example_id: 0,
                    score: -0.125,
                    membership: Membership::Member,
                },
                ScoreRecord {
                    example_id: 7,
                    score: 2.5e-3,
                    membership: Membership::NonMember,
                },
            ],
            ScoreKind::LogitGap,
            "target",
        )
        .unwrap();
        let p = std::env::temp_dir().join(format!("qrmia-scores-{}.csv", std::process::id()));
        set.save_csv(&p).unwrap();
        let back: ScoreSet<f64> = ScoreSet::load_csv(&p, ScoreKind::LogitGap, "target").unwrap();
        assert_eq!(set, back);
        std::fs::remove_file(p).ok();
    }
}
