use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::float::Float;
use crate::learners::{fit_gbdt_classifier, GbdtHyperParams};
use crate::scoring::{confidence_logit_score, logit_gap_score, ScoreKind};
use crate::seed::{derive_seed_indexed, rng_for_indexed, sample_indices};

/// A collection of shadow classifiers trained on random halves of a pool,
/// with every pool example scored by every shadow.
///
/// Masks are drawn as complementary pairs of halves (shadow 2i+1 trains on
/// the complement of shadow 2i), so every example is in and out of at least
/// one shadow whenever `n >= 2`; an odd trailing shadow gets an independent
/// half.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadowEnsemble<T> {
    /// Column order: pool example ids.
    pub example_ids: Vec<u64>,
    /// `masks[i][j]`: shadow i trained on example j.
    pub masks: Vec<Vec<bool>>,
    /// `scores[i][j]`: shadow i's statistic on example j.
    pub scores: Vec<Vec<T>>,
    pub score_kind: ScoreKind,
    pub trainer_config: GbdtHyperParams,
    pub seed: u64,
}

impl<T: Float> ShadowEnsemble<T> {
    pub fn num_shadows(&self) -> usize {
        self.masks.len()
    }

    pub fn num_examples(&self) -> usize {
        self.example_ids.len()
    }

    /// Column index of a pool example id.
    pub fn column_of(&self, id: u64) -> Option<usize> {
        self.example_ids.binary_search(&id).ok()
    }

    /// Verify that every column has at least one in-row and one out-row.
    pub fn check_coverage(&self) -> Result<()> {
        for j in 0..self.num_examples() {
            let ins = self.masks.iter().filter(|m| m[j]).count();
            if ins == 0 || ins == self.num_shadows() {
                return Err(Error::MaskConstraint { retries: 0 });
            }
        }
        Ok(())
    }

    /// Masks as a 0/1 CSV, one row per shadow, columns in id order.
    pub fn masks_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(
            &self
                .example_ids
                .iter()
                .map(|id| id.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        out.push('\n');
        for row in &self.masks {
            let line: Vec<&str> = row.iter().map(|&b| if b { "1" } else { "0" }).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    /// Score matrix as CSV, same layout as the mask CSV.
    pub fn scores_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(
            &self
                .example_ids
                .iter()
                .map(|id| id.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        out.push('\n');
        for row in &self.scores {
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

const MASK_RETRIES: usize = 100;

fn draw_masks<R: rand_core::RngCore>(
    rng: &mut R,
    num_shadows: usize,
    num_examples: usize,
) -> Vec<Vec<bool>> {
    let half = num_examples / 2;
    let mut masks = Vec::with_capacity(num_shadows);
    while masks.len() + 1 < num_shadows {
        let mut mask = vec![false; num_examples];
        for idx in sample_indices(rng, num_examples, half) {
            mask[idx] = true;
        }
        let complement: Vec<bool> = mask.iter().map(|&b| !b).collect();
        masks.push(mask);
        masks.push(complement);
    }
    if masks.len() < num_shadows {
        let mut mask = vec![false; num_examples];
        for idx in sample_indices(rng, num_examples, half) {
            mask[idx] = true;
        }
        masks.push(mask);
    }
    masks
}

/// Train `n` shadow classifiers on random halves of the pool and score every
/// pool example with each of them.
///
/// The pool is whatever set of examples the attack will later need scored
/// per-example: for end-to-end audits that is the full dataset, so members
/// and holdout examples get in/out estimates too. Shadows train in parallel
/// but assemble in shadow-index order, so the result is a pure function of
/// the seed.
pub fn train_shadow_ensemble<T: Float>(
    pool: &Dataset<T>,
    num_shadows: usize,
    hp: &GbdtHyperParams,
    score_kind: ScoreKind,
    seed: u64,
) -> Result<ShadowEnsemble<T>> {
    hp.validate()?;
    if num_shadows < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 shadows, got {num_shadows}"
        )));
    }
    let m = pool.len();
    if m < 20 {
        return Err(Error::InvalidInput(format!(
            "pool of {m} examples is too small to train shadow halves"
        )));
    }

    // Complementary pairs guarantee coverage; the retry loop guards the
    // odd-shadow case and stays as the documented fallback.
    let mut masks = None;
    for retry in 0..MASK_RETRIES {
        let mut rng = rng_for_indexed(seed, "shadow-masks", retry as u64);
        let candidate = draw_masks(&mut rng, num_shadows, m);
        let covered = (0..m).all(|j| {
            let ins = candidate.iter().filter(|mask| mask[j]).count();
            ins > 0 && ins < num_shadows
        });
        if covered {
            masks = Some(candidate);
            break;
        }
    }
    let masks = masks.ok_or(Error::MaskConstraint {
        retries: MASK_RETRIES,
    })?;

    let rows = pool.feature_rows();
    let labels = pool.labels();
    let scores: Vec<Vec<T>> = masks
        .par_iter()
        .enumerate()
        .map(|(i, mask)| -> Result<Vec<T>> {
            let train_rows: Vec<&[T]> = mask
                .iter()
                .zip(&rows)
                .filter(|(&m, _)| m)
                .map(|(_, &r)| r)
                .collect();
            let train_labels: Vec<usize> = mask
                .iter()
                .zip(&labels)
                .filter(|(&m, _)| m)
                .map(|(_, &l)| l)
                .collect();
            let shadow_hp =
                hp.with_seed(derive_seed_indexed(seed, "shadow-train", i as u64));
            let model =
                fit_gbdt_classifier(&train_rows, &train_labels, pool.num_classes, &shadow_hp)?;
            rows.iter()
                .zip(&labels)
                .map(|(x, &y)| match score_kind {
                    ScoreKind::LogitGap => logit_gap_score(&model.predict_logits_row(x), y),
                    ScoreKind::ConfidenceLogit => {
                        confidence_logit_score(model.predict_proba_row(x)[y])
                    }
                    ScoreKind::RawConfidence => Ok(model.predict_proba_row(x)[y]),
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    Ok(ShadowEnsemble {
        example_ids: pool.ids(),
        masks,
        scores,
        score_kind,
        trainer_config: *hp,
        seed,
    })
}
