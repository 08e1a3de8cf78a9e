use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::float::Float;
use crate::learners::{LiraQuantileEntries, QuantileModel};
use crate::scoring::{ScoreRecord, ScoreSet};

use super::shadow::ShadowEnsemble;

/// How the Gaussian scale is estimated from shadow scores.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMode {
    /// One pooled sigma from all centered residuals. The default: stable
    /// down to two shadows, where per-column variances are undefined.
    Global,
    /// Per-column sigma; needs at least 3 in- and 3 out-samples per column.
    PerExample,
}

/// Per-example in/out score Gaussian estimates, keyed by example id.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiraEntry<T> {
    pub mu_in: T,
    pub mu_out: T,
    pub sigma: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiraGaussians<T> {
    pub entries: BTreeMap<u64, LiraEntry<T>>,
    pub sigma_floor: T,
    pub variance_mode: VarianceMode,
}

impl<T: Float> LiraGaussians<T> {
    pub fn entry(&self, id: u64) -> Result<&LiraEntry<T>> {
        self.entries.get(&id).ok_or_else(|| {
            Error::InvalidInput(format!(
                "example id {id} was not covered by the shadow ensemble"
            ))
        })
    }

    /// Map a raw score set through the per-example log-likelihood ratio.
    pub fn log_lr_scores(&self, scores: &ScoreSet<T>) -> Result<ScoreSet<T>> {
        let records = scores
            .records
            .iter()
            .map(|r| {
                Ok(ScoreRecord {
                    example_id: r.example_id,
                    score: lira_score(r.score, self.entry(r.example_id)?),
                    membership: r.membership,
                })
            })
            .collect::<Result<_>>()?;
        ScoreSet::new(
            records,
            scores.score_kind,
            format!("{}/log-lr", scores.source),
        )
    }
}

/// Estimate per-example in/out Gaussians from a shadow ensemble.
pub fn lira_fit<T: Float>(
    ensemble: &ShadowEnsemble<T>,
    variance_mode: VarianceMode,
) -> Result<LiraGaussians<T>> {
    ensemble.check_coverage()?;
    let floor = T::cast(crate::learners::DEFAULT_SIGMA_FLOOR);
    let n = ensemble.num_shadows();
    let m = ensemble.num_examples();

    let mut mu_in = vec![0.0f64; m];
    let mut mu_out = vec![0.0f64; m];
    let mut in_counts = vec![0usize; m];
    for j in 0..m {
        let (mut s_in, mut s_out) = (0.0f64, 0.0f64);
        let mut c_in = 0usize;
        for i in 0..n {
            let s = ensemble.scores[i][j].as_f64();
            if ensemble.masks[i][j] {
                s_in += s;
                c_in += 1;
            } else {
                s_out += s;
            }
        }
        if let VarianceMode::PerExample = variance_mode {
            if c_in < 3 || n - c_in < 3 {
                return Err(Error::InvalidInput(format!(
                    "per-example variance needs >= 3 in and 3 out samples per column \
                     (column {j} has {c_in}/{}); use global variance mode",
                    n - c_in
                )));
            }
        }
        mu_in[j] = s_in / c_in as f64;
        mu_out[j] = s_out / (n - c_in) as f64;
        in_counts[j] = c_in;
    }

    let column_sq_residuals = |j: usize| -> f64 {
        (0..n)
            .map(|i| {
                let s = ensemble.scores[i][j].as_f64();
                let mu = if ensemble.masks[i][j] { mu_in[j] } else { mu_out[j] };
                (s - mu) * (s - mu)
            })
            .sum()
    };

    let mut entries = BTreeMap::new();
    match variance_mode {
        VarianceMode::Global => {
            let total: f64 = (0..m).map(column_sq_residuals).sum();
            let sigma = T::cast((total / (n * m) as f64).sqrt()).max(floor);
            for (j, &id) in ensemble.example_ids.iter().enumerate() {
                entries.insert(
                    id,
                    LiraEntry {
                        mu_in: T::cast(mu_in[j]),
                        mu_out: T::cast(mu_out[j]),
                        sigma,
                    },
                );
            }
        }
        VarianceMode::PerExample => {
            for (j, &id) in ensemble.example_ids.iter().enumerate() {
                let sigma = T::cast((column_sq_residuals(j) / n as f64).sqrt()).max(floor);
                entries.insert(
                    id,
                    LiraEntry {
                        mu_in: T::cast(mu_in[j]),
                        mu_out: T::cast(mu_out[j]),
                        sigma,
                    },
                );
            }
        }
    }
    Ok(LiraGaussians {
        entries,
        sigma_floor: floor,
        variance_mode,
    })
}

/// Log-likelihood ratio of a score under the in/out Gaussians. With a shared
/// sigma this is affine in the score:
/// `(mu_in - mu_out) * (s - (mu_in + mu_out)/2) / sigma^2`.
pub fn lira_score<T: Float>(s: T, entry: &LiraEntry<T>) -> T {
    let mid = (entry.mu_in + entry.mu_out) / T::cast(2.0);
    (entry.mu_in - entry.mu_out) * (s - mid) / (entry.sigma * entry.sigma)
}

/// Read the per-example Gaussians as a quantile model:
/// `q(id, level) = mu_out(id) + sigma(id) * inv_phi(level)`. This puts the
/// likelihood-ratio baseline on the same pinball-loss scale as the other
/// threshold models.
pub fn lira_quantile_model<T: Float>(gaussians: &LiraGaussians<T>) -> QuantileModel<T> {
    QuantileModel::LiraDerived(LiraQuantileEntries {
        entries: gaussians
            .entries
            .iter()
            .map(|(&id, e)| (id, (e.mu_out, e.sigma)))
            .collect(),
    })
}
