use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::float::Float;
use crate::learners::gaussian::{gaussian_quantile, GaussianScoreModel};
use crate::learners::gbdt::{fit_gbdt_quantile, GbdtQuantile};
use crate::learners::pinball::{fit_constant_quantile, QuantileLevel};
use crate::learners::tree::GbdtHyperParams;

/// A feature row with an optional stable id. Conditional models ignore the
/// id; per-example models (the shadow-derived kind) require it.
#[derive(Clone, Copy, Debug)]
pub struct FeatureRow<'a, T> {
    pub id: Option<u64>,
    pub features: &'a [T],
}

impl<'a, T> FeatureRow<'a, T> {
    pub fn new(id: u64, features: &'a [T]) -> Self {
        FeatureRow {
            id: Some(id),
            features,
        }
    }

    pub fn anonymous(features: &'a [T]) -> Self {
        FeatureRow { id: None, features }
    }
}

/// Per-example Gaussian parameters derived from a shadow ensemble, keyed by
/// example id: the held-out mean and the (floored) standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiraQuantileEntries<T> {
    pub entries: BTreeMap<u64, (T, T)>,
}

/// Which levels a model can answer.
#[derive(Clone, Debug, PartialEq)]
pub enum LevelSupport {
    /// Only the listed levels (sorted ascending).
    Fixed(Vec<QuantileLevel>),
    /// Any level in (0, 1).
    Any,
}

impl LevelSupport {
    pub fn answers(&self, level: QuantileLevel) -> bool {
        match self {
            LevelSupport::Any => true,
            LevelSupport::Fixed(levels) => levels.iter().any(|&l| l == level),
        }
    }
}

/// Any predictor mapping examples to per-level score thresholds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QuantileModel<T> {
    /// A single threshold per level; the marginal baseline.
    Constant { thresholds: Vec<(QuantileLevel, T)> },
    /// One boosted pinball regressor per level, with sort-based
    /// non-crossing repair across levels at prediction time.
    GbdtPinball { models: Vec<GbdtQuantile<T>> },
    /// Parametric head answering every level from `(mu(x), sigma(x))`.
    GaussianHead(GaussianScoreModel<T>),
    /// Per-example Gaussians from a shadow ensemble, quantile-readable:
    /// `mu_out(id) + sigma(id) * inv_phi(level)`.
    LiraDerived(LiraQuantileEntries<T>),
}

impl<T: Float> QuantileModel<T> {
    /// Constant model fitted at each requested level on the given scores.
    pub fn fit_constant(scores: &[T], levels: &[QuantileLevel]) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidInput("no levels requested".into()));
        }
        let mut sorted = levels.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("levels are finite"));
        sorted.dedup();
        let thresholds = sorted
            .into_iter()
            .map(|level| Ok((level, fit_constant_quantile(scores, level)?)))
            .collect::<Result<_>>()?;
        Ok(QuantileModel::Constant { thresholds })
    }

    pub fn support(&self) -> LevelSupport {
        match self {
            QuantileModel::Constant { thresholds } => {
                LevelSupport::Fixed(thresholds.iter().map(|&(l, _)| l).collect())
            }
            QuantileModel::GbdtPinball { models } => {
                LevelSupport::Fixed(models.iter().map(|m| m.level).collect())
            }
            QuantileModel::GaussianHead(_) | QuantileModel::LiraDerived(_) => LevelSupport::Any,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            QuantileModel::Constant { .. } => "constant",
            QuantileModel::GbdtPinball { .. } => "gbdt_pinball",
            QuantileModel::GaussianHead(_) => "gaussian_head",
            QuantileModel::LiraDerived(_) => "lira_derived",
        }
    }

    /// Predicted threshold `q(x)` at the given level.
    ///
    /// Multi-level models apply a non-crossing repair: all level predictions
    /// at `x` are sorted and the requested level reads the sorted vector, so
    /// outputs are non-decreasing in level no matter what the per-level
    /// ensembles produced.
    pub fn predict(&self, x: FeatureRow<'_, T>, level: QuantileLevel) -> Result<T> {
        match self {
            QuantileModel::Constant { thresholds } => thresholds
                .iter()
                .find(|&&(l, _)| l == level)
                .map(|&(_, t)| t)
                .ok_or(Error::UnsupportedLevel {
                    level: level.value(),
                }),
            QuantileModel::GbdtPinball { models } => {
                let pos = models.iter().position(|m| m.level == level).ok_or(
                    Error::UnsupportedLevel {
                        level: level.value(),
                    },
                )?;
                let mut preds: Vec<T> = models.iter().map(|m| m.predict_row(x.features)).collect();
                preds.sort_by(|a, b| a.partial_cmp(b).expect("finite predictions"));
                Ok(preds[pos])
            }
            QuantileModel::GaussianHead(model) => model.predict_quantile(x.features, level),
            QuantileModel::LiraDerived(lira) => {
                let id = x.id.ok_or_else(|| {
                    Error::InvalidInput(
                        "per-example quantile model needs an example id".into(),
                    )
                })?;
                let &(mu_out, sigma) = lira.entries.get(&id).ok_or_else(|| {
                    Error::InvalidInput(format!(
                        "example id {id} was not covered by the shadow ensemble"
                    ))
                })?;
                gaussian_quantile(mu_out, sigma, level)
            }
        }
    }
}

/// Fit one boosted pinball model per level, packaged with non-crossing
/// repair. Per-level fits get distinct derived seeds.
pub fn fit_gbdt_quantile_multi<T: Float>(
    features: &[&[T]],
    scores: &[T],
    levels: &[QuantileLevel],
    hp: &GbdtHyperParams,
) -> Result<QuantileModel<T>> {
    if levels.is_empty() {
        return Err(Error::InvalidInput("no levels requested".into()));
    }
    let mut sorted = levels.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("levels are finite"));
    sorted.dedup();
    let models = sorted
        .into_iter()
        .enumerate()
        .map(|(i, level)| {
            let hp_i = hp.with_seed(crate::seed::derive_seed_indexed(
                hp.seed,
                "gbdt-level",
                i as u64,
            ));
            fit_gbdt_quantile(features, scores, level, &hp_i)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QuantileModel::GbdtPinball { models })
}

/// Versioned on-disk wrapper for model JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile<T> {
    pub version: u32,
    pub model: QuantileModel<T>,
}

impl<T: Float> ModelFile<T> {
    pub const VERSION: u32 = 1;

    pub fn new(model: QuantileModel<T>) -> Self {
        ModelFile {
            version: Self::VERSION,
            model,
        }
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ModelFile<T> = serde_json::from_str(&text)?;
        if file.version != Self::VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported model version {}",
                file.version
            )));
        }
        Ok(file)
    }
}
