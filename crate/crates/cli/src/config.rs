use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qrmia_core::{GbdtHyperParams, QuantileLevel, ScoreKind, SyntheticSpec, VarianceMode};

use crate::error::{CliError, CliResult};

/// Attack method selected for `train-attack` / `evaluate`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Marginal,
    Gbdt,
    Gaussian,
    Lira,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Marginal => "marginal",
            Method::Gbdt => "gbdt",
            Method::Gaussian => "gaussian",
            Method::Lira => "lira",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub num_examples: usize,
    pub num_classes: usize,
    pub feature_dim: usize,
    pub class_separation: f64,
    pub noise_scale_heterogeneity: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            num_examples: 1000,
            num_classes: 2,
            feature_dim: 4,
            class_separation: 2.0,
            noise_scale_heterogeneity: 0.6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TunerConfig {
    pub budget: usize,
    pub folds: usize,
}

impl Default for TunerConfig {
    fn default() -> Self {
        TunerConfig {
            budget: 30,
            folds: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupConfig {
    pub name: String,
    pub feature: usize,
    /// "gt" (strict) or "le".
    pub cmp: String,
    pub threshold: f64,
}

/// Declarative run configuration. Every stage resolves the same file plus
/// flag overrides; all randomness flows from the master seed through
/// per-stage derived seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub name: String,
    /// External dataset CSV; when unset, `gen` materializes the synthetic
    /// benchmark below.
    pub dataset: Option<PathBuf>,
    pub synthetic: SyntheticConfig,
    /// Private / public / holdout fractions.
    pub fractions: (f64, f64, f64),
    pub seed: u64,
    pub score_kind: ScoreKind,
    pub method: Method,
    /// Headline coverage level for the persisted attack and group audit.
    pub level: f64,
    /// Levels reported in the pinball diagnostics.
    pub levels: Vec<f64>,
    pub fpr_targets: Vec<f64>,
    /// Number of grid points for dense ROC sweeps.
    pub roc_grid: usize,
    /// Levels the gbdt attack is fitted at (its ROC granularity).
    pub gbdt_levels: Vec<f64>,
    pub target_hp: GbdtHyperParams,
    pub attack_hp: GbdtHyperParams,
    /// Shadow trainer configuration; defaults to the target's.
    pub shadow_hp: Option<GbdtHyperParams>,
    pub n_shadows: usize,
    pub tuner: TunerConfig,
    /// Fraction of public data used to fit conditional attacks; the rest
    /// calibrates the conformal shift.
    pub fit_fraction: f64,
    pub groups: Vec<GroupConfig>,
    pub variance_mode: VarianceMode,
    /// Level whose pinball loss annotates the compare ranking (the tail
    /// diagnostic paired with the primary FPR target).
    pub compare_pinball_level: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            name: "audit".into(),
            dataset: None,
            synthetic: SyntheticConfig::default(),
            fractions: (0.5, 0.3, 0.2),
            seed: 7,
            score_kind: ScoreKind::LogitGap,
            method: Method::Gaussian,
            level: 0.95,
            levels: vec![0.5, 0.9, 0.95, 0.99, 0.999],
            fpr_targets: vec![0.01, 0.001],
            roc_grid: 199,
            gbdt_levels: vec![
                0.5, 0.6, 0.7, 0.8, 0.85, 0.9, 0.92, 0.94, 0.95, 0.96, 0.97, 0.98, 0.99, 0.995,
                0.999,
            ],
            target_hp: GbdtHyperParams {
                depth: 3,
                l2_leaf_reg: 1.0,
                learning_rate: 0.1,
                subsample: 1.0,
                iterations: 200,
                seed: 0,
            },
            attack_hp: GbdtHyperParams {
                depth: 2,
                l2_leaf_reg: 2.0,
                learning_rate: 0.05,
                subsample: 1.0,
                iterations: 200,
                seed: 0,
            },
            shadow_hp: None,
            n_shadows: 16,
            tuner: TunerConfig::default(),
            fit_fraction: 0.6,
            groups: Vec::new(),
            variance_mode: VarianceMode::Global,
            compare_pinball_level: 0.99,
        }
    }
}

/// Flag overrides applied on top of the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub level: Option<f64>,
    pub fpr_targets: Option<Vec<f64>>,
    pub n_shadows: Option<usize>,
    pub method: Option<Method>,
    pub budget: Option<usize>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> CliResult<Self> {
        let mut config = match path {
            None => RunConfig::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::Config(format!("cannot parse {}: {e}", p.display())))?
            }
        };
        if let Some(seed) = overrides.seed {
            config.seed = seed;
        }
        if let Some(level) = overrides.level {
            config.level = level;
        }
        if let Some(targets) = &overrides.fpr_targets {
            config.fpr_targets = targets.clone();
        }
        if let Some(n) = overrides.n_shadows {
            config.n_shadows = n;
        }
        if let Some(method) = overrides.method {
            config.method = method;
        }
        if let Some(budget) = overrides.budget {
            config.tuner.budget = budget;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if !(self.level > 0.0 && self.level < 1.0) {
            return bad(format!("level must lie in (0,1), got {}", self.level));
        }
        for &l in self.levels.iter().chain(&self.gbdt_levels) {
            if !(l > 0.0 && l < 1.0) {
                return bad(format!("levels must lie in (0,1), got {l}"));
            }
        }
        for &t in &self.fpr_targets {
            if !(t > 0.0 && t < 1.0) {
                return bad(format!("fpr targets must lie in (0,1), got {t}"));
            }
        }
        if !(self.fit_fraction > 0.0 && self.fit_fraction < 1.0) {
            return bad(format!(
                "fit_fraction must lie in (0,1), got {}",
                self.fit_fraction
            ));
        }
        if self.roc_grid < 1 {
            return bad("roc_grid must be >= 1".into());
        }
        let (a, b, c) = self.fractions;
        if qrmia_core::SplitSpec::new(a, b, c, self.seed).is_err() {
            return bad(format!("invalid split fractions ({a}, {b}, {c})"));
        }
        for g in &self.groups {
            if g.cmp != "gt" && g.cmp != "le" {
                return bad(format!("group `{}` cmp must be `gt` or `le`", g.name));
            }
        }
        Ok(())
    }

    /// Stable hash over the resolved configuration (covers every seed and
    /// hyperparameter).
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        format!("{:016x}", fnv1a64(json.as_bytes()))
    }

    /// Stage-level digest: only the fields the stage actually consumes, so
    /// changing (say) the shadow count never marks a marginal report stale.
    /// Upstream changes propagate through input-file hashes instead.
    pub fn stage_digest(&self, stage: &str) -> String {
        use serde_json::json;
        let attack_fields = || {
            json!({
                "method": self.method,
                "level": self.level,
                "levels": self.levels,
                "attack_hp": self.attack_hp,
                "fit_fraction": self.fit_fraction,
                "groups": self.groups,
                "variance_mode": self.variance_mode,
                "roc_grid": self.roc_grid,
                "gbdt_levels": self.gbdt_levels,
                "seed": self.seed,
            })
        };
        let value = match stage {
            "gen" => json!({
                "dataset": self.dataset,
                "synthetic": self.synthetic,
                "seed": self.seed,
            }),
            "split" => json!({"fractions": self.fractions, "seed": self.seed}),
            "train-target" => json!({"target_hp": self.target_hp, "seed": self.seed}),
            "score" => json!({"score_kind": self.score_kind, "seed": self.seed}),
            "tune" => json!({
                "tuner": self.tuner,
                "levels": self.levels,
                "method": self.method,
                "seed": self.seed,
            }),
            "shadow" => json!({
                "n_shadows": self.n_shadows,
                "hp": self.shadow_hp.unwrap_or(self.target_hp),
                "score_kind": self.score_kind,
                "seed": self.seed,
            }),
            "train-attack" => attack_fields(),
            "evaluate" => json!({
                "attack": attack_fields(),
                "fpr_targets": self.fpr_targets,
            }),
            "compare" => json!({
                "fpr_targets": self.fpr_targets,
                "pinball_level": self.compare_pinball_level,
            }),
            _ => json!(self),
        };
        format!("{:016x}", fnv1a64(value.to_string().as_bytes()))
    }

    pub fn synthetic_spec(&self) -> SyntheticSpec {
        SyntheticSpec {
            num_examples: self.synthetic.num_examples,
            num_classes: self.synthetic.num_classes,
            feature_dim: self.synthetic.feature_dim,
            class_separation: self.synthetic.class_separation,
            noise_scale_heterogeneity: self.synthetic.noise_scale_heterogeneity,
            seed: qrmia_core::seed::derive_seed(self.seed, "gen"),
        }
    }

    pub fn split_spec(&self) -> qrmia_core::SplitSpec {
        let (a, b, c) = self.fractions;
        qrmia_core::SplitSpec {
            private: a,
            public: b,
            holdout: c,
            seed: qrmia_core::seed::derive_seed(self.seed, "split"),
        }
    }

    pub fn report_levels(&self) -> CliResult<Vec<QuantileLevel>> {
        self.levels
            .iter()
            .map(|&l| QuantileLevel::new(l).map_err(CliError::from))
            .collect()
    }

    pub fn group_specs(&self) -> Vec<qrmia_core::GroupSpecF64> {
        self.groups
            .iter()
            .map(|g| {
                qrmia_core::GroupSpec::threshold(
                    g.name.clone(),
                    g.feature,
                    if g.cmp == "gt" {
                        qrmia_core::CmpOp::Gt
                    } else {
                        qrmia_core::CmpOp::Le
                    },
                    g.threshold,
                )
            })
            .collect()
    }
}

pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_hash_is_stable() {
        let config = RunConfig::default();
        config.validate().unwrap();
        assert_eq!(config.hash(), config.hash());
        let mut other = config.clone();
        other.seed = 8;
        assert_ne!(config.hash(), other.hash());
    }

    #[test]
    fn overrides_apply() {
        let overrides = Overrides {
            seed: Some(99),
            level: Some(0.9),
            method: Some(Method::Lira),
            n_shadows: Some(4),
            fpr_targets: Some(vec![0.05]),
            budget: Some(3),
        };
        let config = RunConfig::load(None, &overrides).unwrap();
        assert_eq!(config.seed, 99);
        assert_eq!(config.level, 0.9);
        assert_eq!(config.method, Method::Lira);
        assert_eq!(config.n_shadows, 4);
        assert_eq!(config.fpr_targets, vec![0.05]);
        assert_eq!(config.tuner.budget, 3);
    }

    #[test]
    fn bad_level_is_a_config_error() {
        let overrides = Overrides {
            level: Some(1.5),
            ..Default::default()
        };
        let err = RunConfig::load(None, &overrides).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
