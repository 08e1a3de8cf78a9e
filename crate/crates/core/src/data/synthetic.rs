use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Example};
use crate::error::{Error, Result};
use crate::float::Float;
use crate::seed::{rng_for, uniform_index, uniform_open01};
use crate::stats::sample_std_normal;

/// Specification of a class-conditional Gaussian mixture benchmark.
///
/// Features are drawn from `N(mean_k, I_d)` where the class means are
/// `class_separation` apart (exactly for `K = 2` or `K <= d`, approximately
/// beyond that). `noise_scale_heterogeneity` scales a feature-dependent
/// label-flip probability: examples with larger feature 0 carry more label
/// noise, which makes the conditional score distribution vary with `x` in
/// both location and spread. That heterogeneity is what a conditional
/// threshold can exploit and a single marginal threshold cannot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub num_examples: usize,
    pub num_classes: usize,
    pub feature_dim: usize,
    pub class_separation: f64,
    pub noise_scale_heterogeneity: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_examples == 0 {
            return Err(Error::InvalidSpec("num_examples must be positive".into()));
        }
        if self.num_classes < 2 {
            return Err(Error::InvalidSpec(format!(
                "num_classes must be >= 2, got {}",
                self.num_classes
            )));
        }
        if self.feature_dim == 0 {
            return Err(Error::InvalidSpec("feature_dim must be >= 1".into()));
        }
        if !(self.class_separation > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "class_separation must be > 0, got {}",
                self.class_separation
            )));
        }
        if !(self.noise_scale_heterogeneity >= 0.0) {
            return Err(Error::InvalidSpec(format!(
                "noise_scale_heterogeneity must be >= 0, got {}",
                self.noise_scale_heterogeneity
            )));
        }
        Ok(())
    }

    /// Mean vector of class `k`.
    pub fn class_mean(&self, k: usize) -> Vec<f64> {
        let d = self.feature_dim;
        let mut mean = vec![0.0; d];
        if self.num_classes == 2 {
            // Exactly class_separation apart along feature 0.
            mean[0] = if k == 0 {
                -self.class_separation / 2.0
            } else {
                self.class_separation / 2.0
            };
            return mean;
        }
        // Orthogonal axes scaled so pairwise distance is class_separation
        // for K <= d; further classes wrap with a magnitude bump.
        let axis = k % d;
        let wrap = (k / d) as f64;
        let sign = if (k / d) % 2 == 0 { 1.0 } else { -1.0 };
        mean[axis] = sign * (self.class_separation / std::f64::consts::SQRT_2) * (1.0 + wrap);
        mean
    }

    /// Label-flip probability for an example with feature vector `x`.
    pub fn flip_probability(&self, x0: f64) -> f64 {
        let gate = 1.0 / (1.0 + libm::exp(-x0));
        (self.noise_scale_heterogeneity * gate).min(0.49)
    }
}

/// Generate a synthetic dataset. Identical spec and seed produce
/// bit-identical output.
pub fn generate_synthetic<T: Float>(spec: &SyntheticSpec) -> Result<Dataset<T>> {
    spec.validate()?;
    let mut rng = rng_for(spec.seed, "synthetic-data");
    let k = spec.num_classes;
    let d = spec.feature_dim;
    let mut examples = Vec::with_capacity(spec.num_examples);
    for id in 0..spec.num_examples {
        let class = uniform_index(&mut rng, k);
        let mean = spec.class_mean(class);
        let mut features = Vec::with_capacity(d);
        for m in mean {
            features.push(m + sample_std_normal(&mut rng));
        }
        // Feature-dependent label noise; the feature vector keeps looking
        // like the true class, only the stored label flips.
        let mut label = class;
        if spec.noise_scale_heterogeneity > 0.0 {
            let p_flip = spec.flip_probability(features[0]);
            if uniform_open01(&mut rng) < p_flip {
                let offset = 1 + uniform_index(&mut rng, k - 1);
                label = (class + offset) % k;
            }
        }
        examples.push(Example {
            id: id as u64,
            features: features.into_iter().map(T::cast).collect(),
            label,
        });
    }
    Dataset::new(
        format!("synthetic-seed{}", spec.seed),
        k,
        examples,
        Vec::new(),
    )
}
