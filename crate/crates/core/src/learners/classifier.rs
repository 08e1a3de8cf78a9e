use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::float::Float;
use crate::learners::tree::{fit_tree, GbdtHyperParams, Tree, TreeParams};
use crate::seed::{rng_for_indexed, sample_indices};

/// K-way gradient-boosted classifier with a softmax cross-entropy objective.
///
/// One tree per class per iteration, Newton leaf values. Exposes raw logits
/// (for the logit-gap statistic) as well as normalized probabilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbdtClassifier<T> {
    pub num_classes: usize,
    pub feature_dim: usize,
    /// Per-class log-prior used as the initial logit.
    pub base: Vec<T>,
    /// `trees[m][k]` is iteration m's tree for class k.
    pub trees: Vec<Vec<Tree<T>>>,
    pub hp: GbdtHyperParams,
    /// Mean training cross-entropy after each iteration (index 0 = priors).
    pub train_loss: Vec<f64>,
}

impl<T: Float> GbdtClassifier<T> {
    pub fn predict_logits_row(&self, x: &[T]) -> Vec<T> {
        let lr = T::cast(self.hp.learning_rate);
        let mut logits = self.base.clone();
        for per_class in &self.trees {
            for (k, tree) in per_class.iter().enumerate() {
                logits[k] += lr * tree.predict_row(x);
            }
        }
        logits
    }

    pub fn predict_logits(&self, rows: &[&[T]]) -> Vec<Vec<T>> {
        rows.iter().map(|x| self.predict_logits_row(x)).collect()
    }

    pub fn predict_proba_row(&self, x: &[T]) -> Vec<T> {
        softmax(&self.predict_logits_row(x))
    }

    pub fn predict_proba(&self, rows: &[&[T]]) -> Vec<Vec<T>> {
        rows.iter().map(|x| self.predict_proba_row(x)).collect()
    }

    pub fn predict_label_row(&self, x: &[T]) -> usize {
        let logits = self.predict_logits_row(x);
        argmax(&logits)
    }

    /// Fraction of rows whose argmax logit matches the label.
    pub fn accuracy(&self, rows: &[&[T]], labels: &[usize]) -> f64 {
        assert_eq!(rows.len(), labels.len());
        let correct = rows
            .iter()
            .zip(labels)
            .filter(|(x, &y)| self.predict_label_row(x) == y)
            .count();
        correct as f64 / rows.len() as f64
    }
}

fn argmax<T: Float>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn softmax<T: Float>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().cloned().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits
        .iter()
        .map(|&z| crate::float::exp(z - max))
        .collect();
    let sum: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Versioned on-disk wrapper for classifier JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierFile<T> {
    pub version: u32,
    pub model: GbdtClassifier<T>,
}

impl<T: Float> ClassifierFile<T> {
    pub const VERSION: u32 = 1;

    pub fn new(model: GbdtClassifier<T>) -> Self {
        ClassifierFile {
            version: Self::VERSION,
            model,
        }
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> crate::error::Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json).map_err(|e| crate::error::Error::io(path, e))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> crate::error::Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| crate::error::Error::io(path, e))?;
        let file: ClassifierFile<T> = serde_json::from_str(&text)?;
        if file.version != Self::VERSION {
            return Err(crate::error::Error::InvalidInput(format!(
                "unsupported classifier version {}",
                file.version
            )));
        }
        Ok(file)
    }
}

/// Train a K-way boosted classifier.
pub fn fit_gbdt_classifier<T: Float>(
    features: &[&[T]],
    labels: &[usize],
    num_classes: usize,
    hp: &GbdtHyperParams,
) -> Result<GbdtClassifier<T>> {
    hp.validate()?;
    let n = labels.len();
    if features.len() != n {
        return Err(Error::InvalidInput(format!(
            "features ({}) and labels ({n}) are misaligned",
            features.len()
        )));
    }
    if n < 10 {
        return Err(Error::InvalidInput(format!(
            "classifier fitting needs at least 10 examples, got {n}"
        )));
    }
    if num_classes < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 classes, got {num_classes}"
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
        return Err(Error::InvalidInput(format!(
            "label {bad} out of range for {num_classes} classes"
        )));
    }
    let mut counts = vec![0usize; num_classes];
    for &y in labels {
        counts[y] += 1;
    }
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::InvalidInput(
            "training set contains a single class".into(),
        ));
    }

    let feature_dim = features[0].len();
    // Log-prior initialization; absent classes get a small floor.
    let base: Vec<T> = counts
        .iter()
        .map(|&c| T::cast(libm::log((c.max(1)) as f64 / n as f64)))
        .collect();

    let params = TreeParams {
        max_depth: hp.depth,
        l2: hp.l2_leaf_reg,
        min_leaf: 1,
    };
    let lr = hp.learning_rate;
    let n_sample = ((hp.subsample * n as f64).floor() as usize).clamp(1, n);

    // Running logits in f64 for stable accumulation.
    let mut logits: Vec<Vec<f64>> = vec![base.iter().map(|b| b.as_f64()).collect(); n];
    let mean_ce = |logits: &[Vec<f64>]| -> f64 {
        logits
            .iter()
            .zip(labels)
            .map(|(row, &y)| {
                let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let log_z = max
                    + libm::log(row.iter().map(|&z| libm::exp(z - max)).sum::<f64>());
                log_z - row[y]
            })
            .sum::<f64>()
            / n as f64
    };

    let mut model = GbdtClassifier {
        num_classes,
        feature_dim,
        base,
        trees: Vec::new(),
        hp: *hp,
        train_loss: vec![mean_ce(&logits)],
    };

    let mut grad = vec![0.0f64; n];
    let mut hess = vec![0.0f64; n];
    let mut probs: Vec<Vec<f64>> = vec![vec![0.0; num_classes]; n];
    for iter in 0..hp.iterations {
        let sample: Vec<usize> = if n_sample < n {
            let mut rng = rng_for_indexed(hp.seed, "classifier-subsample", iter as u64);
            let mut s = sample_indices(&mut rng, n, n_sample);
            s.sort_unstable();
            s
        } else {
            (0..n).collect()
        };

        for &r in &sample {
            let row = &logits[r];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for (k, &z) in row.iter().enumerate() {
                let e = libm::exp(z - max);
                probs[r][k] = e;
                sum += e;
            }
            for p in probs[r].iter_mut() {
                *p /= sum;
            }
        }

        let mut per_class = Vec::with_capacity(num_classes);
        for k in 0..num_classes {
            for &r in &sample {
                let p = probs[r][k];
                grad[r] = p - if labels[r] == k { 1.0 } else { 0.0 };
                hess[r] = (p * (1.0 - p)).max(1e-9);
            }
            let tree = fit_tree(features, &grad, &hess, &sample, &params);
            for (r, row) in logits.iter_mut().enumerate() {
                row[k] += lr * tree.predict_row(features[r]).as_f64();
            }
            per_class.push(tree);
        }
        model.trees.push(per_class);
        let ce = mean_ce(&logits);
        if !ce.is_finite() {
            return Err(Error::Fit {
                iteration: iter,
                msg: format!("cross-entropy became non-finite ({ce})"),
            });
        }
        model.train_loss.push(ce);
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticSpec};

    fn separable(n: usize, seed: u64) -> crate::data::Dataset<f64> {
        generate_synthetic(&SyntheticSpec {
            num_examples: n,
            num_classes: 2,
            feature_dim: 3,
            class_separation: 6.0,
            noise_scale_heterogeneity: 0.0,
            seed,
        })
        .unwrap()
    }

    #[test]
    fn separable_data_trains_to_high_accuracy() {
        let data = separable(400, 31);
        let rows = data.feature_rows();
        let labels = data.labels();
        let hp = GbdtHyperParams {
            depth: 3,
            iterations: 50,
            learning_rate: 0.2,
            ..Default::default()
        };
        let model = fit_gbdt_classifier(&rows, &labels, 2, &hp).unwrap();
        assert!(model.accuracy(&rows, &labels) >= 0.99);
    }

    #[test]
    fn probabilities_are_normalized() {
        let data = separable(100, 32);
        let rows = data.feature_rows();
        let model = fit_gbdt_classifier(
            &rows,
            &data.labels(),
            2,
            &GbdtHyperParams {
                iterations: 10,
                ..Default::default()
            },
        )
        .unwrap();
        for row in model.predict_proba(&rows) {
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() <= 1e-6);
            assert!(row.iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn single_class_training_set_is_rejected() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let labels = vec![1usize; 20];
        assert!(matches!(
            fit_gbdt_classifier(&refs, &labels, 2, &GbdtHyperParams::default()),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn training_cross_entropy_non_increasing_without_subsampling() {
        let data = generate_synthetic::<f64>(&SyntheticSpec {
            num_examples: 300,
            num_classes: 3,
            feature_dim: 4,
            class_separation: 1.5,
            noise_scale_heterogeneity: 0.3,
            seed: 33,
        })
        .unwrap();
        let rows = data.feature_rows();
        let hp = GbdtHyperParams {
            depth: 4,
            iterations: 40,
            learning_rate: 0.3,
            subsample: 1.0,
            ..Default::default()
        };
        let model = fit_gbdt_classifier(&rows, &data.labels(), 3, &hp).unwrap();
        for w in model.train_loss.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{} -> {}", w[0], w[1]);
        }
    }
}
