use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::float::Float;
use crate::seed::{rng_for, shuffle};

/// One labeled example: a stable id, a feature vector, and a class index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Example<T> {
    pub id: u64,
    pub features: Vec<T>,
    pub label: usize,
}

/// An ordered collection of examples with a fixed feature dimension and a
/// fixed number of classes. Ids are unique and strictly increasing in
/// storage order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset<T> {
    pub name: String,
    pub num_classes: usize,
    pub feature_dim: usize,
    pub examples: Vec<Example<T>>,
    /// Category-to-index mapping for datasets loaded from string labels,
    /// in first-appearance order. Empty when labels were already integers.
    #[serde(default)]
    pub label_names: Vec<String>,
}

impl<T: Float> Dataset<T> {
    pub fn new(
        name: impl Into<String>,
        num_classes: usize,
        examples: Vec<Example<T>>,
        label_names: Vec<String>,
    ) -> Result<Self> {
        if examples.is_empty() {
            return Err(Error::InvalidSpec("dataset must be non-empty".into()));
        }
        if num_classes < 2 {
            return Err(Error::InvalidSpec(format!(
                "dataset needs at least 2 classes, got {num_classes}"
            )));
        }
        let feature_dim = examples[0].features.len();
        if feature_dim == 0 {
            return Err(Error::InvalidSpec("feature dimension must be >= 1".into()));
        }
        let mut prev_id: Option<u64> = None;
        for ex in &examples {
            if ex.features.len() != feature_dim {
                return Err(Error::InvalidSpec(format!(
                    "example {} has {} features, expected {feature_dim}",
                    ex.id,
                    ex.features.len()
                )));
            }
            if ex.features.iter().any(|f| !f.is_finite()) {
                return Err(Error::InvalidSpec(format!(
                    "example {} has a non-finite feature",
                    ex.id
                )));
            }
            if ex.label >= num_classes {
                return Err(Error::InvalidSpec(format!(
                    "example {} has label {} >= {num_classes}",
                    ex.id, ex.label
                )));
            }
            if let Some(p) = prev_id {
                if ex.id <= p {
                    return Err(Error::InvalidSpec(format!(
                        "ids must be strictly increasing; {} follows {p}",
                        ex.id
                    )));
                }
            }
            prev_id = Some(ex.id);
        }
        Ok(Dataset {
            name: name.into(),
            num_classes,
            feature_dim,
            examples,
            label_names,
        })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Feature rows as borrowed slices, in storage order.
    pub fn feature_rows(&self) -> Vec<&[T]> {
        self.examples.iter().map(|e| e.features.as_slice()).collect()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.examples.iter().map(|e| e.label).collect()
    }

    pub fn ids(&self) -> Vec<u64> {
        self.examples.iter().map(|e| e.id).collect()
    }

    /// Lookup table from example id to storage index.
    pub fn id_index(&self) -> HashMap<u64, usize> {
        self.examples
            .iter()
            .enumerate()
            .map(|(i, e)| (e.id, i))
            .collect()
    }

    /// Sub-dataset containing exactly the given ids (any order), sorted by id.
    pub fn select_by_ids(&self, ids: &[u64], name: impl Into<String>) -> Result<Self> {
        let index = self.id_index();
        let mut picked = Vec::with_capacity(ids.len());
        for &id in ids {
            let &i = index
                .get(&id)
                .ok_or_else(|| Error::InvalidInput(format!("id {id} not in dataset")))?;
            picked.push(self.examples[i].clone());
        }
        picked.sort_by_key(|e| e.id);
        Dataset::new(name, self.num_classes, picked, self.label_names.clone())
    }
}

/// Fractions of a dataset assigned to the private/public/holdout roles,
/// plus the seed that fixes the permutation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub private: f64,
    pub public: f64,
    pub holdout: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(private: f64, public: f64, holdout: f64, seed: u64) -> Result<Self> {
        let spec = SplitSpec {
            private,
            public,
            holdout,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, f) in [
            ("private", self.private),
            ("public", self.public),
            ("holdout", self.holdout),
        ] {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::Split(format!(
                    "{name} fraction must lie in (0,1), got {f} (empty {name} part)"
                )));
            }
        }
        let sum = self.private + self.public + self.holdout;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Split(format!("fractions must sum to 1, got {sum}")));
        }
        Ok(())
    }
}

/// Persisted record of a split: the seed, the fractions, and the id lists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub fractions: (f64, f64, f64),
    pub private_ids: Vec<u64>,
    pub public_ids: Vec<u64>,
    pub holdout_ids: Vec<u64>,
}

/// Partition a dataset into disjoint private/public/holdout parts.
///
/// Part sizes are `floor(fraction * n)` for private and public; the
/// remainder goes to holdout, so sizes are exactly predictable. The
/// permutation is a pure function of the seed; each part is returned
/// sorted by id.
pub fn split_dataset<T: Float>(
    data: &Dataset<T>,
    spec: &SplitSpec,
) -> Result<(Dataset<T>, Dataset<T>, Dataset<T>)> {
    spec.validate()?;
    let n = data.len();
    let n_private = (spec.private * n as f64).floor() as usize;
    let n_public = (spec.public * n as f64).floor() as usize;
    let n_holdout = n - n_private - n_public;
    if n_private == 0 || n_public == 0 || n_holdout == 0 {
        return Err(Error::Split(format!(
            "split of {n} examples produces an empty part (sizes {n_private}/{n_public}/{n_holdout})"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    shuffle(&mut rng_for(spec.seed, "split-permutation"), &mut order);

    let take = |range: std::ops::Range<usize>, name: &str| -> Result<Dataset<T>> {
        let mut part: Vec<Example<T>> = order[range]
            .iter()
            .map(|&i| data.examples[i].clone())
            .collect();
        part.sort_by_key(|e| e.id);
        Dataset::new(
            format!("{}/{name}", data.name),
            data.num_classes,
            part,
            data.label_names.clone(),
        )
    };

    let private = take(0..n_private, "private")?;
    let public = take(n_private..n_private + n_public, "public")?;
    let holdout = take(n_private + n_public..n, "holdout")?;
    Ok((private, public, holdout))
}

/// Build the persistable manifest for a performed split.
pub fn split_manifest<T: Float>(
    spec: &SplitSpec,
    private: &Dataset<T>,
    public: &Dataset<T>,
    holdout: &Dataset<T>,
) -> SplitManifest {
    SplitManifest {
        seed: spec.seed,
        fractions: (spec.private, spec.public, spec.holdout),
        private_ids: private.ids(),
        public_ids: public.ids(),
        holdout_ids: holdout.ids(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate_synthetic;
    use crate::data::SyntheticSpec;

    fn thousand() -> Dataset<f64> {
        generate_synthetic(&SyntheticSpec {
            num_examples: 1000,
            num_classes: 2,
            feature_dim: 3,
            class_separation: 2.0,
            noise_scale_heterogeneity: 0.0,
            seed: 5,
        })
        .unwrap()
    }

    #[test]
    fn split_sizes_are_floor_with_remainder_to_holdout() {
        let data = thousand();
        let spec = SplitSpec::new(0.5, 0.4, 0.1, 1).unwrap();
        let (private, public, holdout) = split_dataset(&data, &spec).unwrap();
        assert_eq!(private.len(), 500);
        assert_eq!(public.len(), 400);
        assert_eq!(holdout.len(), 100);

        let mut all: Vec<u64> = private
            .ids()
            .into_iter()
            .chain(public.ids())
            .chain(holdout.ids())
            .collect();
        all.sort_unstable();
        assert_eq!(all, data.ids());
    }

    #[test]
    fn zero_fraction_is_a_split_error() {
        assert!(matches!(
            SplitSpec::new(0.5, 0.5, 0.0, 1),
            Err(Error::Split(_))
        ));
    }

    #[test]
    fn split_is_deterministic() {
        let data = thousand();
        let spec = SplitSpec::new(0.3, 0.3, 0.4, 99).unwrap();
        let a = split_dataset(&data, &spec).unwrap();
        let b = split_dataset(&data, &spec).unwrap();
        assert_eq!(a.0.ids(), b.0.ids());
        assert_eq!(a.1.ids(), b.1.ids());
        assert_eq!(a.2.ids(), b.2.ids());
    }

    #[test]
    fn tiny_dataset_with_empty_part_errors() {
        let data = generate_synthetic::<f64>(&SyntheticSpec {
            num_examples: 3,
            num_classes: 2,
            feature_dim: 2,
            class_separation: 1.0,
            noise_scale_heterogeneity: 0.0,
            seed: 1,
        })
        .unwrap();
        let spec = SplitSpec::new(0.2, 0.4, 0.4, 1).unwrap();
        assert!(matches!(split_dataset(&data, &spec), Err(Error::Split(_))));
    }

    #[test]
    fn dataset_rejects_non_increasing_ids() {
        let ex = |id| Example::<f64> {
            id,
            features: vec![0.0, 1.0],
            label: 0,
        };
        let err = Dataset::new("bad", 2, vec![ex(3), ex(3)], vec![]);
        assert!(matches!(err, Err(Error::InvalidSpec(_))));
    }
}
