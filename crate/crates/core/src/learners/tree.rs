use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::float::Float;

/// Gradient-boosting hyperparameters shared by every boosted learner.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbdtHyperParams {
    /// Tree depth, 1..=10.
    pub depth: usize,
    /// L2 regularization on leaf values, > 0.
    pub l2_leaf_reg: f64,
    /// Shrinkage in (0, 1].
    pub learning_rate: f64,
    /// Row subsampling ratio per iteration, in (0, 1].
    pub subsample: f64,
    /// Number of boosting iterations, >= 1.
    pub iterations: usize,
    pub seed: u64,
}

impl GbdtHyperParams {
    pub fn validate(&self) -> Result<()> {
        if !(1..=10).contains(&self.depth) {
            return Err(Error::InvalidSpec(format!(
                "depth must lie in 1..=10, got {}",
                self.depth
            )));
        }
        if !(self.l2_leaf_reg > 0.0 && self.l2_leaf_reg.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "l2_leaf_reg must be > 0, got {}",
                self.l2_leaf_reg
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::InvalidSpec(format!(
                "learning_rate must lie in (0,1], got {}",
                self.learning_rate
            )));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::InvalidSpec(format!(
                "subsample must lie in (0,1], got {}",
                self.subsample
            )));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidSpec("iterations must be >= 1".into()));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

impl Default for GbdtHyperParams {
    fn default() -> Self {
        GbdtHyperParams {
            depth: 3,
            l2_leaf_reg: 1.0,
            learning_rate: 0.1,
            subsample: 1.0,
            iterations: 200,
            seed: 0,
        }
    }
}

/// One node of a binary regression tree. Split predicate is
/// `x[feature] <= threshold` goes left; thresholds are observed feature
/// values so routing is bit-exact. Leaves have no children.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeNode<T> {
    pub feature: usize,
    pub threshold: T,
    pub children: Option<[u32; 2]>,
    pub leaf_value: T,
}

/// A fitted regression tree stored as a flat node array (root at 0).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree<T> {
    pub nodes: Vec<TreeNode<T>>,
}

impl<T: Float> Tree<T> {
    pub fn predict_row(&self, x: &[T]) -> T {
        self.nodes[self.leaf_of(x)].leaf_value
    }

    /// Index of the leaf node the row is routed to.
    pub fn leaf_of(&self, x: &[T]) -> usize {
        let mut idx = 0usize;
        loop {
            let node = &self.nodes[idx];
            match node.children {
                None => return idx,
                Some([l, r]) => {
                    idx = if x[node.feature] <= node.threshold {
                        l as usize
                    } else {
                        r as usize
                    };
                }
            }
        }
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.children.is_none()).count()
    }
}

pub(crate) struct TreeParams {
    pub max_depth: usize,
    pub l2: f64,
    pub min_leaf: usize,
}

const MIN_GAIN: f64 = 1e-12;

/// Fit a regression tree on per-row gradients and hessians over the sampled
/// rows. Split gain is the standard second-order criterion
/// `GL^2/(HL+l2) + GR^2/(HR+l2) - G^2/(H+l2)`; leaf values are the Newton
/// step `-G/(H+l2)`.
///
/// Ties in gain resolve to the lowest feature index, then the lowest
/// threshold, and row ordering inside the scan is total, so the structure is
/// a pure function of its inputs.
pub(crate) fn fit_tree<T: Float>(
    features: &[&[T]],
    grad: &[f64],
    hess: &[f64],
    sample: &[usize],
    params: &TreeParams,
) -> Tree<T> {
    debug_assert!(!sample.is_empty());
    let mut tree = Tree { nodes: Vec::new() };
    // Stack of (node index, rows, depth); nodes are created eagerly so
    // children indices are known when a split is committed.
    let mut stack: Vec<(usize, Vec<usize>, usize)> = Vec::new();
    tree.nodes.push(leaf_node(grad, hess, sample, params.l2));
    stack.push((0, sample.to_vec(), 0));

    while let Some((node_idx, rows, depth)) = stack.pop() {
        if depth >= params.max_depth || rows.len() < 2 * params.min_leaf {
            continue;
        }
        let Some(split) = best_split(features, grad, hess, &rows, params) else {
            continue;
        };
        let (mut left_rows, mut right_rows) = (Vec::new(), Vec::new());
        for &r in &rows {
            if features[r][split.feature] <= split.threshold {
                left_rows.push(r);
            } else {
                right_rows.push(r);
            }
        }
        debug_assert!(!left_rows.is_empty() && !right_rows.is_empty());
        let left_idx = tree.nodes.len();
        tree.nodes.push(leaf_node(grad, hess, &left_rows, params.l2));
        let right_idx = tree.nodes.len();
        tree.nodes.push(leaf_node(grad, hess, &right_rows, params.l2));
        tree.nodes[node_idx].feature = split.feature;
        tree.nodes[node_idx].threshold = split.threshold;
        tree.nodes[node_idx].children = Some([left_idx as u32, right_idx as u32]);
        stack.push((right_idx, right_rows, depth + 1));
        stack.push((left_idx, left_rows, depth + 1));
    }
    tree
}

fn leaf_node<T: Float>(grad: &[f64], hess: &[f64], rows: &[usize], l2: f64) -> TreeNode<T> {
    let mut g = 0.0;
    let mut h = 0.0;
    for &r in rows {
        g += grad[r];
        h += hess[r];
    }
    TreeNode {
        feature: 0,
        threshold: T::zero(),
        children: None,
        leaf_value: T::cast(-g / (h + l2)),
    }
}

struct Split<T> {
    feature: usize,
    threshold: T,
    gain: f64,
}

fn best_split<T: Float>(
    features: &[&[T]],
    grad: &[f64],
    hess: &[f64],
    rows: &[usize],
    params: &TreeParams,
) -> Option<Split<T>> {
    let dim = features[rows[0]].len();
    let mut total_g = 0.0;
    let mut total_h = 0.0;
    for &r in rows {
        total_g += grad[r];
        total_h += hess[r];
    }
    let parent_score = total_g * total_g / (total_h + params.l2);

    let mut best: Option<Split<T>> = None;
    let mut order: Vec<usize> = Vec::with_capacity(rows.len());
    for feature in 0..dim {
        order.clear();
        order.extend_from_slice(rows);
        // Total order: feature value, then row index, for determinism.
        order.sort_by(|&a, &b| {
            features[a][feature]
                .partial_cmp(&features[b][feature])
                .expect("finite features")
                .then(a.cmp(&b))
        });
        let mut left_g = 0.0;
        let mut left_h = 0.0;
        for i in 0..order.len() - 1 {
            let r = order[i];
            left_g += grad[r];
            left_h += hess[r];
            let here = features[r][feature];
            let next = features[order[i + 1]][feature];
            if !(here < next) {
                continue; // only between distinct values
            }
            let left_n = i + 1;
            let right_n = order.len() - left_n;
            if left_n < params.min_leaf || right_n < params.min_leaf {
                continue;
            }
            let right_g = total_g - left_g;
            let right_h = total_h - left_h;
            let gain = left_g * left_g / (left_h + params.l2)
                + right_g * right_g / (right_h + params.l2)
                - parent_score;
            if gain > MIN_GAIN && best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(Split {
                    feature,
                    threshold: here,
                    gain,
                });
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(depth: usize) -> TreeParams {
        TreeParams {
            max_depth: depth,
            l2: 1e-6,
            min_leaf: 1,
        }
    }

    #[test]
    fn single_split_recovers_a_step_function() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        // Step: residual -1 below 5, +1 from 5 upward; grad = -target.
        let grad: Vec<f64> = (0..10).map(|i| if i < 5 { 1.0 } else { -1.0 }).collect();
        let hess = vec![1.0; 10];
        let sample: Vec<usize> = (0..10).collect();
        let tree = fit_tree(&refs, &grad, &hess, &sample, &params(1));
        assert_eq!(tree.num_leaves(), 2);
        assert!((tree.predict_row(&[0.0]) + 1.0).abs() < 1e-4);
        assert!((tree.predict_row(&[9.0]) - 1.0).abs() < 1e-4);
        // Boundary: threshold is the left value 4.0, so 4.0 goes left.
        assert!(tree.predict_row(&[4.0]) < 0.0);
        assert!(tree.predict_row(&[5.0]) > 0.0);
    }

    #[test]
    fn constant_targets_build_a_stump() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, -(i as f64)]).collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let grad = vec![-2.0; 6];
        let hess = vec![1.0; 6];
        let sample: Vec<usize> = (0..6).collect();
        let tree = fit_tree(&refs, &grad, &hess, &sample, &params(4));
        assert_eq!(tree.nodes.len(), 1);
        assert!((tree.predict_row(&[3.0, -3.0]) - 2.0).abs() < 1e-4);
    }

    #[test]
    fn determinism_under_duplicate_feature_values() {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![(i % 4) as f64, (i % 3) as f64])
            .collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let grad: Vec<f64> = (0..40).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let hess = vec![1.0; 40];
        let sample: Vec<usize> = (0..40).collect();
        let a = fit_tree(&refs, &grad, &hess, &sample, &params(3));
        let b = fit_tree(&refs, &grad, &hess, &sample, &params(3));
        assert_eq!(a, b);
    }

    #[test]
    fn hyperparameter_bounds() {
        let mut hp = GbdtHyperParams::default();
        assert!(hp.validate().is_ok());
        hp.depth = 11;
        assert!(hp.validate().is_err());
        hp.depth = 3;
        hp.learning_rate = 0.0;
        assert!(hp.validate().is_err());
        hp.learning_rate = 0.1;
        hp.subsample = 1.5;
        assert!(hp.validate().is_err());
    }
}
