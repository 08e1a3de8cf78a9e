use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::float::Float;

/// A coverage target `level = 1 - alpha` in the open unit interval.
///
/// An attack calibrated at this level aims for false positive rate `alpha`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QuantileLevel(f64);

impl QuantileLevel {
    pub fn new(level: f64) -> Result<Self> {
        if !(level.is_finite() && level > 0.0 && level < 1.0) {
            return Err(Error::InvalidInput(format!(
                "quantile level must lie in (0,1), got {level}"
            )));
        }
        Ok(QuantileLevel(level))
    }

    pub fn value(&self) -> f64 {
        self.0
    }

    /// The miscoverage target `alpha = 1 - level`.
    pub fn alpha(&self) -> f64 {
        1.0 - self.0
    }
}

impl std::fmt::Display for QuantileLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Pinball loss for the given level: with `alpha = 1 - level`,
/// `max(alpha * (pred - target), (1 - alpha) * (target - pred))`.
///
/// Under-prediction is penalized `level / (1 - level)` times more than
/// over-prediction, which is what makes the population minimizer the
/// level-quantile.
pub fn pinball_loss<T: Float>(pred: T, target: T, level: QuantileLevel) -> T {
    let alpha = T::cast(level.alpha());
    let diff = pred - target;
    (alpha * diff).max((T::one() - alpha) * (-diff))
}

/// Mean pinball loss of paired predictions and targets.
pub fn mean_pinball<T: Float>(preds: &[T], targets: &[T], level: QuantileLevel) -> T {
    assert_eq!(preds.len(), targets.len());
    assert!(!preds.is_empty());
    let sum: T = preds
        .iter()
        .zip(targets)
        .map(|(&p, &t)| pinball_loss(p, t, level))
        .sum();
    sum / T::from_count(preds.len())
}

/// 0-based index of the finite-sample quantile order statistic:
/// rank `ceil(level * (n + 1))` clamped to `[1, n]`, minus one.
pub fn rank_index(n: usize, level: QuantileLevel) -> usize {
    assert!(n > 0);
    let rank = (level.value() * (n as f64 + 1.0)).ceil() as usize;
    rank.clamp(1, n) - 1
}

/// 0-based index of an order statistic that minimizes the empirical pinball
/// loss over constants: rank `ceil(level * n)` clamped to `[1, n]`, minus
/// one. Differs from [`rank_index`] (the conformal `n + 1` rule) by at most
/// one position.
pub(crate) fn pinball_argmin_index(n: usize, level: QuantileLevel) -> usize {
    assert!(n > 0);
    let rank = (level.value() * n as f64).ceil() as usize;
    rank.clamp(1, n) - 1
}

/// Constant-threshold quantile via the conformal rank rule. Minimizes the
/// empirical pinball loss over constants up to one order-statistic gap.
pub fn fit_constant_quantile<T: Float>(scores: &[T], level: QuantileLevel) -> Result<T> {
    if scores.is_empty() {
        return Err(Error::EmptyInput("constant quantile of no scores".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidInput("scores must be finite".into()));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite scores are ordered"));
    Ok(sorted[rank_index(sorted.len(), level)])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn level(l: f64) -> QuantileLevel {
        QuantileLevel::new(l).unwrap()
    }

    #[test]
    fn pinball_hand_values() {
        assert_eq!(pinball_loss(1.5, 1.5, level(0.7)), 0.0);
        // level 0.9 (alpha 0.1): over-prediction by 2 costs 0.2.
        assert!((pinball_loss(2.0f64, 0.0, level(0.9)) - 0.2).abs() < 1e-12);
        // under-prediction by 2 costs 1.8 (penalized 9x more).
        assert!((pinball_loss(0.0f64, 2.0, level(0.9)) - 1.8).abs() < 1e-12);
    }

    #[test]
    fn pinball_is_nonnegative() {
        for &(p, t, l) in &[(0.3, -2.0, 0.01), (-5.0, 4.0, 0.99), (0.0, 0.0, 0.5)] {
            assert!(pinball_loss(p, t, level(l)) >= 0.0);
        }
    }

    #[test]
    fn constant_quantile_rank_rule() {
        let scores: Vec<f64> = (1..=100).map(|v| v as f64).collect();
        // rank ceil(0.95 * 101) = 96 -> 96th smallest = 96.
        assert_eq!(fit_constant_quantile(&scores, level(0.95)).unwrap(), 96.0);
        // degenerate distribution.
        assert_eq!(fit_constant_quantile(&[3.0; 8], level(0.5)).unwrap(), 3.0);
        // two points at the median: rank ceil(1.5) = 2 -> the larger one.
        assert_eq!(fit_constant_quantile(&[0.0, 1.0], level(0.5)).unwrap(), 1.0);
        assert!(fit_constant_quantile::<f64>(&[], level(0.5)).is_err());
    }

    #[test]
    fn constant_quantile_brute_force_bracket() {
        // Enumerating both candidates at level 0.5 on {0, 1}: the empirical
        // pinball of constants 0 and 1 are equal (0.25 each), so the rank
        // rule's pick is a minimizer.
        let scores = [0.0, 1.0];
        let at = |q: f64| {
            scores
                .iter()
                .map(|&s| pinball_loss(q, s, level(0.5)))
                .sum::<f64>()
                / 2.0
        };
        assert!((at(0.0) - at(1.0)).abs() < 1e-12);
        assert!(at(1.0) <= at(0.5) + 1e-12);
    }

    #[test]
    fn argmin_index_minimizes_empirical_pinball() {
        // Brute-force oracle: evaluate the empirical pinball at every order
        // statistic and check the argmin rule lands on a minimizer.
        let samples: [&[f64]; 3] = [
            &[2.0, -1.0, 0.5, 7.0, 3.5],
            &[1.0, 1.0, 2.0, 9.0],
            &[0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0],
        ];
        for sample in samples {
            let mut sorted = sample.to_vec();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for &l in &[0.1, 0.5, 0.8, 0.9, 0.95] {
                let lv = level(l);
                let losses: Vec<f64> = sorted
                    .iter()
                    .map(|&q| sorted.iter().map(|&s| pinball_loss(q, s, lv)).sum::<f64>())
                    .collect();
                let best = losses.iter().cloned().fold(f64::INFINITY, f64::min);
                let picked = losses[pinball_argmin_index(sorted.len(), lv)];
                assert!(
                    (picked - best).abs() < 1e-12,
                    "level {l}: picked loss {picked}, best {best}"
                );
            }
        }
    }

    #[test]
    fn level_bounds_are_enforced() {
        assert!(QuantileLevel::new(0.0).is_err());
        assert!(QuantileLevel::new(1.0).is_err());
        assert!(QuantileLevel::new(f64::NAN).is_err());
        assert!((level(0.99).alpha() - 0.01).abs() < 1e-12);
    }
}
