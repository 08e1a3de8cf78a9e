use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::float::{self, Float};
use crate::learners::tree::{fit_tree, GbdtHyperParams, Tree, TreeParams};
use crate::seed::{rng_for_indexed, sample_indices};
use crate::stats::inv_phi;

/// Lower bound on predicted standard deviations. Prevents likelihood-ratio
/// spikes and division blowups on degenerate score distributions.
pub const DEFAULT_SIGMA_FLOOR: f64 = 1e-3;

/// Boosted heteroscedastic Gaussian model: one tree ensemble predicts the
/// conditional mean `mu(x)`, another predicts `log sigma(x)`, jointly
/// trained by Newton boosting on the Gaussian negative log-likelihood.
/// Because it carries a full conditional distribution, it answers quantile
/// queries at every level, which makes it the natural head for dense ROC
/// sweeps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianScoreModel<T> {
    pub mu_base: T,
    pub log_sigma_base: T,
    pub mu_trees: Vec<Tree<T>>,
    pub log_sigma_trees: Vec<Tree<T>>,
    pub sigma_floor: T,
    pub hp: GbdtHyperParams,
    /// Mean training NLL after each iteration (index 0 = base model).
    pub train_nll: Vec<f64>,
}

impl<T: Float> GaussianScoreModel<T> {
    /// Conditional mean and (floored) standard deviation at `x`.
    pub fn predict_mu_sigma(&self, x: &[T]) -> (T, T) {
        let lr = T::cast(self.hp.learning_rate);
        let mut mu = self.mu_base;
        for tree in &self.mu_trees {
            mu += lr * tree.predict_row(x);
        }
        let mut log_sigma = self.log_sigma_base;
        for tree in &self.log_sigma_trees {
            log_sigma += lr * tree.predict_row(x);
        }
        (mu, float::exp(log_sigma).max(self.sigma_floor))
    }

    pub fn predict_quantile(&self, x: &[T], level: crate::learners::QuantileLevel) -> Result<T> {
        let (mu, sigma) = self.predict_mu_sigma(x);
        gaussian_quantile(mu, sigma, level)
    }
}

/// Gaussian negative log-likelihood up to an additive constant:
/// `0.5 * ((s - mu)/sigma)^2 + log sigma`.
pub fn gaussian_nll<T: Float>(mu: T, sigma: T, s: T) -> T {
    let z = (s - mu) / sigma;
    T::cast(0.5) * z * z + float::ln(sigma)
}

/// Analytic gradient of the NLL with respect to `(mu, log sigma)`:
/// `(-(s - mu)/sigma^2, 1 - (s - mu)^2/sigma^2)`.
pub fn gaussian_nll_grad<T: Float>(mu: T, log_sigma: T, s: T) -> (T, T) {
    let sigma = float::exp(log_sigma);
    let z = (s - mu) / sigma;
    (-z / sigma, T::one() - z * z)
}

/// Quantile of `N(mu, sigma^2)` at the given level: `mu + sigma * inv_phi(level)`.
pub fn gaussian_quantile<T: Float>(
    mu: T,
    sigma: T,
    level: crate::learners::QuantileLevel,
) -> Result<T> {
    if !(sigma > T::zero()) {
        return Err(Error::InvalidInput(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    Ok(mu + sigma * T::cast(inv_phi(level.value())?))
}

/// Fit the two-headed Gaussian regressor by minimizing empirical NLL.
pub fn fit_gaussian_regressor<T: Float>(
    features: &[&[T]],
    scores: &[T],
    hp: &GbdtHyperParams,
) -> Result<GaussianScoreModel<T>> {
    hp.validate()?;
    let n = scores.len();
    if features.len() != n {
        return Err(Error::InvalidInput(format!(
            "features ({}) and scores ({n}) are misaligned",
            features.len()
        )));
    }
    if n < 10 {
        return Err(Error::InvalidInput(format!(
            "gaussian fitting needs at least 10 examples, got {n}"
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidInput("scores must be finite".into()));
    }

    let floor = DEFAULT_SIGMA_FLOOR;
    let mean = scores.iter().map(|s| s.as_f64()).sum::<f64>() / n as f64;
    let var = scores
        .iter()
        .map(|s| (s.as_f64() - mean).powi(2))
        .sum::<f64>()
        / n as f64;
    let std = var.sqrt().max(floor);

    let mut model = GaussianScoreModel {
        mu_base: T::cast(mean),
        log_sigma_base: T::cast(libm::log(std)),
        mu_trees: Vec::new(),
        log_sigma_trees: Vec::new(),
        sigma_floor: T::cast(floor),
        hp: *hp,
        train_nll: Vec::new(),
    };
    if var == 0.0 {
        model.train_nll.push(libm::log(floor));
        return Ok(model);
    }

    // Wide leaves keep the variance head from chasing noise pockets, which
    // would otherwise feed back into the mean head through the hessian.
    let params = TreeParams {
        max_depth: hp.depth,
        l2: hp.l2_leaf_reg,
        min_leaf: (n / 50).max(8),
    };
    let lr = hp.learning_rate;
    let n_sample = ((hp.subsample * n as f64).floor() as usize).clamp(1, n);

    let mut mu: Vec<f64> = vec![mean; n];
    let mut log_sigma: Vec<f64> = vec![libm::log(std); n];
    let s64: Vec<f64> = scores.iter().map(|s| s.as_f64()).collect();

    let mean_nll = |mu: &[f64], log_sigma: &[f64]| -> f64 {
        mu.iter()
            .zip(log_sigma)
            .zip(&s64)
            .map(|((&m, &ls), &s)| {
                let sigma = libm::exp(ls).max(floor);
                let z = (s - m) / sigma;
                0.5 * z * z + libm::log(sigma)
            })
            .sum::<f64>()
            / n as f64
    };
    model.train_nll.push(mean_nll(&mu, &log_sigma));

    let mut grad = vec![0.0f64; n];
    let mut hess = vec![0.0f64; n];
    for iter in 0..hp.iterations {
        let sample: Vec<usize> = if n_sample < n {
            let mut rng = rng_for_indexed(hp.seed, "gaussian-subsample", iter as u64);
            let mut s = sample_indices(&mut rng, n, n_sample);
            s.sort_unstable();
            s
        } else {
            (0..n).collect()
        };

        // Mean head: d/dmu = -(s-mu)/sigma^2, d2/dmu2 = 1/sigma^2.
        for &r in &sample {
            let sigma = libm::exp(log_sigma[r]).max(floor);
            let z = (s64[r] - mu[r]) / sigma;
            grad[r] = -z / sigma;
            hess[r] = 1.0 / (sigma * sigma);
        }
        let mu_tree = fit_tree(features, &grad, &hess, &sample, &params);
        for (r, m) in mu.iter_mut().enumerate() {
            *m += lr * mu_tree.predict_row(features[r]).as_f64();
        }
        model.mu_trees.push(mu_tree);

        // Scale head: d/dlogsigma = 1 - z^2, d2/dlogsigma2 = 2 z^2.
        for &r in &sample {
            let sigma = libm::exp(log_sigma[r]).max(floor);
            let z = (s64[r] - mu[r]) / sigma;
            grad[r] = 1.0 - z * z;
            hess[r] = (2.0 * z * z).max(1e-6);
        }
        let sigma_tree = fit_tree(features, &grad, &hess, &sample, &params);
        for (r, ls) in log_sigma.iter_mut().enumerate() {
            *ls += lr * sigma_tree.predict_row(features[r]).as_f64();
        }
        model.log_sigma_trees.push(sigma_tree);

        let nll = mean_nll(&mu, &log_sigma);
        if !nll.is_finite() {
            return Err(Error::Fit {
                iteration: iter,
                msg: format!("gaussian NLL became non-finite ({nll})"),
            });
        }
        model.train_nll.push(nll);
    }
    Ok(model)
}
