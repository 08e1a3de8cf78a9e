use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::float::Float;
use crate::learners::gaussian::fit_gaussian_regressor;
use crate::learners::gbdt::fit_gbdt_quantile;
use crate::learners::pinball::{pinball_loss, QuantileLevel};
use crate::learners::tree::GbdtHyperParams;
use crate::seed::{rng_for, rng_for_indexed, shuffle, uniform_index, uniform_open01};

/// What the cross-validated loss measures.
#[derive(Clone, Debug, PartialEq)]
pub enum TuneObjective {
    /// Mean pinball loss across the given levels (quantile regressors).
    PinballLevels(Vec<QuantileLevel>),
    /// Mean Gaussian negative log-likelihood (the parametric head).
    GaussianNll,
}

/// One evaluated configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub hp: GbdtHyperParams,
    pub cv_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best: GbdtHyperParams,
    pub trials: Vec<TrialRecord>,
}

impl TuneResult {
    /// Trials log as CSV: `trial,depth,l2,lr,subsample,iters,cv_loss`.
    pub fn trials_csv(&self) -> String {
        let mut out = String::from("trial,depth,l2,lr,subsample,iters,cv_loss\n");
        for t in &self.trials {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                t.trial,
                t.hp.depth,
                t.hp.l2_leaf_reg,
                t.hp.learning_rate,
                t.hp.subsample,
                t.hp.iterations,
                t.cv_loss
            ));
        }
        out
    }
}

fn log_uniform<R: rand_core::RngCore>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let u = uniform_open01(rng);
    libm::exp(libm::log(lo) + u * (libm::log(hi) - libm::log(lo)))
}

/// Sample one configuration from the search ranges: depth uniform on 1..=10,
/// L2 log-uniform on [1e-2, 1e6], learning rate log-uniform on [1e-6, 1],
/// subsample log-uniform on [1e-2, 1], iterations log-uniform on [1, 1000].
fn sample_hp<R: rand_core::RngCore>(rng: &mut R, seed: u64) -> GbdtHyperParams {
    GbdtHyperParams {
        depth: 1 + uniform_index(rng, 10),
        l2_leaf_reg: log_uniform(rng, 1e-2, 1e6),
        learning_rate: log_uniform(rng, 1e-6, 1.0),
        subsample: log_uniform(rng, 1e-2, 1.0),
        iterations: (log_uniform(rng, 1.0, 1000.0).round() as usize).max(1),
        seed,
    }
}

/// Random search with k-fold cross-validation.
///
/// Trial configurations depend only on `(seed, trial index)`, so a larger
/// budget strictly extends a smaller one and the best-of-k loss is
/// non-increasing in the budget. Returns the configuration with the lowest
/// mean CV loss (ties resolve to the earliest trial).
pub fn tune_hyperparameters<T: Float>(
    features: &[&[T]],
    scores: &[T],
    objective: &TuneObjective,
    budget: usize,
    folds: usize,
    seed: u64,
) -> Result<TuneResult> {
    if budget == 0 {
        return Err(Error::InvalidInput("budget must be >= 1".into()));
    }
    if folds < 2 {
        return Err(Error::InvalidInput("folds must be >= 2".into()));
    }
    let n = scores.len();
    if features.len() != n {
        return Err(Error::InvalidInput(format!(
            "features ({}) and scores ({n}) are misaligned",
            features.len()
        )));
    }
    if n < folds {
        return Err(Error::InvalidInput(format!(
            "{n} examples cannot be split into {folds} folds"
        )));
    }

    // One shared fold assignment for all trials.
    let mut order: Vec<usize> = (0..n).collect();
    shuffle(&mut rng_for(seed, "tuner-folds"), &mut order);
    let mut fold_ids = vec![0usize; n];
    for (pos, &row) in order.iter().enumerate() {
        fold_ids[row] = pos * folds / n;
    }

    let mut trials = Vec::with_capacity(budget);
    let mut best: Option<TrialRecord> = None;
    for trial in 0..budget {
        let mut rng = rng_for_indexed(seed, "tuner-trial", trial as u64);
        let hp_seed = crate::seed::derive_seed_indexed(seed, "tuner-trial-fit", trial as u64);
        let hp = sample_hp(&mut rng, hp_seed);

        let mut fold_losses = Vec::with_capacity(folds);
        for fold in 0..folds {
            let mut train_rows: Vec<&[T]> = Vec::new();
            let mut train_scores: Vec<T> = Vec::new();
            let mut test_rows: Vec<&[T]> = Vec::new();
            let mut test_scores: Vec<T> = Vec::new();
            for i in 0..n {
                if fold_ids[i] == fold {
                    test_rows.push(features[i]);
                    test_scores.push(scores[i]);
                } else {
                    train_rows.push(features[i]);
                    train_scores.push(scores[i]);
                }
            }
            if test_rows.is_empty() || train_rows.len() < 10 {
                return Err(Error::InvalidInput(format!(
                    "fold {fold} leaves too little data ({} train / {} test)",
                    train_rows.len(),
                    test_rows.len()
                )));
            }
            let loss = match objective {
                TuneObjective::PinballLevels(levels) => {
                    let mut per_level = Vec::with_capacity(levels.len());
                    for &level in levels {
                        let model = fit_gbdt_quantile(&train_rows, &train_scores, level, &hp)?;
                        let loss: f64 = test_rows
                            .iter()
                            .zip(&test_scores)
                            .map(|(x, &s)| pinball_loss(model.predict_row(x), s, level).as_f64())
                            .sum::<f64>()
                            / test_rows.len() as f64;
                        per_level.push(loss);
                    }
                    per_level.iter().sum::<f64>() / per_level.len() as f64
                }
                TuneObjective::GaussianNll => {
                    let model = fit_gaussian_regressor(&train_rows, &train_scores, &hp)?;
                    test_rows
                        .iter()
                        .zip(&test_scores)
                        .map(|(x, &s)| {
                            let (mu, sigma) = model.predict_mu_sigma(x);
                            crate::learners::gaussian::gaussian_nll(mu, sigma, s).as_f64()
                        })
                        .sum::<f64>()
                        / test_rows.len() as f64
                }
            };
            fold_losses.push(loss);
        }
        let cv_loss = fold_losses.iter().sum::<f64>() / folds as f64;
        let record = TrialRecord { trial, hp, cv_loss };
        if best.as_ref().is_none_or(|b| cv_loss < b.cv_loss) {
            best = Some(record.clone());
        }
        trials.push(record);
    }
    Ok(TuneResult {
        best: best.expect("budget >= 1").hp,
        trials,
    })
}
