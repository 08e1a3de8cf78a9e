//! From-scratch learners: gradient-boosted classifier, gradient-boosted
//! pinball-loss quantile regressor, heteroscedastic Gaussian regressor,
//! constant-quantile fitter, and a random-search tuner.

mod classifier;
mod gaussian;
mod gbdt;
mod model;
mod pinball;
mod tree;
mod tuner;

pub use classifier::{fit_gbdt_classifier, ClassifierFile, GbdtClassifier};
pub use gaussian::{
    fit_gaussian_regressor, gaussian_nll, gaussian_nll_grad, gaussian_quantile,
    GaussianScoreModel, DEFAULT_SIGMA_FLOOR,
};
pub use gbdt::{fit_gbdt_quantile, GbdtQuantile};
pub use model::{
    fit_gbdt_quantile_multi, FeatureRow, LevelSupport, LiraQuantileEntries, ModelFile,
    QuantileModel,
};
pub use pinball::{fit_constant_quantile, mean_pinball, pinball_loss, rank_index, QuantileLevel};
pub use tree::{GbdtHyperParams, Tree, TreeNode};
pub use tuner::{tune_hyperparameters, TrialRecord, TuneObjective, TuneResult};
