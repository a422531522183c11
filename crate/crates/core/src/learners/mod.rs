//! Classical learners used as the baseline and downstream of the quantum
//! projection.

pub mod cv;
pub mod dataset;
pub mod dummy;
pub mod gbdt;
pub mod logistic;
pub mod preprocess;

pub use cv::{hyper_search, out_of_fold_predictions, stratified_kfold, Fold, GbdtSpace, SearchMode, SearchResult};
pub use dataset::{default_weights, Dataset, MISSING};
pub use dummy::DummyClassifier;
pub use gbdt::{gbdt_fit, GbdtModel, GbdtParams, GbdtTrainer};
pub use logistic::{LogisticModel, LogisticRegression};
pub use preprocess::{shuffle_features, FeaturePermutation, MedianImputer, ScalerParams};
