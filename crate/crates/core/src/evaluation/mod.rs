//! Default-prediction metrics, ensembles and model-diversity diagnostics.

pub mod diversity;
pub mod ensemble;
pub mod metrics;

pub use diversity::{diversity_report, pearson, DiversityReport, FeatureComparison};
pub use ensemble::{means_ensemble, meta_ensemble_fit, BaseScores, MetaEnsemble, ScoreProvenance, META_C_VALUES};
pub use metrics::{
    auc, capture_rate_at_4pct, cdr, normalized_weighted_gini, ranking, standard_metrics, ScoredPredictions,
    StandardMetrics,
};
