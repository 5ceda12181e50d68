//! Probabilistic and classification scoring, plus out-of-bag and K-fold
//! validation harnesses.

mod crps;
mod metrics;
mod validation;

pub use crps::{crps, crps_integral};
pub use metrics::{metrics, roc_auc, ConfusionMatrix, MetricsReport};
pub use validation::{
    assign_folds, climatological_crps, evaluate_weights, holdout_evaluate, kfold_cv, oob_evaluate, AucScore,
    CrpsReport, CvConfig, CvReport, EvalOptions, EvaluationReport, FoldReport, Observation,
};
