//! Distributional random forests for predicting a 0-100 recurrence score
//! from routine pathology features.
//!
//! A fitted [`Forest`] turns a query patient into a weight vector over the
//! training cohort. Those weights give both a full predictive distribution
//! of the score and a ranked list of similar patients.

pub mod cohort;
pub mod data;
pub mod distribution;
pub mod error;
pub mod evaluation;
pub mod forest;
pub mod model_io;
pub mod neighbors;
pub mod tree;

pub use data::{Dataset, Feature, FeatureVector, PatientRecord, LYMPH_NODES_UNKNOWN, NUM_FEATURES};
pub use distribution::{make_distribution, DistributionSummary, PredictiveDistribution, RiskBand, RiskClasses};
pub use error::{Error, Result};
pub use forest::{fit_forest, forest_weights, Forest, ForestConfig, Resampling, WeightMode, WeightVector};
pub use model_io::{load_model, save_model, Model, MODEL_FORMAT};
pub use tree::{best_split, fit_tree, Tree, TreeConfig};
