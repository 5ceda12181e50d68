use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::crps::crps;
use super::metrics::{metrics, roc_auc, ConfusionMatrix, MetricsReport};
use crate::data::Dataset;
use crate::distribution::{make_distribution, PredictiveDistribution, RiskClasses};
use crate::error::{Error, Result};
use crate::forest::{fit_forest, Forest, ForestConfig, WeightMode, WeightVector};

/// Score fed to the ROC curve for the upper (`> cut`) label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AucScore {
    /// `P(Y > cut)` from the predictive distribution.
    #[default]
    ClassProbability,
    /// Predictive mean.
    PredictedMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub classes: RiskClasses,
    /// Predict the lower class when `P(Y <= cut) >= decision_threshold`.
    pub decision_threshold: f64,
    pub auc_score: AucScore,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            classes: RiskClasses::default(),
            decision_threshold: 0.5,
            auc_score: AucScore::ClassProbability,
        }
    }
}

/// One scored observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub row: usize,
    pub id: String,
    pub true_score: f64,
    pub crps: f64,
    pub mean: f64,
    pub median: f64,
    /// `P(Y <= cut)`.
    pub prob_low: f64,
    /// Predicted class is the upper one (`> cut`).
    pub predicted_high: bool,
    pub misclassified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrpsReport {
    pub per_observation: Vec<Observation>,
    /// Positions into `per_observation`, ordered by ascending CRPS.
    pub sorted_view: Vec<usize>,
}

impl CrpsReport {
    fn new(per_observation: Vec<Observation>) -> Self {
        let mut sorted_view: Vec<usize> = (0..per_observation.len()).collect();
        sorted_view.sort_by(|&a, &b| per_observation[a].crps.total_cmp(&per_observation[b].crps));
        CrpsReport {
            per_observation,
            sorted_view,
        }
    }

    pub fn mean_crps(&self) -> f64 {
        let n = self.per_observation.len();
        self.per_observation.iter().map(|o| o.crps).sum::<f64>() / n as f64
    }

    /// Lowest, median and highest CRPS observations.
    pub fn best_median_worst(&self) -> Option<[&Observation; 3]> {
        let view = &self.sorted_view;
        let at = |k: usize| &self.per_observation[view[k]];
        (!view.is_empty()).then(|| [at(0), at(view.len() / 2), at(view.len() - 1)])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub crps: CrpsReport,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricsReport,
    /// Ids of rows that could not be scored (no out-of-bag trees).
    pub excluded: Vec<String>,
}

fn score(row: usize, data: &Dataset, dist: &PredictiveDistribution, options: &EvalOptions) -> Observation {
    let cut = options.classes.high_cut;
    let true_score = data.responses()[row];
    let prob_low = dist.cdf(cut);
    let predicted_high = prob_low < options.decision_threshold;
    Observation {
        row,
        id: data.ids()[row].clone(),
        true_score,
        crps: crps(dist, true_score),
        mean: dist.mean(),
        median: dist.quantile(0.5).unwrap_or(f64::NAN),
        prob_low,
        predicted_high,
        misclassified: predicted_high != options.classes.is_high(true_score),
    }
}

fn assemble(observations: Vec<Observation>, excluded: Vec<String>, options: &EvalOptions) -> Result<EvaluationReport> {
    if observations.is_empty() {
        return Err(Error::NothingToEvaluate(format!(
            "{} rows excluded, metrics undefined",
            excluded.len()
        )));
    }
    let mut confusion = ConfusionMatrix::default();
    let mut scores = Vec::with_capacity(observations.len());
    let mut labels = Vec::with_capacity(observations.len());
    for o in &observations {
        let true_high = options.classes.is_high(o.true_score);
        confusion.record(!true_high, !o.predicted_high);
        scores.push(match options.auc_score {
            AucScore::ClassProbability => 1.0 - o.prob_low,
            AucScore::PredictedMean => o.mean,
        });
        labels.push(true_high);
    }
    let mut report = metrics(&confusion);
    report.auc = roc_auc(&scores, &labels).ok();
    Ok(EvaluationReport {
        crps: CrpsReport::new(observations),
        confusion,
        metrics: report,
        excluded,
    })
}

/// Scores every row that has a weight vector; `None` rows are excluded.
pub fn evaluate_weights(
    data: &Dataset,
    weights: &[Option<WeightVector>],
    options: &EvalOptions,
) -> Result<EvaluationReport> {
    let mut observations = Vec::new();
    let mut excluded = Vec::new();
    for (row, w) in weights.iter().enumerate() {
        match w {
            Some(w) => observations.push(score(row, data, &make_distribution(w, data)?, options)),
            None => excluded.push(data.ids()[row].clone()),
        }
    }
    assemble(observations, excluded, options)
}

/// Out-of-bag evaluation: each row is scored by the trees that never saw it.
pub fn oob_evaluate(forest: &Forest, data: &Dataset, options: &EvalOptions) -> Result<EvaluationReport> {
    evaluate_weights(data, &forest.oob_weights_all(data)?, options)
}

/// Scores the rows of `test`, a cohort the forest was not fit on, using
/// all trees and the training responses in `train`.
pub fn holdout_evaluate(
    forest: &Forest,
    train: &Dataset,
    test: &Dataset,
    options: &EvalOptions,
) -> Result<EvaluationReport> {
    let observations = (0..test.len())
        .map(|row| {
            let w = forest.weights(train, &test.features()[row], WeightMode::AllTrees)?;
            Ok(score(row, test, &make_distribution(&w, train)?, options))
        })
        .collect::<Result<Vec<_>>>()?;
    assemble(observations, Vec::new(), options)
}

/// Per-row CRPS of the climatological forecast: the marginal distribution
/// of all training responses, issued for every row.
pub fn climatological_crps(data: &Dataset) -> Result<Vec<f64>> {
    let share = 1.0 / data.len() as f64;
    let marginal = PredictiveDistribution::from_weighted(data.responses().iter().map(|&y| (y, share)))?;
    Ok(data.responses().iter().map(|&y| crps(&marginal, y)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvConfig {
    pub k: usize,
    pub seed: u64,
    pub stratify_binary: bool,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            k: 5,
            seed: 42,
            stratify_binary: true,
        }
    }
}

/// Seeded shuffle then round-robin into `k` folds. With stratification the
/// two binary classes are shuffled separately and dealt one after the
/// other, so every fold gets its share of each class within one member.
pub fn assign_folds(data: &Dataset, cv: &CvConfig, classes: &RiskClasses) -> Result<Vec<Vec<usize>>> {
    let n = data.len();
    if cv.k > n {
        return Err(Error::FoldsExceedCohort { k: cv.k, n });
    }
    if cv.k < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 folds, got {}", cv.k)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cv.seed);
    let order: Vec<usize> = if cv.stratify_binary {
        let (mut high, mut low): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| classes.is_high(data.responses()[i]));
        low.shuffle(&mut rng);
        high.shuffle(&mut rng);
        low.into_iter().chain(high).collect()
    } else {
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        all
    };
    let mut folds = vec![Vec::with_capacity(n / cv.k + 1); cv.k];
    for (position, row) in order.into_iter().enumerate() {
        folds[position % cv.k].push(row);
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub test_rows: Vec<usize>,
    pub report: EvaluationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<FoldReport>,
    pub pooled: EvaluationReport,
    /// Average of the per-fold mean CRPS values.
    pub mean_fold_crps: f64,
}

/// K-fold cross validation: each fold is predicted by a forest trained on
/// the remaining folds. Row indices in the reports refer to `data`.
pub fn kfold_cv(data: &Dataset, config: &ForestConfig, cv: &CvConfig, options: &EvalOptions) -> Result<CvReport> {
    let folds = assign_folds(data, cv, &options.classes)?;
    let mut reports = Vec::with_capacity(folds.len());
    let mut pooled = Vec::with_capacity(data.len());
    for test_rows in folds {
        let train_rows: Vec<usize> = (0..data.len())
            .filter(|i| test_rows.binary_search(i).is_err())
            .collect();
        let train = data.subset(&train_rows)?;
        let forest = fit_forest(&train, config)?;
        let mut observations = Vec::with_capacity(test_rows.len());
        for &row in &test_rows {
            let w = forest.weights(&train, &data.features()[row], WeightMode::AllTrees)?;
            let dist = make_distribution(&w, &train)?;
            observations.push(score(row, data, &dist, options));
        }
        pooled.extend(observations.iter().cloned());
        reports.push(FoldReport {
            report: assemble(observations, Vec::new(), options)?,
            test_rows,
        });
    }
    let mean_fold_crps = reports.iter().map(|f| f.report.crps.mean_crps()).sum::<f64>() / reports.len() as f64;
    Ok(CvReport {
        folds: reports,
        pooled: assemble(pooled, Vec::new(), options)?,
        mean_fold_crps,
    })
}
