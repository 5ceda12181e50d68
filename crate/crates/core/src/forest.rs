//! Forest fitting, forest weights and point predictions.
//!
//! The weight of training row `i` at query `x` is the average over trees of
//! `1{row i in the leaf of x} / |leaf of x|`, counting bootstrap repeats.
//! These weights are non-negative, sum to one, and reproduce the
//! tree-averaged mean as an inner product with the responses.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureVector};
use crate::error::{Error, Result};
use crate::tree::{fit_tree, Tree, TreeConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Resampling {
    /// `n` draws with replacement.
    BootstrapWithReplacement,
    /// `round(fraction * n)` distinct rows (at least one).
    SubsampleWithoutReplacement { fraction: f64 },
}

impl Default for Resampling {
    fn default() -> Self {
        Resampling::SubsampleWithoutReplacement { fraction: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub num_trees: usize,
    pub resampling: Resampling,
    pub tree: TreeConfig,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            num_trees: 2000,
            resampling: Resampling::default(),
            tree: TreeConfig::default(),
            seed: 42,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_trees == 0 {
            return Err(Error::InvalidConfig("num_trees must be at least 1".into()));
        }
        if let Resampling::SubsampleWithoutReplacement { fraction } = self.resampling {
            if !(fraction > 0.0 && fraction <= 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "subsample fraction must be in (0,1], got {fraction}"
                )));
            }
        }
        self.tree.validate()
    }
}

/// The random stream for tree `tree_index`: one ChaCha stream per tree, so
/// trees can be fit in any order or in parallel.
pub fn tree_rng(seed: u64, tree_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree_index as u64);
    rng
}

fn draw_resample<R: Rng + ?Sized>(n: usize, resampling: Resampling, rng: &mut R) -> Vec<usize> {
    match resampling {
        Resampling::BootstrapWithReplacement => (0..n).map(|_| rng.random_range(0..n)).collect(),
        Resampling::SubsampleWithoutReplacement { fraction } => {
            let size = ((fraction * n as f64).round() as usize).clamp(1, n);
            index::sample(rng, n, size).into_vec()
        }
    }
}

/// A fitted ensemble. Holds trees only; the training responses live in the
/// [`Dataset`] the forest was fit on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    trees: Vec<Tree>,
    config: ForestConfig,
    dataset_fingerprint: String,
    num_rows: usize,
}

pub fn fit_forest(data: &Dataset, config: &ForestConfig) -> Result<Forest> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    config.validate()?;
    let n = data.len();
    let trees = (0..config.num_trees)
        .into_par_iter()
        .map(|b| {
            let mut rng = tree_rng(config.seed, b);
            let subsample = draw_resample(n, config.resampling, &mut rng);
            fit_tree(data, &subsample, &config.tree, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Forest {
        trees,
        config: config.clone(),
        dataset_fingerprint: data.fingerprint(),
        num_rows: n,
    })
}

/// Which trees contribute to a weight vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum WeightMode {
    AllTrees,
    /// Only trees whose subsample excludes `excluded`.
    Oob {
        excluded: usize,
    },
}

/// Sparse probability weights over training rows for one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    /// `(row, weight)` pairs sorted by row, all weights positive.
    weights: Vec<(usize, f64)>,
    query: FeatureVector,
    mode: WeightMode,
    trees_used: usize,
}

impl WeightVector {
    /// Builds a weight vector from explicit `(row, weight)` pairs. Rows are
    /// sorted, zero weights dropped and the rest must sum to one.
    pub fn from_pairs(
        pairs: impl IntoIterator<Item = (usize, f64)>,
        query: FeatureVector,
        mode: WeightMode,
    ) -> Result<WeightVector> {
        let mut weights: Vec<(usize, f64)> = pairs.into_iter().filter(|p| p.1 != 0.0).collect();
        weights.sort_by_key(|p| p.0);
        if weights.is_empty() {
            return Err(Error::EmptyWeights);
        }
        if weights.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidConfig("duplicate row in weight vector".into()));
        }
        if weights.iter().any(|p| p.1.is_nan() || p.1 <= 0.0) {
            return Err(Error::InvalidConfig("negative weight".into()));
        }
        let total: f64 = weights.iter().map(|p| p.1).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!("weights sum to {total}, not 1")));
        }
        Ok(WeightVector {
            weights,
            query,
            mode,
            trees_used: 0,
        })
    }

    pub fn pairs(&self) -> &[(usize, f64)] {
        &self.weights
    }

    pub fn get(&self, row: usize) -> f64 {
        self.weights
            .binary_search_by_key(&row, |p| p.0)
            .map_or(0.0, |k| self.weights[k].1)
    }

    pub fn query(&self) -> &FeatureVector {
        &self.query
    }

    pub fn mode(&self) -> WeightMode {
        self.mode
    }

    /// Number of trees that contributed.
    pub fn trees_used(&self) -> usize {
        self.trees_used
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().map(|p| p.1).sum()
    }

    /// `sum_i w_i * values[i]`.
    pub fn weighted_sum(&self, values: &[f64]) -> f64 {
        self.weights.iter().map(|&(i, w)| w * values[i]).sum()
    }
}

impl Forest {
    /// Reassembles a forest, e.g. from a model file.
    pub fn from_parts(
        trees: Vec<Tree>,
        config: ForestConfig,
        dataset_fingerprint: String,
        num_rows: usize,
    ) -> Result<Forest> {
        config.validate()?;
        if trees.len() != config.num_trees {
            return Err(Error::InvalidConfig(format!(
                "{} trees but num_trees = {}",
                trees.len(),
                config.num_trees
            )));
        }
        if trees
            .iter()
            .any(|t| t.subsample().last().is_some_and(|&i| i >= num_rows))
        {
            return Err(Error::InvalidConfig(
                "tree subsample refers to rows outside the training set".into(),
            ));
        }
        Ok(Forest {
            trees,
            config,
            dataset_fingerprint,
            num_rows,
        })
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn config(&self) -> &ForestConfig {
        &self.config
    }

    pub fn dataset_fingerprint(&self) -> &str {
        &self.dataset_fingerprint
    }

    /// Number of training rows the forest was fit on.
    pub fn num_rows(&self) -> usize {
        self.num_rows
    }

    fn check_data(&self, data: &Dataset) -> Result<()> {
        if data.len() != self.num_rows {
            return Err(Error::InvalidDataset(format!(
                "forest was fit on {} rows but {} were supplied",
                self.num_rows,
                data.len()
            )));
        }
        Ok(())
    }

    fn qualifies(tree: &Tree, mode: WeightMode) -> bool {
        match mode {
            WeightMode::AllTrees => true,
            WeightMode::Oob { excluded } => !tree.is_in_bag(excluded),
        }
    }

    /// Forest weights of every training row at `x`.
    pub fn weights(&self, data: &Dataset, x: &FeatureVector, mode: WeightMode) -> Result<WeightVector> {
        self.weights_traced(data, x, mode).map(|(w, _)| w)
    }

    /// Like [`Forest::weights`], also returning the ids of the trees that
    /// contributed.
    pub fn weights_traced(
        &self,
        data: &Dataset,
        x: &FeatureVector,
        mode: WeightMode,
    ) -> Result<(WeightVector, Vec<usize>)> {
        self.check_data(data)?;
        if let WeightMode::Oob { excluded } = mode {
            if excluded >= self.num_rows {
                return Err(Error::InvalidDataset(format!("row {excluded} out of range")));
            }
        }
        let mut acc = vec![0.0; self.num_rows];
        let mut used = Vec::new();
        for (b, tree) in self.trees.iter().enumerate() {
            if !Self::qualifies(tree, mode) {
                continue;
            }
            let members = tree.leaf_members(tree.leaf_of(x));
            let share = 1.0 / members.len() as f64;
            for &i in members {
                acc[i] += share;
            }
            used.push(b);
        }
        if used.is_empty() {
            return match mode {
                WeightMode::Oob { excluded } => Err(Error::NoOobTrees { row: excluded }),
                WeightMode::AllTrees => Err(Error::EmptyWeights),
            };
        }
        let scale = used.len() as f64;
        let weights = acc
            .into_iter()
            .enumerate()
            .filter(|(_, a)| *a > 0.0)
            .map(|(i, a)| (i, a / scale))
            .collect();
        Ok((
            WeightVector {
                weights,
                query: *x,
                mode,
                trees_used: used.len(),
            },
            used,
        ))
    }

    /// Tree-averaged mean prediction.
    pub fn predict_mean(&self, data: &Dataset, x: &FeatureVector) -> Result<f64> {
        self.check_data(data)?;
        let total: f64 = self.trees.iter().map(|t| t.predict_mean(x, data)).sum();
        Ok(total / self.trees.len() as f64)
    }

    /// Out-of-bag weights for every training row; `None` marks rows that
    /// were in-bag for every tree.
    pub fn oob_weights_all(&self, data: &Dataset) -> Result<Vec<Option<WeightVector>>> {
        self.check_data(data)?;
        (0..data.len())
            .into_par_iter()
            .map(
                |i| match self.weights(data, &data.features()[i], WeightMode::Oob { excluded: i }) {
                    Ok(w) => Ok(Some(w)),
                    Err(Error::NoOobTrees { .. }) => Ok(None),
                    Err(e) => Err(e),
                },
            )
            .collect()
    }
}

/// Free-function form of [`Forest::weights`].
pub fn forest_weights(forest: &Forest, data: &Dataset, x: &FeatureVector, mode: WeightMode) -> Result<WeightVector> {
    forest.weights(data, x, mode)
}
