//! Single CART-style regression trees grown by variance reduction.
//!
//! A tree is stored as a flat arena of nodes with the root at index 0.
//! Leaves keep the training-row indices that reached them, which is what
//! the forest weights are built from.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureVector, NUM_FEATURES};
use crate::error::{Error, Result};

/// Relative slack used when comparing split gains, so that rounding noise
/// neither creates splits on constant responses nor breaks tie ordering.
const GAIN_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitCriterion {
    #[default]
    VarianceReduction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub min_leaf_size: usize,
    /// `None` grows until the other stopping rules apply.
    pub max_depth: Option<usize>,
    /// Candidate features drawn at every node.
    pub mtry: usize,
    #[serde(default)]
    pub split_criterion: SplitCriterion,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            min_leaf_size: 5,
            max_depth: None,
            mtry: 3,
            split_criterion: SplitCriterion::VarianceReduction,
        }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_leaf_size == 0 {
            return Err(Error::InvalidConfig("min_leaf_size must be at least 1".into()));
        }
        if !(1..=NUM_FEATURES).contains(&self.mtry) {
            return Err(Error::InvalidConfig(format!(
                "mtry must be in 1..={NUM_FEATURES}, got {}",
                self.mtry
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitDecision {
    pub feature: usize,
    pub threshold: f64,
    /// `Var(parent) - n_L/n Var(left) - n_R/n Var(right)`.
    pub gain: f64,
    pub left_count: usize,
    pub right_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        members: Vec<usize>,
    },
}

/// A fitted regression tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TreeParts")]
pub struct Tree {
    nodes: Vec<Node>,
    /// Sorted training indices the tree was fit on; repeats are kept for
    /// bootstrap draws.
    subsample: Vec<usize>,
}

#[derive(Deserialize)]
struct TreeParts {
    nodes: Vec<Node>,
    subsample: Vec<usize>,
}

impl TryFrom<TreeParts> for Tree {
    type Error = Error;

    fn try_from(parts: TreeParts) -> Result<Tree> {
        Tree::from_parts(parts.nodes, parts.subsample)
    }
}

/// Finds the variance-reducing split over `candidate_features`.
///
/// Thresholds are midpoints between consecutive distinct observed values.
/// Among equal gains the lowest feature index wins, then the lowest
/// threshold. Returns `None` when no admissible split has positive gain.
pub fn best_split(
    rows: &[usize],
    data: &Dataset,
    candidate_features: &[usize],
    config: &TreeConfig,
) -> Option<SplitDecision> {
    let n = rows.len();
    let min_leaf = config.min_leaf_size.max(1);
    if n < 2 * min_leaf {
        return None;
    }
    let y = data.responses();
    let mean = rows.iter().map(|&i| y[i]).sum::<f64>() / n as f64;
    let total: f64 = rows.iter().map(|&i| y[i] - mean).sum();
    let parent_ss = rows.iter().map(|&i| (y[i] - mean).powi(2)).sum::<f64>();
    let tolerance = GAIN_TOLERANCE * (1.0 + parent_ss / n as f64);
    let total_term = total * total / n as f64;

    let mut features = candidate_features.to_vec();
    features.sort_unstable();
    features.dedup();

    let mut best: Option<SplitDecision> = None;
    let mut order: Vec<(f64, f64)> = Vec::with_capacity(n);
    for feature in features {
        order.clear();
        order.extend(rows.iter().map(|&i| (data.feature(i, feature), y[i] - mean)));
        order.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut left_sum = 0.0;
        for k in 0..n - 1 {
            left_sum += order[k].1;
            let (lo, hi) = (order[k].0, order[k + 1].0);
            let left_count = k + 1;
            let right_count = n - left_count;
            if lo == hi || left_count < min_leaf || right_count < min_leaf {
                continue;
            }
            let right_sum = total - left_sum;
            let gain = (left_sum * left_sum / left_count as f64 + right_sum * right_sum / right_count as f64
                - total_term)
                / n as f64;
            let floor = best.map_or(0.0, |b| b.gain);
            if gain > floor + tolerance {
                best = Some(SplitDecision {
                    feature,
                    threshold: midpoint(lo, hi),
                    gain,
                    left_count,
                    right_count,
                });
            }
        }
    }
    best
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    // adjacent floats: keep `hi` on the right-hand side
    if mid >= hi {
        lo
    } else {
        mid
    }
}

/// Grows one tree on `subsample`, drawing `mtry` candidate features per
/// node from `rng`.
pub fn fit_tree<R: Rng + ?Sized>(
    data: &Dataset,
    subsample: &[usize],
    config: &TreeConfig,
    rng: &mut R,
) -> Result<Tree> {
    if subsample.is_empty() {
        return Err(Error::EmptySubsample);
    }
    config.validate()?;
    if let Some(&bad) = subsample.iter().find(|&&i| i >= data.len()) {
        return Err(Error::InvalidDataset(format!(
            "subsample index {bad} out of range for {} rows",
            data.len()
        )));
    }
    let mut subsample = subsample.to_vec();
    subsample.sort_unstable();

    let mut builder = Builder {
        data,
        config,
        rng,
        nodes: Vec::new(),
    };
    builder.grow(subsample.clone(), 0);
    Ok(Tree {
        nodes: builder.nodes,
        subsample,
    })
}

struct Builder<'a, R: ?Sized> {
    data: &'a Dataset,
    config: &'a TreeConfig,
    rng: &'a mut R,
    nodes: Vec<Node>,
}

impl<R: Rng + ?Sized> Builder<'_, R> {
    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let at_depth_limit = self.config.max_depth.is_some_and(|d| depth >= d);
        if at_depth_limit || rows.len() < 2 * self.config.min_leaf_size {
            self.nodes.push(Node::Leaf { members: rows });
            return id;
        }

        let mut candidates = index::sample(self.rng, NUM_FEATURES, self.config.mtry).into_vec();
        candidates.sort_unstable();
        let Some(split) = best_split(&rows, self.data, &candidates, self.config) else {
            self.nodes.push(Node::Leaf { members: rows });
            return id;
        };

        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&i| self.data.feature(i, split.feature) <= split.threshold);
        // placeholder, patched once both children exist
        self.nodes.push(Node::Leaf { members: Vec::new() });
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

impl Tree {
    /// Assembles a tree from raw parts, checking that the arena is a proper
    /// binary tree rooted at 0 whose leaves partition `subsample`.
    pub fn from_parts(nodes: Vec<Node>, mut subsample: Vec<usize>) -> Result<Tree> {
        let bad = |msg: String| Err(Error::InvalidDataset(format!("malformed tree: {msg}")));
        if nodes.is_empty() {
            return bad("no nodes".into());
        }
        let mut seen = vec![false; nodes.len()];
        let mut stack = vec![0usize];
        let mut members = Vec::new();
        while let Some(id) = stack.pop() {
            if id >= nodes.len() || seen[id] {
                return bad(format!("node {id} is missing or reached twice"));
            }
            seen[id] = true;
            match &nodes[id] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if *feature >= NUM_FEATURES || threshold.is_nan() {
                        return bad(format!("node {id} has an invalid split"));
                    }
                    stack.push(*right);
                    stack.push(*left);
                }
                Node::Leaf { members: m } => {
                    if m.is_empty() {
                        return bad(format!("leaf {id} is empty"));
                    }
                    members.extend_from_slice(m);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return bad("unreachable nodes".into());
        }
        members.sort_unstable();
        subsample.sort_unstable();
        if members != subsample {
            return bad("leaves do not partition the subsample".into());
        }
        Ok(Tree { nodes, subsample })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn subsample(&self) -> &[usize] {
        &self.subsample
    }

    /// Whether training row `row` was used to fit this tree.
    pub fn is_in_bag(&self, row: usize) -> bool {
        self.subsample.binary_search(&row).is_ok()
    }

    /// Node id of the leaf whose region contains `x`; ties go left.
    pub fn leaf_of(&self, x: &FeatureVector) -> usize {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if x[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { .. } => return id,
            }
        }
    }

    /// Members of the leaf with node id `leaf`; empty for split nodes.
    pub fn leaf_members(&self, leaf: usize) -> &[usize] {
        match &self.nodes[leaf] {
            Node::Leaf { members } => members,
            Node::Split { .. } => &[],
        }
    }

    /// Ids of all leaves in arena order.
    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, node)| matches!(node, Node::Leaf { .. }))
            .map(|(id, _)| id)
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], id: usize) -> usize {
            match &nodes[id] {
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }

    /// Mean training response over the leaf containing `x`.
    pub fn predict_mean(&self, x: &FeatureVector, data: &Dataset) -> f64 {
        let members = self.leaf_members(self.leaf_of(x));
        let y = data.responses();
        members.iter().map(|&i| y[i]).sum::<f64>() / members.len() as f64
    }
}
