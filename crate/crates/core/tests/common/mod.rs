//! Reference implementations shared by the integration tests. They favor
//! the most literal reading of each definition over speed.

#![allow(dead_code)]

use distforest::cohort::{synth_cohort, CohortMarginals, LinkModel};
use distforest::{Dataset, FeatureVector, Forest};

pub fn synth(n: usize, seed: u64) -> Dataset {
    synth_cohort(&CohortMarginals::reference(), n, seed, &LinkModel::default()).unwrap()
}

/// Query points drawn from the same generator as the training cohort.
pub fn queries(n: usize, seed: u64) -> Vec<FeatureVector> {
    synth(n, seed).features().to_vec()
}

fn variance(values: &[f64]) -> f64 {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64
}

/// Best split by trying every feature and every midpoint threshold, scoring
/// each with two-pass variances. Near-equal gains (within `1e-9`) count as
/// ties and resolve to the lowest feature, then the lowest threshold.
pub fn exhaustive_split(
    rows: &[usize],
    data: &Dataset,
    features: &[usize],
    min_leaf: usize,
) -> Option<(usize, f64, f64)> {
    let y = data.responses();
    let all: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
    let parent = variance(&all);
    let n = rows.len() as f64;
    let mut candidates = Vec::new();
    for &f in features {
        let mut values: Vec<f64> = rows.iter().map(|&i| data.feature(i, f)).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for pair in values.windows(2) {
            let t = (pair[0] + pair[1]) / 2.0;
            let (left, right): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| data.feature(i, f) <= t);
            if left.len() < min_leaf || right.len() < min_leaf {
                continue;
            }
            let yl: Vec<f64> = left.iter().map(|&i| y[i]).collect();
            let yr: Vec<f64> = right.iter().map(|&i| y[i]).collect();
            let gain = parent - yl.len() as f64 / n * variance(&yl) - yr.len() as f64 / n * variance(&yr);
            candidates.push((f, t, gain));
        }
    }
    let best = candidates.iter().map(|c| c.2).fold(f64::NEG_INFINITY, f64::max);
    if best <= 1e-9 {
        return None;
    }
    candidates
        .into_iter()
        .filter(|c| c.2 >= best - 1e-9)
        .min_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)))
}

/// CRPS by integrating `(F(z) - 1{y <= z})^2` exactly. Between consecutive
/// break points the integrand is constant, so each piece contributes its
/// left-end value times its length. `F` is rebuilt from the raw atoms.
pub fn crps_by_integration(atoms: &[(f64, f64)], y: f64) -> f64 {
    let total: f64 = atoms.iter().map(|a| a.1).sum();
    let cdf = |z: f64| atoms.iter().filter(|a| a.0 <= z).map(|a| a.1).sum::<f64>() / total;
    let mut points: Vec<f64> = atoms.iter().map(|a| a.0).chain([y]).collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    points
        .windows(2)
        .map(|p| {
            let step = if y <= p[0] { 1.0 } else { 0.0 };
            (cdf(p[0]) - step).powi(2) * (p[1] - p[0])
        })
        .sum()
}

/// Average of the per-tree leaf means.
pub fn tree_average(forest: &Forest, data: &Dataset, x: &FeatureVector) -> f64 {
    let y = data.responses();
    let total: f64 = forest
        .trees()
        .iter()
        .map(|t| {
            let members = t.leaf_members(t.leaf_of(x));
            members.iter().map(|&i| y[i]).sum::<f64>() / members.len() as f64
        })
        .sum();
    total / forest.trees().len() as f64
}

/// Forest weights rebuilt from leaf memberships, counting only trees for
/// which `keep` holds.
pub fn weights_by_hand(forest: &Forest, n: usize, x: &FeatureVector, keep: impl Fn(usize) -> bool) -> Vec<f64> {
    let mut w = vec![0.0; n];
    let mut used = 0;
    for (b, t) in forest.trees().iter().enumerate() {
        if !keep(b) {
            continue;
        }
        used += 1;
        let members = t.leaf_members(t.leaf_of(x));
        for &i in members {
            w[i] += 1.0 / members.len() as f64;
        }
    }
    w.iter_mut().for_each(|v| *v /= used as f64);
    w
}
