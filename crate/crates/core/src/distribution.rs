//! Weighted empirical predictive distributions and their summaries.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::forest::{WeightMode, WeightVector};

/// Lower and upper edges of the score range used for histograms.
pub const SCORE_RANGE: (f64, f64) = (0.0, 100.0);

/// Default number of histogram bins (width 5 over `[0, 100]`).
pub const DEFAULT_BINS: usize = 20;

/// A discrete distribution over recurrence scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveDistribution {
    /// `(value, mass)` with strictly increasing values.
    atoms: Vec<(f64, f64)>,
    source_mode: Option<WeightMode>,
}

impl PredictiveDistribution {
    /// Builds a distribution from arbitrary `(value, mass)` pairs: sorts by
    /// value, merges equal values and drops zero masses.
    pub fn from_weighted(pairs: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut raw: Vec<(f64, f64)> = pairs.into_iter().filter(|p| p.1 > 0.0).collect();
        if raw.is_empty() {
            return Err(Error::EmptyWeights);
        }
        if raw.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
            return Err(Error::InvalidConfig("non-finite atom".into()));
        }
        raw.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut atoms: Vec<(f64, f64)> = Vec::with_capacity(raw.len());
        for (v, w) in raw {
            match atoms.last_mut() {
                Some(last) if last.0 == v => last.1 += w,
                _ => atoms.push((v, w)),
            }
        }
        Ok(PredictiveDistribution {
            atoms,
            source_mode: None,
        })
    }

    /// Unit mass at `value`.
    pub fn point_mass(value: f64) -> Self {
        PredictiveDistribution {
            atoms: vec![(value, 1.0)],
            source_mode: None,
        }
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn source_mode(&self) -> Option<WeightMode> {
        self.source_mode
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    /// `P(Y <= y)`, right-continuous.
    pub fn cdf(&self, y: f64) -> f64 {
        self.atoms.iter().take_while(|a| a.0 <= y).map(|a| a.1).sum()
    }

    /// Mass strictly below `y`.
    pub fn mass_below(&self, y: f64) -> f64 {
        self.atoms.iter().take_while(|a| a.0 < y).map(|a| a.1).sum()
    }

    /// Smallest atom value `v` with `cdf(v) >= p`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidProbability(p));
        }
        let mut cumulative = 0.0;
        for &(v, w) in &self.atoms {
            cumulative += w;
            if cumulative >= p {
                return Ok(v);
            }
        }
        // rounding left the total a hair below p
        Ok(self.atoms[self.atoms.len() - 1].0)
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|&(v, w)| v * w).sum()
    }

    /// Weighted standard deviation of the distribution.
    pub fn std_dev(&self) -> f64 {
        let mean = self.mean();
        self.atoms
            .iter()
            .map(|&(v, w)| w * (v - mean).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn summarize(&self, classes: &RiskClasses, bins: usize) -> Result<DistributionSummary> {
        if bins == 0 {
            return Err(Error::InvalidConfig("histogram needs at least one bin".into()));
        }
        let mut low = 0.0;
        let mut intermediate = 0.0;
        let mut high = 0.0;
        for &(v, w) in &self.atoms {
            match classes.band(v) {
                RiskBand::Low => low += w,
                RiskBand::Intermediate => intermediate += w,
                RiskBand::High => high += w,
            }
        }
        Ok(DistributionSummary {
            mean: self.mean(),
            median: self.quantile(0.5)?,
            std_error: self.std_dev(),
            credible_interval_90: Interval {
                lo: self.quantile(0.05)?,
                hi: self.quantile(0.95)?,
            },
            class_probs: ClassProbabilities {
                low,
                intermediate,
                high,
            },
            binary_probs: BinaryProbabilities {
                le_high_cut: low + intermediate,
                gt_high_cut: high,
            },
            histogram: self.histogram(bins),
        })
    }

    /// Equal-width bins over [`SCORE_RANGE`]. A value on a bin edge counts
    /// toward the lower bin; the left edge of bin 0 is closed.
    pub fn histogram(&self, bins: usize) -> Vec<HistogramBin> {
        let (lo, hi) = SCORE_RANGE;
        let width = (hi - lo) / bins as f64;
        let mut out: Vec<HistogramBin> = (0..bins)
            .map(|k| HistogramBin {
                lo: lo + k as f64 * width,
                hi: if k + 1 == bins { hi } else { lo + (k + 1) as f64 * width },
                mass: 0.0,
            })
            .collect();
        for &(v, w) in &self.atoms {
            out[histogram_bin(v, bins)].mass += w;
        }
        out
    }
}

/// Bin index for `value` under [`PredictiveDistribution::histogram`].
pub fn histogram_bin(value: f64, bins: usize) -> usize {
    let (lo, hi) = SCORE_RANGE;
    let scaled = (value - lo) / (hi - lo) * bins as f64;
    let k = scaled.ceil() as i64 - 1;
    k.clamp(0, bins as i64 - 1) as usize
}

/// Merged, sorted `(Y_i, w_i)` over the weight support.
pub fn make_distribution(weights: &WeightVector, data: &Dataset) -> Result<PredictiveDistribution> {
    let y = data.responses();
    if let Some(&(bad, _)) = weights.pairs().iter().find(|p| p.0 >= y.len()) {
        return Err(Error::InvalidDataset(format!(
            "weight on row {bad} outside the dataset"
        )));
    }
    let mut dist = PredictiveDistribution::from_weighted(weights.pairs().iter().map(|&(i, w)| (y[i], w)))?;
    dist.source_mode = Some(weights.mode());
    Ok(dist)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskBand {
    Low,
    Intermediate,
    High,
}

/// Score banding: low `< low_cut`, intermediate `[low_cut, high_cut]`,
/// high `> high_cut`. The binary split is `<= high_cut` vs `> high_cut`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskClasses {
    pub low_cut: f64,
    pub high_cut: f64,
}

impl Default for RiskClasses {
    fn default() -> Self {
        RiskClasses {
            low_cut: 16.0,
            high_cut: 25.0,
        }
    }
}

impl RiskClasses {
    pub fn new(low_cut: f64, high_cut: f64) -> Result<Self> {
        if low_cut.is_nan() || high_cut.is_nan() || low_cut >= high_cut {
            return Err(Error::InvalidConfig(format!(
                "low cut {low_cut} must be below high cut {high_cut}"
            )));
        }
        Ok(RiskClasses { low_cut, high_cut })
    }

    pub fn band(&self, score: f64) -> RiskBand {
        if score < self.low_cut {
            RiskBand::Low
        } else if score <= self.high_cut {
            RiskBand::Intermediate
        } else {
            RiskBand::High
        }
    }

    /// Whether `score` falls in the upper binary class.
    pub fn is_high(&self, score: f64) -> bool {
        score > self.high_cut
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassProbabilities {
    pub low: f64,
    pub intermediate: f64,
    pub high: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryProbabilities {
    /// `P(Y <= high_cut)`.
    pub le_high_cut: f64,
    /// `P(Y > high_cut)`.
    pub gt_high_cut: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub mean: f64,
    pub median: f64,
    pub std_error: f64,
    pub credible_interval_90: Interval,
    pub class_probs: ClassProbabilities,
    pub binary_probs: BinaryProbabilities,
    pub histogram: Vec<HistogramBin>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureVector;

    fn dist(pairs: &[(f64, f64)]) -> PredictiveDistribution {
        PredictiveDistribution::from_weighted(pairs.iter().copied()).unwrap()
    }

    fn weights(pairs: &[(usize, f64)]) -> WeightVector {
        WeightVector::from_pairs(
            pairs.iter().copied(),
            FeatureVector::from_raw([0.0; 9]),
            WeightMode::AllTrees,
        )
        .unwrap()
    }

    fn data(ys: &[f64]) -> Dataset {
        let xs = ys.iter().map(|_| FeatureVector::from_raw([0.0; 9])).collect();
        Dataset::with_row_ids(xs, ys.to_vec()).unwrap()
    }

    #[test]
    fn equal_values_merge() {
        let d = make_distribution(&weights(&[(0, 0.5), (1, 0.5)]), &data(&[10.0, 10.0])).unwrap();
        assert_eq!(d.atoms(), &[(10.0, 1.0)]);
        assert_eq!(d.source_mode(), Some(WeightMode::AllTrees));
    }

    #[test]
    fn atoms_sorted_by_value() {
        let d = make_distribution(&weights(&[(0, 0.25), (1, 0.5), (2, 0.25)]), &data(&[20.0, 0.0, 10.0])).unwrap();
        assert_eq!(d.atoms(), &[(0.0, 0.5), (10.0, 0.25), (20.0, 0.25)]);
        assert_eq!(d.total_mass(), 1.0);
    }

    #[test]
    fn empty_support_rejected() {
        assert!(PredictiveDistribution::from_weighted(std::iter::empty()).is_err());
    }

    #[test]
    fn cdf_is_right_continuous() {
        let d = dist(&[(5.0, 0.5), (10.0, 0.5)]);
        assert_eq!(d.cdf(4.9), 0.0);
        assert_eq!(d.cdf(5.0), 0.5);
        assert_eq!(d.cdf(10.0), 1.0);
        assert_eq!(d.cdf(101.0), 1.0);
        let d = dist(&[(0.0, 0.5), (10.0, 0.25), (20.0, 0.25)]);
        assert_eq!(d.cdf(10.0), 0.75);
    }

    #[test]
    fn quantile_generalized_inverse() {
        let d = dist(&[(1.0, 0.25), (2.0, 0.25), (3.0, 0.25), (4.0, 0.25)]);
        assert_eq!(d.quantile(0.5).unwrap(), 2.0);
        assert_eq!(d.quantile(1.0).unwrap(), 4.0);
        assert_eq!(d.quantile(0.0).unwrap(), 1.0);
        let d = dist(&[(0.0, 0.5), (10.0, 0.25), (20.0, 0.25)]);
        assert_eq!(d.quantile(0.9).unwrap(), 20.0);
        assert!(d.quantile(1.5).is_err());
        assert!(d.quantile(-0.1).is_err());
    }

    #[test]
    fn quantile_one_with_rounded_total() {
        let third = 1.0 / 3.0;
        let d = dist(&[(1.0, third), (2.0, third), (3.0, third)]);
        assert_eq!(d.quantile(1.0).unwrap(), 3.0);
    }

    #[test]
    fn summary_three_bands() {
        let third = 1.0 / 3.0;
        let s = dist(&[(10.0, third), (20.0, third), (30.0, third)])
            .summarize(&RiskClasses::default(), DEFAULT_BINS)
            .unwrap();
        assert_eq!(s.class_probs.low, third);
        assert_eq!(s.class_probs.intermediate, third);
        assert_eq!(s.class_probs.high, third);
        assert!((s.binary_probs.le_high_cut - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.binary_probs.gt_high_cut, third);
    }

    #[test]
    fn boundary_scores() {
        let classes = RiskClasses::default();
        let s = PredictiveDistribution::point_mass(25.0)
            .summarize(&classes, 20)
            .unwrap();
        assert_eq!(s.binary_probs.le_high_cut, 1.0);
        assert_eq!(s.binary_probs.gt_high_cut, 0.0);
        assert_eq!(classes.band(16.0), RiskBand::Intermediate);
        assert_eq!(classes.band(15.99), RiskBand::Low);
        assert_eq!(classes.band(25.01), RiskBand::High);
    }

    #[test]
    fn mean_and_spread() {
        let s = dist(&[(0.0, 0.5), (10.0, 0.5)])
            .summarize(&RiskClasses::default(), 20)
            .unwrap();
        assert_eq!(s.mean, 5.0);
        assert_eq!(s.std_error, 5.0);
        assert_eq!(s.median, 0.0);
        assert_eq!((s.credible_interval_90.lo, s.credible_interval_90.hi), (0.0, 10.0));
    }

    #[test]
    fn histogram_edges() {
        assert_eq!(histogram_bin(0.0, 20), 0);
        assert_eq!(histogram_bin(5.0, 20), 0);
        assert_eq!(histogram_bin(5.5, 20), 1);
        assert_eq!(histogram_bin(100.0, 20), 19);
        assert_eq!(histogram_bin(25.0, 20), 4);
        let h = dist(&[(0.0, 0.25), (5.0, 0.25), (7.0, 0.5)]).histogram(20);
        assert_eq!(h.len(), 20);
        assert_eq!(h[0].mass, 0.5);
        assert_eq!(h[1].mass, 0.5);
        assert_eq!((h[19].lo, h[19].hi), (95.0, 100.0));
    }

    #[test]
    fn zero_bins_rejected() {
        assert!(PredictiveDistribution::point_mass(1.0)
            .summarize(&RiskClasses::default(), 0)
            .is_err());
        assert!(RiskClasses::new(25.0, 16.0).is_err());
    }
}
