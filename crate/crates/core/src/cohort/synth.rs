//! Synthetic cohorts drawn from per-feature category frequencies.
//!
//! This is test and demo scaffolding, not a clinical simulator. Categories
//! are sampled independently, continuous values uniformly inside the chosen
//! band, and the recurrence score comes from a fixed monotone linear link
//! plus Gaussian noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Feature, FeatureVector, LYMPH_NODES_UNKNOWN, NUM_FEATURES};
use crate::error::{Error, Result};

/// One reporting category of a feature, with its population share.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub label: String,
    pub lo: f64,
    pub hi: f64,
    pub lo_open: bool,
    pub hi_open: bool,
    /// Share of patients, in percent.
    pub percent: f64,
}

impl Band {
    fn closed(label: &str, lo: f64, hi: f64, percent: f64) -> Band {
        Band {
            label: label.into(),
            lo,
            hi,
            lo_open: false,
            hi_open: false,
            percent,
        }
    }

    fn open_below(label: &str, lo: f64, hi: f64, percent: f64) -> Band {
        Band {
            lo_open: true,
            ..Band::closed(label, lo, hi, percent)
        }
    }

    fn open_above(label: &str, lo: f64, hi: f64, percent: f64) -> Band {
        Band {
            hi_open: true,
            ..Band::closed(label, lo, hi, percent)
        }
    }

    fn level(label: &str, value: f64, percent: f64) -> Band {
        Band::closed(label, value, value, percent)
    }

    pub fn contains(&self, value: f64) -> bool {
        let above = if self.lo_open {
            value > self.lo
        } else {
            value >= self.lo
        };
        let below = if self.hi_open {
            value < self.hi
        } else {
            value <= self.hi
        };
        above && below
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.lo == self.hi {
            return self.lo;
        }
        let u: f64 = rng.random();
        // u in [0, 1): anchor the draw at the closed end
        let value = if self.lo_open && !self.hi_open {
            self.hi - u * (self.hi - self.lo)
        } else {
            self.lo + u * (self.hi - self.lo)
        };
        if self.contains(value) {
            value
        } else {
            (self.lo + self.hi) / 2.0
        }
    }
}

/// Category frequencies for one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMarginal {
    pub feature: Feature,
    pub bands: Vec<Band>,
}

impl FeatureMarginal {
    /// Index of the first band containing `value`.
    pub fn band_of(&self, value: f64) -> Option<usize> {
        self.bands.iter().position(|b| b.contains(value))
    }
}

/// Per-feature category frequencies plus the three score-band frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortMarginals {
    /// One entry per feature, in [`Feature::ALL`] order.
    pub features: Vec<FeatureMarginal>,
    /// Percent of patients with score `< 16`, `16-25`, `> 25`.
    pub score_bands: [f64; 3],
}

impl CohortMarginals {
    /// Frequencies of the published 333-patient ER-positive cohort.
    pub fn reference() -> Self {
        use Feature::*;
        let features = vec![
            FeatureMarginal {
                feature: Age,
                bands: vec![
                    Band::closed("<=50 yr", 28.0, 50.0, 30.63),
                    Band::open_below(">50 yr", 50.0, 85.0, 69.37),
                ],
            },
            FeatureMarginal {
                feature: TumorSize,
                bands: vec![
                    Band::open_above("<1 cm", 0.2, 1.0, 11.41),
                    Band::closed("1-2 cm", 1.0, 2.0, 53.76),
                    Band::open_below(">2 cm", 2.0, 6.0, 34.83),
                ],
            },
            FeatureMarginal {
                feature: P53,
                bands: vec![
                    Band::closed("<=10%", 0.0, 10.0, 53.75),
                    Band::open_below(">10%", 10.0, 80.0, 46.25),
                ],
            },
            FeatureMarginal {
                feature: SbrGrade,
                bands: vec![
                    Band::level("1", 1.0, 8.71),
                    Band::level("2", 2.0, 55.86),
                    Band::level("3", 3.0, 35.43),
                ],
            },
            FeatureMarginal {
                feature: MitoticGrade,
                bands: vec![
                    Band::level("1", 1.0, 31.53),
                    Band::level("2", 2.0, 49.25),
                    Band::level("3", 3.0, 19.22),
                ],
            },
            FeatureMarginal {
                feature: Er,
                bands: vec![
                    Band::open_above("negative", 0.0, 10.0, 0.0),
                    Band::closed("positive (>=10%)", 10.0, 100.0, 100.0),
                ],
            },
            FeatureMarginal {
                feature: Pr,
                bands: vec![
                    Band::open_above("negative", 0.0, 10.0, 17.72),
                    Band::closed("positive (>=10%)", 10.0, 100.0, 82.28),
                ],
            },
            FeatureMarginal {
                feature: Ki67,
                bands: vec![
                    Band::open_above("<10%", 0.0, 10.0, 0.30),
                    Band::closed("10-20%", 10.0, 20.0, 36.94),
                    Band::open_below(">20%", 20.0, 70.0, 62.76),
                ],
            },
            FeatureMarginal {
                feature: LymphNodes,
                bands: vec![
                    Band::level("0", 0.0, 45.35),
                    Band::level("1", 1.0, 29.13),
                    Band::level("2", 2.0, 7.81),
                    Band::level("3", 3.0, 6.00),
                    Band::level("NA", LYMPH_NODES_UNKNOWN, 11.71),
                ],
            },
        ];
        CohortMarginals {
            features,
            score_bands: [33.93, 41.44, 24.63],
        }
    }

    pub fn marginal(&self, feature: Feature) -> Option<&FeatureMarginal> {
        self.features.iter().find(|m| m.feature == feature)
    }

    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, total: f64| {
            if (total - 100.0).abs() > 0.1 {
                Err(Error::InvalidConfig(format!(
                    "{name} frequencies sum to {total}, not 100"
                )))
            } else {
                Ok(())
            }
        };
        for feature in Feature::ALL {
            let marginal = self
                .marginal(feature)
                .ok_or_else(|| Error::InvalidConfig(format!("no marginal for {feature}")))?;
            if marginal.bands.iter().any(|b| b.percent < 0.0 || b.lo > b.hi) {
                return Err(Error::InvalidConfig(format!("bad band for {feature}")));
            }
            check(feature.name(), marginal.bands.iter().map(|b| b.percent).sum())?;
        }
        check("score band", self.score_bands.iter().sum())
    }
}

/// Linear link from features to the recurrence score.
///
/// `score = intercept + sum_f coefficient_f * x_f + N(0, noise_sd)`, clamped
/// to `[0, 100]` and optionally rounded to an integer. Unknown lymph-node
/// status contributes as if node count were zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkModel {
    pub intercept: f64,
    /// Per-feature slope, in [`Feature::ALL`] order.
    pub coefficients: [f64; NUM_FEATURES],
    pub noise_sd: f64,
    pub round_scores: bool,
}

impl Default for LinkModel {
    /// Higher Ki67, grades and p53 raise the score, higher PR lowers it.
    fn default() -> Self {
        LinkModel {
            intercept: -3.0,
            //              age  size  p53   sbr  mit  er    pr     ki67  nodes
            coefficients: [0.0, 0.5, 0.08, 3.0, 3.0, 0.0, -0.12, 0.38, 0.0],
            noise_sd: 3.0,
            round_scores: true,
        }
    }
}

impl LinkModel {
    /// Noise-free score before clamping.
    pub fn signal(&self, x: &FeatureVector) -> f64 {
        let mut total = self.intercept;
        for feature in Feature::ALL {
            let mut value = x.get(feature);
            if feature == Feature::LymphNodes && value == LYMPH_NODES_UNKNOWN {
                value = 0.0;
            }
            total += self.coefficients[feature.index()] * value;
        }
        total
    }
}

fn pick_band<'a, R: Rng + ?Sized>(marginal: &'a FeatureMarginal, rng: &mut R) -> &'a Band {
    let total: f64 = marginal.bands.iter().map(|b| b.percent).sum();
    let mut target = rng.random::<f64>() * total;
    for band in &marginal.bands {
        if band.percent > 0.0 && target < band.percent {
            return band;
        }
        target -= band.percent;
    }
    marginal
        .bands
        .iter()
        .rev()
        .find(|b| b.percent > 0.0)
        .unwrap_or(&marginal.bands[0])
}

/// Draws `n` synthetic patients with ids `S0001`, `S0002`, ...
pub fn synth_cohort(marginals: &CohortMarginals, n: usize, seed: u64, link: &LinkModel) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    marginals.validate()?;
    let noise = Normal::new(0.0, link.noise_sd.max(0.0)).map_err(|e| Error::InvalidConfig(format!("noise: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(n);
    let mut responses = Vec::with_capacity(n);
    for _ in 0..n {
        let mut values = [0.0; NUM_FEATURES];
        for feature in Feature::ALL {
            let marginal = marginals.marginal(feature).expect("validated");
            values[feature.index()] = pick_band(marginal, &mut rng).sample(&mut rng);
        }
        let x = FeatureVector::new(values)?;
        let mut score = (link.signal(&x) + noise.sample(&mut rng)).clamp(0.0, 100.0);
        if link.round_scores {
            score = score.round();
        }
        features.push(x);
        responses.push(score);
    }
    let width = n.to_string().len().max(4);
    let ids = (1..=n).map(|i| format!("S{i:0width$}")).collect();
    Dataset::new(features, responses, ids)
}
