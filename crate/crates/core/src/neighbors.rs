//! Forest weights read as patient similarity.
//!
//! The training rows with the largest weight at a query are its nearest
//! neighbors; weighted averages over the whole weight support describe the
//! query's neighborhood.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Feature, FeatureVector, PatientRecord};
use crate::evaluation::CrpsReport;
use crate::forest::WeightVector;

/// Default number of neighbors listed for display.
pub const DEFAULT_NEIGHBORS: usize = 10;

/// A quantity tracked in neighborhood profiles. Serialized by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Quantity {
    OdxScore,
    Feature(Feature),
}

impl Quantity {
    pub const ODX: Quantity = Quantity::OdxScore;

    pub fn name(self) -> &'static str {
        match self {
            Quantity::OdxScore => "odx_score",
            Quantity::Feature(f) => f.name(),
        }
    }

    fn value(self, data: &Dataset, row: usize) -> f64 {
        match self {
            Quantity::OdxScore => data.responses()[row],
            Quantity::Feature(f) => data.features()[row].get(f),
        }
    }

    fn of_patient(self, x: &FeatureVector, score: f64) -> f64 {
        match self {
            Quantity::OdxScore => score,
            Quantity::Feature(f) => x.get(f),
        }
    }
}

impl From<Quantity> for String {
    fn from(q: Quantity) -> String {
        q.name().to_string()
    }
}

impl TryFrom<String> for Quantity {
    type Error = String;

    fn try_from(name: String) -> Result<Quantity, String> {
        if name == "odx_score" {
            return Ok(Quantity::OdxScore);
        }
        Feature::ALL
            .into_iter()
            .find(|f| f.name() == name)
            .map(Quantity::Feature)
            .ok_or_else(|| format!("unknown quantity `{name}`"))
    }
}

/// Quantities averaged in a [`NeighborhoodProfile`].
pub const PROFILE_QUANTITIES: [Quantity; 7] = [
    Quantity::OdxScore,
    Quantity::Feature(Feature::Ki67),
    Quantity::Feature(Feature::P53),
    Quantity::Feature(Feature::Er),
    Quantity::Feature(Feature::Pr),
    Quantity::Feature(Feature::Age),
    Quantity::Feature(Feature::TumorSize),
];

/// Quantities compared in the default divergence analysis.
pub const DIVERGENCE_QUANTITIES: [Quantity; 3] = [
    Quantity::OdxScore,
    Quantity::Feature(Feature::Ki67),
    Quantity::Feature(Feature::P53),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub row: usize,
    pub weight: f64,
    pub record: PatientRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborList {
    /// Weight-descending; ties by row index.
    pub entries: Vec<Neighbor>,
    pub query: FeatureVector,
    pub k: usize,
}

/// The `k` training rows with the largest weight.
pub fn top_neighbors(weights: &WeightVector, data: &Dataset, k: usize) -> NeighborList {
    let mut ranked: Vec<(usize, f64)> = weights.pairs().iter().copied().filter(|p| p.1 > 0.0).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(k);
    NeighborList {
        entries: ranked
            .into_iter()
            .map(|(row, weight)| Neighbor {
                row,
                weight,
                record: data.record(row),
            })
            .collect(),
        query: *weights.query(),
        k,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodProfile {
    pub weighted_means: BTreeMap<Quantity, f64>,
}

impl NeighborhoodProfile {
    pub fn get(&self, quantity: Quantity) -> Option<f64> {
        self.weighted_means.get(&quantity).copied()
    }
}

/// Weighted means over the full weight support.
pub fn neighborhood_profile(weights: &WeightVector, data: &Dataset) -> NeighborhoodProfile {
    profile_of(weights, data, &PROFILE_QUANTITIES)
}

pub fn profile_of(weights: &WeightVector, data: &Dataset, quantities: &[Quantity]) -> NeighborhoodProfile {
    let weighted_means = quantities
        .iter()
        .map(|&q| {
            let mean = weights.pairs().iter().map(|&(i, w)| w * q.value(data, i)).sum();
            (q, mean)
        })
        .collect();
    NeighborhoodProfile { weighted_means }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowDivergence {
    pub row: usize,
    pub id: String,
    pub misclassified: bool,
    /// `|patient value - neighborhood weighted mean|` per quantity.
    pub differences: BTreeMap<Quantity, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub quantities: Vec<Quantity>,
    pub rows: Vec<RowDivergence>,
}

impl DivergenceReport {
    /// Mean absolute difference for `quantity` over rows whose
    /// misclassification flag equals `misclassified`; `None` when there are
    /// no such rows.
    pub fn mean_difference(&self, quantity: Quantity, misclassified: bool) -> Option<f64> {
        let values: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.misclassified == misclassified)
            .filter_map(|r| r.differences.get(&quantity).copied())
            .collect();
        (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
    }

    pub fn count(&self, misclassified: bool) -> usize {
        self.rows.iter().filter(|r| r.misclassified == misclassified).count()
    }
}

/// Patient-versus-neighborhood differences for each evaluated row, using
/// the out-of-bag weights the evaluation was built from.
pub fn divergence_analysis(
    report: &CrpsReport,
    oob_weights: &[Option<WeightVector>],
    data: &Dataset,
) -> DivergenceReport {
    divergence_with(report, oob_weights, data, &DIVERGENCE_QUANTITIES)
}

pub fn divergence_with(
    report: &CrpsReport,
    oob_weights: &[Option<WeightVector>],
    data: &Dataset,
    quantities: &[Quantity],
) -> DivergenceReport {
    let rows = report
        .per_observation
        .iter()
        .filter_map(|obs| {
            let weights = oob_weights.get(obs.row)?.as_ref()?;
            let profile = profile_of(weights, data, quantities);
            let x = &data.features()[obs.row];
            let differences = quantities
                .iter()
                .map(|&q| (q, (q.of_patient(x, obs.true_score) - profile.weighted_means[&q]).abs()))
                .collect();
            Some(RowDivergence {
                row: obs.row,
                id: obs.id.clone(),
                misclassified: obs.misclassified,
                differences,
            })
        })
        .collect();
    DivergenceReport {
        quantities: quantities.to_vec(),
        rows,
    }
}
