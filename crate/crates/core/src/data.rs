//! Feature vectors, patient records and the training dataset.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Number of clinico-pathological predictors.
pub const NUM_FEATURES: usize = 9;

/// Lymph-node code used for an unknown node status.
pub const LYMPH_NODES_UNKNOWN: f64 = -1.0;

/// The nine predictors, in feature-vector slot order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Age,
    TumorSize,
    P53,
    SbrGrade,
    MitoticGrade,
    Er,
    Pr,
    Ki67,
    LymphNodes,
}

/// How a feature slot is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    /// Strictly positive real.
    Positive,
    /// Percentage in `[0, 100]`.
    Percent,
    /// Histological grade in `{1, 2, 3}`.
    Grade,
    /// Node count `{0, 1, 2, 3}` or `-1` for unknown.
    NodeCode,
}

impl Feature {
    pub const ALL: [Feature; NUM_FEATURES] = [
        Feature::Age,
        Feature::TumorSize,
        Feature::P53,
        Feature::SbrGrade,
        Feature::MitoticGrade,
        Feature::Er,
        Feature::Pr,
        Feature::Ki67,
        Feature::LymphNodes,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Feature> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Feature::Age => "age",
            Feature::TumorSize => "tumor_size",
            Feature::P53 => "p53",
            Feature::SbrGrade => "sbr_grade",
            Feature::MitoticGrade => "mitotic_grade",
            Feature::Er => "er",
            Feature::Pr => "pr",
            Feature::Ki67 => "ki67",
            Feature::LymphNodes => "lymph_nodes",
        }
    }

    pub fn kind(self) -> FeatureKind {
        match self {
            Feature::Age | Feature::TumorSize => FeatureKind::Positive,
            Feature::P53 | Feature::Er | Feature::Pr | Feature::Ki67 => FeatureKind::Percent,
            Feature::SbrGrade | Feature::MitoticGrade => FeatureKind::Grade,
            Feature::LymphNodes => FeatureKind::NodeCode,
        }
    }

    /// Checks a single value against the slot's domain. The message is
    /// suitable for surfacing to a user as-is.
    pub fn validate(self, value: f64) -> std::result::Result<(), String> {
        let name = self.name();
        if !value.is_finite() {
            return Err(format!("{name} is not a finite number"));
        }
        match self.kind() {
            FeatureKind::Positive => {
                if value <= 0.0 {
                    return Err(format!("{name} must be positive"));
                }
            }
            FeatureKind::Percent => {
                if !(0.0..=100.0).contains(&value) {
                    return Err(format!("{name} out of range [0,100]"));
                }
            }
            FeatureKind::Grade => {
                if ![1.0, 2.0, 3.0].contains(&value) {
                    return Err(format!("{name} must be one of 1, 2, 3"));
                }
            }
            FeatureKind::NodeCode => {
                if ![LYMPH_NODES_UNKNOWN, 0.0, 1.0, 2.0, 3.0].contains(&value) {
                    return Err(format!("{name} must be one of NA, 0, 1, 2, 3"));
                }
            }
        }
        Ok(())
    }
}

impl std::fmt::Display for Feature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One patient's predictors. Only the lymph-node slot may encode
/// missingness (as [`LYMPH_NODES_UNKNOWN`]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector([f64; NUM_FEATURES]);

impl FeatureVector {
    /// Builds a vector after validating every slot.
    pub fn new(values: [f64; NUM_FEATURES]) -> Result<Self> {
        for feature in Feature::ALL {
            feature
                .validate(values[feature.index()])
                .map_err(|message| Error::InvalidFeature { feature, message })?;
        }
        Ok(FeatureVector(values))
    }

    /// Builds a vector without range checks. Trees treat every slot as an
    /// ordered real, so this is useful for synthetic split-search data.
    pub fn from_raw(values: [f64; NUM_FEATURES]) -> Self {
        FeatureVector(values)
    }

    pub fn values(&self) -> &[f64; NUM_FEATURES] {
        &self.0
    }

    pub fn get(&self, feature: Feature) -> f64 {
        self.0[feature.index()]
    }

    pub fn with(mut self, feature: Feature, value: f64) -> Self {
        self.0[feature.index()] = value;
        self
    }
}

impl std::ops::Index<usize> for FeatureVector {
    type Output = f64;

    fn index(&self, index: usize) -> &f64 {
        &self.0[index]
    }
}

/// A cohort row as it appears in files and neighbor listings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub id: String,
    pub age: f64,
    pub tumor_size: f64,
    pub p53: f64,
    pub sbr_grade: u8,
    pub mitotic_grade: u8,
    pub er: f64,
    pub pr: f64,
    pub ki67: f64,
    /// `None` when the node status is unknown.
    pub lymph_nodes: Option<u8>,
    pub odx_score: Option<f64>,
}

impl PatientRecord {
    pub fn from_features(id: impl Into<String>, x: &FeatureVector, odx_score: Option<f64>) -> Self {
        let nodes = x.get(Feature::LymphNodes);
        PatientRecord {
            id: id.into(),
            age: x.get(Feature::Age),
            tumor_size: x.get(Feature::TumorSize),
            p53: x.get(Feature::P53),
            sbr_grade: x.get(Feature::SbrGrade) as u8,
            mitotic_grade: x.get(Feature::MitoticGrade) as u8,
            er: x.get(Feature::Er),
            pr: x.get(Feature::Pr),
            ki67: x.get(Feature::Ki67),
            lymph_nodes: if nodes < 0.0 { None } else { Some(nodes as u8) },
            odx_score,
        }
    }

    pub fn features(&self) -> Result<FeatureVector> {
        FeatureVector::new([
            self.age,
            self.tumor_size,
            self.p53,
            f64::from(self.sbr_grade),
            f64::from(self.mitotic_grade),
            self.er,
            self.pr,
            self.ki67,
            self.lymph_nodes.map_or(LYMPH_NODES_UNKNOWN, f64::from),
        ])
    }
}

/// Training pairs `(X_i, Y_i)` with opaque row identifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DatasetParts")]
pub struct Dataset {
    features: Vec<FeatureVector>,
    responses: Vec<f64>,
    ids: Vec<String>,
}

#[derive(Deserialize)]
struct DatasetParts {
    features: Vec<FeatureVector>,
    responses: Vec<f64>,
    ids: Vec<String>,
}

impl TryFrom<DatasetParts> for Dataset {
    type Error = Error;

    fn try_from(parts: DatasetParts) -> Result<Dataset> {
        Dataset::new(parts.features, parts.responses, parts.ids)
    }
}

impl Dataset {
    pub fn new(features: Vec<FeatureVector>, responses: Vec<f64>, ids: Vec<String>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if features.len() != responses.len() || features.len() != ids.len() {
            return Err(Error::InvalidDataset(format!(
                "length mismatch: {} feature rows, {} responses, {} ids",
                features.len(),
                responses.len(),
                ids.len()
            )));
        }
        if let Some((row, y)) = responses.iter().enumerate().find(|(_, y)| !(0.0..=100.0).contains(*y)) {
            return Err(Error::InvalidDataset(format!(
                "response {y} at row {row} out of range [0,100]"
            )));
        }
        Ok(Dataset {
            features,
            responses,
            ids,
        })
    }

    /// Dataset with ids `"0"`, `"1"`, ... in row order.
    pub fn with_row_ids(features: Vec<FeatureVector>, responses: Vec<f64>) -> Result<Self> {
        let ids = (0..features.len()).map(|i| i.to_string()).collect();
        Dataset::new(features, responses, ids)
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn features(&self) -> &[FeatureVector] {
        &self.features
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn feature(&self, row: usize, feature: usize) -> f64 {
        self.features[row][feature]
    }

    pub fn record(&self, row: usize) -> PatientRecord {
        PatientRecord::from_features(self.ids[row].clone(), &self.features[row], Some(self.responses[row]))
    }

    /// Rows selected by index, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Result<Dataset> {
        Dataset::new(
            rows.iter().map(|&i| self.features[i]).collect(),
            rows.iter().map(|&i| self.responses[i]).collect(),
            rows.iter().map(|&i| self.ids[i].clone()).collect(),
        )
    }

    /// SHA-256 over ids, feature bits and response bits, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.len() as u64).to_le_bytes());
        for ((x, y), id) in self.features.iter().zip(&self.responses).zip(&self.ids) {
            hasher.update((id.len() as u64).to_le_bytes());
            hasher.update(id.as_bytes());
            for v in x.values() {
                hasher.update(v.to_bits().to_le_bytes());
            }
            hasher.update(y.to_bits().to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }
}
