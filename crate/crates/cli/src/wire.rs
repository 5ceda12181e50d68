//! JSON documents exchanged with clients, and request validation.

use std::collections::BTreeMap;

use distforest::cohort::MIN_ER_PERCENT;
use distforest::distribution::{BinaryProbabilities, ClassProbabilities, Interval, DEFAULT_BINS};
use distforest::neighbors::{neighborhood_profile, top_neighbors, NeighborList, DEFAULT_NEIGHBORS};
use distforest::{
    Feature, FeatureVector, Model, Resampling, RiskClasses, TreeConfig, LYMPH_NODES_UNKNOWN, MODEL_FORMAT,
};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// Schema tag carried by every response document.
pub const WIRE_SCHEMA: &str = "distforest-api/v1";

/// Largest `k` accepted by the neighbors endpoint.
pub const MAX_NEIGHBORS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    fn new(field: &str, message: impl Into<String>) -> Self {
        FieldError {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

/// Why a request body was refused.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RequestError {
    /// Not a JSON object, or fields missing, unknown or of the wrong type.
    Malformed(Vec<FieldError>),
    /// Well-formed, but some value lies outside its domain.
    OutOfRange(Vec<FieldError>),
}

impl RequestError {
    pub fn fields(&self) -> &[FieldError] {
        match self {
            RequestError::Malformed(f) | RequestError::OutOfRange(f) => f,
        }
    }
}

impl std::fmt::Display for RequestError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self {
            RequestError::Malformed(_) => "malformed request",
            RequestError::OutOfRange(_) => "value out of range",
        };
        write!(f, "{kind}")?;
        for e in self.fields() {
            write!(f, "; {}: {}", e.field, e.message)?;
        }
        Ok(())
    }
}

/// A validated patient query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatientQuery {
    pub features: FeatureVector,
    pub k: usize,
}

/// Parses a request body holding the nine features by name, with
/// `lymph_nodes` allowed to be `null` for an unknown status. When
/// `allow_k` is set an optional positive integer `k` is accepted too.
pub fn parse_query(body: &[u8], allow_k: bool) -> Result<PatientQuery, RequestError> {
    let value: Value = serde_json::from_slice(body)
        .map_err(|e| RequestError::Malformed(vec![FieldError::new("body", format!("invalid JSON: {e}"))]))?;
    let Value::Object(object) = value else {
        return Err(RequestError::Malformed(vec![FieldError::new(
            "body",
            "expected a JSON object",
        )]));
    };
    parse_object(&object, allow_k)
}

fn parse_object(object: &Map<String, Value>, allow_k: bool) -> Result<PatientQuery, RequestError> {
    let mut malformed = Vec::new();
    for key in object.keys() {
        let known = Feature::ALL.iter().any(|f| f.name() == key) || (allow_k && key == "k");
        if key == "odx_score" {
            malformed.push(FieldError::new(key, "must not be sent; it is what the model predicts"));
        } else if !known {
            malformed.push(FieldError::new(key, "unknown field"));
        }
    }

    let mut values = [0.0; distforest::NUM_FEATURES];
    for feature in Feature::ALL {
        let name = feature.name();
        match object.get(name) {
            None => malformed.push(FieldError::new(name, "missing")),
            Some(Value::Null) if feature == Feature::LymphNodes => values[feature.index()] = LYMPH_NODES_UNKNOWN,
            Some(v) => match v.as_f64() {
                Some(x) => values[feature.index()] = x,
                None => malformed.push(FieldError::new(name, "expected a number")),
            },
        }
    }

    let mut k = DEFAULT_NEIGHBORS;
    let mut out_of_range = Vec::new();
    if allow_k {
        match object.get("k") {
            None | Some(Value::Null) => {}
            Some(v) => match v.as_u64() {
                Some(0) => out_of_range.push(FieldError::new("k", "must be at least 1")),
                Some(n) if n as usize > MAX_NEIGHBORS => {
                    out_of_range.push(FieldError::new("k", format!("must be at most {MAX_NEIGHBORS}")))
                }
                Some(n) => k = n as usize,
                None if v.is_number() => out_of_range.push(FieldError::new("k", "must be a positive integer")),
                None => malformed.push(FieldError::new("k", "expected an integer")),
            },
        }
    }
    if !malformed.is_empty() {
        return Err(RequestError::Malformed(malformed));
    }

    for feature in Feature::ALL {
        let value = values[feature.index()];
        if let Err(message) = feature.validate(value) {
            out_of_range.push(FieldError::new(feature.name(), message));
        } else if feature == Feature::Er && value < MIN_ER_PERCENT {
            out_of_range.push(FieldError::new(
                feature.name(),
                format!("er below {MIN_ER_PERCENT}%: the model covers ER-positive patients only"),
            ));
        }
    }
    if !out_of_range.is_empty() {
        return Err(RequestError::OutOfRange(out_of_range));
    }
    Ok(PatientQuery {
        features: FeatureVector::from_raw(values),
        k,
    })
}

/// Clinical features of one neighbor; no identifiers beyond the row id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborFeatures {
    pub age: f64,
    pub tumor_size: f64,
    pub p53: f64,
    pub sbr_grade: u8,
    pub mitotic_grade: u8,
    pub er: f64,
    pub pr: f64,
    pub ki67: f64,
    pub lymph_nodes: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireNeighbor {
    pub rank: usize,
    /// Anonymized training-row id, `row-<index>`.
    pub id: String,
    pub weight: f64,
    pub odx_score: f64,
    pub features: NeighborFeatures,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireNeighbors {
    pub k: usize,
    pub entries: Vec<WireNeighbor>,
}

impl WireNeighbors {
    fn from_list(list: &NeighborList) -> Self {
        let entries = list
            .entries
            .iter()
            .enumerate()
            .map(|(rank, n)| {
                let r = &n.record;
                WireNeighbor {
                    rank: rank + 1,
                    id: format!("row-{}", n.row),
                    weight: n.weight,
                    odx_score: r.odx_score.unwrap_or(f64::NAN),
                    features: NeighborFeatures {
                        age: r.age,
                        tumor_size: r.tumor_size,
                        p53: r.p53,
                        sbr_grade: r.sbr_grade,
                        mitotic_grade: r.mitotic_grade,
                        er: r.er,
                        pr: r.pr,
                        ki67: r.ki67,
                        lymph_nodes: r.lymph_nodes,
                    },
                }
            })
            .collect();
        WireNeighbors { k: list.k, entries }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireSummary {
    pub mean: f64,
    pub median: f64,
    pub std_error: f64,
    pub credible_interval_90: Interval,
    pub class_probs: ClassProbabilities,
    pub binary_probs: BinaryProbabilities,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionResponse {
    pub schema_version: String,
    pub model_version: String,
    pub summary: WireSummary,
    /// `[lo, hi, mass]` per bin over `[0, 100]`.
    pub histogram: Vec<[f64; 3]>,
    pub neighbors: WireNeighbors,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborsResponse {
    pub schema_version: String,
    pub model_version: String,
    pub neighbors: WireNeighbors,
    /// Weighted means over the full weight support, by quantity name.
    pub profile: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
}

/// Accepted values for one request field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSchema {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    /// Lower bound is exclusive.
    #[serde(skip_serializing_if = "std::ops::Not::not", default)]
    pub min_exclusive: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub allowed: Option<Vec<Option<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub schema_version: String,
    pub model_version: String,
    pub format: String,
    pub num_trees: usize,
    pub num_rows: usize,
    pub seed: u64,
    pub resampling: Resampling,
    pub tree: TreeConfig,
    pub dataset_fingerprint: String,
    pub classes: RiskClasses,
    pub features: Vec<FieldSchema>,
}

/// Accepted values of every request feature.
pub fn feature_schema() -> Vec<FieldSchema> {
    use distforest::data::FeatureKind;
    Feature::ALL
        .into_iter()
        .map(|f| {
            let base = FieldSchema {
                name: f.name().to_string(),
                min: None,
                max: None,
                min_exclusive: false,
                allowed: None,
            };
            match f.kind() {
                FeatureKind::Positive => FieldSchema {
                    min: Some(0.0),
                    min_exclusive: true,
                    ..base
                },
                FeatureKind::Percent => FieldSchema {
                    min: Some(if f == Feature::Er { MIN_ER_PERCENT } else { 0.0 }),
                    max: Some(100.0),
                    ..base
                },
                FeatureKind::Grade => FieldSchema {
                    allowed: Some(vec![Some(1.0), Some(2.0), Some(3.0)]),
                    ..base
                },
                FeatureKind::NodeCode => FieldSchema {
                    allowed: Some(vec![None, Some(0.0), Some(1.0), Some(2.0), Some(3.0)]),
                    ..base
                },
            }
        })
        .collect()
}

/// A model ready to answer queries, with its version computed once.
#[derive(Debug)]
pub struct ServedModel {
    pub model: Model,
    pub version: String,
}

impl ServedModel {
    pub fn new(model: Model) -> distforest::Result<Self> {
        let version = model.version_id()?;
        Ok(ServedModel { model, version })
    }

    /// Notes on queries the cohort says little about.
    fn warnings(&self, x: &FeatureVector) -> Vec<String> {
        let data = self.model.data();
        let mut out = Vec::new();
        if data.len() < 30 {
            out.push(format!("model was trained on only {} patients", data.len()));
        }
        for feature in [
            Feature::Age,
            Feature::TumorSize,
            Feature::P53,
            Feature::Pr,
            Feature::Ki67,
        ] {
            let column = data.features().iter().map(|r| r.get(feature));
            let lo = column.clone().fold(f64::INFINITY, f64::min);
            let hi = column.fold(f64::NEG_INFINITY, f64::max);
            let v = x.get(feature);
            if v < lo || v > hi {
                out.push(format!("{feature} = {v} lies outside the training range [{lo}, {hi}]"));
            }
        }
        if x.get(Feature::LymphNodes) == LYMPH_NODES_UNKNOWN {
            out.push("lymph node status unknown".to_string());
        }
        out
    }

    pub fn predict(&self, query: &PatientQuery) -> distforest::Result<PredictionResponse> {
        let weights = self.model.weights(&query.features)?;
        let dist = distforest::make_distribution(&weights, self.model.data())?;
        let s = dist.summarize(&RiskClasses::default(), DEFAULT_BINS)?;
        Ok(PredictionResponse {
            schema_version: WIRE_SCHEMA.to_string(),
            model_version: self.version.clone(),
            histogram: s.histogram.iter().map(|b| [b.lo, b.hi, b.mass]).collect(),
            summary: WireSummary {
                mean: s.mean,
                median: s.median,
                std_error: s.std_error,
                credible_interval_90: s.credible_interval_90,
                class_probs: s.class_probs,
                binary_probs: s.binary_probs,
            },
            neighbors: WireNeighbors::from_list(&top_neighbors(&weights, self.model.data(), query.k)),
            warnings: self.warnings(&query.features),
        })
    }

    pub fn neighbors(&self, query: &PatientQuery) -> distforest::Result<NeighborsResponse> {
        let weights = self.model.weights(&query.features)?;
        let data = self.model.data();
        let profile = neighborhood_profile(&weights, data)
            .weighted_means
            .into_iter()
            .map(|(q, v)| (q.name().to_string(), v))
            .collect();
        Ok(NeighborsResponse {
            schema_version: WIRE_SCHEMA.to_string(),
            model_version: self.version.clone(),
            neighbors: WireNeighbors::from_list(&top_neighbors(&weights, data, query.k)),
            profile,
            warnings: self.warnings(&query.features),
        })
    }

    pub fn info(&self) -> ModelInfo {
        let forest = self.model.forest();
        let config = forest.config();
        ModelInfo {
            schema_version: WIRE_SCHEMA.to_string(),
            model_version: self.version.clone(),
            format: MODEL_FORMAT.to_string(),
            num_trees: forest.trees().len(),
            num_rows: forest.num_rows(),
            seed: config.seed,
            resampling: config.resampling,
            tree: config.tree.clone(),
            dataset_fingerprint: forest.dataset_fingerprint().to_string(),
            classes: RiskClasses::default(),
            features: feature_schema(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const VALID: &str = r#"{"age": 55, "tumor_size": 1.5, "p53": 5, "sbr_grade": 2, "mitotic_grade": 2,
        "er": 90, "pr": 50, "ki67": 20, "lymph_nodes": null}"#;

    #[test]
    fn valid_body_parses() {
        let q = parse_query(VALID.as_bytes(), false).unwrap();
        assert_eq!(q.features.get(Feature::Ki67), 20.0);
        assert_eq!(q.features.get(Feature::LymphNodes), LYMPH_NODES_UNKNOWN);
        assert_eq!(q.k, DEFAULT_NEIGHBORS);
    }

    #[test]
    fn malformed_bodies() {
        assert!(matches!(
            parse_query(b"not json", false),
            Err(RequestError::Malformed(_))
        ));
        assert!(matches!(parse_query(b"[1, 2]", false), Err(RequestError::Malformed(_))));
        let missing = VALID.replace(r#""ki67": 20,"#, "");
        let err = parse_query(missing.as_bytes(), false).unwrap_err();
        assert_eq!(err, RequestError::Malformed(vec![FieldError::new("ki67", "missing")]));
        let typed = VALID.replace(r#""p53": 5"#, r#""p53": "five""#);
        let err = parse_query(typed.as_bytes(), false).unwrap_err();
        assert_eq!(err.fields()[0].field, "p53");
        let scored = VALID.replace('}', r#", "odx_score": 20}"#);
        assert!(matches!(
            parse_query(scored.as_bytes(), false),
            Err(RequestError::Malformed(_))
        ));
        let with_k = VALID.replace('}', r#", "k": 3}"#);
        assert!(matches!(
            parse_query(with_k.as_bytes(), false),
            Err(RequestError::Malformed(_))
        ));
    }

    #[test]
    fn out_of_range_values() {
        let body = VALID.replace(r#""ki67": 20"#, r#""ki67": 250"#);
        let err = parse_query(body.as_bytes(), false).unwrap_err();
        assert!(matches!(err, RequestError::OutOfRange(_)));
        assert_eq!(err.fields()[0].field, "ki67");
        let body = VALID.replace(r#""er": 90"#, r#""er": 5"#);
        assert!(matches!(
            parse_query(body.as_bytes(), false),
            Err(RequestError::OutOfRange(_))
        ));
        let body = VALID.replace(r#""sbr_grade": 2"#, r#""sbr_grade": 2.5"#);
        assert!(matches!(
            parse_query(body.as_bytes(), false),
            Err(RequestError::OutOfRange(_))
        ));
    }

    #[test]
    fn neighbor_count() {
        let body = VALID.replace('}', r#", "k": 3}"#);
        assert_eq!(parse_query(body.as_bytes(), true).unwrap().k, 3);
        let body = VALID.replace('}', r#", "k": 0}"#);
        assert!(matches!(
            parse_query(body.as_bytes(), true),
            Err(RequestError::OutOfRange(_))
        ));
        let body = VALID.replace('}', r#", "k": "3"}"#);
        assert!(matches!(
            parse_query(body.as_bytes(), true),
            Err(RequestError::Malformed(_))
        ));
    }

    #[test]
    fn schema_covers_every_feature() {
        let schema = feature_schema();
        assert_eq!(schema.len(), 9);
        assert_eq!(schema[5].min, Some(MIN_ER_PERCENT));
    }
}
