//! Cohort CSV reading and writing.
//!
//! Files are UTF-8, comma separated, with a header row. Columns are matched
//! by name, so their order is free. A blank or `NA` lymph-node cell means
//! unknown status; every other cell must hold a valid value.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Feature, FeatureVector, PatientRecord, LYMPH_NODES_UNKNOWN, NUM_FEATURES};
use crate::error::{Error, Result};

/// Lower bound on ER positivity for cohort rows.
pub const MIN_ER_PERCENT: f64 = 10.0;

/// Column names for each field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortSchema {
    pub id: String,
    /// Column per feature, in [`Feature::ALL`] order.
    pub features: [String; NUM_FEATURES],
    pub odx_score: String,
}

impl Default for CohortSchema {
    fn default() -> Self {
        CohortSchema {
            id: "id".into(),
            features: [
                "age",
                "tumor_size_cm",
                "p53_pct",
                "sbr_grade",
                "mitotic_grade",
                "er_pct",
                "pr_pct",
                "ki67_pct",
                "lymph_nodes",
            ]
            .map(String::from),
            odx_score: "odx_score".into(),
        }
    }
}

impl CohortSchema {
    pub fn column(&self, feature: Feature) -> &str {
        &self.features[feature.index()]
    }

    fn header(&self) -> Vec<&str> {
        std::iter::once(self.id.as_str())
            .chain(self.features.iter().map(String::as_str))
            .chain(std::iter::once(self.odx_score.as_str()))
            .collect()
    }
}

/// A row that failed validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    /// 1-based data row number (the header is not counted).
    pub row: usize,
    pub column: Option<String>,
    pub reason: String,
}

impl std::fmt::Display for Rejection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.column {
            Some(column) => write!(f, "row {} column {}: {}", self.row, column, self.reason),
            None => write!(f, "row {}: {}", self.row, self.reason),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadedCohort {
    pub dataset: Dataset,
    pub rejected: Vec<Rejection>,
}

impl LoadedCohort {
    pub fn rows_read(&self) -> usize {
        self.dataset.len() + self.rejected.len()
    }
}

/// Patients read for prediction; scores may be absent.
#[derive(Debug, Clone)]
pub struct LoadedPatients {
    pub patients: Vec<PatientRecord>,
    pub rejected: Vec<Rejection>,
}

struct Columns {
    id: usize,
    features: [usize; NUM_FEATURES],
    odx: Option<usize>,
}

fn locate(headers: &csv::StringRecord, schema: &CohortSchema, need_odx: bool) -> Result<Columns> {
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let require = |name: &str| find(name).ok_or_else(|| Error::MissingColumn(name.to_string()));
    let mut features = [0; NUM_FEATURES];
    for feature in Feature::ALL {
        features[feature.index()] = require(schema.column(feature))?;
    }
    let odx = if need_odx {
        Some(require(&schema.odx_score)?)
    } else {
        find(&schema.odx_score)
    };
    Ok(Columns {
        id: require(&schema.id)?,
        features,
        odx,
    })
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell.eq_ignore_ascii_case("na")
}

fn parse_row(
    record: &csv::StringRecord,
    columns: &Columns,
    schema: &CohortSchema,
    need_odx: bool,
    row: usize,
) -> std::result::Result<PatientRecord, Rejection> {
    let reject = |column: &str, reason: String| Rejection {
        row,
        column: Some(column.to_string()),
        reason,
    };
    let cell = |index: usize, column: &str| {
        record
            .get(index)
            .map(str::trim)
            .ok_or_else(|| reject(column, "missing field".into()))
    };

    let id = cell(columns.id, &schema.id)?;
    if id.is_empty() {
        return Err(reject(&schema.id, "empty id".into()));
    }

    let mut values = [0.0; NUM_FEATURES];
    for feature in Feature::ALL {
        let column = schema.column(feature);
        let text = cell(columns.features[feature.index()], column)?;
        let value = if feature == Feature::LymphNodes && is_missing(text) {
            LYMPH_NODES_UNKNOWN
        } else if text.is_empty() {
            return Err(reject(column, format!("missing {feature}")));
        } else {
            text.parse::<f64>()
                .map_err(|_| reject(column, format!("non-numeric value `{text}`")))?
        };
        if feature == Feature::LymphNodes && value == LYMPH_NODES_UNKNOWN && !is_missing(text) {
            return Err(reject(column, "unknown node status must be blank or NA".into()));
        }
        feature.validate(value).map_err(|msg| reject(column, msg))?;
        values[feature.index()] = value;
    }
    if values[Feature::Er.index()] < MIN_ER_PERCENT {
        return Err(reject(
            schema.column(Feature::Er),
            format!("er below {MIN_ER_PERCENT} (cohort is ER-positive)"),
        ));
    }

    let odx_score = match columns.odx {
        Some(index) => {
            let text = cell(index, &schema.odx_score)?;
            if text.is_empty() {
                if need_odx {
                    return Err(reject(&schema.odx_score, "missing odx_score".into()));
                }
                None
            } else {
                let score = text
                    .parse::<f64>()
                    .map_err(|_| reject(&schema.odx_score, format!("non-numeric value `{text}`")))?;
                if !(0.0..=100.0).contains(&score) {
                    return Err(reject(&schema.odx_score, "odx_score out of range [0,100]".into()));
                }
                Some(score)
            }
        }
        None => None,
    };

    let x = FeatureVector::new(values).map_err(|e| Rejection {
        row,
        column: None,
        reason: e.to_string(),
    })?;
    Ok(PatientRecord::from_features(id, &x, odx_score))
}

fn read_records<R: Read>(
    reader: R,
    schema: &CohortSchema,
    need_odx: bool,
) -> Result<(Vec<PatientRecord>, Vec<Rejection>)> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let columns = locate(csv.headers()?, schema, need_odx)?;
    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    for (k, record) in csv.records().enumerate() {
        let row = k + 1;
        match record {
            Ok(record) => match parse_row(&record, &columns, schema, need_odx, row) {
                Ok(patient) => accepted.push(patient),
                Err(rejection) => rejected.push(rejection),
            },
            Err(e) => rejected.push(Rejection {
                row,
                column: None,
                reason: e.to_string(),
            }),
        }
    }
    Ok((accepted, rejected))
}

/// Reads a training cohort. Invalid rows are returned as rejections and
/// never enter the dataset; at least one valid row is required.
pub fn read_cohort<R: Read>(reader: R, schema: &CohortSchema) -> Result<LoadedCohort> {
    let (patients, rejected) = read_records(reader, schema, true)?;
    if patients.is_empty() {
        return Err(match rejected.first() {
            Some(first) => Error::InvalidDataset(format!("no valid rows ({first})")),
            None => Error::EmptyDataset,
        });
    }
    let mut features = Vec::with_capacity(patients.len());
    let mut responses = Vec::with_capacity(patients.len());
    let mut ids = Vec::with_capacity(patients.len());
    for p in patients {
        features.push(p.features()?);
        responses.push(p.odx_score.unwrap_or_default());
        ids.push(p.id);
    }
    Ok(LoadedCohort {
        dataset: Dataset::new(features, responses, ids)?,
        rejected,
    })
}

pub fn load_cohort(path: impl AsRef<Path>, schema: &CohortSchema) -> Result<LoadedCohort> {
    read_cohort(std::fs::File::open(path)?, schema)
}

/// Reads patients for prediction; the score column is optional.
pub fn read_patients<R: Read>(reader: R, schema: &CohortSchema) -> Result<LoadedPatients> {
    let (patients, rejected) = read_records(reader, schema, false)?;
    Ok(LoadedPatients { patients, rejected })
}

fn format_value(feature: Feature, value: f64) -> String {
    if feature == Feature::LymphNodes && value == LYMPH_NODES_UNKNOWN {
        "NA".to_string()
    } else {
        value.to_string()
    }
}

/// Writes `data` under `schema`, one row per patient.
pub fn write_cohort<W: Write>(writer: W, data: &Dataset, schema: &CohortSchema) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(schema.header())?;
    for row in 0..data.len() {
        let x = &data.features()[row];
        let mut fields = Vec::with_capacity(NUM_FEATURES + 2);
        fields.push(data.ids()[row].clone());
        fields.extend(Feature::ALL.iter().map(|&f| format_value(f, x.get(f))));
        fields.push(data.responses()[row].to_string());
        csv.write_record(&fields)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn save_cohort(path: impl AsRef<Path>, data: &Dataset, schema: &CohortSchema) -> Result<()> {
    write_cohort(std::io::BufWriter::new(std::fs::File::create(path)?), data, schema)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str =
        "id,age,tumor_size_cm,p53_pct,sbr_grade,mitotic_grade,er_pct,pr_pct,ki67_pct,lymph_nodes,odx_score\n";

    fn load(body: &str) -> Result<LoadedCohort> {
        read_cohort(format!("{HEADER}{body}").as_bytes(), &CohortSchema::default())
    }

    #[test]
    fn parses_valid_row() {
        let cohort = load("P1,63,1.5,8,2,1,95,80,18,1,14\n").unwrap();
        assert!(cohort.rejected.is_empty());
        let record = cohort.dataset.record(0);
        assert_eq!(record.id, "P1");
        assert_eq!(record.age, 63.0);
        assert_eq!(record.tumor_size, 1.5);
        assert_eq!(record.sbr_grade, 2);
        assert_eq!(record.mitotic_grade, 1);
        assert_eq!(record.ki67, 18.0);
        assert_eq!(record.lymph_nodes, Some(1));
        assert_eq!(record.odx_score, Some(14.0));
    }

    #[test]
    fn rejects_out_of_range_ki67() {
        let cohort = load("P1,63,1.5,8,2,1,95,80,18,1,14\nP2,63,1.5,8,2,1,95,80,250,1,14\n").unwrap();
        assert_eq!(cohort.dataset.len(), 1);
        assert_eq!(cohort.rejected.len(), 1);
        let r = &cohort.rejected[0];
        assert_eq!(r.row, 2);
        assert_eq!(r.column.as_deref(), Some("ki67_pct"));
        assert_eq!(r.reason, "ki67 out of range [0,100]");
        assert_eq!(cohort.rows_read(), 2);
    }

    #[test]
    fn blank_or_na_nodes_are_unknown() {
        let cohort = load("A,63,1.5,8,2,1,95,80,18,,14\nB,63,1.5,8,2,1,95,80,18,NA,14\n").unwrap();
        assert!(cohort.rejected.is_empty());
        for row in 0..2 {
            assert_eq!(cohort.dataset.features()[row].get(Feature::LymphNodes), -1.0);
        }
    }

    #[test]
    fn rejection_reasons() {
        let cohort = load(concat!(
            "ok,63,1.5,8,2,1,95,80,18,1,14\n",
            "a,63,abc,8,2,1,95,80,18,1,14\n",
            "b,63,1.5,8,4,1,95,80,18,1,14\n",
            "c,63,1.5,8,2,1,5,80,18,1,14\n",
            "d,63,1.5,8,2,1,95,80,18,-1,14\n",
            "e,63,1.5,8,2,1,95,80,18,1,\n",
            "f,63,1.5,8,2,1,95,80,18,1,120\n",
            "g,63,1.5,8,2,1,95,80,18\n",
            "h,63,1.5,,2,1,95,80,18,1,14\n",
        ))
        .unwrap();
        assert_eq!(cohort.dataset.len(), 1);
        let reasons: Vec<(usize, &str)> = cohort
            .rejected
            .iter()
            .map(|r| (r.row, r.column.as_deref().unwrap_or("")))
            .collect();
        assert_eq!(
            reasons,
            vec![
                (2, "tumor_size_cm"),
                (3, "sbr_grade"),
                (4, "er_pct"),
                (5, "lymph_nodes"),
                (6, "odx_score"),
                (7, "odx_score"),
                (8, "lymph_nodes"),
                (9, "p53_pct"),
            ]
        );
        assert!(cohort.rejected[0].reason.contains("non-numeric"));
    }

    #[test]
    fn missing_column_is_an_error() {
        let err = read_cohort("id,age\nP1,63\n".as_bytes(), &CohortSchema::default()).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(ref c) if c == "tumor_size_cm"));
    }

    #[test]
    fn all_rows_rejected_is_an_error() {
        assert!(load("P2,63,1.5,8,2,1,95,80,250,1,14\n").is_err());
        assert!(matches!(load(""), Err(Error::EmptyDataset)));
    }

    #[test]
    fn columns_matched_by_name() {
        let text =
            "odx_score,id,lymph_nodes,age,tumor_size_cm,p53_pct,sbr_grade,mitotic_grade,er_pct,pr_pct,ki67_pct\n\
                    14,P1,1,63,1.5,8,2,1,95,80,18\n";
        let cohort = read_cohort(text.as_bytes(), &CohortSchema::default()).unwrap();
        assert_eq!(cohort.dataset.record(0).ki67, 18.0);
        assert_eq!(cohort.dataset.responses(), &[14.0]);
    }

    #[test]
    fn prediction_rows_may_omit_score() {
        let text = "id,age,tumor_size_cm,p53_pct,sbr_grade,mitotic_grade,er_pct,pr_pct,ki67_pct,lymph_nodes\n\
                    Q,63,1.5,8,2,1,95,80,18,NA\n";
        let loaded = read_patients(text.as_bytes(), &CohortSchema::default()).unwrap();
        assert_eq!(loaded.patients[0].odx_score, None);
        assert_eq!(loaded.patients[0].lymph_nodes, None);
    }

    #[test]
    fn write_then_read_round_trips() {
        let cohort = load("P1,63,1.5,8,2,1,95,80,18,,14\nP2,41.25,0.8,30,3,3,60,0,45.5,3,37\n").unwrap();
        let mut buffer = Vec::new();
        write_cohort(&mut buffer, &cohort.dataset, &CohortSchema::default()).unwrap();
        assert!(String::from_utf8_lossy(&buffer).contains(",NA,"));
        let again = read_cohort(buffer.as_slice(), &CohortSchema::default()).unwrap();
        assert_eq!(again.dataset, cohort.dataset);
    }
}
