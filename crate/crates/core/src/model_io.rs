//! Self-contained model files.
//!
//! A model file is one JSON document holding the format tag, the forest and
//! the training cohort it was fit on, so predictions need nothing else.
//! Serialization is deterministic: the same forest and cohort always give
//! the same bytes, and floats round-trip exactly.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{Dataset, FeatureVector};
use crate::distribution::{make_distribution, PredictiveDistribution};
use crate::error::{Error, Result};
use crate::forest::{Forest, ForestConfig, WeightMode, WeightVector};
use crate::tree::Tree;

/// Format tag written into every model file.
pub const MODEL_FORMAT: &str = "distforest-model/v1";

/// A forest together with its training cohort.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    forest: Forest,
    data: Dataset,
}

impl Model {
    /// Pairs a forest with the cohort it was fit on.
    pub fn new(forest: Forest, data: Dataset) -> Result<Model> {
        if forest.num_rows() != data.len() || forest.dataset_fingerprint() != data.fingerprint() {
            return Err(Error::CorruptModel(
                "training cohort does not match the forest's fingerprint".into(),
            ));
        }
        Ok(Model { forest, data })
    }

    pub fn forest(&self) -> &Forest {
        &self.forest
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn weights(&self, x: &FeatureVector) -> Result<WeightVector> {
        self.forest.weights(&self.data, x, WeightMode::AllTrees)
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<PredictiveDistribution> {
        make_distribution(&self.weights(x)?, &self.data)
    }

    /// Short content hash of the serialized model. Two models share a
    /// version only if their files are byte-identical.
    pub fn version_id(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_json()?.as_bytes());
        Ok(hex::encode(&digest[..8]))
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFileRef {
            format: MODEL_FORMAT,
            config: self.forest.config(),
            dataset_fingerprint: self.forest.dataset_fingerprint(),
            num_rows: self.forest.num_rows(),
            data: &self.data,
            trees: self.forest.trees(),
        };
        serde_json::to_string(&file).map_err(|e| Error::CorruptModel(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Model> {
        #[derive(Deserialize)]
        struct Probe {
            format: Option<String>,
        }
        // look at the tag first so a newer layout reports a version problem
        // rather than a parse error
        if let Ok(Probe { format: Some(found) }) = serde_json::from_str::<Probe>(text) {
            if found != MODEL_FORMAT {
                return Err(Error::VersionMismatch {
                    found,
                    expected: MODEL_FORMAT.to_string(),
                });
            }
        }
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::CorruptModel(e.to_string()))?;
        if file.format != MODEL_FORMAT {
            return Err(Error::VersionMismatch {
                found: file.format,
                expected: MODEL_FORMAT.to_string(),
            });
        }
        let forest = Forest::from_parts(file.trees, file.config, file.dataset_fingerprint, file.num_rows)
            .map_err(|e| Error::CorruptModel(e.to_string()))?;
        Model::new(forest, file.data)
    }
}

#[derive(Serialize)]
struct ModelFileRef<'a> {
    format: &'a str,
    config: &'a ForestConfig,
    dataset_fingerprint: &'a str,
    num_rows: usize,
    data: &'a Dataset,
    trees: &'a [Tree],
}

#[derive(Deserialize)]
struct ModelFile {
    format: String,
    config: ForestConfig,
    dataset_fingerprint: String,
    num_rows: usize,
    data: Dataset,
    trees: Vec<Tree>,
}

/// Writes the model to `path`, going through a temporary file in the same
/// directory so a crash never leaves a half-written model behind.
pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let json = model.to_json()?;
    let tmp = path.with_extension("tmp");
    {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(json.as_bytes())?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    Model::from_json(&fs::read_to_string(path)?)
}
