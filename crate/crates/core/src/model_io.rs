//! Versioned on-disk container for trained models.
//!
//! A model file is self-contained: it carries the model kind, the full
//! parameter tables in plain decimal text (JSON), the featurization
//! statistics fitted on the training set, the training configuration, and a
//! fingerprint of the training data. Loading checks the format version and
//! rejects anything it cannot reproduce labels from.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::crf::CrfModel;
use crate::episode::{write_episodes_to, AnomalyClass, Episode, Observation};
use crate::error::{Error, Result};
use crate::featurize::FeaturizerStats;
use crate::hmm::HmmBank;
use crate::lstm::LstmModel;
use crate::pipeline::Labeler;

/// Format version written by [`save_model`].
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Parameters of one trained method, tagged by kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum TrainedModel {
    #[serde(rename = "hmm")]
    Hmm(HmmBank),
    #[serde(rename = "crf")]
    Crf(CrfModel),
    #[serde(rename = "lstm")]
    Lstm(LstmModel),
}

impl TrainedModel {
    pub fn kind_name(&self) -> &'static str {
        match self {
            TrainedModel::Hmm(_) => "hmm",
            TrainedModel::Crf(_) => "crf",
            TrainedModel::Lstm(_) => "lstm",
        }
    }

    pub fn stats(&self) -> &FeaturizerStats {
        match self {
            TrainedModel::Hmm(m) => &m.stats,
            TrainedModel::Crf(m) => &m.stats,
            TrainedModel::Lstm(m) => &m.stats,
        }
    }
}

impl Labeler for TrainedModel {
    fn label_sequence(&self, obs: &[Observation]) -> Result<Vec<AnomalyClass>> {
        match self {
            TrainedModel::Hmm(m) => m.label_sequence(obs),
            TrainedModel::Crf(m) => m.label_sequence(obs),
            TrainedModel::Lstm(m) => m.label_sequence(obs),
        }
    }
}

/// The on-disk envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    /// Training flags as key/value pairs (method-specific).
    pub train_config: BTreeMap<String, String>,
    /// Hex SHA-256 over the serialized training episodes.
    pub dataset_fingerprint: String,
    pub model: TrainedModel,
}

/// Hex SHA-256 over the canonical line-delimited serialization of the
/// episodes.
pub fn dataset_fingerprint(episodes: &[Episode]) -> String {
    let mut buf = Vec::new();
    write_episodes_to(episodes, &mut buf).expect("valid episodes serialize");
    let digest = Sha256::digest(&buf);
    let mut hex = String::with_capacity(64);
    for b in digest {
        hex.push_str(&format!("{b:02x}"));
    }
    hex
}

pub fn save_model<P: AsRef<Path>>(model: &ModelFile, path: P) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, model)
        .map_err(|e| Error::CorruptModel(format!("serialize failed: {e}")))?;
    use std::io::Write;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(())
}

pub fn load_model<P: AsRef<Path>>(path: P) -> Result<ModelFile> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let model: ModelFile = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::CorruptModel(format!("{}: {e}", path.display())))?;
    if model.version != MODEL_FORMAT_VERSION {
        return Err(Error::Version {
            found: model.version,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    Ok(model)
}
