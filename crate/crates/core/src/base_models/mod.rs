//! Base recommenders that accept per-user training weights.

mod codec;
mod dae;
mod ease;

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use dae::{train_dae, train_dae_traced, DaeGradient, DaeModel, TrainConfig, LOG_EPS};
pub use ease::{train_ease, EaseModel};

use crate::dataset::RatingMatrix;
use crate::error::{LocaError, Result};
use codec::{Reader, Writer, MAGIC};

const KIND_EASE: u8 = 1;
const KIND_DAE: u8 = 2;

/// Which base model family a run uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseModelKind {
    Ease,
    Dae,
}

impl fmt::Display for BaseModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaseModelKind::Ease => "ease",
            BaseModelKind::Dae => "dae",
        })
    }
}

impl FromStr for BaseModelKind {
    type Err = LocaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ease" => Ok(BaseModelKind::Ease),
            "dae" => Ok(BaseModelKind::Dae),
            other => Err(LocaError::Config(format!("unknown base model `{other}`"))),
        }
    }
}

/// Hyperparameters for one base model family.
#[derive(Clone, Debug, PartialEq)]
pub enum BaseModelConfig {
    Ease { lambda: f64 },
    Dae { hidden: usize, train: TrainConfig },
}

impl BaseModelConfig {
    pub fn kind(&self) -> BaseModelKind {
        match self {
            BaseModelConfig::Ease { .. } => BaseModelKind::Ease,
            BaseModelConfig::Dae { .. } => BaseModelKind::Dae,
        }
    }

    /// Trains one model with the given per-user weights.
    pub fn fit(&self, train: &RatingMatrix, row_weights: &[f64], seed: u64) -> Result<BaseModel> {
        match self {
            BaseModelConfig::Ease { lambda } => train_ease(train, row_weights, *lambda).map(BaseModel::Ease),
            BaseModelConfig::Dae { hidden, train: cfg } => {
                train_dae(train, row_weights, *hidden, cfg, seed).map(BaseModel::Dae)
            }
        }
    }
}

/// A trained base model of either family.
#[derive(Clone, Debug, PartialEq)]
pub enum BaseModel {
    Ease(EaseModel),
    Dae(DaeModel),
}

impl BaseModel {
    pub fn kind(&self) -> BaseModelKind {
        match self {
            BaseModel::Ease(_) => BaseModelKind::Ease,
            BaseModel::Dae(_) => BaseModelKind::Dae,
        }
    }

    pub fn n_items(&self) -> usize {
        match self {
            BaseModel::Ease(m) => m.n_items(),
            BaseModel::Dae(m) => m.n_items(),
        }
    }

    /// Item scores for a user given their positive items.
    pub fn score(&self, row: &[usize]) -> Vec<f64> {
        match self {
            BaseModel::Ease(m) => m.score(row),
            BaseModel::Dae(m) => m.score(row),
        }
    }

    /// Binary container: magic tag, kind byte, then the model's fields.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.buf.extend_from_slice(MAGIC);
        match self {
            BaseModel::Ease(m) => {
                w.u8(KIND_EASE);
                m.encode(&mut w);
            }
            BaseModel::Dae(m) => {
                w.u8(KIND_DAE);
                m.encode(&mut w);
            }
        }
        w.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if r.bytes(MAGIC.len())? != MAGIC {
            return Err(LocaError::Domain("not a model file (bad magic)".into()));
        }
        let model = match r.u8()? {
            KIND_EASE => BaseModel::Ease(EaseModel::decode(&mut r)?),
            KIND_DAE => BaseModel::Dae(DaeModel::decode(&mut r)?),
            other => return Err(LocaError::Domain(format!("unknown model kind {other}"))),
        };
        if !r.is_empty() {
            return Err(LocaError::Domain("trailing bytes after model".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| LocaError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| LocaError::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| LocaError::artifact(path, e.to_string()))
    }
}
