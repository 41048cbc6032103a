//! Run configuration: a sectioned TOML file plus `key=value` overrides.
//!
//! ```toml
//! seed = 0
//! jobs = 1
//! out = "runs/default"
//!
//! [data]
//! path = "ratings.csv"        # or set `synthetic = true`
//! delimiter = ","
//! header = false
//! columns = "user,item,rating,ts"
//! min_user_interactions = 10
//! positive_threshold = "all"  # or a number such as 4.0
//!
//! [split]
//! k = 5
//!
//! [loca]
//! q = 50
//! alpha = 0.0
//! base_model = "ease"         # or "dae"
//! anchor_strategy = "coverage"
//! embedding_method = "auto"   # "truncated-svd" | "dae-hidden"
//! embedding_dim = 0           # 0 picks a default
//!
//! [kernel]
//! h_T = 1.0
//! h_W = 0.4
//! scale_distance = false
//!
//! [ease]
//! lambda = 100.0
//!
//! [dae]
//! hidden = 200
//! learning_rate = 0.01
//! # ... every optimizer field of `TrainConfig`
//!
//! [global]                    # optional overrides for the global model
//! lambda = 500.0
//!
//! [eval]
//! n_values = [50, 100]
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::anchors::AnchorStrategy;
use crate::base_models::{BaseModelKind, TrainConfig};
use crate::dataset::{PositiveThreshold, Schema};
use crate::ensemble::{BaseSpec, LocaConfig};
use crate::error::{LocaError, Result};
use crate::neighborhood::{EmbeddingMethod, KernelConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub jobs: usize,
    pub out: PathBuf,
    pub data: DataSection,
    pub split: SplitSection,
    pub loca: LocaSection,
    pub kernel: KernelSection,
    pub ease: EaseSection,
    pub dae: DaeSection,
    pub global: GlobalSection,
    pub eval: EvalSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            jobs: 1,
            out: PathBuf::from("runs/default"),
            data: DataSection::default(),
            split: SplitSection::default(),
            loca: LocaSection::default(),
            kernel: KernelSection::default(),
            ease: EaseSection::default(),
            dae: DaeSection::default(),
            global: GlobalSection::default(),
            eval: EvalSection::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThresholdSetting {
    Keyword(String),
    Value(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub path: String,
    /// Generate the planted-block corpus instead of reading `path`.
    pub synthetic: bool,
    pub delimiter: String,
    pub header: bool,
    pub columns: String,
    pub min_user_interactions: usize,
    pub positive_threshold: ThresholdSetting,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            path: String::new(),
            synthetic: false,
            delimiter: ",".into(),
            header: false,
            columns: "user,item,rating,ts".into(),
            min_user_interactions: 10,
            positive_threshold: ThresholdSetting::Keyword("all".into()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSection {
    pub k: usize,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection { k: 5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LocaSection {
    pub q: usize,
    pub alpha: f64,
    pub base_model: BaseModelKind,
    pub anchor_strategy: AnchorStrategy,
    /// `auto`, `truncated-svd` or `dae-hidden`.
    pub embedding_method: String,
    /// 0 selects the default dimension.
    pub embedding_dim: usize,
}

impl Default for LocaSection {
    fn default() -> Self {
        LocaSection {
            q: 50,
            alpha: 0.0,
            base_model: BaseModelKind::Ease,
            anchor_strategy: AnchorStrategy::Coverage,
            embedding_method: "auto".into(),
            embedding_dim: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelSection {
    #[serde(rename = "h_T")]
    pub h_train: f64,
    #[serde(rename = "h_W")]
    pub h_infer: f64,
    pub scale_distance: bool,
}

impl Default for KernelSection {
    fn default() -> Self {
        let k = KernelConfig::default();
        KernelSection {
            h_train: k.h_train,
            h_infer: k.h_infer,
            scale_distance: k.scale_distance,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EaseSection {
    pub lambda: f64,
}

impl Default for EaseSection {
    fn default() -> Self {
        EaseSection { lambda: 100.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DaeSection {
    pub hidden: usize,
    #[serde(flatten)]
    pub train: TrainConfig,
}

impl Default for DaeSection {
    fn default() -> Self {
        DaeSection {
            hidden: 200,
            train: TrainConfig::default(),
        }
    }
}

/// Global-model settings that differ from the local models'.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GlobalSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dropout: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_epochs: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub n_values: Vec<usize>,
    /// Train-row sizes separating the activity buckets.
    pub activity_edges: Vec<usize>,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            n_values: vec![50, 100],
            activity_edges: vec![20, 50, 100, 200],
        }
    }
}

impl RunConfig {
    /// Checks cross-field constraints, naming the offending keys.
    pub fn validate(&self) -> Result<()> {
        let err = |msg: String| Err(LocaError::Config(msg));
        let k = &self.kernel;
        if !(k.h_infer > 0.0) {
            return err(format!("kernel.h_W must be positive, got {}", k.h_infer));
        }
        if k.h_infer > k.h_train {
            return err(format!(
                "kernel.h_W ({}) must not exceed kernel.h_T ({})",
                k.h_infer, k.h_train
            ));
        }
        if !(0.0..=1.0).contains(&self.loca.alpha) {
            return err(format!("loca.alpha must lie in [0, 1], got {}", self.loca.alpha));
        }
        if self.jobs == 0 {
            return err("jobs must be at least 1".into());
        }
        if self.data.min_user_interactions == 0 {
            return err("data.min_user_interactions must be at least 1".into());
        }
        if self.data.delimiter.chars().count() != 1 {
            return err(format!(
                "data.delimiter must be one character, got `{}`",
                self.data.delimiter
            ));
        }
        if self.eval.n_values.is_empty() || self.eval.n_values.contains(&0) {
            return err("eval.n_values must list positive cutoffs".into());
        }
        if self.eval.activity_edges.windows(2).any(|w| w[0] >= w[1]) {
            return err("eval.activity_edges must be strictly increasing".into());
        }
        if !(self.ease.lambda > 0.0) {
            return err(format!("ease.lambda must be positive, got {}", self.ease.lambda));
        }
        if self.dae.hidden == 0 {
            return err("dae.hidden must be at least 1".into());
        }
        self.dae
            .train
            .validate()
            .map_err(|e| LocaError::Config(format!("[dae] {e}")))?;
        self.schema()?;
        self.positive_threshold()?;
        self.loca_config()?.validate()
    }

    pub fn schema(&self) -> Result<Schema> {
        let delimiter = self.data.delimiter.chars().next().unwrap_or(',');
        Schema::parse(&self.data.columns, delimiter, self.data.header)
            .map_err(|e| LocaError::Config(format!("data.columns: {e}")))
    }

    pub fn positive_threshold(&self) -> Result<PositiveThreshold> {
        match &self.data.positive_threshold {
            ThresholdSetting::Keyword(k) if k == "all" => Ok(PositiveThreshold::All),
            ThresholdSetting::Keyword(k) => Err(LocaError::Config(format!(
                "data.positive_threshold must be \"all\" or a number, got `{k}`"
            ))),
            ThresholdSetting::Value(v) => Ok(PositiveThreshold::AtLeast(*v)),
        }
    }

    fn embedding_method(&self) -> Result<Option<EmbeddingMethod>> {
        match self.loca.embedding_method.as_str() {
            "auto" => Ok(None),
            other => other
                .parse()
                .map(Some)
                .map_err(|e| LocaError::Config(format!("loca.embedding_method: {e}"))),
        }
    }

    /// Base model settings shared by all local models.
    pub fn base_spec(&self) -> BaseSpec {
        match self.loca.base_model {
            BaseModelKind::Ease => BaseSpec::Ease {
                lambda: self.ease.lambda,
            },
            BaseModelKind::Dae => BaseSpec::Dae {
                hidden: self.dae.hidden,
                train: self.dae.train.clone(),
            },
        }
    }

    fn global_spec(&self) -> Option<BaseSpec> {
        let g = &self.global;
        if *g == GlobalSection::default() {
            return None;
        }
        Some(match self.base_spec() {
            BaseSpec::Ease { lambda } => BaseSpec::Ease {
                lambda: g.lambda.unwrap_or(lambda),
            },
            BaseSpec::Dae { hidden, mut train } => {
                train.learning_rate = g.learning_rate.unwrap_or(train.learning_rate);
                train.l2 = g.l2.unwrap_or(train.l2);
                train.dropout = g.dropout.unwrap_or(train.dropout);
                train.max_epochs = g.max_epochs.unwrap_or(train.max_epochs);
                BaseSpec::Dae {
                    hidden: g.hidden.unwrap_or(hidden),
                    train,
                }
            }
        })
    }

    pub fn loca_config(&self) -> Result<LocaConfig> {
        Ok(LocaConfig {
            q: self.loca.q,
            kernel: KernelConfig {
                h_train: self.kernel.h_train,
                h_infer: self.kernel.h_infer,
                scale_distance: self.kernel.scale_distance,
            },
            alpha: self.loca.alpha,
            base: self.base_spec(),
            global: self.global_spec(),
            anchor_strategy: self.loca.anchor_strategy,
            embedding_method: self.embedding_method()?,
            embedding_dim: (self.loca.embedding_dim > 0).then_some(self.loca.embedding_dim),
            seed: self.seed,
            jobs: self.jobs,
        })
    }

    /// Fully resolved configuration as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }
}

fn parse_override_value(raw: &str) -> toml::Value {
    let raw = raw.trim();
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts
        .pop()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| LocaError::Config(format!("override key `{key}` is empty")))?;
    let mut cursor = table;
    for part in parts {
        let entry = cursor
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cursor = entry
            .as_table_mut()
            .ok_or_else(|| LocaError::Config(format!("override key `{key}`: `{part}` is not a section")))?;
    }
    cursor.insert(last.to_string(), value);
    Ok(())
}

/// Parses TOML text, applies `key=value` overrides and validates the result.
pub fn parse_config_str(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut table: toml::Table = toml::from_str(text).map_err(|e| LocaError::Config(e.to_string()))?;
    for item in overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| LocaError::Config(format!("override `{item}` is not key=value")))?;
        set_path(&mut table, key.trim(), parse_override_value(value))?;
    }
    let config: RunConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| LocaError::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

/// Reads the configuration file (absent path means all defaults) and applies
/// overrides.
pub fn parse_config(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
    let text = match path {
        Some(p) => fs::read_to_string(p).map_err(|e| LocaError::io(p, e))?,
        None => String::new(),
    };
    parse_config_str(&text, overrides)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(parse_config_str("", &[]).unwrap(), RunConfig::default());
    }

    #[test]
    fn override_beats_file() {
        let cfg = parse_config_str("[loca]\nq = 50\n", &["loca.q=100".into()]).unwrap();
        assert_eq!(cfg.loca.q, 100);
    }

    #[test]
    fn bandwidth_constraint_names_both_keys() {
        let err = parse_config_str("[kernel]\nh_T = 0.8\n", &["kernel.h_W=0.9".into()]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("kernel.h_W") && msg.contains("kernel.h_T"), "{msg}");
    }

    #[test]
    fn unknown_key_rejected() {
        let err = parse_config_str("[loca]\nqq = 3\n", &[]).unwrap_err();
        assert!(err.to_string().contains("qq"), "{err}");
        let err = parse_config_str("", &["bogus.key=1".into()]).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn type_mismatch_rejected() {
        let err = parse_config_str("", &["loca.q=many".into()]).unwrap_err();
        assert!(matches!(err, LocaError::Config(_)), "{err}");
    }

    #[test]
    fn string_and_list_overrides() {
        let cfg = parse_config_str(
            "",
            &[
                "loca.base_model=dae".into(),
                "eval.n_values=[10, 20]".into(),
                "data.positive_threshold=4".into(),
                "global.hidden=16".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.loca.base_model, BaseModelKind::Dae);
        assert_eq!(cfg.eval.n_values, vec![10, 20]);
        assert_eq!(cfg.positive_threshold().unwrap(), PositiveThreshold::AtLeast(4.0));
        match cfg.loca_config().unwrap().global {
            Some(BaseSpec::Dae { hidden, .. }) => assert_eq!(hidden, 16),
            other => panic!("unexpected global spec {other:?}"),
        }
    }

    #[test]
    fn resolved_config_round_trips() {
        let cfg = parse_config_str("seed = 9\n[dae]\nlearning_rate = 0.1\n", &[]).unwrap();
        assert_eq!(parse_config_str(&cfg.to_toml(), &[]).unwrap(), cfg);
    }
}
