//! The full pipeline: embeddings, anchors, weight pairs, weighted local
//! training, global training and kernel-weighted aggregation.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anchors::{covered_fraction, select_anchors, AnchorSet, AnchorStrategy, CoverageGraph};
use crate::base_models::{BaseModel, BaseModelConfig, BaseModelKind, TrainConfig};
use crate::dataset::{RatingMatrix, SplitDataset};
use crate::error::{LocaError, Result};
use crate::eval::{top_n, Recommender};
use crate::neighborhood::{build_weight_pair, EmbeddingMatrix, EmbeddingMethod, KernelConfig, WeightPair};

/// Largest truncated-SVD embedding used when no dimension is configured.
pub const DEFAULT_SVD_DIM: usize = 64;

/// Serializable hyperparameters of a base model family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BaseSpec {
    Ease { lambda: f64 },
    Dae { hidden: usize, train: TrainConfig },
}

impl BaseSpec {
    pub fn kind(&self) -> BaseModelKind {
        self.to_config().kind()
    }

    pub fn to_config(&self) -> BaseModelConfig {
        match self {
            BaseSpec::Ease { lambda } => BaseModelConfig::Ease { lambda: *lambda },
            BaseSpec::Dae { hidden, train } => BaseModelConfig::Dae {
                hidden: *hidden,
                train: train.clone(),
            },
        }
    }
}

/// Configuration of one LOCA model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocaConfig {
    /// Number of local models; 0 yields the plain global model.
    pub q: usize,
    pub kernel: KernelConfig,
    /// Weight of the global model for covered users.
    pub alpha: f64,
    pub base: BaseSpec,
    /// Global-model hyperparameters when they differ from the locals'.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub global: Option<BaseSpec>,
    pub anchor_strategy: AnchorStrategy,
    /// Defaults to DAE hidden activations for DAE runs and truncated SVD otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding_method: Option<EmbeddingMethod>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding_dim: Option<usize>,
    pub seed: u64,
    /// Worker threads for local training. Not part of the persisted model.
    #[serde(skip, default = "one")]
    pub jobs: usize,
}

fn one() -> usize {
    1
}

impl Default for LocaConfig {
    fn default() -> Self {
        LocaConfig {
            q: 50,
            kernel: KernelConfig::default(),
            alpha: 0.0,
            base: BaseSpec::Ease { lambda: 100.0 },
            global: None,
            anchor_strategy: AnchorStrategy::Coverage,
            embedding_method: None,
            embedding_dim: None,
            seed: 0,
            jobs: 1,
        }
    }
}

impl LocaConfig {
    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(LocaError::Config(format!("alpha {} is outside [0, 1]", self.alpha)));
        }
        if self.jobs == 0 {
            return Err(LocaError::Config("jobs must be at least 1".into()));
        }
        if self.seed > i64::MAX as u64 {
            return Err(LocaError::Config(format!("seed {} exceeds {}", self.seed, i64::MAX)));
        }
        if let Some(global) = &self.global {
            if global.kind() != self.base.kind() {
                return Err(LocaError::Config(
                    "global and local models must use the same base model family".into(),
                ));
            }
        }
        for spec in std::iter::once(&self.base).chain(&self.global) {
            match spec {
                BaseSpec::Ease { lambda } if !(*lambda > 0.0) => {
                    return Err(LocaError::Config("EASE lambda must be positive".into()))
                }
                BaseSpec::Dae { hidden, train } => {
                    if *hidden == 0 {
                        return Err(LocaError::Config("DAE hidden size must be at least 1".into()));
                    }
                    train.validate()?;
                }
                _ => {}
            }
        }
        if self.embedding_method() == EmbeddingMethod::DaeHidden && self.base.kind() != BaseModelKind::Dae {
            return Err(LocaError::Config("dae-hidden embeddings need base model `dae`".into()));
        }
        Ok(())
    }

    pub fn embedding_method(&self) -> EmbeddingMethod {
        self.embedding_method.unwrap_or(match self.base.kind() {
            BaseModelKind::Dae => EmbeddingMethod::DaeHidden,
            BaseModelKind::Ease => EmbeddingMethod::TruncatedSvd,
        })
    }

    fn global_spec(&self) -> &BaseSpec {
        self.global.as_ref().unwrap_or(&self.base)
    }
}

/// Kernel-weighted mix of local scores with the global scores.
///
/// With `S = Σ_j w_j > 0` returns `α·global + (1−α)·Σ_j w_j·local_j / S`;
/// with no positive weight returns `global` unchanged. `global` is ignored
/// when `α = 0` and some weight is positive.
pub fn aggregate(alpha: f64, global: &[f64], locals: &[(f64, Vec<f64>)]) -> Vec<f64> {
    let total: f64 = locals.iter().map(|(w, _)| w).filter(|&&w| w > 0.0).sum();
    if total <= 0.0 {
        return global.to_vec();
    }
    let n = locals[0].1.len();
    let mut mixed = vec![0.0; n];
    for (w, scores) in locals.iter().filter(|(w, _)| *w > 0.0) {
        mixed.iter_mut().zip(scores).for_each(|(acc, x)| *acc += w * x);
    }
    mixed.iter_mut().for_each(|x| *x /= total);
    if alpha == 0.0 {
        return mixed;
    }
    global
        .iter()
        .zip(mixed)
        .map(|(g, l)| alpha * g + (1.0 - alpha) * l)
        .collect()
}

/// RNG seed for the `j`-th local model.
pub fn local_seed(seed: u64, j: usize) -> u64 {
    seed.wrapping_mul(1_000_003).wrapping_add(j as u64)
}

/// One trained local model with the weights it was trained and aggregated with.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalModelEntry {
    pub anchor: usize,
    pub weights: WeightPair,
    pub model: BaseModel,
}

/// A global model plus `q` anchored local models.
#[derive(Clone, Debug, PartialEq)]
pub struct LocaModel {
    pub global: BaseModel,
    pub locals: Vec<LocalModelEntry>,
    pub config: LocaConfig,
    pub anchor_strategy: AnchorStrategy,
    n_users: usize,
}

/// Trains the global model, discovers communities and trains the local models.
pub fn train_loca(split: &SplitDataset, config: &LocaConfig) -> Result<LocaModel> {
    config.validate()?;
    let train = &split.train;
    let m = train.n_users();
    if m == 0 || train.nnz() == 0 {
        return Err(LocaError::EmptyDataset("training matrix has no interactions".into()));
    }
    if config.q > m {
        return Err(LocaError::Config(format!("q = {} exceeds the {m} users", config.q)));
    }

    let global = config
        .global_spec()
        .to_config()
        .fit(train, &vec![1.0; m], config.seed)?;
    if config.q == 0 {
        return Ok(LocaModel {
            global,
            locals: Vec::new(),
            config: config.clone(),
            anchor_strategy: config.anchor_strategy,
            n_users: m,
        });
    }

    let embeddings = community_embeddings(train, config, &global)?;
    let pool = worker_pool(config.jobs)?;
    let anchors = pool.install(|| {
        let graph = match config.anchor_strategy {
            AnchorStrategy::Coverage | AnchorStrategy::Farthest => CoverageGraph::build(&embeddings, &config.kernel)?,
            // the graph is unused by these strategies
            AnchorStrategy::Random | AnchorStrategy::Kmeans => CoverageGraph::from_adjacency(vec![Vec::new(); m])?,
        };
        select_anchors(&graph, &embeddings, config.q, config.anchor_strategy, config.seed)
    })?;
    let weights = pool.install(|| {
        anchors
            .anchors
            .par_iter()
            .map(|&a| build_weight_pair(&embeddings, a, &config.kernel))
            .collect::<Result<Vec<_>>>()
    })?;
    fit_with_communities(train, config, global, anchors, weights)
}

/// Embeddings used for anchor selection and weighting.
pub fn community_embeddings(train: &RatingMatrix, config: &LocaConfig, global: &BaseModel) -> Result<EmbeddingMatrix> {
    match (config.embedding_method(), global) {
        (EmbeddingMethod::TruncatedSvd, _) => {
            let d = config
                .embedding_dim
                .unwrap_or_else(|| DEFAULT_SVD_DIM.min(train.n_users()).min(train.n_items()));
            EmbeddingMatrix::truncated_svd(train, d)
        }
        (EmbeddingMethod::DaeHidden, BaseModel::Dae(dae)) => {
            let d = config.embedding_dim.unwrap_or(dae.hidden_dim());
            EmbeddingMatrix::dae_hidden(train, dae, d)
        }
        (EmbeddingMethod::DaeHidden, BaseModel::Ease(_)) => Err(LocaError::Config(
            "dae-hidden embeddings need a DAE global model".into(),
        )),
    }
}

fn worker_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| LocaError::Config(format!("cannot start {jobs} workers: {e}")))
}

/// Trains one local model per weight pair (in parallel up to `config.jobs`)
/// around an already trained global model.
pub fn fit_with_communities(
    train: &RatingMatrix,
    config: &LocaConfig,
    global: BaseModel,
    anchors: AnchorSet,
    weights: Vec<WeightPair>,
) -> Result<LocaModel> {
    config.validate()?;
    let m = train.n_users();
    if anchors.len() != weights.len() {
        return Err(LocaError::Config("one weight pair is needed per anchor".into()));
    }
    if global.n_items() != train.n_items() || global.kind() != config.base.kind() {
        return Err(LocaError::Config(
            "global model does not match the configuration".into(),
        ));
    }
    for wp in &weights {
        if wp.train.len() != m || wp.infer.len() != m {
            return Err(LocaError::DimensionMismatch {
                expected: m,
                actual: wp.train.len().min(wp.infer.len()),
            });
        }
    }
    let local_config = config.base.to_config();
    let pool = worker_pool(config.jobs)?;
    let models = pool.install(|| {
        weights
            .par_iter()
            .enumerate()
            .map(|(j, wp)| {
                local_config
                    .fit(train, &wp.train, local_seed(config.seed, j))
                    .map_err(|e| LocaError::LocalModel {
                        anchor: wp.anchor,
                        source: Box::new(e),
                    })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let locals = weights
        .into_iter()
        .zip(models)
        .map(|(weights, model)| LocalModelEntry {
            anchor: weights.anchor,
            weights,
            model,
        })
        .collect();
    Ok(LocaModel {
        global,
        locals,
        config: config.clone(),
        anchor_strategy: anchors.strategy,
        n_users: m,
    })
}

impl LocaModel {
    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.global.n_items()
    }

    pub fn anchors(&self) -> AnchorSet {
        AnchorSet {
            anchors: self.locals.iter().map(|l| l.anchor).collect(),
            strategy: self.anchor_strategy,
            seed: self.config.seed,
        }
    }

    pub fn weight_pairs(&self) -> Vec<WeightPair> {
        self.locals.iter().map(|l| l.weights.clone()).collect()
    }

    /// Total inference weight of user `u`.
    pub fn membership(&self, u: usize) -> f64 {
        self.locals.iter().map(|l| l.weights.infer[u]).sum()
    }

    /// Fraction of users with positive inference weight somewhere.
    pub fn coverage(&self) -> f64 {
        if self.locals.is_empty() {
            return 0.0;
        }
        covered_fraction(&self.weight_pairs())
    }

    /// Aggregated scores for user `u` with train row `row`.
    ///
    /// Covered users get `α·global + (1−α)·Σ_j w_j·local_j / Σ_j w_j`;
    /// uncovered users get the global scores.
    pub fn predict_user(&self, u: usize, row: &[usize]) -> Result<Vec<f64>> {
        if u >= self.n_users {
            return Err(LocaError::Domain(format!(
                "user {u} out of range for {} users",
                self.n_users
            )));
        }
        let locals: Vec<(f64, Vec<f64>)> = self
            .locals
            .iter()
            .filter(|l| l.weights.infer[u] > 0.0)
            .map(|l| (l.weights.infer[u], l.model.score(row)))
            .collect();
        let alpha = self.config.alpha;
        if locals.is_empty() || alpha > 0.0 {
            let global = self.global.score(row);
            return Ok(aggregate(alpha, &global, &locals));
        }
        Ok(aggregate(0.0, &[], &locals))
    }

    /// Top-`n` items for user `u`, optionally skipping the train items.
    pub fn recommend_top_n(&self, u: usize, row: &[usize], n: usize, exclude_train: bool) -> Result<Vec<usize>> {
        let scores = self.predict_user(u, row)?;
        Ok(top_n(&scores, n, if exclude_train { row } else { &[] }))
    }

    /// Writes the model directory: `manifest.toml`, `anchors.txt`,
    /// `global.bin`, and `local_JJJJ.bin` / `weights_JJJJ.bin` per local model.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| LocaError::io(dir, e))?;
        for (name, bytes) in self.files() {
            let p = dir.join(&name);
            fs::write(&p, bytes).map_err(|e| LocaError::io(&p, e))?;
        }
        Ok(())
    }

    /// Every file of the model directory as `(name, bytes)` in a fixed order.
    pub fn files(&self) -> Vec<(String, Vec<u8>)> {
        let manifest = Manifest {
            format: MANIFEST_FORMAT.to_string(),
            n_users: self.n_users,
            n_items: self.n_items(),
            anchor_strategy: self.anchor_strategy,
            anchors: self.locals.iter().map(|l| l.anchor).collect(),
            local_seeds: (0..self.locals.len())
                .map(|j| local_seed(self.config.seed, j).to_string())
                .collect(),
            config: self.config.clone(),
        };
        let mut anchors = format!(
            "# strategy={} seed={} q={}\n",
            self.anchor_strategy,
            self.config.seed,
            self.locals.len()
        );
        for l in &self.locals {
            anchors.push_str(&format!("{}\n", l.anchor));
        }
        let mut files = vec![
            (
                "manifest.toml".to_string(),
                toml::to_string(&manifest).expect("manifest serializes").into_bytes(),
            ),
            ("anchors.txt".to_string(), anchors.into_bytes()),
            ("global.bin".to_string(), self.global.to_bytes()),
        ];
        for (j, l) in self.locals.iter().enumerate() {
            files.push((format!("local_{j:04}.bin"), l.model.to_bytes()));
            files.push((format!("weights_{j:04}.bin"), encode_weights(&l.weights)));
        }
        files
    }

    /// Concatenated directory contents; equal bytes mean equal models.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for (name, bytes) in self.files() {
            out.extend_from_slice(name.as_bytes());
            out.push(0);
            out.extend_from_slice(&(bytes.len() as u64).to_le_bytes());
            out.extend_from_slice(&bytes);
        }
        out
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest_path = dir.join("manifest.toml");
        let text = fs::read_to_string(&manifest_path).map_err(|e| LocaError::io(&manifest_path, e))?;
        let manifest: Manifest =
            toml::from_str(&text).map_err(|e| LocaError::artifact(&manifest_path, e.to_string()))?;
        if manifest.format != MANIFEST_FORMAT {
            return Err(LocaError::artifact(
                &manifest_path,
                format!("unsupported format `{}`", manifest.format),
            ));
        }
        let global = BaseModel::load(dir.join("global.bin"))?;
        let mut locals = Vec::with_capacity(manifest.anchors.len());
        for (j, &anchor) in manifest.anchors.iter().enumerate() {
            let model = BaseModel::load(dir.join(format!("local_{j:04}.bin")))?;
            let wpath = dir.join(format!("weights_{j:04}.bin"));
            let bytes = fs::read(&wpath).map_err(|e| LocaError::io(&wpath, e))?;
            let weights = decode_weights(&bytes).ok_or_else(|| LocaError::artifact(&wpath, "bad weight file"))?;
            if weights.anchor != anchor || weights.infer.len() != manifest.n_users {
                return Err(LocaError::artifact(&wpath, "weights do not match the manifest"));
            }
            locals.push(LocalModelEntry { anchor, weights, model });
        }
        if global.n_items() != manifest.n_items {
            return Err(LocaError::artifact(
                dir.join("global.bin"),
                "item count does not match the manifest",
            ));
        }
        Ok(LocaModel {
            global,
            locals,
            config: manifest.config,
            anchor_strategy: manifest.anchor_strategy,
            n_users: manifest.n_users,
        })
    }
}

impl Recommender for LocaModel {
    fn n_items(&self) -> usize {
        LocaModel::n_items(self)
    }

    fn score_user(&self, u: usize, row: &[usize]) -> Result<Vec<f64>> {
        self.predict_user(u, row)
    }

    fn is_covered(&self, u: usize) -> bool {
        self.membership(u) > 0.0
    }
}

const MANIFEST_FORMAT: &str = "loca-model-v1";
const WEIGHTS_MAGIC: &[u8; 8] = b"LOCAWGT1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    format: String,
    n_users: usize,
    n_items: usize,
    anchor_strategy: AnchorStrategy,
    anchors: Vec<usize>,
    /// Decimal strings; derived seeds can exceed TOML's integer range.
    local_seeds: Vec<String>,
    config: LocaConfig,
}

fn encode_weights(wp: &WeightPair) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + 16 * wp.train.len());
    out.extend_from_slice(WEIGHTS_MAGIC);
    out.extend_from_slice(&(wp.anchor as u64).to_le_bytes());
    out.extend_from_slice(&(wp.train.len() as u64).to_le_bytes());
    for x in wp.train.iter().chain(&wp.infer) {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

fn decode_weights(bytes: &[u8]) -> Option<WeightPair> {
    let rest = bytes.strip_prefix(WEIGHTS_MAGIC)?;
    let word = |i: usize| -> Option<[u8; 8]> { rest.get(i * 8..i * 8 + 8)?.try_into().ok() };
    let anchor = u64::from_le_bytes(word(0)?) as usize;
    let m = u64::from_le_bytes(word(1)?) as usize;
    if rest.len() != 16 + 16 * m {
        return None;
    }
    let vals: Vec<f64> = (0..2 * m).map(|i| f64::from_le_bytes(word(2 + i).unwrap())).collect();
    Some(WeightPair {
        anchor,
        train: vals[..m].to_vec(),
        infer: vals[m..].to_vec(),
    })
}
