//! Local collaborative autoencoders for top-N recommendation.
//!
//! Users are embedded, a set of anchor users is picked by greedy coverage,
//! and every anchor gets a local recommender trained on its kernel-weighted
//! neighborhood. Predictions mix the local models by inference weight and
//! fall back to a global model for users no local model covers.
//!
//! ```no_run
//! use loca::prelude::*;
//!
//! let log = PlantedBlocks::default().generate(7);
//! let matrix = preprocess(&log, 10, PositiveThreshold::All)?;
//! let split = leave_k_out_split(&log, &matrix, 5)?;
//! let config = LocaConfig {
//!     q: 4,
//!     kernel: KernelConfig::new(1.2, 0.4)?,
//!     base: BaseSpec::Ease { lambda: 50.0 },
//!     ..LocaConfig::default()
//! };
//! let model = train_loca(&split, &config)?;
//! let report = evaluate_model(&model, &split, &[10, 50])?;
//! println!("NDCG@10 = {:.4}", report.ndcg(10).unwrap());
//! # Ok::<(), loca::LocaError>(())
//! ```

pub mod anchors;
pub mod base_models;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod ensemble;
mod error;
pub mod eval;
pub mod neighborhood;
pub mod synthetic;

pub use error::{LocaError, Result};

pub mod prelude {
    pub use crate::anchors::{coverage_ratio, select_anchors, AnchorSet, AnchorStrategy, CoverageGraph};
    pub use crate::base_models::{
        train_dae, train_ease, BaseModel, BaseModelConfig, BaseModelKind, DaeModel, EaseModel, TrainConfig,
    };
    pub use crate::dataset::{
        leave_k_out_split, load_interactions, preprocess, InteractionLog, PositiveThreshold, RatingMatrix, Schema,
        SplitDataset,
    };
    pub use crate::ensemble::{train_loca, BaseSpec, LocaConfig, LocaModel};
    pub use crate::eval::{breakdown_by_activity, evaluate_model, ndcg_at_n, recall_at_n, EvalReport, Recommender};
    pub use crate::neighborhood::{
        arccos_distance, build_weight_pair, kernel_weight, EmbeddingMatrix, EmbeddingMethod, KernelConfig, WeightPair,
    };
    pub use crate::synthetic::PlantedBlocks;
    pub use crate::{LocaError, Result};
}
