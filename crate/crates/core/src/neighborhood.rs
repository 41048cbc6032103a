//! User embeddings, arccos distances, Epanechnikov kernel weights and the
//! per-anchor training/inference weight vectors.

use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::base_models::DaeModel;
use crate::dataset::RatingMatrix;
use crate::error::{LocaError, Result};

/// How user embeddings are produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingMethod {
    /// Hidden-layer activation of a trained global DAE.
    DaeHidden,
    /// Rows of `U_d Σ_d` from a rank-d SVD of the train matrix.
    TruncatedSvd,
}

impl fmt::Display for EmbeddingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EmbeddingMethod::DaeHidden => "dae-hidden",
            EmbeddingMethod::TruncatedSvd => "truncated-svd",
        })
    }
}

impl FromStr for EmbeddingMethod {
    type Err = LocaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dae-hidden" => Ok(EmbeddingMethod::DaeHidden),
            "truncated-svd" => Ok(EmbeddingMethod::TruncatedSvd),
            other => Err(LocaError::Config(format!("unknown embedding method `{other}`"))),
        }
    }
}

/// Dense per-user embedding vectors, row-major `m × d`. No row is all-zero.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    data: Vec<f64>,
    pub method: EmbeddingMethod,
    pub seed: u64,
}

impl EmbeddingMatrix {
    /// Wraps raw rows. All-zero rows are replaced by the first unit vector.
    pub fn from_rows(rows: Vec<Vec<f64>>, method: EmbeddingMethod, seed: u64) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if dim == 0 {
            return Err(LocaError::Config("embedding dimension must be at least 1".into()));
        }
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (u, mut row) in rows.into_iter().enumerate() {
            if row.len() != dim {
                return Err(LocaError::DimensionMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(LocaError::Numerical(format!("non-finite embedding for user {u}")));
            }
            if row.iter().all(|&x| x == 0.0) {
                log::warn!("user {u} has an all-zero embedding; using the first unit vector");
                row[0] = 1.0;
            }
            data.extend(row);
        }
        Ok(EmbeddingMatrix {
            dim,
            data,
            method,
            seed,
        })
    }

    pub fn n_users(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, u: usize) -> &[f64] {
        &self.data[u * self.dim..(u + 1) * self.dim]
    }

    /// Rank-`d` truncated SVD embedding: row `u` is `(U_d Σ_d)_u`. Each column's
    /// sign is fixed so its largest-magnitude entry is positive.
    pub fn truncated_svd(train: &RatingMatrix, d: usize) -> Result<Self> {
        let (m, n) = (train.n_users(), train.n_items());
        if d == 0 || d > m.min(n) {
            return Err(LocaError::Config(format!(
                "embedding dimension {d} must lie in [1, {}]",
                m.min(n)
            )));
        }
        let x: DMatrix<f64> = DMatrix::from_fn(m, n, |u, i| if train.contains(u, i) { 1.0 } else { 0.0 });
        let mut emb: DMatrix<f64> = if m <= n {
            // X Xᵀ = U Σ² Uᵀ, embedding = U Σ
            let eig: SymmetricEigen<f64, nalgebra::Dyn> = SymmetricEigen::new(&x * x.transpose());
            let order = descending(&eig.eigenvalues);
            DMatrix::from_fn(m, d, |u, k| {
                let j = order[k];
                eig.eigenvectors[(u, j)] * eig.eigenvalues[j].max(0.0).sqrt()
            })
        } else {
            // Xᵀ X = V Σ² Vᵀ, embedding = X V
            let eig: SymmetricEigen<f64, nalgebra::Dyn> = SymmetricEigen::new(x.transpose() * &x);
            let order = descending(&eig.eigenvalues);
            let v = DMatrix::from_fn(n, d, |i, k| eig.eigenvectors[(i, order[k])]);
            &x * v
        };
        for k in 0..d {
            let col = emb.column(k);
            let pivot = col
                .iter()
                .copied()
                .fold(0.0f64, |best: f64, x: f64| if x.abs() > best.abs() { x } else { best });
            if pivot < 0.0 {
                emb.column_mut(k).neg_mut();
            }
        }
        let rows = (0..m).map(|u| emb.row(u).iter().copied().collect()).collect();
        Self::from_rows(rows, EmbeddingMethod::TruncatedSvd, 0)
    }

    /// First `d` hidden-layer activations of a trained DAE on each train row.
    pub fn dae_hidden(train: &RatingMatrix, dae: &DaeModel, d: usize) -> Result<Self> {
        if d == 0 || d > dae.hidden_dim() {
            return Err(LocaError::Config(format!(
                "embedding dimension {d} must lie in [1, {}] for this DAE",
                dae.hidden_dim()
            )));
        }
        if dae.n_items() != train.n_items() {
            return Err(LocaError::DimensionMismatch {
                expected: train.n_items(),
                actual: dae.n_items(),
            });
        }
        let rows = (0..train.n_users())
            .map(|u| {
                let mut h = dae.hidden(train.row(u));
                h.truncate(d);
                h
            })
            .collect();
        Self::from_rows(rows, EmbeddingMethod::DaeHidden, dae.seed)
    }

    /// Writes a delimited `m × d` matrix preceded by a `# m d method seed` line.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = format!("# {} {} {} {}\n", self.n_users(), self.dim, self.method, self.seed);
        for u in 0..self.n_users() {
            let row: Vec<String> = self.row(u).iter().map(|x| format!("{x:e}")).collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        fs::write(path, out).map_err(|e| LocaError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| LocaError::io(path, e))?;
        let mut lines = text.lines();
        let header = lines
            .next()
            .and_then(|l| l.strip_prefix("# "))
            .ok_or_else(|| LocaError::artifact(path, "missing header"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let [m, d, method, seed] = fields[..] else {
            return Err(LocaError::artifact(path, "header needs m, d, method, seed"));
        };
        let bad = |what: &str| LocaError::artifact(path, format!("bad {what}"));
        let m: usize = m.parse().map_err(|_| bad("m"))?;
        let d: usize = d.parse().map_err(|_| bad("d"))?;
        let seed: u64 = seed.parse().map_err(|_| bad("seed"))?;
        let method = method.parse()?;
        let rows = lines
            .map(|l| {
                l.split(',')
                    .map(|x| x.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| bad("row"))
            })
            .collect::<Result<Vec<_>>>()?;
        if rows.len() != m || rows.iter().any(|r| r.len() != d) {
            return Err(bad("shape"));
        }
        Self::from_rows(rows, method, seed)
    }
}

fn descending(values: &nalgebra::DVector<f64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
}

/// Angle between two vectors in radians, in `[0, π]`.
pub fn arccos_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(LocaError::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(LocaError::Domain("arccos distance of a zero vector".into()));
    }
    if a == b {
        return Ok(0.0);
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0).acos())
}

/// Scaled Epanechnikov kernel `(1 − (s/h)²)·1[s < h]`.
pub fn kernel_weight(s: f64, h: f64) -> f64 {
    debug_assert!(s >= 0.0 && h > 0.0);
    if s < h {
        let r = s / h;
        1.0 - r * r
    } else {
        0.0
    }
}

/// Training and inference bandwidths.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    /// Training bandwidth `h_T`.
    pub h_train: f64,
    /// Inference bandwidth `h_W`; must not exceed `h_train`.
    pub h_infer: f64,
    /// Divide arccos distances by π so they fall in `[0, 1]`.
    pub scale_distance: bool,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            h_train: 1.0,
            h_infer: 0.4,
            scale_distance: false,
        }
    }
}

impl KernelConfig {
    pub fn new(h_train: f64, h_infer: f64) -> Result<Self> {
        let cfg = KernelConfig {
            h_train,
            h_infer,
            scale_distance: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h_infer > 0.0 && self.h_infer <= self.h_train && self.h_train.is_finite()) {
            return Err(LocaError::Config(format!(
                "bandwidths need 0 < h_W ({}) <= h_T ({})",
                self.h_infer, self.h_train
            )));
        }
        Ok(())
    }

    /// Distance as used by the kernels, honoring `scale_distance`.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        let s = arccos_distance(a, b)?;
        Ok(if self.scale_distance {
            s / std::f64::consts::PI
        } else {
            s
        })
    }
}

/// Training weights `t` and inference weights `w` of one anchor.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightPair {
    pub anchor: usize,
    pub train: Vec<f64>,
    pub infer: Vec<f64>,
}

impl WeightPair {
    /// Weights that give every user full membership.
    pub fn uniform(anchor: usize, m: usize) -> Self {
        WeightPair {
            anchor,
            train: vec![1.0; m],
            infer: vec![1.0; m],
        }
    }

    /// Users with positive inference weight.
    pub fn covered(&self) -> impl Iterator<Item = usize> + '_ {
        self.infer.iter().enumerate().filter(|(_, &w)| w > 0.0).map(|(u, _)| u)
    }
}

/// Kernel weights of every user relative to `anchor`.
pub fn build_weight_pair(embeddings: &EmbeddingMatrix, anchor: usize, config: &KernelConfig) -> Result<WeightPair> {
    let m = embeddings.n_users();
    if anchor >= m {
        return Err(LocaError::Domain(format!("anchor {anchor} out of range for {m} users")));
    }
    let a = embeddings.row(anchor);
    let mut train = Vec::with_capacity(m);
    let mut infer = Vec::with_capacity(m);
    for u in 0..m {
        let s = if u == anchor {
            0.0
        } else {
            config.distance(a, embeddings.row(u))?
        };
        train.push(kernel_weight(s, config.h_train));
        infer.push(kernel_weight(s, config.h_infer));
    }
    Ok(WeightPair { anchor, train, infer })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, PI};

    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn distance_cases() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(arccos_distance(&a, &a).unwrap(), 0.0);
        assert_abs_diff_eq!(
            arccos_distance(&[1.0, 0.0], &[0.0, 3.0]).unwrap(),
            FRAC_PI_2,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(arccos_distance(&[1.0, 1.0], &[-2.0, -2.0]).unwrap(), PI, epsilon = 1e-7);
        assert!(matches!(
            arccos_distance(&[0.0, 0.0], &[1.0, 0.0]),
            Err(LocaError::Domain(_))
        ));
    }

    #[test]
    fn kernel_cases() {
        assert_eq!(kernel_weight(0.0, 0.3), 1.0);
        assert_eq!(kernel_weight(0.5, 1.0), 0.75);
        assert_eq!(kernel_weight(1.0, 2.0), 0.75);
        assert_eq!(kernel_weight(2.0, 2.0), 0.0);
    }

    #[test]
    fn bandwidth_ordering_enforced() {
        assert!(KernelConfig::new(0.8, 0.9).is_err());
        assert!(KernelConfig::new(0.8, 0.0).is_err());
        assert!(KernelConfig::new(0.8, 0.8).is_ok());
    }

    fn planar(angles: &[f64]) -> EmbeddingMatrix {
        let rows = angles.iter().map(|t| vec![t.cos(), t.sin()]).collect();
        EmbeddingMatrix::from_rows(rows, EmbeddingMethod::TruncatedSvd, 0).unwrap()
    }

    #[test]
    fn weight_pair_by_hand() {
        let emb = planar(&[0.0, 0.6, 1.4]);
        let wp = build_weight_pair(&emb, 0, &KernelConfig::new(1.0, 0.5).unwrap()).unwrap();
        assert_eq!(wp.train[0], 1.0);
        assert_abs_diff_eq!(wp.train[1], 0.64, epsilon = 1e-12);
        assert_eq!(wp.train[2], 0.0);
        assert_eq!(wp.infer, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn identical_embeddings_give_full_weights() {
        let emb = planar(&[0.3; 4]);
        let wp = build_weight_pair(&emb, 2, &KernelConfig::new(0.5, 0.1).unwrap()).unwrap();
        assert_eq!(wp.train, vec![1.0; 4]);
        assert_eq!(wp.infer, vec![1.0; 4]);
    }

    #[test]
    fn scaled_distance_divides_by_pi() {
        let cfg = KernelConfig {
            scale_distance: true,
            ..KernelConfig::new(1.0, 0.5).unwrap()
        };
        let d = cfg.distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(d, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn zero_rows_replaced() {
        let emb =
            EmbeddingMatrix::from_rows(vec![vec![0.0, 0.0], vec![0.0, 2.0]], EmbeddingMethod::TruncatedSvd, 0).unwrap();
        assert_eq!(emb.row(0), &[1.0, 0.0]);
    }

    #[test]
    fn svd_of_identity_like_matrix_is_orthogonal() {
        let train = RatingMatrix::from_rows(4, (0..4).map(|u| vec![u]).collect()).unwrap();
        let emb = EmbeddingMatrix::truncated_svd(&train, 4).unwrap();
        for a in 0..4 {
            for b in (a + 1)..4 {
                let d = arccos_distance(emb.row(a), emb.row(b)).unwrap();
                assert_abs_diff_eq!(d, FRAC_PI_2, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn svd_of_rank_one_matrix_collapses_users() {
        let train = RatingMatrix::from_rows(5, vec![vec![0, 2, 3]; 6]).unwrap();
        let emb = EmbeddingMatrix::truncated_svd(&train, 1).unwrap();
        let first = emb.row(0)[0];
        assert_abs_diff_eq!(first.abs(), 3f64.sqrt(), epsilon = 1e-9);
        for u in 1..6 {
            assert_abs_diff_eq!(emb.row(u)[0], first, epsilon = 1e-9);
            assert_abs_diff_eq!(arccos_distance(emb.row(0), emb.row(u)).unwrap(), 0.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn svd_rejects_oversized_dimension() {
        let train = RatingMatrix::from_rows(3, vec![vec![0], vec![1]]).unwrap();
        assert!(matches!(
            EmbeddingMatrix::truncated_svd(&train, 3),
            Err(LocaError::Config(_))
        ));
    }

    #[test]
    fn embeddings_round_trip() {
        let emb = planar(&[0.0, 0.1, 2.0]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("emb.csv");
        emb.save(&p).unwrap();
        assert_eq!(EmbeddingMatrix::load(&p).unwrap(), emb);
    }

    fn vec_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..8).prop_flat_map(|d| {
            (
                prop::collection::vec(-10.0f64..10.0, d),
                prop::collection::vec(-10.0f64..10.0, d),
            )
        })
    }

    proptest! {
        #[test]
        fn symmetric_and_scale_invariant((a, b) in vec_pair(), c in 0.01f64..100.0) {
            prop_assume!(a.iter().any(|&x| x != 0.0) && b.iter().any(|&x| x != 0.0));
            let ab = arccos_distance(&a, &b).unwrap();
            prop_assert_eq!(ab, arccos_distance(&b, &a).unwrap());
            prop_assert!((0.0..=PI).contains(&ab));
            let scaled: Vec<f64> = a.iter().map(|x| c * x).collect();
            prop_assert!((arccos_distance(&scaled, &b).unwrap() - ab).abs() < 1e-6);
        }

        #[test]
        fn kernel_is_monotone(s1 in 0.0f64..4.0, s2 in 0.0f64..4.0, h in 0.01f64..3.0) {
            let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
            prop_assert!(kernel_weight(lo, h) >= kernel_weight(hi, h));
            prop_assert!((0.0..=1.0).contains(&kernel_weight(lo, h)));
        }
    }
}
