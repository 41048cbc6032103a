//! Top-N ranking, Recall@N / NDCG@N and per-activity breakdowns.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::base_models::BaseModel;
use crate::dataset::{RatingMatrix, SplitDataset};
use crate::error::{LocaError, Result};

/// Anything that scores every item for a user.
pub trait Recommender: Sync {
    fn n_items(&self) -> usize;

    fn score_user(&self, u: usize, row: &[usize]) -> Result<Vec<f64>>;

    /// Whether the user receives any local-model prediction.
    fn is_covered(&self, _u: usize) -> bool {
        true
    }
}

impl Recommender for BaseModel {
    fn n_items(&self) -> usize {
        BaseModel::n_items(self)
    }

    fn score_user(&self, _u: usize, row: &[usize]) -> Result<Vec<f64>> {
        Ok(self.score(row))
    }
}

/// The `n` best items by descending score, skipping `exclude` (sorted).
/// Equal scores rank the lower item index first.
pub fn top_n(scores: &[f64], n: usize, exclude: &[usize]) -> Vec<usize> {
    let mut candidates: Vec<usize> = (0..scores.len())
        .filter(|i| exclude.binary_search(i).is_err())
        .collect();
    let order = |a: &usize, b: &usize| scores[*b].total_cmp(&scores[*a]).then(a.cmp(b));
    if n < candidates.len() {
        if n == 0 {
            return Vec::new();
        }
        candidates.select_nth_unstable_by(n - 1, order);
        candidates.truncate(n);
    }
    candidates.sort_unstable_by(order);
    candidates
}

fn check_heldout(heldout: &[usize], n: usize) -> Result<()> {
    if heldout.is_empty() {
        return Err(LocaError::Domain("metric undefined for an empty held-out set".into()));
    }
    if n == 0 {
        return Err(LocaError::Domain("cutoff N must be at least 1".into()));
    }
    Ok(())
}

/// Fraction of held-out items found in the first `n` ranked items.
pub fn recall_at_n(ranked: &[usize], heldout: &[usize], n: usize) -> Result<f64> {
    check_heldout(heldout, n)?;
    let hits = ranked.iter().take(n).filter(|i| heldout.contains(i)).count();
    Ok(hits as f64 / heldout.len() as f64)
}

/// DCG of the first `n` ranked items over the DCG of `min(k, n)` hits at the top.
pub fn ndcg_at_n(ranked: &[usize], heldout: &[usize], n: usize) -> Result<f64> {
    check_heldout(heldout, n)?;
    let dcg: f64 = ranked
        .iter()
        .take(n)
        .enumerate()
        .filter(|(_, i)| heldout.contains(i))
        .map(|(pos, _)| 1.0 / (pos as f64 + 2.0).log2())
        .sum();
    let ideal: f64 = (0..heldout.len().min(n))
        .map(|pos| 1.0 / (pos as f64 + 2.0).log2())
        .sum();
    Ok(dcg / ideal)
}

/// Metrics of one user, aligned with [`EvalReport::n_values`].
#[derive(Clone, Debug, PartialEq)]
pub struct UserMetrics {
    pub user: usize,
    pub recall: Vec<f64>,
    pub ndcg: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub n_values: Vec<usize>,
    pub k: usize,
    /// Users with a nonempty held-out set, ascending.
    pub per_user: Vec<UserMetrics>,
    pub mean_recall: Vec<f64>,
    pub mean_ndcg: Vec<f64>,
    /// Fraction of all users receiving a local-model prediction.
    pub coverage: f64,
}

impl EvalReport {
    fn position(&self, n: usize) -> Option<usize> {
        self.n_values.iter().position(|&x| x == n)
    }

    pub fn recall(&self, n: usize) -> Option<f64> {
        self.position(n).map(|p| self.mean_recall[p])
    }

    pub fn ndcg(&self, n: usize) -> Option<f64> {
        self.position(n).map(|p| self.mean_ndcg[p])
    }

    /// Per-user rows `user,metric,N,value` in `metrics.csv` and means plus
    /// coverage in `summary.csv`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| LocaError::io(dir, e))?;
        let mut rows = String::from("user,metric,N,value\n");
        for um in &self.per_user {
            for (p, n) in self.n_values.iter().enumerate() {
                let _ = writeln!(rows, "{},recall,{n},{}", um.user, um.recall[p]);
                let _ = writeln!(rows, "{},ndcg,{n},{}", um.user, um.ndcg[p]);
            }
        }
        let p = dir.join("metrics.csv");
        fs::write(&p, rows).map_err(|e| LocaError::io(&p, e))?;
        let p = dir.join("summary.csv");
        fs::write(&p, self.summary_table()).map_err(|e| LocaError::io(&p, e))
    }

    pub fn summary_table(&self) -> String {
        let mut out = String::from("metric,N,value\n");
        for (p, n) in self.n_values.iter().enumerate() {
            let _ = writeln!(out, "recall,{n},{:.6}", self.mean_recall[p]);
            let _ = writeln!(out, "ndcg,{n},{:.6}", self.mean_ndcg[p]);
        }
        let _ = writeln!(out, "coverage,,{:.6}", self.coverage);
        let _ = writeln!(out, "users,,{}", self.per_user.len());
        let _ = writeln!(out, "k,,{}", self.k);
        out
    }
}

fn mean_columns(rows: &[&UserMetrics], pick: impl Fn(&UserMetrics) -> &[f64], width: usize) -> Vec<f64> {
    let mut sums = vec![0.0; width];
    for r in rows {
        sums.iter_mut().zip(pick(r)).for_each(|(s, v)| *s += v);
    }
    let count = rows.len().max(1) as f64;
    sums.into_iter().map(|s| s / count).collect()
}

/// Ranks every item outside each user's train row and scores the held-out set.
pub fn evaluate_model<R: Recommender + ?Sized>(
    model: &R,
    split: &SplitDataset,
    n_values: &[usize],
) -> Result<EvalReport> {
    if model.n_items() != split.n_items() {
        return Err(LocaError::DimensionMismatch {
            expected: split.n_items(),
            actual: model.n_items(),
        });
    }
    if n_values.is_empty() || n_values.contains(&0) {
        return Err(LocaError::Config(
            "cutoffs must be a nonempty list of positive N".into(),
        ));
    }
    let max_n = *n_values.iter().max().expect("nonempty");
    let m = split.n_users();
    let results: Vec<(bool, Option<UserMetrics>)> = (0..m)
        .into_par_iter()
        .map(|u| -> Result<_> {
            let covered = model.is_covered(u);
            let heldout = &split.heldout[u];
            if heldout.is_empty() {
                return Ok((covered, None));
            }
            let row = split.train.row(u);
            let ranked = top_n(&model.score_user(u, row)?, max_n, row);
            let mut recall = Vec::with_capacity(n_values.len());
            let mut ndcg = Vec::with_capacity(n_values.len());
            for &n in n_values {
                recall.push(recall_at_n(&ranked, heldout, n)?);
                ndcg.push(ndcg_at_n(&ranked, heldout, n)?);
            }
            Ok((covered, Some(UserMetrics { user: u, recall, ndcg })))
        })
        .collect::<Result<_>>()?;

    let covered = results.iter().filter(|(c, _)| *c).count();
    let per_user: Vec<UserMetrics> = results.into_iter().filter_map(|(_, r)| r).collect();
    let refs: Vec<&UserMetrics> = per_user.iter().collect();
    Ok(EvalReport {
        n_values: n_values.to_vec(),
        k: split.k,
        mean_recall: mean_columns(&refs, |r| &r.recall, n_values.len()),
        mean_ndcg: mean_columns(&refs, |r| &r.ndcg, n_values.len()),
        per_user,
        coverage: if m == 0 { 0.0 } else { covered as f64 / m as f64 },
    })
}

/// Mean metrics of the users whose train-row size falls in `[lower, upper)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivityBucket {
    pub lower: usize,
    /// `None` for the open-ended last bucket.
    pub upper: Option<usize>,
    pub n_users: usize,
    pub mean_recall: Vec<f64>,
    pub mean_ndcg: Vec<f64>,
}

impl ActivityBucket {
    pub fn is_empty(&self) -> bool {
        self.n_users == 0
    }
}

/// Splits the evaluated users by train-row size at `bucket_edges`, giving
/// `edges.len() + 1` buckets `[0, e₀), [e₀, e₁), …, [e_last, ∞)`.
pub fn breakdown_by_activity(
    report: &EvalReport,
    train: &RatingMatrix,
    bucket_edges: &[usize],
) -> Result<Vec<ActivityBucket>> {
    if bucket_edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(LocaError::Config("bucket edges must be strictly increasing".into()));
    }
    let width = report.n_values.len();
    let mut members: Vec<Vec<&UserMetrics>> = vec![Vec::new(); bucket_edges.len() + 1];
    for um in &report.per_user {
        let size = train.row(um.user).len();
        let b = bucket_edges.partition_point(|&e| e <= size);
        members[b].push(um);
    }
    Ok(members
        .iter()
        .enumerate()
        .map(|(b, rows)| ActivityBucket {
            lower: if b == 0 { 0 } else { bucket_edges[b - 1] },
            upper: bucket_edges.get(b).copied(),
            n_users: rows.len(),
            mean_recall: mean_columns(rows, |r| &r.recall, width),
            mean_ndcg: mean_columns(rows, |r| &r.ndcg, width),
        })
        .collect())
}
