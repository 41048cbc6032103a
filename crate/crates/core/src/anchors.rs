//! Coverage graph over users and anchor selection strategies.

use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LocaError, Result};
use crate::neighborhood::{kernel_weight, EmbeddingMatrix, KernelConfig, WeightPair};

/// Undirected user graph with an edge wherever the inference kernel is positive.
#[derive(Clone, Debug, PartialEq)]
pub struct CoverageGraph {
    adjacency: Vec<Vec<usize>>,
    pub h_infer: f64,
}

impl CoverageGraph {
    /// Builds a graph from explicit adjacency lists, symmetrizing and dropping
    /// self-loops.
    pub fn from_adjacency(mut adjacency: Vec<Vec<usize>>) -> Result<Self> {
        let m = adjacency.len();
        let mut extra = vec![Vec::new(); m];
        for (i, nbrs) in adjacency.iter().enumerate() {
            for &j in nbrs {
                if j >= m {
                    return Err(LocaError::Domain(format!("neighbor {j} out of range")));
                }
                extra[j].push(i);
            }
        }
        for (i, (nbrs, more)) in adjacency.iter_mut().zip(extra).enumerate() {
            nbrs.extend(more);
            nbrs.retain(|&j| j != i);
            nbrs.sort_unstable();
            nbrs.dedup();
        }
        Ok(CoverageGraph {
            adjacency,
            h_infer: f64::NAN,
        })
    }

    /// Connects users `i ≠ j` whenever `K_hW(dist(i, j)) > 0`.
    pub fn build(embeddings: &EmbeddingMatrix, kernel: &KernelConfig) -> Result<Self> {
        if !(kernel.h_infer > 0.0) {
            return Err(LocaError::Config("h_W must be positive".into()));
        }
        let m = embeddings.n_users();
        let adjacency = (0..m)
            .into_par_iter()
            .map(|i| {
                let mut nbrs = Vec::new();
                for j in 0..m {
                    if j == i {
                        continue;
                    }
                    let s = kernel.distance(embeddings.row(i), embeddings.row(j))?;
                    if kernel_weight(s, kernel.h_infer) > 0.0 {
                        nbrs.push(j);
                    }
                }
                Ok(nbrs)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CoverageGraph {
            adjacency,
            h_infer: kernel.h_infer,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn n_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }
}

/// Anchor selection rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnchorStrategy {
    Coverage,
    Random,
    Farthest,
    Kmeans,
}

impl AnchorStrategy {
    pub const ALL: [AnchorStrategy; 4] = [
        AnchorStrategy::Coverage,
        AnchorStrategy::Random,
        AnchorStrategy::Farthest,
        AnchorStrategy::Kmeans,
    ];
}

impl fmt::Display for AnchorStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AnchorStrategy::Coverage => "coverage",
            AnchorStrategy::Random => "random",
            AnchorStrategy::Farthest => "farthest",
            AnchorStrategy::Kmeans => "kmeans",
        })
    }
}

impl FromStr for AnchorStrategy {
    type Err = LocaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coverage" => Ok(AnchorStrategy::Coverage),
            "random" => Ok(AnchorStrategy::Random),
            "farthest" => Ok(AnchorStrategy::Farthest),
            "kmeans" | "k-means" => Ok(AnchorStrategy::Kmeans),
            other => Err(LocaError::Config(format!("unknown anchor strategy `{other}`"))),
        }
    }
}

/// Ordered, duplicate-free anchor users.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnchorSet {
    pub anchors: Vec<usize>,
    pub strategy: AnchorStrategy,
    pub seed: u64,
}

impl AnchorSet {
    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    /// One anchor per line after a `# strategy=.. seed=.. q=..` header.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = format!(
            "# strategy={} seed={} q={}\n",
            self.strategy,
            self.seed,
            self.anchors.len()
        );
        for a in &self.anchors {
            let _ = writeln!(out, "{a}");
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
        let (mut strategy, mut seed, mut q) = (None, None, None);
        for kv in header.split_whitespace() {
            match kv.split_once('=') {
                Some(("strategy", v)) => strategy = Some(v.parse()?),
                Some(("seed", v)) => seed = v.parse().ok(),
                Some(("q", v)) => q = v.parse::<usize>().ok(),
                _ => return Err(LocaError::artifact(path, format!("bad header field `{kv}`"))),
            }
        }
        let anchors = lines
            .map(|l| l.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| LocaError::artifact(path, "bad anchor index"))?;
        match (strategy, seed, q) {
            (Some(strategy), Some(seed), Some(q)) if q == anchors.len() => Ok(AnchorSet {
                anchors,
                strategy,
                seed,
            }),
            _ => Err(LocaError::artifact(path, "header does not match contents")),
        }
    }
}

/// Picks `q` anchor users with the requested strategy.
pub fn select_anchors(
    graph: &CoverageGraph,
    embeddings: &EmbeddingMatrix,
    q: usize,
    strategy: AnchorStrategy,
    seed: u64,
) -> Result<AnchorSet> {
    let m = graph.n_nodes();
    if embeddings.n_users() != m {
        return Err(LocaError::DimensionMismatch {
            expected: m,
            actual: embeddings.n_users(),
        });
    }
    if q > m {
        return Err(LocaError::Config(format!("q = {q} exceeds the {m} available users")));
    }
    let anchors = match strategy {
        AnchorStrategy::Coverage => greedy_coverage(graph, q),
        AnchorStrategy::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            sample(&mut rng, m, q).into_vec()
        }
        AnchorStrategy::Farthest => farthest_point(graph, embeddings, q)?,
        AnchorStrategy::Kmeans => kmeans_anchors(embeddings, q, seed),
    };
    Ok(AnchorSet {
        anchors,
        strategy,
        seed,
    })
}

/// Greedy maximum coverage. A node covers itself and its neighbors; ties go
/// to the lowest index; once every node is covered the covered set is
/// cleared and selection continues among non-anchors.
pub fn greedy_coverage(graph: &CoverageGraph, q: usize) -> Vec<usize> {
    let m = graph.n_nodes();
    let fresh_gain = |i: usize| graph.neighbors(i).len() + 1;
    let mut gain: Vec<usize> = (0..m).map(fresh_gain).collect();
    let mut covered = vec![false; m];
    let mut is_anchor = vec![false; m];
    let mut n_covered = 0;
    let mut anchors = Vec::with_capacity(q);

    while anchors.len() < q {
        let mut best: Option<usize> = None;
        for v in 0..m {
            if !is_anchor[v] && best.is_none_or(|b| gain[v] > gain[b]) {
                best = Some(v);
            }
        }
        let Some(a) = best else { break };
        is_anchor[a] = true;
        anchors.push(a);

        for x in std::iter::once(a).chain(graph.neighbors(a).iter().copied()) {
            if covered[x] {
                continue;
            }
            covered[x] = true;
            n_covered += 1;
            gain[x] -= 1;
            for &y in graph.neighbors(x) {
                gain[y] -= 1;
            }
        }
        if n_covered == m {
            covered.iter_mut().for_each(|c| *c = false);
            n_covered = 0;
            for (v, g) in gain.iter_mut().enumerate() {
                *g = fresh_gain(v);
            }
        }
    }
    anchors
}

fn farthest_point(graph: &CoverageGraph, embeddings: &EmbeddingMatrix, q: usize) -> Result<Vec<usize>> {
    let m = graph.n_nodes();
    if q == 0 {
        return Ok(Vec::new());
    }
    let first = greedy_coverage(graph, 1)[0];
    let mut anchors = vec![first];
    let mut nearest = vec![f64::INFINITY; m];
    let mut is_anchor = vec![false; m];
    is_anchor[first] = true;
    while anchors.len() < q {
        let last = *anchors.last().expect("nonempty");
        for u in 0..m {
            let s = crate::neighborhood::arccos_distance(embeddings.row(last), embeddings.row(u))?;
            nearest[u] = nearest[u].min(s);
        }
        let mut best: Option<usize> = None;
        for u in 0..m {
            if !is_anchor[u] && best.is_none_or(|b| nearest[u] > nearest[b]) {
                best = Some(u);
            }
        }
        let next = best.expect("q <= m leaves a candidate");
        is_anchor[next] = true;
        anchors.push(next);
    }
    Ok(anchors)
}

pub(crate) const KMEANS_MAX_ITER: usize = 100;
pub(crate) const KMEANS_TOL: f64 = 1e-6;

/// Lloyd's algorithm on unit-normalized embeddings; each centroid is then
/// snapped to its nearest unused user.
fn kmeans_anchors(embeddings: &EmbeddingMatrix, q: usize, seed: u64) -> Vec<usize> {
    let m = embeddings.n_users();
    let d = embeddings.dim();
    if q == 0 {
        return Vec::new();
    }
    let points: Vec<Vec<f64>> = (0..m)
        .map(|u| {
            let row = embeddings.row(u);
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            row.iter().map(|x| x / norm).collect()
        })
        .collect();
    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids: Vec<Vec<f64>> = sample(&mut rng, m, q).into_iter().map(|u| points[u].clone()).collect();
    let mut assign = vec![0usize; m];
    for _ in 0..KMEANS_MAX_ITER {
        for (u, p) in points.iter().enumerate() {
            assign[u] = (0..q)
                .min_by(|&a, &b| sq(p, &centroids[a]).total_cmp(&sq(p, &centroids[b])))
                .expect("q >= 1");
        }
        let mut sums = vec![vec![0.0; d]; q];
        let mut counts = vec![0usize; q];
        for (u, p) in points.iter().enumerate() {
            counts[assign[u]] += 1;
            for (s, x) in sums[assign[u]].iter_mut().zip(p) {
                *s += x;
            }
        }
        let mut shift = 0.0f64;
        for c in 0..q {
            // empty clusters keep their previous centroid
            if counts[c] == 0 {
                continue;
            }
            let next: Vec<f64> = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            shift = shift.max(sq(&next, &centroids[c]).sqrt());
            centroids[c] = next;
        }
        if shift < KMEANS_TOL {
            break;
        }
    }

    let mut used = vec![false; m];
    centroids
        .iter()
        .map(|c| {
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&a, &b| sq(&points[a], c).total_cmp(&sq(&points[b], c)).then(a.cmp(&b)));
            let pick = *order.iter().find(|&&u| !used[u]).expect("q <= m");
            used[pick] = true;
            pick
        })
        .collect()
}

/// Fraction of users with positive inference weight under at least one anchor.
pub fn coverage_ratio(anchors: &AnchorSet, weight_pairs: &[WeightPair]) -> Result<f64> {
    if anchors.len() != weight_pairs.len() || anchors.anchors.iter().zip(weight_pairs).any(|(&a, wp)| wp.anchor != a) {
        return Err(LocaError::Config(
            "weight pairs do not correspond to the anchor set".into(),
        ));
    }
    Ok(covered_fraction(weight_pairs))
}

pub(crate) fn covered_fraction(weight_pairs: &[WeightPair]) -> f64 {
    let Some(first) = weight_pairs.first() else {
        return 0.0;
    };
    let m = first.infer.len();
    let mut covered = vec![false; m];
    for wp in weight_pairs {
        for u in wp.covered() {
            covered[u] = true;
        }
    }
    covered.iter().filter(|&&c| c).count() as f64 / m as f64
}
