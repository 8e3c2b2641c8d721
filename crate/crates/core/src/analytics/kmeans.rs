use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::terms::group_centroid_terms;
use super::AnalyticsError;
use crate::corpus::DocumentId;
use crate::matrix::{densify_compact, squared_distance, DenseMatrix};
use crate::par;
use crate::text::{SparseVector, Vocabulary};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    pub k: usize,
    /// Cluster id per input row.
    pub assignments: Vec<u32>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    /// Lloyd update steps performed.
    pub iterations: usize,
    pub seed: u64,
    /// Inertia after the initial assignment and after every update step.
    pub inertia_trace: Vec<f64>,
}

impl ClusteringResult {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a as usize] += 1;
        }
        sizes
    }

    /// Row indices of each cluster, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        members_of(&self.assignments, self.k)
    }
}

fn members_of(assignments: &[u32], k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); k];
    for (i, &a) in assignments.iter().enumerate() {
        out[a as usize].push(i);
    }
    out
}

/// Index and squared distance of the nearest centroid; ties go to the lower id.
pub fn nearest_centroid(point: &[f64], centroids: &[Vec<f64>]) -> (u32, f64) {
    let mut best = (0u32, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = squared_distance(point, centroid);
        if d < best.1 {
            best = (c as u32, d);
        }
    }
    best
}

fn assign(data: &DenseMatrix, centroids: &[Vec<f64>]) -> (Vec<u32>, f64) {
    let nearest = par::map_range(data.rows(), |i| nearest_centroid(data.row(i), centroids));
    let inertia = nearest.iter().map(|&(_, d)| d).sum();
    (nearest.into_iter().map(|(c, _)| c).collect(), inertia)
}

fn distinct_rows(data: &DenseMatrix) -> usize {
    let mut rows: Vec<Vec<u64>> = data.iter_rows().map(|r| r.iter().map(|v| (v + 0.0).to_bits()).collect()).collect();
    rows.sort_unstable();
    rows.dedup();
    rows.len()
}

fn plus_plus_init(data: &DenseMatrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = data.rows();
    let first = rng.gen_range(0..n);
    let mut centroids = vec![data.row(first).to_vec()];
    let mut d2: Vec<f64> = par::map_range(n, |i| squared_distance(data.row(i), data.row(first)));
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let target = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, &d) in d2.iter().enumerate() {
            if d <= 0.0 {
                continue;
            }
            acc += d;
            pick = Some(i);
            if acc > target {
                break;
            }
        }
        let pick = pick.expect("enough distinct rows checked by caller");
        let c = data.row(pick).to_vec();
        let next: Vec<f64> = par::map_range(n, |i| squared_distance(data.row(i), &c));
        for (d, nd) in d2.iter_mut().zip(next) {
            if nd < *d {
                *d = nd;
            }
        }
        centroids.push(c);
    }
    centroids
}

fn update(data: &DenseMatrix, assignments: &[u32], previous: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = previous.len();
    let members = members_of(assignments, k);
    let mut centroids: Vec<Option<Vec<f64>>> = par::map_range(k, |c| {
        let m = &members[c];
        if m.is_empty() {
            return None;
        }
        let mut sum = vec![0.0; data.dim()];
        for &i in m {
            for (s, v) in sum.iter_mut().zip(data.row(i)) {
                *s += v;
            }
        }
        let len = m.len() as f64;
        sum.iter_mut().for_each(|s| *s /= len);
        Some(sum)
    });

    if centroids.iter().any(Option::is_none) {
        // Farthest point from its own (non-empty) cluster's new centroid.
        let dist: Vec<f64> = par::map_range(data.rows(), |i| {
            let c = centroids[assignments[i] as usize].as_ref().expect("assigned cluster is non-empty");
            squared_distance(data.row(i), c)
        });
        let mut taken: Vec<&[f64]> = Vec::new();
        for slot in centroids.iter_mut().filter(|c| c.is_none()) {
            let mut best: Option<(usize, f64)> = None;
            for (i, &d) in dist.iter().enumerate() {
                if taken.iter().any(|t| *t == data.row(i)) {
                    continue;
                }
                if best.is_none_or(|(_, bd)| d > bd) {
                    best = Some((i, d));
                }
            }
            let (i, _) = best.expect("more distinct rows than clusters");
            taken.push(data.row(i));
            *slot = Some(data.row(i).to_vec());
        }
    }
    centroids.into_iter().map(|c| c.expect("filled above")).collect()
}

/// Lloyd's algorithm with k-means++ seeding from `ChaCha8Rng::seed_from_u64(seed)`.
///
/// Stops when an update leaves assignments unchanged or after `max_iter`
/// updates. The returned assignments are always nearest-centroid with respect
/// to the returned centroids. Results do not depend on the thread count.
pub fn kmeans(data: &DenseMatrix, k: usize, seed: u64, max_iter: usize) -> Result<ClusteringResult, AnalyticsError> {
    let n = data.rows();
    if k == 0 {
        return Err(AnalyticsError::InvalidK);
    }
    if k > n {
        return Err(AnalyticsError::KTooLarge { k, rows: n });
    }
    if data.data().iter().any(|v| !v.is_finite()) {
        return Err(AnalyticsError::NonFinite);
    }
    let distinct = distinct_rows(data);
    if distinct < k {
        return Err(AnalyticsError::DegenerateInput { distinct, k });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_init(data, k, &mut rng);
    let (mut assignments, mut inertia) = assign(data, &centroids);
    let mut trace = vec![inertia];
    let mut iterations = 0;
    while iterations < max_iter {
        centroids = update(data, &assignments, &centroids);
        let (next, next_inertia) = assign(data, &centroids);
        iterations += 1;
        inertia = next_inertia;
        trace.push(inertia);
        let done = next == assignments;
        assignments = next;
        if done {
            break;
        }
    }
    Ok(ClusteringResult { k, assignments, centroids, inertia, iterations, seed, inertia_trace: trace })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub cluster: u32,
    pub size: usize,
    pub top_terms: Vec<String>,
}

/// Serializable report with assignments keyed by document id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub k: usize,
    pub seed: u64,
    pub iterations: usize,
    pub inertia: f64,
    pub assignments: std::collections::BTreeMap<DocumentId, u32>,
    pub clusters: Vec<ClusterSummary>,
}

impl ClusterReport {
    pub fn new(result: &ClusteringResult, ids: &[DocumentId], top_terms: Vec<Vec<String>>) -> Self {
        let sizes = result.cluster_sizes();
        ClusterReport {
            k: result.k,
            seed: result.seed,
            iterations: result.iterations,
            inertia: result.inertia,
            assignments: ids.iter().cloned().zip(result.assignments.iter().copied()).collect(),
            clusters: top_terms
                .into_iter()
                .enumerate()
                .map(|(c, top_terms)| ClusterSummary { cluster: c as u32, size: sizes[c], top_terms })
                .collect(),
        }
    }

    pub fn render_text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        writeln!(out, "k={} seed={} iterations={} inertia={:.6}", self.k, self.seed, self.iterations, self.inertia)
            .unwrap();
        for c in &self.clusters {
            writeln!(out, "cluster {:>2}  {:>6} docs  {}", c.cluster, c.size, c.top_terms.join(", ")).unwrap();
        }
        out
    }
}

pub const DEFAULT_MAX_ITER: usize = 300;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Terms listed per cluster.
    pub top_terms: usize,
    pub prune: bool,
}

/// Top centroid terms of each cluster, in cluster order.
pub fn cluster_top_terms(
    result: &ClusteringResult,
    vectors: &[&SparseVector],
    vocab: &Vocabulary,
    top_k: usize,
    prune: bool,
) -> Vec<Vec<String>> {
    result
        .members()
        .iter()
        .enumerate()
        .map(|(c, rows)| {
            let group: Vec<&SparseVector> = rows.iter().map(|&r| vectors[r]).collect();
            group_centroid_terms(&format!("cluster {c}"), &group, vocab, top_k, prune)
                .map(|rep| rep.terms.into_iter().map(|t| t.term).collect())
                .unwrap_or_default()
        })
        .collect()
}

/// Clusters sparse document vectors after dropping all-zero columns, and
/// labels each cluster with its top centroid terms.
pub fn cluster_documents(
    ids: &[DocumentId],
    vectors: &[&SparseVector],
    vocab: &Vocabulary,
    params: &ClusterParams,
) -> Result<(ClusteringResult, ClusterReport), AnalyticsError> {
    let owned: Vec<SparseVector> = vectors.iter().map(|v| (*v).clone()).collect();
    let (data, _) = densify_compact(&owned);
    let result = kmeans(&data, params.k, params.seed, params.max_iter)?;
    let terms = cluster_top_terms(&result, vectors, vocab, params.top_terms, params.prune);
    let report = ClusterReport::new(&result, ids, terms);
    Ok((result, report))
}
