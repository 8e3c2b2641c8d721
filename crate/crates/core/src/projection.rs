//! Exact t-SNE to two dimensions.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::PageRef;
use crate::matrix::{squared_distance, DenseMatrix};
use crate::par;

pub const PERPLEXITY_TOLERANCE: f64 = 1e-5;
const MAX_BRACKET_STEPS: usize = 50;
const MAX_BISECTION_STEPS: usize = 50;
const P_FLOOR: f64 = 1e-12;
const MIN_GAIN: f64 = 0.01;
const INITIAL_STD: f64 = 1e-4;
const KL_EVERY: usize = 50;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsneParams {
    pub perplexity: f64,
    pub iterations: usize,
    pub early_exaggeration: f64,
    /// Iterations run with exaggerated affinities and the initial momentum.
    pub exaggeration_iterations: usize,
    pub learning_rate: f64,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub seed: u64,
}

impl Default for TsneParams {
    fn default() -> Self {
        TsneParams {
            perplexity: 30.0,
            iterations: 1000,
            early_exaggeration: 12.0,
            exaggeration_iterations: 250,
            learning_rate: 200.0,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            seed: 0,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("distances are all equal; perplexity is fixed at {achievable}")]
    DegenerateRow { achievable: f64 },
    #[error("perplexity search did not converge (best beta {best_beta}, perplexity {best_perplexity})")]
    NonConvergence { best_beta: f64, best_perplexity: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TsneError {
    #[error("t-SNE needs at least 4 rows, got {0}")]
    TooFewRows(usize),
    #[error("perplexity {perplexity} must be below (rows - 1) / 3 = {limit}")]
    PerplexityTooLarge { perplexity: f64, limit: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("input contains non-finite values")]
    NonFinite,
}

#[derive(Debug, Error)]
pub enum ProjectionIoError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

/// Perplexity `exp(H)` of `p ∝ exp(-beta (d - min d))` and the normalized row.
pub fn conditional_row(distances: &[f64], beta: f64) -> (Vec<f64>, f64) {
    let min = distances.iter().copied().fold(f64::INFINITY, f64::min);
    let mut p: Vec<f64> = distances.iter().map(|d| (-beta * (d - min)).exp()).collect();
    let sum: f64 = p.iter().sum();
    let mut weighted = 0.0;
    for (pj, d) in p.iter_mut().zip(distances) {
        *pj /= sum;
        weighted += *pj * (d - min);
    }
    let entropy = sum.ln() + beta * weighted;
    (p, entropy.exp())
}

/// Finds the precision `beta` whose conditional distribution over the given
/// squared distances has the target perplexity.
pub fn perplexity_calibrate(distances: &[f64], target: f64) -> Result<f64, CalibrationError> {
    let n = distances.len();
    let min = distances.iter().copied().fold(f64::INFINITY, f64::min);
    let max = distances.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if n == 0 || max - min <= f64::EPSILON * max.abs().max(1.0) {
        let achievable = n as f64;
        return if (achievable - target).abs() < PERPLEXITY_TOLERANCE {
            Ok(1.0)
        } else {
            Err(CalibrationError::DegenerateRow { achievable })
        };
    }

    let mut beta = 1.0;
    let mut lo: Option<f64> = None;
    let mut hi: Option<f64> = None;
    let mut best = (beta, f64::INFINITY, f64::NAN);
    let probe = |beta: f64, best: &mut (f64, f64, f64)| {
        let (_, perp) = conditional_row(distances, beta);
        let err = (perp - target).abs();
        if err < best.1 {
            *best = (beta, err, perp);
        }
        perp
    };

    for _ in 0..MAX_BRACKET_STEPS {
        let perp = probe(beta, &mut best);
        if (perp - target).abs() < PERPLEXITY_TOLERANCE {
            return Ok(beta);
        }
        // Larger beta sharpens the distribution and lowers perplexity.
        if perp > target {
            lo = Some(beta);
        } else {
            hi = Some(beta);
        }
        match (lo, hi) {
            (Some(_), Some(_)) => break,
            (Some(_), None) => beta *= 2.0,
            _ => beta /= 2.0,
        }
    }
    if let (Some(mut lo), Some(mut hi)) = (lo, hi) {
        for _ in 0..MAX_BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            let perp = probe(mid, &mut best);
            if (perp - target).abs() < PERPLEXITY_TOLERANCE {
                return Ok(mid);
            }
            if perp > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    Err(CalibrationError::NonConvergence { best_beta: best.0, best_perplexity: best.2 })
}

/// All-pairs squared distances, row-major `n x n`.
pub fn pairwise_squared_distances(data: &DenseMatrix) -> Vec<f64> {
    let n = data.rows();
    par::map_range(n, |i| (0..n).map(|j| squared_distance(data.row(i), data.row(j))).collect::<Vec<f64>>())
        .into_iter()
        .flatten()
        .collect()
}

/// Row-conditional affinities `p(j|i)` (row-major, zero diagonal) and the
/// number of rows whose calibration fell back to the best or uniform beta.
pub fn conditional_affinities(distances: &[f64], n: usize, perplexity: f64) -> (Vec<f64>, usize) {
    let rows = par::map_range(n, |i| {
        let row: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| distances[i * n + j]).collect();
        let (beta, ok) = match perplexity_calibrate(&row, perplexity) {
            Ok(b) => (b, true),
            Err(CalibrationError::NonConvergence { best_beta, .. }) => (best_beta, false),
            Err(CalibrationError::DegenerateRow { .. }) => (0.0, false),
        };
        let (p, _) = conditional_row(&row, beta);
        let mut full = Vec::with_capacity(n);
        full.extend_from_slice(&p[..i]);
        full.push(0.0);
        full.extend_from_slice(&p[i..]);
        (full, ok)
    });
    let fallbacks = rows.iter().filter(|(_, ok)| !ok).count();
    (rows.into_iter().flat_map(|(r, _)| r).collect(), fallbacks)
}

/// Symmetric joint affinities `(p(j|i) + p(i|j)) / 2n`, floored off the
/// diagonal and renormalized to sum to one.
pub fn joint_affinities(conditional: &[f64], n: usize) -> Vec<f64> {
    let denom = 2.0 * n as f64;
    let mut p = par::map_range(n, |i| {
        (0..n)
            .map(
                |j| if i == j { 0.0 } else { ((conditional[i * n + j] + conditional[j * n + i]) / denom).max(P_FLOOR) },
            )
            .collect::<Vec<f64>>()
    })
    .into_iter()
    .flatten()
    .collect::<Vec<f64>>();
    let row_sums = par::map_range(n, |i| p[i * n..(i + 1) * n].iter().sum::<f64>());
    let total: f64 = row_sums.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    p
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KlCheckpoint {
    pub iteration: usize,
    pub kl: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Projection2D {
    pub points: Vec<[f64; 2]>,
    pub params: TsneParams,
    pub final_kl: f64,
    /// KL divergence before update `iteration` (every 50 iterations, at the
    /// end of exaggeration, and after the last update).
    pub kl_trace: Vec<KlCheckpoint>,
    /// Rows whose perplexity search missed the target tolerance.
    pub uncalibrated_rows: usize,
}

impl Projection2D {
    pub fn kl_at(&self, iteration: usize) -> Option<f64> {
        self.kl_trace.iter().find(|c| c.iteration == iteration).map(|c| c.kl)
    }
}

struct RowTerms {
    attract: [f64; 2],
    repulse: [f64; 2],
    z: f64,
    kl: f64,
}

fn row_terms(i: usize, y: &[f64], p: &[f64], n: usize, exaggeration: f64, with_kl: bool) -> RowTerms {
    let (yi0, yi1) = (y[2 * i], y[2 * i + 1]);
    let mut t = RowTerms { attract: [0.0; 2], repulse: [0.0; 2], z: 0.0, kl: 0.0 };
    for j in 0..n {
        if j == i {
            continue;
        }
        let (d0, d1) = (yi0 - y[2 * j], yi1 - y[2 * j + 1]);
        let num = 1.0 / (1.0 + d0 * d0 + d1 * d1);
        let pij = p[i * n + j];
        let a = exaggeration * pij * num;
        let r = num * num;
        t.attract[0] += a * d0;
        t.attract[1] += a * d1;
        t.repulse[0] += r * d0;
        t.repulse[1] += r * d1;
        t.z += num;
        if with_kl && pij > 0.0 {
            t.kl += pij * (pij / num).ln();
        }
    }
    t
}

/// Returns the gradient and, if requested, KL(P || Q) at `y`.
fn gradient(y: &[f64], p: &[f64], n: usize, exaggeration: f64, with_kl: bool) -> (Vec<f64>, f64) {
    let terms = par::map_range(n, |i| row_terms(i, y, p, n, exaggeration, with_kl));
    let z: f64 = terms.iter().map(|t| t.z).sum();
    let mut grad = vec![0.0; 2 * n];
    for (i, t) in terms.iter().enumerate() {
        grad[2 * i] = 4.0 * (t.attract[0] - t.repulse[0] / z);
        grad[2 * i + 1] = 4.0 * (t.attract[1] - t.repulse[1] / z);
    }
    let kl = if with_kl {
        let p_total: f64 = p.iter().sum();
        (terms.iter().map(|t| t.kl).sum::<f64>() + p_total * z.ln()).max(0.0)
    } else {
        0.0
    };
    (grad, kl)
}

fn recenter(y: &mut [f64]) {
    let n = (y.len() / 2) as f64;
    let (mut mx, mut my) = (0.0, 0.0);
    for pt in y.chunks(2) {
        mx += pt[0];
        my += pt[1];
    }
    let (mx, my) = (mx / n, my / n);
    for pt in y.chunks_mut(2) {
        pt[0] -= mx;
        pt[1] -= my;
    }
}

fn validate(rows: usize, params: &TsneParams) -> Result<(), TsneError> {
    if rows < 4 {
        return Err(TsneError::TooFewRows(rows));
    }
    if params.perplexity.is_nan() || params.perplexity <= 0.0 {
        return Err(TsneError::InvalidParams("perplexity must be positive".into()));
    }
    let limit = (rows - 1) as f64 / 3.0;
    if params.perplexity >= limit {
        return Err(TsneError::PerplexityTooLarge { perplexity: params.perplexity, limit });
    }
    if params.iterations < params.exaggeration_iterations {
        return Err(TsneError::InvalidParams(format!(
            "iterations ({}) must be at least {}",
            params.iterations, params.exaggeration_iterations
        )));
    }
    if params.learning_rate.is_nan() || params.learning_rate <= 0.0 || !params.early_exaggeration.is_finite() {
        return Err(TsneError::InvalidParams("learning rate and exaggeration must be positive and finite".into()));
    }
    Ok(())
}

/// Exact t-SNE embedding of the rows of `data` into the plane.
///
/// Results are bit-identical for a fixed seed regardless of thread count.
pub fn tsne(data: &DenseMatrix, params: &TsneParams) -> Result<Projection2D, TsneError> {
    let n = data.rows();
    validate(n, params)?;
    if data.data().iter().any(|v| !v.is_finite()) {
        return Err(TsneError::NonFinite);
    }

    let distances = pairwise_squared_distances(data);
    let (conditional, uncalibrated_rows) = conditional_affinities(&distances, n, params.perplexity);
    drop(distances);
    let p = joint_affinities(&conditional, n);
    drop(conditional);

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let normal = Normal::new(0.0, INITIAL_STD).expect("valid std");
    let mut y: Vec<f64> = (0..2 * n).map(|_| normal.sample(&mut rng)).collect();
    let mut velocity = vec![0.0; 2 * n];
    let mut gains = vec![1.0; 2 * n];
    let mut kl_trace = Vec::new();

    for t in 0..params.iterations {
        let early = t < params.exaggeration_iterations;
        let exaggeration = if early { params.early_exaggeration } else { 1.0 };
        let momentum = if early { params.initial_momentum } else { params.final_momentum };
        let checkpoint = t % KL_EVERY == 0 || t == params.exaggeration_iterations;
        let (grad, _) = gradient(&y, &p, n, exaggeration, false);
        if checkpoint {
            let (_, kl) = gradient(&y, &p, n, 1.0, true);
            kl_trace.push(KlCheckpoint { iteration: t, kl });
        }
        for k in 0..2 * n {
            let g = grad[k];
            gains[k] =
                if (g > 0.0) != (velocity[k] > 0.0) { gains[k] + 0.2 } else { (gains[k] * 0.8f64).max(MIN_GAIN) };
            velocity[k] = momentum * velocity[k] - params.learning_rate * gains[k] * g;
            y[k] += velocity[k];
        }
        recenter(&mut y);
    }
    let (_, final_kl) = gradient(&y, &p, n, 1.0, true);
    kl_trace.push(KlCheckpoint { iteration: params.iterations, kl: final_kl });

    Ok(Projection2D {
        points: y.chunks(2).map(|c| [c[0], c[1]]).collect(),
        params: params.clone(),
        final_kl,
        kl_trace,
        uncalibrated_rows,
    })
}

/// Row sizes above this are slow enough for exact t-SNE that callers should subsample.
pub const DESK_SCALE_ROWS: usize = 5_000;

/// `n` distinct row indices out of `rows`, ascending, chosen by `seed`.
pub fn subsample_rows(rows: usize, n: usize, seed: u64) -> Vec<usize> {
    if n >= rows {
        return (0..rows).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, rows, n).into_vec();
    picked.sort_unstable();
    picked
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectedPoint {
    #[serde(flatten)]
    pub page: PageRef,
    pub x: f64,
    pub y: f64,
}

/// Contents of a `.projection.json` artifact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionFile {
    pub params: TsneParams,
    pub final_kl: f64,
    pub points: Vec<ProjectedPoint>,
}

impl ProjectionFile {
    pub fn new(projection: &Projection2D, pages: &[PageRef]) -> Self {
        assert_eq!(projection.points.len(), pages.len(), "one page per projected row");
        ProjectionFile {
            params: projection.params.clone(),
            final_kl: projection.final_kl,
            points: pages
                .iter()
                .zip(&projection.points)
                .map(|(page, [x, y])| ProjectedPoint { page: page.clone(), x: *x, y: *y })
                .collect(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), ProjectionIoError> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, ProjectionIoError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
