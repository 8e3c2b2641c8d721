//! Relevance-feedback sessions over an embedding store: label pages, fit a
//! regularized logistic regression, score every row and re-rank.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{DocumentId, PageRef};
use crate::par;
use crate::visual::EmbeddingStore;

pub const DEFAULT_L2_LAMBDA: f64 = 1e-3;
pub const MAX_STEPS: usize = 500;
pub const GRADIENT_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_CHUNK_ROWS: usize = 4096;
const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;
const LANES: usize = 8;

#[derive(Debug, Error, PartialEq)]
pub enum LearnerError {
    #[error("training needs at least one positive and one negative label")]
    NeedBothClasses,
    #[error("page {0} is not in the embedding store")]
    UnknownPage(PageRef),
    #[error("session has no trained model")]
    NoModel,
    #[error("model dimension {model} does not match store dimension {store}")]
    DimMismatch { model: usize, store: usize },
    #[error("chunk size must be positive")]
    ZeroChunk,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    fn target(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }
}

impl std::str::FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "positive" | "pos" | "+" => Ok(Label::Positive),
            "negative" | "neg" | "-" => Ok(Label::Negative),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub final_loss: f64,
    /// Accepted descent steps.
    pub steps: usize,
    pub gradient_norm: f64,
    /// Loss at the start and after each accepted step.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub loss_trace: Vec<f64>,
}

/// Numerically stable `ln(1 + e^u)`.
fn softplus(u: f64) -> f64 {
    u.max(0.0) + (-u.abs()).exp().ln_1p()
}

fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// Regularized mean log-loss and its gradient.
///
/// `params` holds the weights followed by the bias; `targets` are ±1. The
/// bias is not regularized.
pub fn loss_and_grad(params: &[f64], xs: &[Vec<f64>], targets: &[f64], l2_lambda: f64) -> (f64, Vec<f64>) {
    let dim = params.len() - 1;
    let (w, b) = (&params[..dim], params[dim]);
    let m = xs.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; dim + 1];
    for (x, &y) in xs.iter().zip(targets) {
        let z: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b;
        loss += softplus(-y * z);
        let coef = -y * sigmoid(-y * z) / m;
        for (g, xi) in grad[..dim].iter_mut().zip(x) {
            *g += coef * xi;
        }
        grad[dim] += coef;
    }
    loss /= m;
    let mut reg = 0.0;
    for (g, wi) in grad[..dim].iter_mut().zip(w) {
        *g += l2_lambda * wi;
        reg += wi * wi;
    }
    (loss + 0.5 * l2_lambda * reg, grad)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Fits the classifier by gradient descent from zero with Armijo backtracking.
///
/// Panics if `xs` is empty or ragged.
pub fn fit_logistic(xs: &[Vec<f64>], targets: &[f64], l2_lambda: f64) -> ModelState {
    assert!(!xs.is_empty() && xs.len() == targets.len());
    let dim = xs[0].len();
    assert!(xs.iter().all(|x| x.len() == dim), "ragged training rows");

    let mut params = vec![0.0; dim + 1];
    let (mut loss, mut grad) = loss_and_grad(&params, xs, targets, l2_lambda);
    let mut trace = vec![loss];
    let mut steps = 0;
    while steps < MAX_STEPS {
        let gnorm2: f64 = grad.iter().map(|g| g * g).sum();
        if gnorm2.sqrt() < GRADIENT_TOLERANCE {
            break;
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = params.iter().zip(&grad).map(|(p, g)| p - step * g).collect();
            let (trial_loss, trial_grad) = loss_and_grad(&trial, xs, targets, l2_lambda);
            if trial_loss <= loss - ARMIJO_C * step * gnorm2 {
                accepted = Some((trial, trial_loss, trial_grad));
                break;
            }
            step *= 0.5;
        }
        let Some((p, l, g)) = accepted else { break };
        debug_assert!(l <= loss);
        params = p;
        loss = l;
        grad = g;
        trace.push(loss);
        steps += 1;
    }
    let bias = params.pop().expect("bias slot");
    ModelState { weights: params, bias, final_loss: loss, steps, gradient_norm: norm(&grad), loss_trace: trace }
}

/// Margin `w . x + b` with a fixed summation order: eight interleaved lane
/// sums, combined left to right, then the bias.
pub fn score_row(weights: &[f64], bias: f64, x: &[f32]) -> f64 {
    let mut lanes = [0.0f64; LANES];
    let mut wc = weights.chunks_exact(LANES);
    let mut xc = x.chunks_exact(LANES);
    for (w, v) in (&mut wc).zip(&mut xc) {
        for l in 0..LANES {
            lanes[l] += w[l] * v[l] as f64;
        }
    }
    for (l, (w, v)) in wc.remainder().iter().zip(xc.remainder()).enumerate() {
        lanes[l] += w * *v as f64;
    }
    lanes.iter().sum::<f64>() + bias
}

/// Scores every store row, `chunk_rows` rows per parallel task. Output is
/// identical for any chunk size and thread count.
pub fn score_all(model: &ModelState, store: &EmbeddingStore, chunk_rows: usize) -> Result<Vec<f64>, LearnerError> {
    let dim = store.dim();
    if model.weights.len() != dim {
        return Err(LearnerError::DimMismatch { model: model.weights.len(), store: dim });
    }
    if chunk_rows == 0 {
        return Err(LearnerError::ZeroChunk);
    }
    let mut scores = vec![0.0; store.rows()];
    if scores.is_empty() {
        return Ok(scores);
    }
    par::zip_chunks(store.matrix(), chunk_rows * dim, &mut scores, chunk_rows, |_, rows, out| {
        for (x, s) in rows.chunks_exact(dim).zip(out.iter_mut()) {
            *s = score_row(&model.weights, model.bias, x);
        }
    });
    Ok(scores)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rollup {
    #[default]
    Page,
    /// One entry per document, scored by its best page.
    Document,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedPage {
    #[serde(flatten)]
    pub page: PageRef,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub entries: Vec<RankedPage>,
    pub excluded_labeled: bool,
}

/// Orders rows by descending score, ties by page id, keeping the top `limit`.
pub fn rank_scores(
    pages: &[PageRef],
    scores: &[f64],
    limit: usize,
    skip: impl Fn(&PageRef) -> bool,
) -> Vec<RankedPage> {
    let mut idx: Vec<usize> = (0..pages.len()).filter(|&i| !skip(&pages[i])).collect();
    let cmp = |a: &usize, b: &usize| scores[*b].total_cmp(&scores[*a]).then_with(|| pages[*a].cmp(&pages[*b]));
    if limit < idx.len() {
        if limit == 0 {
            return Vec::new();
        }
        idx.select_nth_unstable_by(limit - 1, cmp);
        idx.truncate(limit);
    }
    idx.sort_unstable_by(cmp);
    idx.into_iter().map(|i| RankedPage { page: pages[i].clone(), score: scores[i] }).collect()
}

fn document_rollup(pages: &[PageRef], scores: &[f64], skip: impl Fn(&PageRef) -> bool) -> (Vec<PageRef>, Vec<f64>) {
    let mut best: BTreeMap<&DocumentId, (usize, f64)> = BTreeMap::new();
    for (i, (p, &s)) in pages.iter().zip(scores).enumerate() {
        if skip(p) {
            continue;
        }
        let e = best.entry(&p.doc_id).or_insert((i, s));
        if s > e.1 || (s == e.1 && p < &pages[e.0]) {
            *e = (i, s);
        }
    }
    best.into_values().map(|(i, s)| (pages[i].clone(), s)).unzip()
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabelSession {
    pub session_id: String,
    pub labels: BTreeMap<PageRef, Label>,
    pub model: Option<ModelState>,
    pub created_at: String,
    pub updated_at: String,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

pub fn create_session() -> LabelSession {
    let t = now();
    LabelSession {
        session_id: uuid::Uuid::new_v4().to_string(),
        labels: BTreeMap::new(),
        model: None,
        created_at: t.clone(),
        updated_at: t,
    }
}

impl LabelSession {
    /// Records a label, replacing any earlier label for the page.
    pub fn add_label(&mut self, store: &EmbeddingStore, page: PageRef, label: Label) -> Result<(), LearnerError> {
        if !store.contains(&page) {
            return Err(LearnerError::UnknownPage(page));
        }
        self.labels.insert(page, label);
        self.updated_at = now();
        Ok(())
    }

    pub fn remove_label(&mut self, page: &PageRef) -> Option<Label> {
        let old = self.labels.remove(page);
        if old.is_some() {
            self.updated_at = now();
        }
        old
    }

    pub fn counts(&self) -> (usize, usize) {
        let pos = self.labels.values().filter(|l| **l == Label::Positive).count();
        (pos, self.labels.len() - pos)
    }

    /// Fits a model to the labeled rows and stores it on the session.
    pub fn train(&mut self, store: &EmbeddingStore, l2_lambda: f64) -> Result<&ModelState, LearnerError> {
        let (pos, neg) = self.counts();
        if pos == 0 || neg == 0 {
            return Err(LearnerError::NeedBothClasses);
        }
        let mut xs = Vec::with_capacity(self.labels.len());
        let mut ys = Vec::with_capacity(self.labels.len());
        for (page, label) in &self.labels {
            let i = store.position(page).ok_or_else(|| LearnerError::UnknownPage(page.clone()))?;
            xs.push(store.row(i).iter().map(|&v| v as f64).collect());
            ys.push(label.target());
        }
        self.model = Some(fit_logistic(&xs, &ys, l2_lambda));
        self.updated_at = now();
        Ok(self.model.as_ref().expect("just set"))
    }

    pub fn rank(
        &self,
        store: &EmbeddingStore,
        limit: usize,
        exclude_labeled: bool,
        rollup: Rollup,
    ) -> Result<Ranking, LearnerError> {
        let model = self.model.as_ref().ok_or(LearnerError::NoModel)?;
        let scores = score_all(model, store, DEFAULT_CHUNK_ROWS)?;
        let skip = |p: &PageRef| exclude_labeled && self.labels.contains_key(p);
        let entries = match rollup {
            Rollup::Page => rank_scores(store.row_ids(), &scores, limit, skip),
            Rollup::Document => {
                let (pages, best) = document_rollup(store.row_ids(), &scores, skip);
                rank_scores(&pages, &best, limit, |_| false)
            }
        };
        Ok(Ranking { entries, excluded_labeled: exclude_labeled })
    }

    pub fn snapshot(&self) -> SessionSnapshot {
        SessionSnapshot {
            session_id: self.session_id.clone(),
            created_at: self.created_at.clone(),
            updated_at: self.updated_at.clone(),
            labels: self
                .labels
                .iter()
                .map(|(p, l)| LabelEntry { doc_id: p.doc_id.clone(), page_index: p.page_index, label: *l })
                .collect(),
            model: self.model.as_ref().map(|m| ModelState { loss_trace: Vec::new(), ..m.clone() }),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), SessionIoError> {
        let mut text = serde_json::to_string_pretty(&self.snapshot())?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, SessionIoError> {
        let snap: SessionSnapshot = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Ok(snap.into())
    }
}

#[derive(Debug, Error)]
pub enum SessionIoError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub doc_id: DocumentId,
    pub page_index: u32,
    pub label: Label,
}

/// `.session.json` contents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub session_id: String,
    pub created_at: String,
    pub updated_at: String,
    pub labels: Vec<LabelEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelState>,
}

impl From<SessionSnapshot> for LabelSession {
    fn from(s: SessionSnapshot) -> Self {
        LabelSession {
            session_id: s.session_id,
            labels: s.labels.into_iter().map(|e| (PageRef::new(e.doc_id, e.page_index), e.label)).collect(),
            model: s.model,
            created_at: s.created_at,
            updated_at: s.updated_at,
        }
    }
}
