use std::collections::HashSet;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::AnalyticsError;
use crate::text::{SparseVector, Vocabulary};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedTerm {
    pub term: String,
    pub weight: f64,
}

/// Highest-weight terms of a group's mean TF-IDF vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermReport {
    pub group_key: String,
    pub documents: usize,
    pub terms: Vec<RankedTerm>,
}

impl TermReport {
    pub fn term_list(&self) -> Vec<&str> {
        self.terms.iter().map(|t| t.term.as_str()).collect()
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{} ({} documents)", self.group_key, self.documents).unwrap();
        let width = self.terms.iter().map(|t| t.term.len()).max().unwrap_or(4);
        for (i, t) in self.terms.iter().enumerate() {
            writeln!(out, "{:>3}. {:<width$}  {:.6}", i + 1, t.term, t.weight).unwrap();
        }
        out
    }
}

/// Arithmetic mean of sparse vectors sharing a dimension.
pub fn centroid(vectors: &[&SparseVector]) -> Result<Vec<f64>, AnalyticsError> {
    let first = vectors.first().ok_or(AnalyticsError::EmptyGroup)?;
    let dim = first.dim;
    let mut sum = vec![0.0; dim];
    for v in vectors {
        if v.dim != dim {
            return Err(AnalyticsError::DimMismatch(dim, v.dim));
        }
        for (i, w) in v.iter() {
            sum[i as usize] += w;
        }
    }
    let n = vectors.len() as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    Ok(sum)
}

/// Every nonzero term of `weights`, by weight descending then term ascending.
pub fn rank_terms(weights: &[f64], vocab: &Vocabulary) -> Vec<RankedTerm> {
    let mut ranked: Vec<RankedTerm> = weights
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(i, &w)| RankedTerm { term: vocab.term(i).to_string(), weight: w })
        .collect();
    ranked.sort_by(|a, b| b.weight.total_cmp(&a.weight).then_with(|| a.term.cmp(&b.term)));
    ranked
}

/// Top `top_k` centroid terms of a group. With `prune`, the full ranking is
/// pruned first and the report refilled from what remains.
pub fn group_centroid_terms(
    group_key: &str,
    vectors: &[&SparseVector],
    vocab: &Vocabulary,
    top_k: usize,
    prune: bool,
) -> Result<TermReport, AnalyticsError> {
    let mean = centroid(vectors)?;
    let mut ranked = rank_terms(&mean, vocab);
    if prune {
        ranked = prune_terms(ranked);
    }
    ranked.truncate(top_k);
    Ok(TermReport { group_key: group_key.to_string(), documents: vectors.len(), terms: ranked })
}

/// Suffixes stripped when comparing stems, in order of attempt.
const SUFFIXES: [&str; 4] = ["ing", "ed", "es", "s"];
const MIN_STEM: usize = 3;

/// Strips the first matching suffix that leaves at least three characters.
pub fn stem(term: &str) -> &str {
    for suffix in SUFFIXES {
        if let Some(s) = term.strip_suffix(suffix) {
            if s.chars().count() >= MIN_STEM {
                return s;
            }
        }
    }
    term
}

/// Drops numeric and single-character terms, and keeps only the first
/// (highest-ranked) term of each stem.
pub fn prune_terms(ranked: Vec<RankedTerm>) -> Vec<RankedTerm> {
    let mut seen = HashSet::new();
    ranked
        .into_iter()
        .filter(|t| !t.term.chars().all(|c| c.is_ascii_digit()))
        .filter(|t| t.term.chars().count() > 1)
        .filter(|t| seen.insert(stem(&t.term).to_string()))
        .collect()
}
