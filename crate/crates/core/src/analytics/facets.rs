use std::collections::HashMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusManifest, DocumentRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Facet {
    BaseUrl,
    PageCount,
}

impl std::str::FromStr for Facet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "base_url" => Ok(Facet::BaseUrl),
            "page_count" | "page_count_bucket" => Ok(Facet::PageCount),
            other => Err(format!("unknown facet {other:?} (expected base_url or page_count)")),
        }
    }
}

/// Fixed page-count buckets, in display order.
pub const PAGE_BUCKETS: [&str; 6] = ["1", "2-5", "6-20", "21-100", "100+", "null"];

/// Bucket label for a page count. `100+` starts at 101.
pub fn page_count_bucket(pages: Option<u32>) -> &'static str {
    match pages {
        None | Some(0) => "null",
        Some(1) => "1",
        Some(2..=5) => "2-5",
        Some(6..=20) => "6-20",
        Some(21..=100) => "21-100",
        Some(_) => "100+",
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FacetBucket {
    pub label: String,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FacetTable {
    pub facet: String,
    pub buckets: Vec<FacetBucket>,
    pub total: u64,
}

impl FacetTable {
    /// Fraction of `total` held by the first `n` buckets.
    pub fn top_share(&self, n: usize) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.buckets.iter().take(n).map(|b| b.count).sum::<u64>() as f64 / self.total as f64
    }

    pub fn count(&self, label: &str) -> Option<u64> {
        self.buckets.iter().find(|b| b.label == label).map(|b| b.count)
    }

    pub fn render_text(&self) -> String {
        let width = self.buckets.iter().map(|b| b.label.len()).max().unwrap_or(0).max(self.facet.len());
        let mut out = String::new();
        writeln!(out, "{:<width$}  {:>8}", self.facet, "count").unwrap();
        for b in &self.buckets {
            writeln!(out, "{:<width$}  {:>8}", b.label, b.count).unwrap();
        }
        writeln!(out, "{:<width$}  {:>8}", "total", self.total).unwrap();
        out
    }
}

/// Histogram of a manifest over one facet.
///
/// Base-URL buckets are ordered by count descending then label ascending;
/// page-count buckets use the fixed [`PAGE_BUCKETS`] order, zeros included.
pub fn facet_histogram(manifest: &CorpusManifest, facet: Facet) -> FacetTable {
    facet_histogram_of(manifest.records(), facet)
}

pub fn facet_histogram_of(records: &[DocumentRecord], facet: Facet) -> FacetTable {
    let total = records.len() as u64;
    match facet {
        Facet::BaseUrl => {
            let mut counts: HashMap<&str, u64> = HashMap::new();
            for r in records {
                *counts.entry(r.base_url.as_str()).or_insert(0) += 1;
            }
            let mut buckets: Vec<FacetBucket> =
                counts.into_iter().map(|(label, count)| FacetBucket { label: label.to_string(), count }).collect();
            buckets.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.label.cmp(&b.label)));
            FacetTable { facet: "base_url".into(), buckets, total }
        }
        Facet::PageCount => {
            let mut counts = [0u64; PAGE_BUCKETS.len()];
            for r in records {
                counts[bucket_index(r.page_count)] += 1;
            }
            let buckets = PAGE_BUCKETS
                .iter()
                .zip(counts)
                .map(|(label, count)| FacetBucket { label: label.to_string(), count })
                .collect();
            FacetTable { facet: "page_count".into(), buckets, total }
        }
    }
}

fn bucket_index(pages: Option<u32>) -> usize {
    let label = page_count_bucket(pages);
    PAGE_BUCKETS.iter().position(|b| *b == label).expect("label from PAGE_BUCKETS")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BucketPages {
    pub label: String,
    pub documents: u64,
    pub pages: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageTotals {
    pub buckets: Vec<BucketPages>,
    /// Sum of the bucket totals.
    pub overall: u64,
}

impl PageTotals {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{:<8}  {:>9}  {:>11}", "pages", "documents", "total_pages").unwrap();
        for b in &self.buckets {
            writeln!(out, "{:<8}  {:>9}  {:>11}", b.label, b.documents, b.pages).unwrap();
        }
        writeln!(
            out,
            "{:<8}  {:>9}  {:>11}",
            "total",
            self.buckets.iter().map(|b| b.documents).sum::<u64>(),
            self.overall
        )
        .unwrap();
        out
    }
}

/// Documents and summed page counts per page-count bucket.
pub fn corpus_page_totals(manifest: &CorpusManifest) -> PageTotals {
    corpus_page_totals_of(manifest.records())
}

pub fn corpus_page_totals_of(records: &[DocumentRecord]) -> PageTotals {
    let mut docs = [0u64; PAGE_BUCKETS.len()];
    let mut pages = [0u64; PAGE_BUCKETS.len()];
    for r in records {
        let i = bucket_index(r.page_count);
        docs[i] += 1;
        pages[i] += r.page_count.unwrap_or(0) as u64;
    }
    let buckets: Vec<BucketPages> = PAGE_BUCKETS
        .iter()
        .enumerate()
        .map(|(i, label)| BucketPages { label: label.to_string(), documents: docs[i], pages: pages[i] })
        .collect();
    let overall = pages.iter().sum();
    PageTotals { buckets, overall }
}

/// Records matching optional base-URL and page-bucket filters.
pub fn filter_records<'a>(
    records: &'a [DocumentRecord],
    base_url: Option<&'a str>,
    bucket: Option<&'a str>,
) -> impl Iterator<Item = (usize, &'a DocumentRecord)> + 'a {
    records.iter().enumerate().filter(move |(_, r)| {
        base_url.is_none_or(|b| r.base_url == b) && bucket.is_none_or(|b| page_count_bucket(r.page_count) == b)
    })
}
