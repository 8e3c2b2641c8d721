//! Corpus characterizations: facet histograms, per-group centroid terms and
//! k-means groupings.

pub mod facets;
pub mod kmeans;
pub mod terms;

use thiserror::Error;

pub use facets::{
    corpus_page_totals, facet_histogram, page_count_bucket, Facet, FacetBucket, FacetTable, PageTotals, PAGE_BUCKETS,
};
pub use kmeans::{cluster_documents, kmeans, ClusterParams, ClusterReport, ClusteringResult, DEFAULT_MAX_ITER};
pub use terms::{group_centroid_terms, prune_terms, stem, RankedTerm, TermReport};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AnalyticsError {
    #[error("group has no vectors")]
    EmptyGroup,
    #[error("vector dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("k must be at least 1")]
    InvalidK,
    #[error("k = {k} exceeds the number of rows ({rows})")]
    KTooLarge { k: usize, rows: usize },
    #[error("only {distinct} distinct rows for k = {k}")]
    DegenerateInput { distinct: usize, k: usize },
    #[error("input contains non-finite values")]
    NonFinite,
}
