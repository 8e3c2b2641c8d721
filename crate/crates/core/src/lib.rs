//! Indexing and analysis engine for corpora of web-archived PDF documents.
//!
//! The pipeline runs ingest (PDF metadata and CDX provenance into a
//! [`CorpusManifest`]), text featurization (TF-IDF), visual featurization
//! (an `EMB1` embedding store), corpus analytics, t-SNE projection and
//! relevance-feedback ranking.

pub mod analytics;
pub mod corpus;
pub mod ingest;
pub mod learner;
pub mod matrix;
pub mod par;
pub mod projection;
pub mod synth;
pub mod text;
pub mod visual;

pub use corpus::{derive_document_id, CorpusManifest, DocumentId, DocumentRecord, DocumentStatus, PageRef};
pub use matrix::DenseMatrix;
