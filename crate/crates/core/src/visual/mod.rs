//! Dense page vectors: the `EMB1` store, the built-in raster descriptor,
//! import of externally computed embeddings, and cosine similarity.

pub mod features;
pub mod store;

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::corpus::{DocumentId, PageRef};

pub use features::{builtin_page_features, PageFeatures, PageRaster, FEATURE_DIM};
pub use store::{front_page_rows, open_store, read_store, write_store, EmbeddingStore, StoreError, StoreWriter};

/// Dimension of penultimate-layer CNN embeddings.
pub const EXTERNAL_DIM: usize = 2048;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimilarityError {
    #[error("zero vector")]
    ZeroVector,
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
}

/// Cosine of the angle between `a` and `b`, clamped to [-1, 1].
pub fn cosine_similarity(a: &[f32], b: &[f32]) -> Result<f64, SimilarityError> {
    if a.len() != b.len() {
        return Err(SimilarityError::DimMismatch(a.len(), b.len()));
    }
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as f64, y as f64);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(SimilarityError::ZeroVector);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Error)]
pub enum ImportError {
    #[error("{path}: line {line}: {message}")]
    Format { path: PathBuf, line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Deserialize)]
struct EmbeddingLine {
    doc_id: DocumentId,
    page_index: u32,
    vector: Vec<f32>,
}

/// Streams `{doc_id, page_index, vector}` JSON lines into an `EMB1` store,
/// L2-normalizing each vector. Zero, non-finite, duplicate or wrong-length
/// vectors are rejected with the offending line number.
pub fn import_embeddings(input: &Path, output: &Path, dim: usize) -> Result<u64, ImportError> {
    let reader =
        BufReader::new(File::open(input).map_err(|source| ImportError::Io { path: input.to_path_buf(), source })?);
    let mut writer = StoreWriter::create(output, dim)?;
    let mut seen = std::collections::HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let fail = |message: String| ImportError::Format { path: input.to_path_buf(), line: i + 1, message };
        let line = line.map_err(|source| ImportError::Io { path: input.to_path_buf(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let l: EmbeddingLine = serde_json::from_str(&line).map_err(|e| fail(e.to_string()))?;
        if l.vector.len() != dim {
            return Err(fail(format!("vector has {} values, expected {dim}", l.vector.len())));
        }
        if l.vector.iter().any(|v| !v.is_finite()) {
            return Err(fail("non-finite value".into()));
        }
        let mut v = l.vector;
        if !store::normalize_in_place(&mut v) {
            return Err(fail("zero vector".into()));
        }
        let page = PageRef::new(l.doc_id, l.page_index);
        if !seen.insert(page.clone()) {
            return Err(fail(format!("duplicate page {page}")));
        }
        writer.push(&page, &v)?;
    }
    Ok(writer.finish()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::derive_document_id;
    use proptest::prelude::*;

    #[test]
    fn cosine_examples() {
        assert!((cosine_similarity(&[0.3, -2.0], &[0.3, -2.0]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let s = std::f32::consts::FRAC_1_SQRT_2;
        let c = cosine_similarity(&[s, s], &[1.0, 0.0]).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6);
        assert_eq!(cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]), Err(SimilarityError::ZeroVector));
        assert_eq!(cosine_similarity(&[1.0], &[1.0, 0.0]), Err(SimilarityError::DimMismatch(1, 2)));
    }

    #[test]
    fn import_normalizes_and_validates() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("emb.jsonl");
        let id = derive_document_id(b"doc");
        std::fs::write(
            &input,
            format!(
                "{{\"doc_id\":\"{id}\",\"page_index\":0,\"vector\":[3,4,0]}}\n\
                 {{\"doc_id\":\"{id}\",\"page_index\":1,\"vector\":[0,0,2]}}\n"
            ),
        )
        .unwrap();
        let out = dir.path().join("emb.emb");
        assert_eq!(import_embeddings(&input, &out, 3).unwrap(), 2);
        let store = read_store(&out).unwrap();
        assert_eq!(store.row(0), &[0.6, 0.8, 0.0]);
        assert_eq!(store.row(1), &[0.0, 0.0, 1.0]);

        std::fs::write(&input, format!("{{\"doc_id\":\"{id}\",\"page_index\":0,\"vector\":[0,0,0]}}\n")).unwrap();
        assert!(matches!(import_embeddings(&input, &out, 3), Err(ImportError::Format { line: 1, .. })));
        assert!(matches!(import_embeddings(&input, &out, 4), Err(ImportError::Format { .. })));
    }

    proptest! {
        #[test]
        fn cosine_symmetric_and_bounded(
            a in proptest::collection::vec(-10.0f32..10.0, 8),
            b in proptest::collection::vec(-10.0f32..10.0, 8),
        ) {
            if let (Ok(x), Ok(y)) = (cosine_similarity(&a, &b), cosine_similarity(&b, &a)) {
                prop_assert_eq!(x, y);
                prop_assert!(x.abs() <= 1.0 + 1e-9);
            }
        }
    }
}
