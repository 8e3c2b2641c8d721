//! Core corpus types: content-addressed document identity, per-document
//! records, page references, and the reproducible corpus manifest.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Lowercase hex SHA-256 of a PDF's bytes.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct DocumentId(String);

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid document id {0:?}: expected 64 lowercase hex characters")]
pub struct InvalidDocumentId(pub String);

impl DocumentId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl FromStr for DocumentId {
    type Err = InvalidDocumentId;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let ok = s.len() == 64 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'));
        if ok {
            Ok(DocumentId(s.to_owned()))
        } else {
            Err(InvalidDocumentId(s.to_owned()))
        }
    }
}

impl TryFrom<String> for DocumentId {
    type Error = InvalidDocumentId;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<DocumentId> for String {
    fn from(id: DocumentId) -> String {
        id.0
    }
}

impl fmt::Display for DocumentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Derives the identity of a document from its raw bytes.
pub fn derive_document_id(bytes: &[u8]) -> DocumentId {
    DocumentId(hex::encode(Sha256::digest(bytes)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocumentStatus {
    Ok,
    Encrypted,
    Malformed,
}

impl DocumentStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            DocumentStatus::Ok => "ok",
            DocumentStatus::Encrypted => "encrypted",
            DocumentStatus::Malformed => "malformed",
        }
    }
}

/// One archived PDF.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocumentRecord {
    pub id: DocumentId,
    pub source_url: String,
    pub base_url: String,
    pub agency: Option<String>,
    pub file_size: u64,
    pub page_count: Option<u32>,
    pub status: DocumentStatus,
    pub fetch_timestamp: Option<String>,
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("duplicate document id {0}")]
    DuplicateId(DocumentId),
    #[error("record {id}: {reason}")]
    InvalidRecord { id: DocumentId, reason: String },
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl DocumentRecord {
    /// Checks the record-level invariants.
    pub fn validate(&self) -> Result<(), ManifestError> {
        let fail = |reason: String| ManifestError::InvalidRecord { id: self.id.clone(), reason };
        match (self.status, self.page_count) {
            (DocumentStatus::Ok, None) => return Err(fail("status ok without page_count".into())),
            (DocumentStatus::Ok, Some(0)) => return Err(fail("page_count must be positive".into())),
            (DocumentStatus::Encrypted | DocumentStatus::Malformed, Some(_)) => {
                return Err(fail(format!("status {} with page_count", self.status.as_str())))
            }
            _ => {}
        }
        let host = url::Url::parse(&self.source_url)
            .ok()
            .and_then(|u| u.host_str().map(str::to_ascii_lowercase))
            .ok_or_else(|| fail(format!("unparsable source_url {:?}", self.source_url)))?;
        if !host_has_suffix(&host, &self.base_url) {
            return Err(fail(format!("base_url {:?} is not a suffix of host {host:?}", self.base_url)));
        }
        if let Some(ts) = &self.fetch_timestamp {
            if ts.len() != 14 || !ts.bytes().all(|b| b.is_ascii_digit()) {
                return Err(fail(format!("fetch_timestamp {ts:?} is not 14 digits")));
            }
        }
        Ok(())
    }
}

fn host_has_suffix(host: &str, suffix: &str) -> bool {
    host == suffix || host.ends_with(&format!(".{suffix}"))
}

/// A page of a document, addressed by 0-based index.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PageRef {
    pub doc_id: DocumentId,
    pub page_index: u32,
}

impl PageRef {
    pub fn new(doc_id: DocumentId, page_index: u32) -> Self {
        PageRef { doc_id, page_index }
    }
}

impl fmt::Display for PageRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.doc_id, self.page_index)
    }
}

/// An ordered, deduplicated snapshot of a corpus.
#[derive(Clone, Debug)]
pub struct CorpusManifest {
    records: Vec<DocumentRecord>,
    corpus_id: String,
    created_at: String,
}

impl PartialEq for CorpusManifest {
    // created_at is bookkeeping, not content.
    fn eq(&self, other: &Self) -> bool {
        self.records == other.records
    }
}

impl CorpusManifest {
    /// Sorts records by id and validates them. Duplicate ids are rejected.
    pub fn new(mut records: Vec<DocumentRecord>) -> Result<Self, ManifestError> {
        records.sort_by(|a, b| a.id.cmp(&b.id));
        for pair in records.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(ManifestError::DuplicateId(pair[0].id.clone()));
            }
        }
        for r in &records {
            r.validate()?;
        }
        let corpus_id = corpus_digest(&records);
        Ok(CorpusManifest { records, corpus_id, created_at: chrono::Utc::now().format("%Y%m%d%H%M%S").to_string() })
    }

    pub fn records(&self) -> &[DocumentRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn corpus_id(&self) -> &str {
        &self.corpus_id
    }

    pub fn created_at(&self) -> &str {
        &self.created_at
    }

    pub fn get(&self, id: &DocumentId) -> Option<&DocumentRecord> {
        self.records.binary_search_by(|r| r.id.cmp(id)).ok().map(|i| &self.records[i])
    }

    /// Position of `id` in manifest order.
    pub fn ordinal(&self, id: &DocumentId) -> Option<usize> {
        self.records.binary_search_by(|r| r.id.cmp(id)).ok()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, ManifestError> {
        let mut records = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let r: DocumentRecord =
                serde_json::from_str(line).map_err(|source| ManifestError::Parse { line: i + 1, source })?;
            if !seen.insert(r.id.clone()) {
                return Err(ManifestError::DuplicateId(r.id));
            }
            records.push(r);
        }
        Self::new(records)
    }

    pub fn write(&self, path: &Path) -> Result<(), ManifestError> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(self.to_jsonl().as_bytes())?;
        w.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, ManifestError> {
        let mut text = String::new();
        for line in BufReader::new(File::open(path)?).lines() {
            text.push_str(&line?);
            text.push('\n');
        }
        let mut m = Self::from_jsonl(&text)?;
        if let Ok(modified) = std::fs::metadata(path).and_then(|m| m.modified()) {
            let t: chrono::DateTime<chrono::Utc> = modified.into();
            m.created_at = t.format("%Y%m%d%H%M%S").to_string();
        }
        Ok(m)
    }
}

fn corpus_digest(records: &[DocumentRecord]) -> String {
    let mut h = Sha256::new();
    for r in records {
        h.update(r.id.as_str().as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}
