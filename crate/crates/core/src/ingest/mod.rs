//! Corpus ingestion: CDX capture lines, base-URL derivation, structural PDF
//! metadata, and assembly of a [`CorpusManifest`] from a directory of PDFs.

pub mod cdx;
pub mod pdf;

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::corpus::{derive_document_id, CorpusManifest, DocumentRecord, DocumentStatus, ManifestError};
use crate::par;

pub use cdx::{parse_cdx, parse_cdx_line, CdxError, CdxField, CdxRecord, FieldOrder};
pub use pdf::{extract_pdf_metadata, PdfMeta};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BaseUrlError {
    #[error("unparsable url {0:?}")]
    UnparsableUrl(String),
    #[error("host of {0:?} has a single label")]
    SingleLabelHost(String),
    #[error("host of {0:?} is an IP address")]
    IpHost(String),
}

/// Registrable domain of a URL's host: the last two labels, lowercased.
pub fn derive_base_url(url: &str) -> Result<String, BaseUrlError> {
    let parsed = url::Url::parse(url).map_err(|_| BaseUrlError::UnparsableUrl(url.to_string()))?;
    let host = match parsed.host() {
        Some(url::Host::Domain(d)) => d.to_ascii_lowercase(),
        Some(_) => return Err(BaseUrlError::IpHost(url.to_string())),
        None => return Err(BaseUrlError::UnparsableUrl(url.to_string())),
    };
    let labels: Vec<&str> = host.trim_end_matches('.').split('.').collect();
    if labels.len() < 2 || labels.iter().any(|l| l.is_empty()) {
        return Err(BaseUrlError::SingleLabelHost(url.to_string()));
    }
    Ok(labels[labels.len() - 2..].join("."))
}

/// Human-readable publisher names for frequently seen government base URLs.
pub fn known_agency(base_url: &str) -> Option<&'static str> {
    Some(match base_url {
        "house.gov" => "United States House of Representatives",
        "gpo.gov" => "United States Government Publishing Office",
        "uscourts.gov" => "United States Courts",
        "idaho.gov" => "State of Idaho",
        "ky.gov" => "State of Kentucky",
        "usda.gov" => "United States Department of Agriculture",
        "nysed.gov" => "New York State Education Department",
        "noaa.gov" => "National Oceanic and Atmospheric Administration",
        "uspto.gov" => "United States Patent and Trademark Office",
        "wa.gov" => "State of Washington",
        "utah.gov" => "State of Utah",
        "nasa.gov" => "National Aeronautics and Space Administration",
        "senate.gov" => "United States Senate",
        "ca.gov" => "State of California",
        "fda.gov" => "U.S. Food and Drug Administration",
        "hawaii.gov" => "State of Hawaii",
        "mass.gov" => "Commonwealth of Massachusetts",
        "wi.gov" => "State of Wisconsin",
        "dhs.gov" => "U.S. Department of Homeland Security",
        "mt.gov" => "State of Montana",
        _ => return None,
    })
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("no *.pdf files in {0}")]
    EmptyCorpus(PathBuf),
    #[error("{0}: no CDX match and no .url sidecar")]
    MissingUrlProvenance(PathBuf),
    #[error("{path}: {source}")]
    BadUrl {
        path: PathBuf,
        #[source]
        source: BaseUrlError,
    },
    #[error("{path}: line {line}: {source}")]
    Cdx {
        path: PathBuf,
        line: usize,
        #[source]
        source: CdxError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Manifest(#[from] ManifestError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IngestError + '_ {
    move |source| IngestError::Io { path: path.to_path_buf(), source }
}

/// Source-URL provenance for a corpus directory.
#[derive(Clone, Debug)]
pub struct IngestOptions {
    pub cdx_path: Option<PathBuf>,
    /// Column layout used when the CDX file has no legend line.
    pub field_order: FieldOrder,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions { cdx_path: None, field_order: FieldOrder::cdx11() }
    }
}

/// CDX captures indexed by the two supported join keys.
struct CdxIndex {
    by_digest: HashMap<String, Vec<CdxRecord>>,
    by_filename: HashMap<String, Vec<CdxRecord>>,
}

impl CdxIndex {
    fn new(records: Vec<CdxRecord>) -> Self {
        let mut by_digest: HashMap<String, Vec<CdxRecord>> = HashMap::new();
        let mut by_filename: HashMap<String, Vec<CdxRecord>> = HashMap::new();
        for r in records {
            if let Some(d) = &r.digest {
                let d = d.strip_prefix("sha256:").unwrap_or(d).to_ascii_lowercase();
                by_digest.entry(d).or_default().push(r.clone());
            }
            if let Some(name) = url_basename(&r.original_url) {
                by_filename.entry(name).or_default().push(r);
            }
        }
        CdxIndex { by_digest, by_filename }
    }

    /// Earliest capture wins; ties go to the lexicographically smallest URL.
    fn lookup(&self, digest: &str, filename: &str) -> Option<&CdxRecord> {
        let candidates = self.by_digest.get(digest).or_else(|| self.by_filename.get(filename))?;
        candidates.iter().min_by(|a, b| (&a.timestamp, &a.original_url).cmp(&(&b.timestamp, &b.original_url)))
    }
}

fn url_basename(url: &str) -> Option<String> {
    let parsed = url::Url::parse(url).ok()?;
    let last = parsed.path_segments()?.next_back()?.to_string();
    (!last.is_empty()).then_some(last)
}

fn list_pdfs(dir: &Path) -> Result<Vec<PathBuf>, IngestError> {
    let mut pdfs = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        let is_pdf = path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("pdf"));
        if is_pdf && path.is_file() {
            pdfs.push(path);
        }
    }
    pdfs.sort();
    Ok(pdfs)
}

fn read_sidecar(pdf: &Path) -> Option<String> {
    let candidates = [pdf.with_extension("url"), {
        let mut p = pdf.as_os_str().to_owned();
        p.push(".url");
        PathBuf::from(p)
    }];
    candidates.iter().find_map(|p| {
        let text = std::fs::read_to_string(p).ok()?;
        let line = text.lines().next()?.trim().to_string();
        (!line.is_empty()).then_some(line)
    })
}

/// Builds a manifest with one record per distinct PDF under `corpus_dir`.
///
/// Files are processed in parallel; the result is sorted by id so it does
/// not depend on traversal order or worker count. Byte-identical files
/// collapse to one record, keeping the smallest source URL.
pub fn build_manifest(corpus_dir: &Path, opts: &IngestOptions) -> Result<CorpusManifest, IngestError> {
    let pdfs = list_pdfs(corpus_dir)?;
    if pdfs.is_empty() {
        return Err(IngestError::EmptyCorpus(corpus_dir.to_path_buf()));
    }
    let cdx = match &opts.cdx_path {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(io_err(path))?;
            let records = parse_cdx(&text, &opts.field_order).map_err(|(line, source)| IngestError::Cdx {
                path: path.clone(),
                line,
                source,
            })?;
            Some(CdxIndex::new(records))
        }
        None => None,
    };

    let results = par::map_slice(&pdfs, |path| -> Result<DocumentRecord, IngestError> {
        let bytes = std::fs::read(path).map_err(io_err(path))?;
        let id = derive_document_id(&bytes);
        let meta = extract_pdf_metadata(&bytes);
        let filename = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let (source_url, fetch_timestamp) = match cdx.as_ref().and_then(|c| c.lookup(id.as_str(), filename)) {
            Some(rec) => (rec.original_url.clone(), Some(rec.timestamp.clone())),
            None => (read_sidecar(path).ok_or_else(|| IngestError::MissingUrlProvenance(path.clone()))?, None),
        };
        let base_url =
            derive_base_url(&source_url).map_err(|source| IngestError::BadUrl { path: path.clone(), source })?;
        let status = if meta.encrypted {
            DocumentStatus::Encrypted
        } else if meta.page_count.is_some() {
            DocumentStatus::Ok
        } else {
            DocumentStatus::Malformed
        };
        Ok(DocumentRecord {
            id,
            agency: known_agency(&base_url).map(str::to_string),
            source_url,
            base_url,
            file_size: meta.file_size,
            page_count: meta.page_count,
            status,
            fetch_timestamp,
        })
    });

    let mut records = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    records.sort_by(|a, b| (&a.id, &a.source_url).cmp(&(&b.id, &b.source_url)));
    records.dedup_by(|later, earlier| later.id == earlier.id);
    Ok(CorpusManifest::new(records)?)
}
