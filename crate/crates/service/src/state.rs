//! Corpus artifacts loaded once at startup, plus the in-memory session table.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use pdfsift_core::analytics::{corpus_page_totals, facet_histogram, Facet, PageTotals};
use pdfsift_core::learner::{create_session, LabelSession, DEFAULT_L2_LAMBDA};
use pdfsift_core::projection::ProjectionFile;
use pdfsift_core::text::{InvertedIndex, TextArtifacts};
use pdfsift_core::visual::{open_store, EmbeddingStore};
use pdfsift_core::{CorpusManifest, DocumentId};
use serde::Serialize;
use tokio::sync::Mutex;

use crate::config::ServiceConfig;
use crate::ServeError;

pub type SharedSession = Arc<Mutex<LabelSession>>;

/// Text vectors joined to the manifest.
pub struct TextIndex {
    pub artifacts: TextArtifacts,
    pub index: InvertedIndex,
}

impl TextIndex {
    pub fn new(artifacts: TextArtifacts) -> Self {
        let index = InvertedIndex::build(&artifacts.vectors, artifacts.vocab.len());
        TextIndex { artifacts, index }
    }
}

/// Immutable corpus state shared by every request.
pub struct Corpus {
    pub manifest: CorpusManifest,
    pub text: Option<TextIndex>,
    pub store: Option<EmbeddingStore>,
    pub projection: Option<ProjectionFile>,
    pub rasters: Option<PathBuf>,
}

impl Corpus {
    pub fn new(manifest: CorpusManifest) -> Self {
        Corpus { manifest, text: None, store: None, projection: None, rasters: None }
    }

    /// Checks that every artifact refers only to manifest documents.
    pub fn validate(&self) -> Result<(), ServeError> {
        let known = |id: &DocumentId| self.manifest.get(id).is_some();
        let fail = |what: &str, id: &DocumentId| {
            Err(ServeError::ArtifactValidationFailed(format!("{what} refers to {id}, which is not in the manifest")))
        };
        if let Some(text) = &self.text {
            if let Some(id) = text.artifacts.ids.iter().find(|id| !known(id)) {
                return fail("text vectors file", id);
            }
        }
        if let Some(store) = &self.store {
            if let Some(p) = store.row_ids().iter().find(|p| !known(&p.doc_id)) {
                return fail("embedding store", &p.doc_id);
            }
        }
        if let Some(proj) = &self.projection {
            if let Some(p) = proj.points.iter().find(|p| !known(&p.page.doc_id)) {
                return fail("projection", &p.page.doc_id);
            }
        }
        if let Some(dir) = &self.rasters {
            if !dir.is_dir() {
                return Err(ServeError::ArtifactValidationFailed(format!("{} is not a directory", dir.display())));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ServiceOptions {
    /// Largest document set `POST /api/cluster` will accept.
    pub cluster_row_cap: usize,
    pub l2_lambda: f64,
    /// Where session snapshots are persisted, if anywhere.
    pub session_dir: Option<PathBuf>,
    /// Allowed CORS origins; empty allows any.
    pub allowed_origins: Vec<String>,
}

impl Default for ServiceOptions {
    fn default() -> Self {
        ServiceOptions {
            cluster_row_cap: 5_000,
            l2_lambda: DEFAULT_L2_LAMBDA,
            session_dir: None,
            allowed_origins: Vec::new(),
        }
    }
}

#[derive(Serialize)]
struct TextSummary {
    documents: usize,
    terms: usize,
}

#[derive(Serialize)]
struct StoreSummary {
    rows: usize,
    dim: usize,
    mapped: bool,
}

#[derive(Serialize)]
struct Summary<'a> {
    corpus_id: &'a str,
    created_at: &'a str,
    documents: usize,
    base_urls: usize,
    pages: PageTotals,
    status: BTreeMap<&'static str, usize>,
    text: Option<TextSummary>,
    store: Option<StoreSummary>,
    projection_points: Option<usize>,
    rasters: bool,
}

/// Response bodies that never change for the process lifetime.
pub struct Precomputed {
    pub summary: Bytes,
    pub base_url_facet: Bytes,
    pub page_count_facet: Bytes,
    pub projection: Option<Bytes>,
}

fn json_bytes<T: Serialize>(value: &T) -> Bytes {
    Bytes::from(serde_json::to_vec(value).expect("response serializes"))
}

impl Precomputed {
    fn new(c: &Corpus) -> Self {
        let m = &c.manifest;
        let mut status = BTreeMap::new();
        for r in m.records() {
            *status.entry(r.status.as_str()).or_insert(0) += 1;
        }
        let summary = Summary {
            corpus_id: m.corpus_id(),
            created_at: m.created_at(),
            documents: m.len(),
            base_urls: facet_histogram(m, Facet::BaseUrl).buckets.len(),
            pages: corpus_page_totals(m),
            status,
            text: c.text.as_ref().map(|t| TextSummary { documents: t.artifacts.len(), terms: t.artifacts.vocab.len() }),
            store: c.store.as_ref().map(|s| StoreSummary { rows: s.rows(), dim: s.dim(), mapped: s.is_mapped() }),
            projection_points: c.projection.as_ref().map(|p| p.points.len()),
            rasters: c.rasters.is_some(),
        };
        Precomputed {
            summary: json_bytes(&summary),
            base_url_facet: json_bytes(&facet_histogram(m, Facet::BaseUrl)),
            page_count_facet: json_bytes(&facet_histogram(m, Facet::PageCount)),
            projection: c.projection.as_ref().map(json_bytes),
        }
    }
}

pub struct AppState {
    pub corpus: Corpus,
    pub options: ServiceOptions,
    pub precomputed: Precomputed,
    sessions: RwLock<HashMap<String, SharedSession>>,
}

impl AppState {
    pub fn new(corpus: Corpus, options: ServiceOptions) -> Result<Self, ServeError> {
        corpus.validate()?;
        let precomputed = Precomputed::new(&corpus);
        let state = AppState { corpus, options, precomputed, sessions: RwLock::new(HashMap::new()) };
        if let Some(dir) = state.options.session_dir.clone() {
            state.restore_sessions(&dir)?;
        }
        Ok(state)
    }

    /// Reads every artifact named by `config` and validates them together.
    pub fn load(config: &ServiceConfig) -> Result<Self, ServeError> {
        let invalid = |what: &Path, e: &dyn std::fmt::Display| {
            ServeError::ArtifactValidationFailed(format!("{}: {e}", what.display()))
        };
        let manifest = CorpusManifest::read(&config.manifest).map_err(|e| invalid(&config.manifest, &e))?;
        let mut corpus = Corpus::new(manifest);
        if let Some(dir) = &config.text_dir {
            corpus.text = Some(TextIndex::new(TextArtifacts::load(dir).map_err(|e| invalid(dir, &e))?));
        }
        if let Some(path) = &config.store {
            corpus.store = Some(open_store(path).map_err(|e| invalid(path, &e))?);
        }
        if let Some(path) = &config.projection {
            corpus.projection = Some(ProjectionFile::read(path).map_err(|e| invalid(path, &e))?);
        }
        corpus.rasters = config.rasters.clone();
        Self::new(corpus, config.options.clone())
    }

    fn restore_sessions(&self, dir: &Path) -> Result<(), ServeError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| ServeError::ArtifactValidationFailed(format!("{}: {e}", dir.display())))?;
        let entries = std::fs::read_dir(dir).map_err(|e| ServeError::ArtifactValidationFailed(e.to_string()))?;
        let mut sessions = self.sessions.write().expect("session table lock");
        for entry in entries.flatten() {
            let path = entry.path();
            if !path.to_string_lossy().ends_with(".session.json") {
                continue;
            }
            match LabelSession::load(&path) {
                Ok(s) => {
                    sessions.insert(s.session_id.clone(), Arc::new(Mutex::new(s)));
                }
                Err(e) => tracing::warn!("skipping session snapshot {}: {e}", path.display()),
            }
        }
        Ok(())
    }

    pub fn create_session(&self) -> LabelSession {
        let session = create_session();
        self.sessions
            .write()
            .expect("session table lock")
            .insert(session.session_id.clone(), Arc::new(Mutex::new(session.clone())));
        session
    }

    pub fn session(&self, id: &str) -> Option<SharedSession> {
        self.sessions.read().expect("session table lock").get(id).cloned()
    }

    pub fn session_count(&self) -> usize {
        self.sessions.read().expect("session table lock").len()
    }

    /// Writes the session snapshot when persistence is configured.
    pub fn persist(&self, session: &LabelSession) -> std::io::Result<()> {
        let Some(dir) = &self.options.session_dir else {
            return Ok(());
        };
        let path = dir.join(format!("{}.session.json", session.session_id));
        session.save(&path).map_err(std::io::Error::other)
    }
}
