use std::path::PathBuf;

use crate::state::ServiceOptions;

pub const DEFAULT_BIND: &str = "127.0.0.1:8080";

/// Artifact locations and limits for one service process.
#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub bind: String,
    pub manifest: PathBuf,
    /// Directory holding `vocab.jsonl` and `tfidf.jsonl`.
    pub text_dir: Option<PathBuf>,
    pub store: Option<PathBuf>,
    pub projection: Option<PathBuf>,
    /// `<doc_id>/page-<n>.png` tree served as thumbnails.
    pub rasters: Option<PathBuf>,
    pub options: ServiceOptions,
}

impl ServiceConfig {
    pub fn new(manifest: PathBuf) -> Self {
        ServiceConfig {
            bind: DEFAULT_BIND.to_string(),
            manifest,
            text_dir: None,
            store: None,
            projection: None,
            rasters: None,
            options: ServiceOptions::default(),
        }
    }
}
