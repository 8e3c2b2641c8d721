//! CDX index lines: space-separated capture records whose column order is
//! declared either by the caller or by a ` CDX ...` header line.

use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum CdxField {
    UrlKey,
    Timestamp,
    OriginalUrl,
    MimeType,
    StatusCode,
    Digest,
    Filename,
    Other(String),
}

impl CdxField {
    /// Maps a legend letter from a CDX header (`N b a m s k ...`).
    pub fn from_letter(letter: &str) -> CdxField {
        match letter {
            "N" => CdxField::UrlKey,
            "b" => CdxField::Timestamp,
            "a" => CdxField::OriginalUrl,
            "m" => CdxField::MimeType,
            "s" => CdxField::StatusCode,
            "k" => CdxField::Digest,
            "g" => CdxField::Filename,
            other => CdxField::Other(other.to_string()),
        }
    }
}

impl FromStr for CdxField {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "url_key" | "urlkey" => CdxField::UrlKey,
            "timestamp" => CdxField::Timestamp,
            "original_url" | "original" => CdxField::OriginalUrl,
            "mime_type" | "mimetype" | "mime" => CdxField::MimeType,
            "status_code" | "statuscode" | "status" => CdxField::StatusCode,
            "digest" => CdxField::Digest,
            "filename" => CdxField::Filename,
            other => CdxField::Other(other.to_string()),
        })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CdxError {
    #[error("line has {found} fields, expected {expected}")]
    ArityMismatch { expected: usize, found: usize },
    #[error("bad timestamp {0:?}: expected 14 digits")]
    BadTimestamp(String),
    #[error("bad status code {0:?}")]
    BadStatusCode(String),
    #[error("original url is empty")]
    EmptyUrl,
    #[error("field order is missing required field {0}")]
    MissingField(&'static str),
}

/// Column layout of a CDX file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldOrder(Vec<CdxField>);

impl FieldOrder {
    pub fn new(fields: Vec<CdxField>) -> Result<Self, CdxError> {
        for (need, name) in [
            (CdxField::UrlKey, "url_key"),
            (CdxField::Timestamp, "timestamp"),
            (CdxField::OriginalUrl, "original_url"),
            (CdxField::MimeType, "mime_type"),
        ] {
            if !fields.contains(&need) {
                return Err(CdxError::MissingField(name));
            }
        }
        Ok(FieldOrder(fields))
    }

    /// Parses comma- or space-separated field names.
    pub fn from_names(names: &str) -> Result<Self, CdxError> {
        let fields = names
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().expect("infallible"))
            .collect();
        Self::new(fields)
    }

    /// Parses a legend line such as ` CDX N b a m s k r M S V g`.
    pub fn from_header(line: &str) -> Option<Result<Self, CdxError>> {
        let mut toks = line.split_ascii_whitespace();
        if toks.next() != Some("CDX") {
            return None;
        }
        Some(Self::new(toks.map(CdxField::from_letter).collect()))
    }

    /// The classic 11-column layout (`N b a m s k r M S V g`).
    pub fn cdx11() -> Self {
        FieldOrder::from_header(" CDX N b a m s k r M S V g").expect("literal header").expect("has required fields")
    }

    pub fn fields(&self) -> &[CdxField] {
        &self.0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CdxRecord {
    pub url_key: String,
    pub timestamp: String,
    pub original_url: String,
    pub mime_type: String,
    pub status_code: Option<u16>,
    pub digest: Option<String>,
    pub filename: Option<String>,
}

fn present(tok: &str) -> Option<&str> {
    (tok != "-").then_some(tok)
}

/// Maps the tokens of one CDX line onto `order` positionally. `-` means absent.
pub fn parse_cdx_line(line: &str, order: &FieldOrder) -> Result<CdxRecord, CdxError> {
    let toks: Vec<&str> = line.split_ascii_whitespace().collect();
    if toks.len() != order.0.len() {
        return Err(CdxError::ArityMismatch { expected: order.0.len(), found: toks.len() });
    }
    let mut rec = CdxRecord {
        url_key: String::new(),
        timestamp: String::new(),
        original_url: String::new(),
        mime_type: String::new(),
        status_code: None,
        digest: None,
        filename: None,
    };
    for (field, tok) in order.0.iter().zip(toks) {
        match field {
            CdxField::UrlKey => rec.url_key = tok.to_string(),
            CdxField::Timestamp => {
                if tok.len() != 14 || !tok.bytes().all(|b| b.is_ascii_digit()) {
                    return Err(CdxError::BadTimestamp(tok.to_string()));
                }
                rec.timestamp = tok.to_string();
            }
            CdxField::OriginalUrl => rec.original_url = present(tok).unwrap_or_default().to_string(),
            CdxField::MimeType => rec.mime_type = tok.to_string(),
            CdxField::StatusCode => {
                rec.status_code = match present(tok) {
                    None => None,
                    Some(t) => Some(t.parse().map_err(|_| CdxError::BadStatusCode(t.to_string()))?),
                }
            }
            CdxField::Digest => rec.digest = present(tok).map(str::to_string),
            CdxField::Filename => rec.filename = present(tok).map(str::to_string),
            CdxField::Other(_) => {}
        }
    }
    if rec.original_url.is_empty() {
        return Err(CdxError::EmptyUrl);
    }
    Ok(rec)
}

/// Parses a whole CDX file. A leading ` CDX` legend overrides `default_order`.
/// Blank lines are skipped; errors carry the 1-based line number.
pub fn parse_cdx(text: &str, default_order: &FieldOrder) -> Result<Vec<CdxRecord>, (usize, CdxError)> {
    let mut order = default_order.clone();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if i == 0 {
            if let Some(header) = FieldOrder::from_header(line) {
                order = header.map_err(|e| (1, e))?;
                continue;
            }
        }
        out.push(parse_cdx_line(line, &order).map_err(|e| (i + 1, e))?);
    }
    Ok(out)
}
