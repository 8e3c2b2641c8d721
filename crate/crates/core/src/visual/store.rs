//! `EMB1` embedding store.
//!
//! Layout (all little-endian):
//!
//! ```text
//! b"EMB1" | dim: u32 | rows: u64 | rows * dim f32 values, row-major
//! ```
//!
//! Row identities live in a sidecar `<path>.ids.jsonl`, one
//! `{"row", "doc_id", "page_index"}` object per line in row order.
//!
//! Rows are unit-norm (within 1e-6 when written by this crate, 1e-4 on
//! read). A row of exact zeros marks a blank page and is the one exception.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{DocumentId, PageRef};
use crate::par;

pub const MAGIC: &[u8; 4] = b"EMB1";
pub const HEADER_LEN: usize = 16;
/// Tolerance for rows produced in-process.
pub const WRITE_NORM_TOLERANCE: f64 = 1e-6;
/// Tolerance applied when reading a store from disk.
pub const READ_NORM_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("bad magic bytes")]
    BadMagic,
    #[error("sidecar mismatch: {0}")]
    SidecarMismatch(String),
    #[error("non-finite value in row {row}")]
    NonFiniteValue { row: usize },
    #[error("row {row} has norm {norm}, expected 1")]
    NotNormalized { row: usize, norm: f64 },
    #[error("matrix has {len} values, expected {dim} x {rows}")]
    ShapeMismatch { dim: usize, rows: usize, len: usize },
    #[error("duplicate row id {0}")]
    DuplicateRow(PageRef),
    #[error("dimension must be positive")]
    ZeroDim,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

enum Rows {
    Owned(Vec<f32>),
    Mapped(memmap2::Mmap),
}

/// Row-major dense matrix of page embeddings with aligned page ids.
pub struct EmbeddingStore {
    dim: usize,
    row_ids: Vec<PageRef>,
    rows: Rows,
    /// Row positions sorted by page id, for lookups.
    by_id: Vec<u32>,
}

impl std::fmt::Debug for EmbeddingStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EmbeddingStore")
            .field("dim", &self.dim)
            .field("rows", &self.row_ids.len())
            .field("mapped", &matches!(self.rows, Rows::Mapped(_)))
            .finish()
    }
}

impl PartialEq for EmbeddingStore {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.row_ids == other.row_ids
            && self.matrix().iter().map(|v| v.to_bits()).eq(other.matrix().iter().map(|v| v.to_bits()))
    }
}

impl Clone for EmbeddingStore {
    fn clone(&self) -> Self {
        EmbeddingStore {
            dim: self.dim,
            row_ids: self.row_ids.clone(),
            rows: Rows::Owned(self.matrix().to_vec()),
            by_id: self.by_id.clone(),
        }
    }
}

impl EmbeddingStore {
    /// Validates and wraps an in-memory matrix.
    pub fn new(dim: usize, row_ids: Vec<PageRef>, matrix: Vec<f32>) -> Result<Self, StoreError> {
        Self::assemble(dim, row_ids, Rows::Owned(matrix), WRITE_NORM_TOLERANCE)
    }

    /// L2-normalizes each row (zero rows stay zero) and builds a store.
    pub fn from_rows_normalized(dim: usize, rows: Vec<(PageRef, Vec<f32>)>) -> Result<Self, StoreError> {
        let mut ids = Vec::with_capacity(rows.len());
        let mut matrix = Vec::with_capacity(rows.len() * dim);
        for (id, mut v) in rows {
            if v.len() != dim {
                return Err(StoreError::ShapeMismatch { dim, rows: 1, len: v.len() });
            }
            normalize_in_place(&mut v);
            ids.push(id);
            matrix.extend_from_slice(&v);
        }
        Self::new(dim, ids, matrix)
    }

    pub fn empty(dim: usize) -> Self {
        EmbeddingStore { dim, row_ids: Vec::new(), rows: Rows::Owned(Vec::new()), by_id: Vec::new() }
    }

    fn assemble(dim: usize, row_ids: Vec<PageRef>, rows: Rows, tol: f64) -> Result<Self, StoreError> {
        if dim == 0 {
            return Err(StoreError::ZeroDim);
        }
        let mut store = EmbeddingStore { dim, row_ids, rows, by_id: Vec::new() };
        let len = store.matrix().len();
        if len != dim * store.row_ids.len() {
            return Err(StoreError::ShapeMismatch { dim, rows: store.row_ids.len(), len });
        }
        let mut by_id: Vec<u32> = (0..store.row_ids.len() as u32).collect();
        by_id.sort_by(|&a, &b| store.row_ids[a as usize].cmp(&store.row_ids[b as usize]));
        if let Some(w) = by_id.windows(2).find(|w| store.row_ids[w[0] as usize] == store.row_ids[w[1] as usize]) {
            return Err(StoreError::DuplicateRow(store.row_ids[w[0] as usize].clone()));
        }
        store.by_id = by_id;
        store.validate_rows(tol)?;
        Ok(store)
    }

    fn validate_rows(&self, tol: f64) -> Result<(), StoreError> {
        let dim = self.dim;
        let matrix = self.matrix();
        // Check in blocks so huge mapped stores are validated in parallel.
        const BLOCK: usize = 4096;
        let n_blocks = self.rows().div_ceil(BLOCK);
        let errors = par::map_range(n_blocks, |b| {
            let start = b * BLOCK;
            let end = (start + BLOCK).min(self.rows());
            for row in start..end {
                let r = &matrix[row * dim..(row + 1) * dim];
                if r.iter().any(|v| !v.is_finite()) {
                    return Some(StoreError::NonFiniteValue { row });
                }
                let norm = row_norm(r);
                if norm != 0.0 && (norm - 1.0).abs() > tol {
                    return Some(StoreError::NotNormalized { row, norm });
                }
            }
            None
        });
        match errors.into_iter().flatten().next() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.row_ids.is_empty()
    }

    pub fn row_ids(&self) -> &[PageRef] {
        &self.row_ids
    }

    pub fn matrix(&self) -> &[f32] {
        match &self.rows {
            Rows::Owned(v) => v,
            Rows::Mapped(m) => bytemuck::cast_slice(&m[HEADER_LEN..]),
        }
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.matrix()[i * self.dim..(i + 1) * self.dim]
    }

    pub fn is_mapped(&self) -> bool {
        matches!(self.rows, Rows::Mapped(_))
    }

    /// Row position of a page, if present.
    pub fn position(&self, page: &PageRef) -> Option<usize> {
        self.by_id.binary_search_by(|&i| self.row_ids[i as usize].cmp(page)).ok().map(|k| self.by_id[k] as usize)
    }

    pub fn contains(&self, page: &PageRef) -> bool {
        self.position(page).is_some()
    }

    /// Page indices stored for a document, ascending.
    pub fn pages_of(&self, doc: &DocumentId) -> Vec<u32> {
        let start = self.by_id.partition_point(|&i| self.row_ids[i as usize].doc_id < *doc);
        self.by_id[start..]
            .iter()
            .map(|&i| &self.row_ids[i as usize])
            .take_while(|p| p.doc_id == *doc)
            .map(|p| p.page_index)
            .collect()
    }

    /// Rows whose norm is exactly zero (blank pages).
    pub fn blank_rows(&self) -> Vec<usize> {
        (0..self.rows()).filter(|&i| self.row(i).iter().all(|&v| v == 0.0)).collect()
    }

    /// Sub-store of the rows at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> EmbeddingStore {
        let mut matrix = Vec::with_capacity(indices.len() * self.dim);
        let mut ids = Vec::with_capacity(indices.len());
        for &i in indices {
            matrix.extend_from_slice(self.row(i));
            ids.push(self.row_ids[i].clone());
        }
        Self::new(self.dim, ids, matrix).expect("subset of a valid store is valid")
    }

    /// The rows as f64, row-major.
    pub fn to_f64(&self) -> Vec<f64> {
        self.matrix().iter().map(|&v| v as f64).collect()
    }
}

fn row_norm(r: &[f32]) -> f64 {
    r.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt()
}

/// Scales `v` to unit length; zero vectors are left untouched.
pub fn normalize_in_place(v: &mut [f32]) -> bool {
    let norm = row_norm(v);
    if norm == 0.0 || !norm.is_finite() {
        return false;
    }
    for x in v.iter_mut() {
        *x = (*x as f64 / norm) as f32;
    }
    true
}

/// Rows whose page index is 0, in their original order.
pub fn front_page_rows(store: &EmbeddingStore) -> EmbeddingStore {
    let keep: Vec<usize> = (0..store.rows()).filter(|&i| store.row_ids[i].page_index == 0).collect();
    store.select(&keep)
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".ids.jsonl");
    PathBuf::from(p)
}

#[derive(Serialize, Deserialize)]
struct IdLine {
    row: u64,
    doc_id: DocumentId,
    page_index: u32,
}

/// Streaming writer, for stores too large to assemble in memory.
pub struct StoreWriter {
    path: PathBuf,
    data: BufWriter<File>,
    ids: BufWriter<File>,
    dim: usize,
    rows: u64,
}

impl StoreWriter {
    pub fn create(path: &Path, dim: usize) -> Result<Self, StoreError> {
        if dim == 0 {
            return Err(StoreError::ZeroDim);
        }
        let mut data = BufWriter::with_capacity(1 << 20, File::create(path).map_err(io_err(path))?);
        let side = sidecar_path(path);
        let ids = BufWriter::new(File::create(&side).map_err(io_err(&side))?);
        let dim32 = u32::try_from(dim).map_err(|_| StoreError::ShapeMismatch { dim, rows: 0, len: 0 })?;
        data.write_all(MAGIC).map_err(io_err(path))?;
        data.write_all(&dim32.to_le_bytes()).map_err(io_err(path))?;
        data.write_all(&0u64.to_le_bytes()).map_err(io_err(path))?;
        Ok(StoreWriter { path: path.to_path_buf(), data, ids, dim, rows: 0 })
    }

    /// Appends one row; the caller is responsible for normalization.
    pub fn push(&mut self, id: &PageRef, row: &[f32]) -> Result<(), StoreError> {
        if row.len() != self.dim {
            return Err(StoreError::ShapeMismatch { dim: self.dim, rows: 1, len: row.len() });
        }
        let mut buf = Vec::with_capacity(row.len() * 4);
        for v in row {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        self.data.write_all(&buf).map_err(io_err(&self.path))?;
        let line = IdLine { row: self.rows, doc_id: id.doc_id.clone(), page_index: id.page_index };
        serde_json::to_writer(&mut self.ids, &line).expect("id line serializes");
        self.ids.write_all(b"\n").map_err(io_err(&self.path))?;
        self.rows += 1;
        Ok(())
    }

    pub fn finish(self) -> Result<u64, StoreError> {
        let path = self.path;
        let mut ids = self.ids;
        ids.flush().map_err(io_err(&path))?;
        let mut file = self.data.into_inner().map_err(|e| io_err(&path)(e.into_error()))?;
        file.seek(SeekFrom::Start(8)).map_err(io_err(&path))?;
        file.write_all(&self.rows.to_le_bytes()).map_err(io_err(&path))?;
        file.flush().map_err(io_err(&path))?;
        Ok(self.rows)
    }
}

/// Writes the binary store and its id sidecar.
pub fn write_store(store: &EmbeddingStore, path: &Path) -> Result<(), StoreError> {
    let mut w = StoreWriter::create(path, store.dim)?;
    for i in 0..store.rows() {
        w.push(&store.row_ids[i], store.row(i))?;
    }
    w.finish()?;
    Ok(())
}

/// Validates the header against the file length and returns `(dim, rows)`.
pub fn read_header(bytes: &[u8], path: &Path) -> Result<(usize, usize), StoreError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(StoreError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(io_err(path)(std::io::ErrorKind::UnexpectedEof.into()));
    }
    let dim = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let rows = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    if dim == 0 {
        return Err(StoreError::ZeroDim);
    }
    let rows = usize::try_from(rows).map_err(|_| io_err(path)(std::io::ErrorKind::InvalidData.into()))?;
    let expected = rows
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| io_err(path)(std::io::ErrorKind::InvalidData.into()))?;
    if bytes.len() < expected {
        return Err(io_err(path)(std::io::ErrorKind::UnexpectedEof.into()));
    }
    if bytes.len() > expected {
        return Err(io_err(path)(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!("{} trailing bytes", bytes.len() - expected),
        )));
    }
    Ok((dim, rows))
}

fn read_sidecar(path: &Path, rows: usize) -> Result<Vec<PageRef>, StoreError> {
    let side = sidecar_path(path);
    let reader = BufReader::new(File::open(&side).map_err(io_err(&side))?);
    let mut ids = Vec::with_capacity(rows);
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(&side))?;
        if line.trim().is_empty() {
            continue;
        }
        let l: IdLine =
            serde_json::from_str(&line).map_err(|e| StoreError::SidecarMismatch(format!("line {}: {e}", i + 1)))?;
        if l.row != ids.len() as u64 {
            return Err(StoreError::SidecarMismatch(format!("line {} names row {}", i + 1, l.row)));
        }
        ids.push(PageRef::new(l.doc_id, l.page_index));
    }
    if ids.len() != rows {
        return Err(StoreError::SidecarMismatch(format!("{} ids for {rows} rows", ids.len())));
    }
    Ok(ids)
}

/// Reads a store fully into memory.
pub fn read_store(path: &Path) -> Result<EmbeddingStore, StoreError> {
    let mut bytes = Vec::new();
    File::open(path).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(io_err(path))?;
    let (dim, rows) = read_header(&bytes, path)?;
    let ids = read_sidecar(path, rows)?;
    let matrix: Vec<f32> =
        bytes[HEADER_LEN..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
    EmbeddingStore::assemble(dim, ids, Rows::Owned(matrix), READ_NORM_TOLERANCE)
}

/// Memory-maps a store. Falls back to [`read_store`] on big-endian hosts.
pub fn open_store(path: &Path) -> Result<EmbeddingStore, StoreError> {
    if cfg!(target_endian = "big") {
        return read_store(path);
    }
    let file = File::open(path).map_err(io_err(path))?;
    // SAFETY: the store is treated as read-only; concurrent truncation of
    // the file by another process is outside this crate's contract.
    let map = unsafe { memmap2::Mmap::map(&file) }.map_err(io_err(path))?;
    #[cfg(unix)]
    let _ = map.advise(memmap2::Advice::Sequential);
    let (dim, rows) = read_header(&map, path)?;
    let ids = read_sidecar(path, rows)?;
    EmbeddingStore::assemble(dim, ids, Rows::Mapped(map), READ_NORM_TOLERANCE)
}
