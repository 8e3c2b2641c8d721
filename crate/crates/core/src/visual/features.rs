//! Built-in 128-dimensional page descriptor used when no external
//! embeddings are available: an 8x8 grid of mean luminance followed by an
//! 8x8 grid of edge density, L2-normalized.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::corpus::{DocumentId, PageRef};
use crate::par;

pub const GRID: usize = 8;
pub const FEATURE_DIM: usize = 2 * GRID * GRID;
/// A pixel is an edge when a 4-neighbour differs by more than this.
pub const EDGE_THRESHOLD: u8 = 32;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("raster must be at least 1x1 with width*height pixels")]
    BadShape,
    #[error("{path}: {source}")]
    Decode {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// 8-bit grayscale page image, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PageRaster {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl PageRaster {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(RasterError::BadShape);
        }
        Ok(PageRaster { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        PageRaster { width, height, pixels: vec![value; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn at(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    /// Decodes a PNG or JPEG, converting to luminance
    /// `round(0.299 R + 0.587 G + 0.114 B)`.
    pub fn load(path: &Path) -> Result<Self, RasterError> {
        let img = image::open(path).map_err(|source| match source {
            image::ImageError::IoError(e) => RasterError::Io { path: path.to_path_buf(), source: e },
            other => RasterError::Decode { path: path.to_path_buf(), source: other },
        })?;
        let rgb = img.to_rgb8();
        let (w, h) = rgb.dimensions();
        let pixels = rgb.pixels().map(|p| luminance(p.0)).collect();
        Self::new(w as usize, h as usize, pixels)
    }
}

pub fn luminance([r, g, b]: [u8; 3]) -> u8 {
    (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64).round().clamp(0.0, 255.0) as u8
}

/// Result of [`builtin_page_features`].
#[derive(Clone, Debug, PartialEq)]
pub struct PageFeatures {
    pub vector: Vec<f32>,
    /// Set when every raw feature was zero (an all-black page); the vector is
    /// then all zeros rather than unit length.
    pub blank: bool,
}

fn cell_bounds(extent: usize, i: usize) -> (usize, usize) {
    (i * extent / GRID, (i + 1) * extent / GRID)
}

/// Unnormalized grid features: 64 mean luminances in [0, 1] then 64 edge
/// densities, both in row-major cell order.
pub fn raw_grid_features(raster: &PageRaster) -> Vec<f64> {
    let (w, h) = (raster.width, raster.height);
    let mut means = vec![0.0; GRID * GRID];
    let mut edges = vec![0.0; GRID * GRID];
    for cy in 0..GRID {
        let (y0, y1) = cell_bounds(h, cy);
        for cx in 0..GRID {
            let (x0, x1) = cell_bounds(w, cx);
            let mut sum = 0u64;
            let mut interior = 0u64;
            let mut edgy = 0u64;
            for y in y0..y1 {
                for x in x0..x1 {
                    let v = raster.at(x, y);
                    sum += v as u64;
                    if x == 0 || y == 0 || x + 1 == w || y + 1 == h {
                        continue;
                    }
                    interior += 1;
                    let diff = [raster.at(x - 1, y), raster.at(x + 1, y), raster.at(x, y - 1), raster.at(x, y + 1)]
                        .into_iter()
                        .map(|n| v.abs_diff(n))
                        .max()
                        .unwrap_or(0);
                    if diff > EDGE_THRESHOLD {
                        edgy += 1;
                    }
                }
            }
            let count = ((x1 - x0) * (y1 - y0)) as u64;
            let k = cy * GRID + cx;
            if count > 0 {
                means[k] = sum as f64 / (count as f64 * 255.0);
            }
            if interior > 0 {
                edges[k] = edgy as f64 / interior as f64;
            }
        }
    }
    means.extend(edges);
    means
}

/// Deterministic 128-dimensional descriptor of a page raster.
pub fn builtin_page_features(raster: &PageRaster) -> PageFeatures {
    let raw = raw_grid_features(raster);
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return PageFeatures { vector: vec![0.0; FEATURE_DIM], blank: true };
    }
    PageFeatures { vector: raw.iter().map(|v| (v / norm) as f32).collect(), blank: false }
}

/// Finds `<doc_id>/page-<n>.png|jpg|jpeg` rasters under `dir`, sorted by page.
pub fn list_rasters(dir: &Path) -> Result<Vec<(PageRef, PathBuf)>, RasterError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| RasterError::Io { path, source }
    };
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io(dir))? {
        let doc_dir = entry.map_err(io(dir))?.path();
        let Some(doc_id) = doc_dir.file_name().and_then(|n| n.to_str()).and_then(|n| n.parse::<DocumentId>().ok())
        else {
            continue;
        };
        if !doc_dir.is_dir() {
            continue;
        }
        for page in std::fs::read_dir(&doc_dir).map_err(io(&doc_dir))? {
            let path = page.map_err(io(&doc_dir))?.path();
            if let Some(n) = page_number(&path) {
                out.push((PageRef::new(doc_id.clone(), n), path));
            }
        }
    }
    out.sort();
    out.dedup_by(|a, b| a.0 == b.0);
    Ok(out)
}

fn page_number(path: &Path) -> Option<u32> {
    let name = path.file_name()?.to_str()?;
    let stem = name.strip_prefix("page-")?;
    let (num, ext) = stem.split_once('.')?;
    matches!(ext.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg").then_some(())?;
    num.parse().ok()
}

/// Path of a page raster if one exists.
pub fn find_raster(dir: &Path, page: &PageRef) -> Option<PathBuf> {
    ["png", "jpg", "jpeg"].iter().find_map(|ext| {
        let p = dir.join(page.doc_id.as_str()).join(format!("page-{}.{ext}", page.page_index));
        p.is_file().then_some(p)
    })
}

/// Featurizes every raster under `dir` in parallel, in page-id order.
pub fn featurize_raster_dir(dir: &Path) -> Result<Vec<(PageRef, PageFeatures)>, RasterError> {
    let pages = list_rasters(dir)?;
    par::map_slice(&pages, |(page, path)| {
        let raster = PageRaster::load(path)?;
        Ok((page.clone(), builtin_page_features(&raster)))
    })
    .into_iter()
    .collect()
}
