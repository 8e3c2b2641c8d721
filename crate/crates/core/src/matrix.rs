use serde::{Deserialize, Serialize};

use crate::text::SparseVector;

/// Row-major dense matrix of f64.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Panics if `data.len() != rows * dim`.
    pub fn new(rows: usize, dim: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * dim, "matrix shape mismatch");
        DenseMatrix { rows, dim, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let dim = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            assert_eq!(r.len(), dim, "ragged rows");
            data.extend_from_slice(r);
        }
        DenseMatrix { rows: rows.len(), dim, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.dim.max(1)).take(self.rows)
    }
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Densifies sparse vectors over the union of their nonzero columns.
///
/// Columns that are zero in every vector are dropped, which leaves all
/// pairwise and point-to-mean distances unchanged. Returns the matrix and the
/// original column index of each kept column.
pub fn densify_compact(vectors: &[SparseVector]) -> (DenseMatrix, Vec<u32>) {
    let mut cols: Vec<u32> = vectors.iter().flat_map(|v| v.indices.iter().copied()).collect();
    cols.sort_unstable();
    cols.dedup();
    let dim = cols.len();
    let mut data = vec![0.0; vectors.len() * dim];
    for (r, v) in vectors.iter().enumerate() {
        for (i, w) in v.iter() {
            let c = cols.binary_search(&i).expect("column collected above");
            data[r * dim + c] = w;
        }
    }
    (DenseMatrix::new(vectors.len(), dim, data), cols)
}
