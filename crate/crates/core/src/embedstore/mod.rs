//! Feature and probability matrices aligned to the manifest, their binary
//! container, and exact cosine k-NN.

mod container;
mod knn;

use std::collections::HashSet;
use std::path::{Path, PathBuf};

pub use container::{
    read_header, sidecar_path, ContainerHeader, CONTAINER_VERSION, DTYPE_F32, EMBEDDING_MAGIC, HEADER_LEN,
    PROB_MAGIC,
};
pub use knn::{cosine, knn_all, knn_query, Neighbor, NeighborList};

use container::{read_container, read_ids, write_container, write_ids};

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic: expected {:?}, found {:?}", String::from_utf8_lossy(expected), String::from_utf8_lossy(found))]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported container version {0}")]
    Version(u32),
    #[error("unsupported dtype code {0}")]
    Dtype(u32),
    #[error("truncated payload: header implies {expected} bytes, file has {actual}")]
    Truncated { expected: u64, actual: u64 },
    #[error("trailing bytes: header implies {expected} bytes, file has {actual}")]
    TrailingBytes { expected: u64, actual: u64 },
    #[error("non-finite value at row {row}, col {col}")]
    NonFinite { row: usize, col: usize },
    #[error("row {row} has zero norm; cosine similarity is undefined")]
    ZeroNorm { row: usize },
    #[error("{ids} row ids for {rows} rows")]
    IdCount { ids: usize, rows: usize },
    #[error("duplicate row id {0}")]
    DuplicateId(String),
    #[error("missing row-id sidecar {0}")]
    MissingSidecar(PathBuf),
    #[error("k = {k} out of range for {rows} rows (need 1 <= k <= rows - 1)")]
    KOutOfRange { k: usize, rows: usize },
    #[error("row index {index} out of range for {rows} rows")]
    RowOutOfRange { index: usize, rows: usize },
    #[error("probability row {row} sums to {sum}")]
    RowSum { row: usize, sum: f64 },
    #[error("probability at row {row}, col {col} is {value}, outside [0, 1]")]
    ProbRange { row: usize, col: usize, value: f32 },
    #[error("too many columns: {0}")]
    TooWide(usize),
    #[error("matrix has zero columns")]
    NoColumns,
}

fn check_ids(ids: &[String], rows: usize) -> Result<(), EmbedError> {
    if ids.len() != rows {
        return Err(EmbedError::IdCount { ids: ids.len(), rows });
    }
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(EmbedError::DuplicateId(id.clone()));
        }
    }
    Ok(())
}

/// N x d feature rows, immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    data: Vec<f32>,
    row_ids: Vec<String>,
}

impl EmbeddingMatrix {
    /// Validates finiteness, non-zero row norms and unique ids.
    pub fn new(row_ids: Vec<String>, dim: usize, data: Vec<f32>) -> Result<Self, EmbedError> {
        if dim == 0 {
            return Err(EmbedError::NoColumns);
        }
        let rows = data.len() / dim;
        assert_eq!(rows * dim, data.len(), "data length must be a multiple of dim");
        check_ids(&row_ids, rows)?;
        for (r, row) in data.chunks_exact(dim).enumerate() {
            if let Some(c) = row.iter().position(|v| !v.is_finite()) {
                return Err(EmbedError::NonFinite { row: r, col: c });
            }
            if row.iter().all(|&v| v == 0.0) {
                return Err(EmbedError::ZeroNorm { row: r });
            }
        }
        Ok(EmbeddingMatrix { dim, data, row_ids })
    }

    /// Builds a matrix with generated ids `row-0`, `row-1`, ...
    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self, EmbedError> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        let ids = (0..rows.len()).map(|i| format!("row-{i}")).collect();
        Self::new(ids, dim, rows.concat())
    }

    pub fn n_rows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    /// New matrix with the given rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> EmbeddingMatrix {
        let mut data = Vec::with_capacity(rows.len() * self.dim);
        let mut ids = Vec::with_capacity(rows.len());
        for &r in rows {
            data.extend_from_slice(self.row(r));
            ids.push(self.row_ids[r].clone());
        }
        EmbeddingMatrix { dim: self.dim, data, row_ids: ids }
    }

    /// Every entry multiplied by `factor` (> 0).
    pub fn scaled(&self, factor: f32) -> Result<EmbeddingMatrix, EmbedError> {
        Self::new(self.row_ids.clone(), self.dim, self.data.iter().map(|v| v * factor).collect())
    }

    pub fn write(&self, path: &Path) -> Result<(), EmbedError> {
        write_container(path, EMBEDDING_MAGIC, self.n_rows(), self.dim, &self.data)?;
        write_ids(path, &self.row_ids)
    }

    pub fn read(path: &Path) -> Result<Self, EmbedError> {
        let (header, data) = read_container(path, EMBEDDING_MAGIC)?;
        let ids = read_ids(path)?;
        if ids.len() as u64 != header.rows {
            return Err(EmbedError::IdCount { ids: ids.len(), rows: header.rows as usize });
        }
        Self::new(ids, header.cols as usize, data)
    }
}

pub fn write_embeddings(matrix: &EmbeddingMatrix, path: &Path) -> Result<(), EmbedError> {
    matrix.write(path)
}

pub fn read_embeddings(path: &Path) -> Result<EmbeddingMatrix, EmbedError> {
    EmbeddingMatrix::read(path)
}

/// N x K class probabilities from an external model.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMatrix {
    k: usize,
    data: Vec<f32>,
    row_ids: Vec<String>,
}

pub const PROB_ROW_TOLERANCE: f64 = 1e-4;

impl ProbMatrix {
    pub fn new(row_ids: Vec<String>, k: usize, data: Vec<f32>) -> Result<Self, EmbedError> {
        if k == 0 {
            return Err(EmbedError::NoColumns);
        }
        let rows = data.len() / k;
        assert_eq!(rows * k, data.len(), "data length must be a multiple of k");
        check_ids(&row_ids, rows)?;
        for (r, row) in data.chunks_exact(k).enumerate() {
            for (c, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(EmbedError::NonFinite { row: r, col: c });
                }
                if !(0.0..=1.0).contains(&v) {
                    return Err(EmbedError::ProbRange { row: r, col: c, value: v });
                }
            }
            let sum: f64 = row.iter().map(|&v| v as f64).sum();
            if (sum - 1.0).abs() > PROB_ROW_TOLERANCE {
                return Err(EmbedError::RowSum { row: r, sum });
            }
        }
        Ok(ProbMatrix { k, data, row_ids })
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self, EmbedError> {
        let k = rows.first().map(Vec::len).unwrap_or(0);
        let ids = (0..rows.len()).map(|i| format!("row-{i}")).collect();
        Self::new(ids, k, rows.concat())
    }

    pub fn n_rows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn n_classes(&self) -> usize {
        self.k
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.k..(i + 1) * self.k]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn select(&self, rows: &[usize]) -> ProbMatrix {
        let mut data = Vec::with_capacity(rows.len() * self.k);
        let mut ids = Vec::with_capacity(rows.len());
        for &r in rows {
            data.extend_from_slice(self.row(r));
            ids.push(self.row_ids[r].clone());
        }
        ProbMatrix { k: self.k, data, row_ids: ids }
    }

    pub fn write(&self, path: &Path) -> Result<(), EmbedError> {
        write_container(path, PROB_MAGIC, self.n_rows(), self.k, &self.data)?;
        write_ids(path, &self.row_ids)
    }

    pub fn read(path: &Path) -> Result<Self, EmbedError> {
        let (header, data) = read_container(path, PROB_MAGIC)?;
        let ids = read_ids(path)?;
        if ids.len() as u64 != header.rows {
            return Err(EmbedError::IdCount { ids: ids.len(), rows: header.rows as usize });
        }
        Self::new(ids, header.cols as usize, data)
    }
}
