//! Minimal column-major matrix.
//!
//! Split search scans one covariate at a time, so columns are stored
//! contiguously; `col` hands out a slice with no copying. Row extraction is
//! strided and only used on the shallow prediction path.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    /// Column-major: entry (i, j) lives at `data[j * rows + i]`.
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Build from equally long columns; rejects ragged input and non-finite
    /// values (missing data must be handled before this point).
    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows * cols);
        for (j, col) in columns.into_iter().enumerate() {
            if col.len() != rows {
                return Err(Error::Shape(format!(
                    "column {j} has {} rows, expected {rows}",
                    col.len()
                )));
            }
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::Dataset(format!(
                    "non-finite value in column {j}, row {i}"
                )));
            }
            data.extend_from_slice(&col);
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Row-major convenience constructor, mostly for tests and generators.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut columns = vec![Vec::with_capacity(nrows); ncols];
        for (i, r) in rows.iter().enumerate() {
            if r.len() != ncols {
                return Err(Error::Shape(format!(
                    "row {i} has {} entries, expected {ncols}",
                    r.len()
                )));
            }
            for (j, v) in r.iter().enumerate() {
                columns[j].push(*v);
            }
        }
        Matrix::from_columns(columns)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[j * self.rows + i]
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.cols).map(|j| self.get(i, j)).collect()
    }

    /// Gather a row subset (in the order given) into a new matrix.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for j in 0..self.cols {
            let col = self.col(j);
            data.extend(idx.iter().map(|&i| col[i]));
        }
        Matrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    /// Drop the given columns (indices into 0..cols), keeping order of the rest.
    pub fn drop_cols(&self, drop: &[usize]) -> Matrix {
        let keep: Vec<usize> = (0..self.cols).filter(|j| !drop.contains(j)).collect();
        let mut data = Vec::with_capacity(self.rows * keep.len());
        for &j in &keep {
            data.extend_from_slice(self.col(j));
        }
        Matrix {
            rows: self.rows,
            cols: keep.len(),
            data,
        }
    }
}
