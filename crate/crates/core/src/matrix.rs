use serde::{Deserialize, Serialize};

/// Dense row-major matrix. Rows are houses, columns are time steps.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Clone + Default> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::default(); rows * cols],
        }
    }
}

impl<T: Clone> Matrix<T> {
    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    /// Builds a matrix from equal-length rows. Returns `None` on ragged input.
    pub fn from_rows(rows: Vec<Vec<T>>) -> Option<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return None;
        }
        let n = rows.len();
        let data = rows.into_iter().flatten().collect();
        Some(Self {
            rows: n,
            cols,
            data,
        })
    }

    pub fn row_vecs(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    /// Sub-matrix made of a single row.
    pub fn select_row(&self, i: usize) -> Self {
        Self {
            rows: 1,
            cols: self.cols,
            data: self.row(i).to_vec(),
        }
    }
}

impl<T> Matrix<T> {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, t: usize) -> &T {
        &self.data[i * self.cols + t]
    }

    pub fn set(&mut self, i: usize, t: usize, value: T) {
        self.data[i * self.cols + t] = value;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn same_shape<U>(&self, other: &Matrix<U>) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }
}

impl Matrix<i64> {
    pub fn row_sum(&self, i: usize) -> i64 {
        self.row(i).iter().sum()
    }

    pub fn col_sum(&self, t: usize) -> i64 {
        (0..self.rows).map(|i| *self.get(i, t)).sum()
    }

    pub fn total(&self) -> i64 {
        self.data.iter().sum()
    }
}
