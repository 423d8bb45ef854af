use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::linalg::LinearOperator;
use crate::matio::DenseMatrix;

/// Symmetric matrix stored as its lower triangle in compressed-row form.
///
/// Row `i` holds the entries `(i, j)` with `j <= i`, sorted by column. The
/// full matrix-vector product reflects every off-diagonal entry once.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSymMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymMatrix {
    /// Assembles from 0-based coordinates. Upper-triangle coordinates are
    /// mirrored into the lower triangle and duplicates are summed.
    pub fn from_triplets<I>(n: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        if n == 0 {
            return Err(Error::domain("matrix order must be positive"));
        }
        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
        for (i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(Error::domain(format!(
                    "index ({i}, {j}) out of range for order {n}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::domain(format!("non-finite value at ({i}, {j})")));
            }
            let (r, c) = if i >= j { (i, j) } else { (j, i) };
            *rows[r].entry(c).or_insert(0.0) += v;
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (c, v) in row {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Lower triangle of a dense symmetric matrix; exact zeros are dropped.
    pub fn from_dense_lower(a: &DenseMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Dimension {
                expected: a.n_rows(),
                got: a.n_cols(),
            });
        }
        let n = a.n_rows();
        let triplets = (0..n).flat_map(|i| (0..=i).map(move |j| (i, j)));
        Self::from_triplets(
            n,
            triplets
                .filter(|&(i, j)| a[(i, j)] != 0.0 || i == j)
                .map(|(i, j)| (i, j, a[(i, j)])),
        )
    }

    pub fn order(&self) -> usize {
        self.n
    }

    /// Stored entries (lower triangle including diagonal).
    pub fn nnz_lower(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Stored entries of row `i` as `(column, value)`, columns ascending.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[range.clone()].binary_search(&c) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.n {
            let mut acc = 0.0;
            for (j, v) in self.row(i) {
                acc += v * x[j];
                if j != i {
                    y[j] += v * x[i];
                }
            }
            y[i] += acc;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut a = DenseMatrix::zeros(self.n, self.n);
        for (i, j, v) in self.triplets() {
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
        a
    }

    /// Returns a copy with `diag_shift[i]` added to each diagonal entry.
    pub fn with_diagonal_added(&self, diag_shift: &[f64]) -> Self {
        assert_eq!(diag_shift.len(), self.n);
        let mut out = self.clone();
        for i in 0..self.n {
            let range = out.row_ptr[i]..out.row_ptr[i + 1];
            match out.col_idx[range.clone()].binary_search(&i) {
                Ok(pos) => out.values[range.start + pos] += diag_shift[i],
                Err(_) => {
                    // missing diagonal: rebuild through assembly
                    let extra = (0..self.n).map(|k| (k, k, diag_shift[k]));
                    return Self::from_triplets(self.n, self.triplets().chain(extra))
                        .expect("indices already validated");
                }
            }
        }
        out
    }

    /// Symmetric entrywise map `a_ij -> f(i, j, a_ij)` over stored entries.
    pub fn map_entries(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.n {
            for k in out.row_ptr[i]..out.row_ptr[i + 1] {
                out.values[k] = f(i, out.col_idx[k], out.values[k]);
            }
        }
        out
    }

    /// Matrix Market `coordinate real symmetric` text with 17 significant digits.
    pub fn to_matrix_market(&self) -> String {
        let mut s = String::new();
        s.push_str("%%MatrixMarket matrix coordinate real symmetric\n");
        let _ = writeln!(s, "{} {} {}", self.n, self.n, self.nnz_lower());
        for (i, j, v) in self.triplets() {
            let _ = writeln!(s, "{} {} {:.16e}", i + 1, j + 1, v);
        }
        s
    }
}

impl LinearOperator for SparseSymMatrix {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matvec_into(x, y);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assembly_mirrors_and_sums_duplicates() {
        let a = SparseSymMatrix::from_triplets(
            3,
            [(0, 0, 1.0), (0, 2, 2.0), (2, 0, 0.5), (1, 1, 3.0), (2, 2, 4.0)],
        )
        .unwrap();
        assert_eq!(a.nnz_lower(), 4);
        assert_eq!(a.get(2, 0), 2.5);
        assert_eq!(a.get(0, 2), 2.5);
        assert_eq!(a.matvec(&[1.0, 1.0, 1.0]), vec![3.5, 3.0, 6.5]);
    }

    #[test]
    fn out_of_range_index_is_rejected() {
        assert!(SparseSymMatrix::from_triplets(2, [(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn dense_round_trip() {
        let d = DenseMatrix::from_rows(&[&[4.0, 1.0, 0.0], &[1.0, 3.0, -1.0], &[0.0, -1.0, 2.0]]);
        let s = SparseSymMatrix::from_dense_lower(&d).unwrap();
        assert_eq!(s.nnz_lower(), 5);
        assert_eq!(s.to_dense(), d);
    }

    #[test]
    fn diagonal_shift() {
        let a = SparseSymMatrix::from_triplets(2, [(0, 0, 1.0), (1, 0, 0.5), (1, 1, 2.0)]).unwrap();
        let b = a.with_diagonal_added(&[0.1, 0.2]);
        assert_eq!(b.diagonal(), vec![1.1, 2.2]);
        assert_eq!(b.get(1, 0), 0.5);
    }
}
