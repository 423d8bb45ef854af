//! Lower-triangular factors `Q` with `QQᵀ ≈ A`, exact Cholesky and
//! triangular solves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matio::{DenseMatrix, SparseSymMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FactorKind {
    ExactCholesky,
    Ic0,
    /// `diag(A)^{1/2}`, the IC(0) factor of the diagonal part.
    Diagonal,
    Identity,
    /// Supplied directly by the caller.
    Custom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveMode {
    /// `L x = b`
    Forward,
    /// `Lᵀ x = b`
    Adjoint,
}

/// Sparse lower-triangular matrix in compressed-row form. Each row stores its
/// strictly-lower entries in ascending column order followed by the diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct LowerTriFactor {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    kind: FactorKind,
    shift: f64,
}

impl LowerTriFactor {
    pub(crate) fn from_rows(
        n: usize,
        rows: Vec<Vec<(usize, f64)>>,
        kind: FactorKind,
        shift: f64,
    ) -> Self {
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for (i, row) in rows.into_iter().enumerate() {
            debug_assert_eq!(row.last().map(|e| e.0), Some(i));
            for (j, v) in row {
                col_idx.push(j);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            n,
            row_ptr,
            col_idx,
            values,
            kind,
            shift,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_rows(
            n,
            (0..n).map(|i| vec![(i, 1.0)]).collect(),
            FactorKind::Identity,
            0.0,
        )
    }

    /// `diag(d)^{1/2}`; every `d_i` must be positive.
    pub fn diagonal_sqrt(d: &[f64]) -> Result<Self> {
        let mut rows = Vec::with_capacity(d.len());
        for (i, &v) in d.iter().enumerate() {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::NotPositiveDefinite { index: i, pivot: v });
            }
            rows.push(vec![(i, v.sqrt())]);
        }
        Ok(Self::from_rows(d.len(), rows, FactorKind::Diagonal, 0.0))
    }

    /// Takes the lower triangle of `l`; the strict upper triangle must be zero.
    pub fn from_dense(l: &DenseMatrix, kind: FactorKind) -> Result<Self> {
        if !l.is_square() {
            return Err(Error::Dimension {
                expected: l.n_rows(),
                got: l.n_cols(),
            });
        }
        let n = l.n_rows();
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            if (i + 1..n).any(|j| l[(i, j)] != 0.0) {
                return Err(Error::domain(format!("row {i} has upper-triangular entries")));
            }
            let mut row: Vec<(usize, f64)> =
                (0..i).filter(|&j| l[(i, j)] != 0.0).map(|j| (j, l[(i, j)])).collect();
            row.push((i, l[(i, i)]));
            rows.push(row);
        }
        Ok(Self::from_rows(n, rows, kind, 0.0))
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> FactorKind {
        self.kind
    }

    /// Relative diagonal shift `β` used to obtain the factor of `A + β diag(A)`.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_range(i);
        self.col_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.values[self.row_ptr[i + 1] - 1]
    }

    /// 0-based `(row, col)` pattern of the stored entries.
    pub fn pattern(&self) -> Vec<(usize, usize)> {
        (0..self.n)
            .flat_map(|i| self.row(i).map(move |(j, _)| (i, j)))
            .collect()
    }

    /// `ln det(QQᵀ) = 2 Σ ln q_ii`.
    pub fn logdet_gram(&self) -> f64 {
        2.0 * (0..self.n).map(|i| self.diag(i).abs().ln()).sum::<f64>()
    }

    /// Multiplies every entry by `c`, so the represented `QQᵀ` scales by `c²`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut l = DenseMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                l[(i, j)] = v;
            }
        }
        l
    }

    fn check_nonsingular(&self) -> Result<()> {
        match (0..self.n).find(|&i| self.diag(i) == 0.0) {
            Some(index) => Err(Error::Singular { index }),
            None => Ok(()),
        }
    }

    /// `Q x`
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `Qᵀ x`
    pub fn mul_adjoint(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (i, &xi) in x.iter().enumerate().take(self.n) {
            for (j, v) in self.row(i) {
                y[j] += v * xi;
            }
        }
        y
    }

    /// Solves in place without the singularity check.
    pub(crate) fn solve_in_place(&self, x: &mut [f64], mode: SolveMode) {
        match mode {
            SolveMode::Forward => {
                for i in 0..self.n {
                    let r = self.row_range(i);
                    let last = r.end - 1;
                    let mut s = x[i];
                    for k in r.start..last {
                        s -= self.values[k] * x[self.col_idx[k]];
                    }
                    x[i] = s / self.values[last];
                }
            }
            SolveMode::Adjoint => {
                for i in (0..self.n).rev() {
                    let r = self.row_range(i);
                    let last = r.end - 1;
                    let xi = x[i] / self.values[last];
                    x[i] = xi;
                    for k in r.start..last {
                        x[self.col_idx[k]] -= self.values[k] * xi;
                    }
                }
            }
        }
    }

    /// `Q⁻¹ B` for a dense right-hand side, all columns at once.
    pub fn solve_dense(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_nonsingular()?;
        assert_eq!(b.n_rows(), self.n);
        let mut x = b.clone();
        let cols = b.n_cols();
        let mut acc = vec![0.0; cols];
        for i in 0..self.n {
            acc.copy_from_slice(x.row(i));
            let r = self.row_range(i);
            let last = r.end - 1;
            for k in r.start..last {
                let (j, v) = (self.col_idx[k], self.values[k]);
                for (a, &xj) in acc.iter_mut().zip(x.row(j)) {
                    *a -= v * xj;
                }
            }
            let d = self.values[last];
            for (dst, a) in x.row_mut(i).iter_mut().zip(&acc) {
                *dst = a / d;
            }
        }
        Ok(x)
    }

    /// `Q⁻¹ A Q⁻ᵀ` for dense symmetric `A`, symmetrized.
    pub fn congruence_inverse(&self, a: &DenseMatrix) -> Result<DenseMatrix> {
        let y = self.solve_dense(a)?;
        let mut z = self.solve_dense(&y.transpose())?;
        z.symmetrize();
        Ok(z)
    }
}

/// Solves `L x = b` or `Lᵀ x = b`.
pub fn tri_solve(l: &LowerTriFactor, b: &[f64], mode: SolveMode) -> Result<Vec<f64>> {
    if b.len() != l.order() {
        return Err(Error::Dimension {
            expected: l.order(),
            got: b.len(),
        });
    }
    l.check_nonsingular()?;
    let mut x = b.to_vec();
    l.solve_in_place(&mut x, mode);
    Ok(x)
}

/// Dense Cholesky `A = QQᵀ`. Only the lower triangle of `a` is read.
pub fn cholesky(a: &DenseMatrix) -> Result<LowerTriFactor> {
    let n = a.n_rows();
    if !a.is_square() {
        return Err(Error::Dimension {
            expected: n,
            got: a.n_cols(),
        });
    }
    let mut l = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[(i, j)];
            let (li, lj) = (l.row(i), l.row(j));
            for k in 0..j {
                s -= li[k] * lj[k];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return Err(Error::NotPositiveDefinite { index: i, pivot: s });
                }
                l[(i, i)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    let rows = (0..n)
        .map(|i| (0..=i).map(|j| (j, l[(i, j)])).collect())
        .collect();
    Ok(LowerTriFactor::from_rows(n, rows, FactorKind::ExactCholesky, 0.0))
}

pub fn cholesky_sparse(a: &SparseSymMatrix) -> Result<LowerTriFactor> {
    cholesky(&a.to_dense())
}

/// `ln det A` through the Cholesky factor.
pub fn logdet_spd(a: &DenseMatrix) -> Result<f64> {
    Ok(cholesky(a)?.logdet_gram())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn cholesky_diagonal() {
        let q = cholesky(&DenseMatrix::from_diag(&[4.0, 9.0])).unwrap();
        assert_eq!(q.to_dense(), DenseMatrix::from_rows(&[&[2.0, 0.0], &[0.0, 3.0]]));
    }

    #[test]
    fn cholesky_two_by_two() {
        let a = DenseMatrix::from_rows(&[&[4.0, 2.0], &[2.0, 5.0]]);
        let q = cholesky(&a).unwrap().to_dense();
        assert_eq!(q, DenseMatrix::from_rows(&[&[2.0, 0.0], &[1.0, 2.0]]));
        assert_eq!(q.matmul(&q.transpose()), a);
    }

    #[test]
    fn cholesky_indefinite() {
        let a = DenseMatrix::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]);
        assert!(matches!(
            cholesky(&a),
            Err(Error::NotPositiveDefinite { index: 1, .. })
        ));
    }

    #[test]
    fn tri_solve_examples() {
        let d = LowerTriFactor::from_dense(&DenseMatrix::from_diag(&[2.0, 3.0]), FactorKind::Custom)
            .unwrap();
        assert_eq!(tri_solve(&d, &[2.0, 3.0], SolveMode::Forward).unwrap(), vec![1.0, 1.0]);
        let l = LowerTriFactor::from_dense(
            &DenseMatrix::from_rows(&[&[2.0, 0.0], &[1.0, 2.0]]),
            FactorKind::Custom,
        )
        .unwrap();
        assert!(close(&tri_solve(&l, &[2.0, 3.0], SolveMode::Forward).unwrap(), &[1.0, 1.0], 0.0));
        assert!(close(&tri_solve(&l, &[3.0, 2.0], SolveMode::Adjoint).unwrap(), &[1.0, 1.0], 0.0));
    }

    #[test]
    fn tri_solve_singular() {
        let l = LowerTriFactor::from_dense(
            &DenseMatrix::from_rows(&[&[1.0, 0.0], &[1.0, 0.0]]),
            FactorKind::Custom,
        )
        .unwrap();
        assert!(matches!(
            tri_solve(&l, &[1.0, 1.0], SolveMode::Forward),
            Err(Error::Singular { index: 1 })
        ));
    }

    #[test]
    fn from_dense_rejects_upper_entries() {
        let u = DenseMatrix::from_rows(&[&[1.0, 1.0], &[0.0, 1.0]]);
        assert!(LowerTriFactor::from_dense(&u, FactorKind::Custom).is_err());
    }

    #[test]
    fn solve_dense_matches_vector_solves() {
        let a = DenseMatrix::from_rows(&[&[4.0, 2.0, 1.0], &[2.0, 5.0, 0.5], &[1.0, 0.5, 3.0]]);
        let q = cholesky(&a).unwrap();
        let b = DenseMatrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]);
        let x = q.solve_dense(&b).unwrap();
        for j in 0..2 {
            let col = tri_solve(&q, &b.column(j), SolveMode::Forward).unwrap();
            assert!(close(&x.column(j), &col, 1e-14));
        }
        let m = q.congruence_inverse(&a).unwrap();
        assert!(m.sub(&DenseMatrix::identity(3)).max_abs() < 1e-14);
    }

    #[test]
    fn mul_and_adjoint_are_transposes() {
        let q = cholesky(&DenseMatrix::from_rows(&[&[4.0, 2.0], &[2.0, 5.0]])).unwrap();
        let x = [1.0, -2.0];
        let y = [0.5, 3.0];
        let lhs: f64 = q.mul(&x).iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = q.mul_adjoint(&y).iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-14);
    }
}
