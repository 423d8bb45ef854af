//! Zero-fill incomplete Cholesky.

use crate::error::{Error, Result};
use crate::linalg::{FactorKind, LowerTriFactor};
use crate::matio::SparseSymMatrix;

const INITIAL_SHIFT: f64 = 1e-3;
const MAX_SHIFT: f64 = 1.0;

/// IC(0) of `a` restricted to the lower-triangular pattern of `a`.
///
/// On pivot breakdown the factorization is retried on `A + β diag(A)` with
/// `β = 1e-3, 2e-3, 4e-3, …` up to `β ≤ 1`. The accepted `β` is recorded in
/// the returned factor.
pub fn ic0(a: &SparseSymMatrix) -> Result<LowerTriFactor> {
    let diag = a.diagonal();
    if let Some(i) = diag.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::domain(format!(
            "IC(0) needs a positive diagonal; a[{i},{i}] = {}",
            diag[i]
        )));
    }
    if let Some(l) = ic0_attempt(a, 0.0, &diag) {
        return Ok(l);
    }
    let mut beta = INITIAL_SHIFT;
    let mut last = 0.0;
    while beta <= MAX_SHIFT {
        if let Some(l) = ic0_attempt(a, beta, &diag) {
            return Ok(l);
        }
        last = beta;
        beta *= 2.0;
    }
    Err(Error::FactorizationFailed { last_shift: last })
}

fn ic0_attempt(a: &SparseSymMatrix, beta: f64, diag: &[f64]) -> Option<LowerTriFactor> {
    let n = a.order();
    // row-wise values of L; rows[i] ends with the diagonal
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    let mut work = vec![0.0; n];
    for i in 0..n {
        let mut row: Vec<(usize, f64)> = Vec::new();
        let mut diag_sum = 0.0;
        for (k, a_ik) in a.row(i) {
            if k == i {
                continue;
            }
            let row_k: &Vec<(usize, f64)> = &rows[k];
            let (&(_, l_kk), strict) = row_k.split_last().expect("row has a diagonal");
            let mut s = a_ik;
            for &(p, l_kp) in strict {
                s -= l_kp * work[p];
            }
            let l_ik = s / l_kk;
            work[k] = l_ik;
            diag_sum += l_ik * l_ik;
            row.push((k, l_ik));
        }
        let pivot = diag[i] * (1.0 + beta) - diag_sum;
        for &(k, _) in &row {
            work[k] = 0.0;
        }
        if !(pivot > 0.0) || !pivot.is_finite() {
            return None;
        }
        row.push((i, pivot.sqrt()));
        rows.push(row);
    }
    Some(LowerTriFactor::from_rows(n, rows, FactorKind::Ic0, beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::cholesky;
    use crate::matio::DenseMatrix;

    #[test]
    fn diagonal_input() {
        let a = SparseSymMatrix::from_triplets(2, [(0, 0, 2.0), (1, 1, 1.0)]).unwrap();
        let l = ic0(&a).unwrap();
        assert_eq!(l.shift(), 0.0);
        assert_eq!(l.diag(0), 2.0_f64.sqrt());
        assert_eq!(l.diag(1), 1.0);
        assert_eq!(l.nnz(), 2);
    }

    #[test]
    fn full_pattern_equals_cholesky() {
        let d = DenseMatrix::from_rows(&[
            &[4.0, 1.0, 0.5, 0.2],
            &[1.0, 3.0, 0.3, 0.1],
            &[0.5, 0.3, 2.0, 0.4],
            &[0.2, 0.1, 0.4, 5.0],
        ]);
        let a = SparseSymMatrix::from_dense_lower(&d).unwrap();
        let l = ic0(&a).unwrap().to_dense();
        let c = cholesky(&d).unwrap().to_dense();
        assert!(l.sub(&c).max_abs() < 1e-15);
    }

    #[test]
    fn pattern_is_preserved_on_tridiagonal() {
        let n = 6;
        let a = SparseSymMatrix::from_triplets(
            n,
            (0..n)
                .map(|i| (i, i, 2.0))
                .chain((1..n).map(|i| (i, i - 1, -1.0))),
        )
        .unwrap();
        let l = ic0(&a).unwrap();
        let pattern: Vec<_> = a.triplets().map(|(i, j, _)| (i, j)).collect();
        assert_eq!(l.pattern(), pattern);
        // tridiagonal: IC(0) is exact
        let lt = l.to_dense();
        assert!(lt.matmul(&lt.transpose()).sub(&a.to_dense()).max_abs() < 1e-14);
    }

    #[test]
    fn breakdown_triggers_shift() {
        // indefinite but with positive diagonal; IC(0) of the pattern breaks down
        let d = DenseMatrix::from_rows(&[&[1.0, 0.6, 0.6], &[0.6, 1.0, -0.6], &[0.6, -0.6, 1.0]]);
        let a = SparseSymMatrix::from_dense_lower(&d).unwrap();
        let l = ic0(&a).unwrap();
        assert!(l.shift() >= 1e-3);
        assert!(l.shift() <= 1.0);
    }

    #[test]
    fn persistent_breakdown_fails() {
        let d = DenseMatrix::from_rows(&[&[1.0, 5.0], &[5.0, 1.0]]);
        let a = SparseSymMatrix::from_dense_lower(&d).unwrap();
        assert!(matches!(ic0(&a), Err(Error::FactorizationFailed { .. })));
    }

    #[test]
    fn nonpositive_diagonal_rejected() {
        let a = SparseSymMatrix::from_triplets(2, [(0, 0, 1.0), (1, 1, 0.0)]).unwrap();
        assert!(matches!(ic0(&a), Err(Error::Domain(_))));
    }
}
