//! Dense symmetric eigensolver: Householder tridiagonalization followed by
//! implicit QL with Wilkinson shifts (the EISPACK `tred2`/`tql2` pair).

use crate::error::{Error, Result};
use crate::matio::DenseMatrix;

const SYMMETRY_RTOL: f64 = 1e-10;
const SWEEPS_PER_ORDER: usize = 50;

/// `S = W Λ Wᵀ` with eigenvalues sorted algebraically non-increasing and the
/// eigenvectors stored as the columns of `vectors`.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: DenseMatrix,
}

impl EigenDecomposition {
    pub fn order(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, k: usize) -> Vec<f64> {
        self.vectors.column(k)
    }

    /// `W diag(f(λ)) Wᵀ`
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        let n = self.order();
        let fw: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        let mut scaled = self.vectors.clone();
        for i in 0..n {
            for (x, &s) in scaled.row_mut(i).iter_mut().zip(&fw) {
                *x *= s;
            }
        }
        scaled.matmul(&self.vectors.transpose())
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        self.reconstruct_with(|v| v)
    }
}

pub fn sym_eig(s: &DenseMatrix) -> Result<EigenDecomposition> {
    if !s.is_square() {
        return Err(Error::Dimension {
            expected: s.n_rows(),
            got: s.n_cols(),
        });
    }
    if !s.is_finite() {
        return Err(Error::domain("matrix has non-finite entries"));
    }
    let asym = s.asymmetry();
    if asym > SYMMETRY_RTOL {
        return Err(Error::domain(format!(
            "eigensolver input is not symmetric (relative asymmetry {asym:e})"
        )));
    }
    let n = s.n_rows();
    if n == 0 {
        return Ok(EigenDecomposition {
            values: vec![],
            vectors: DenseMatrix::zeros(0, 0),
        });
    }
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| s.row(i).to_vec()).collect();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut v, &mut d, &mut e);

    // tql2 rotates columns of V; operate on its transpose for contiguous rows
    let mut vt: Vec<Vec<f64>> = (0..n).map(|j| (0..n).map(|i| v[i][j]).collect()).collect();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    tql2(&mut d, &mut e, &mut vt, SWEEPS_PER_ORDER * n)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[b].total_cmp(&d[a]).then(a.cmp(&b)));
    let values = order.iter().map(|&k| d[k]).collect();
    let mut vectors = DenseMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        vectors.set_column(col, &vt[k]);
    }
    Ok(EigenDecomposition { values, vectors })
}

/// Eigenvalues and first eigenvector components of the symmetric tridiagonal
/// matrix with diagonal `diag` and off-diagonal `off` (`off.len() + 1 == diag.len()`).
/// Returns `(θ_k, τ_k)` pairs sorted by non-increasing `θ`.
pub fn tridiag_eig_first_components(diag: &[f64], off: &[f64]) -> Result<Vec<(f64, f64)>> {
    let m = diag.len();
    assert_eq!(off.len() + 1, m.max(1));
    if m == 0 {
        return Ok(vec![]);
    }
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.push(0.0);
    // rows of the transposed eigenvector matrix, restricted to the first
    // coordinate: vt[k] = [V[0][k]]
    let mut vt: Vec<Vec<f64>> = (0..m).map(|k| vec![if k == 0 { 1.0 } else { 0.0 }]).collect();
    tql2(&mut d, &mut e, &mut vt, SWEEPS_PER_ORDER * m)?;
    let mut pairs: Vec<(f64, f64)> = d.iter().zip(&vt).map(|(&t, row)| (t, row[0])).collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    Ok(pairs)
}

fn tred2(v: &mut [Vec<f64>], d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    d.copy_from_slice(&v[n - 1]);
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[i - 1][j];
                v[i][j] = 0.0;
                v[j][i] = 0.0;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[j][i] = f;
                g = e[j] + v[j][j] * f;
                for k in j + 1..i {
                    g += v[k][j] * d[k];
                    e[k] += v[k][j] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[k][j] -= f * e[k] + g * d[k];
                }
                d[j] = v[i - 1][j];
                v[i][j] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[n - 1][i] = v[i][i];
        v[i][i] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[k][i + 1] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[k][i + 1] * v[k][j];
                }
                for k in 0..=i {
                    v[k][j] -= g * d[k];
                }
            }
        }
        for row in v.iter_mut().take(i + 1) {
            row[i + 1] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[n - 1][j];
        v[n - 1][j] = 0.0;
    }
    v[n - 1][n - 1] = 1.0;
    e[0] = 0.0;
}

/// Implicit QL on the tridiagonal `(d, e)` with `e[i]` coupling `i` and `i+1`.
/// `vt[k]` holds (a subset of the coordinates of) eigenvector `k` and is rotated
/// alongside.
fn tql2(d: &mut [f64], e: &mut [f64], vt: &mut [Vec<f64>], max_sweeps: usize) -> Result<()> {
    let n = d.len();
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let mut sweeps = 0usize;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m == n {
            m = n - 1;
        }
        if m > l {
            loop {
                sweeps += 1;
                if sweeps > max_sweeps {
                    return Err(Error::Convergence { sweeps: max_sweeps });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (lo, hi) = vt.split_at_mut(i + 1);
                    let (vi, vi1) = (&mut lo[i], &mut hi[0]);
                    for (a, b) in vi.iter_mut().zip(vi1.iter_mut()) {
                        let hk = *b;
                        *b = s * *a + c * hk;
                        *a = c * *a - s * hk;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}
