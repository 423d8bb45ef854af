use crate::error::{Error, Result};
use crate::linalg::LinearOperator;
use crate::matio::vector::{axpy, dot, norm2};
use crate::matio::DenseMatrix;

const UNIT_TOL: f64 = 1e-12;
const BREAKDOWN_RTOL: f64 = 1e-12;

/// `T_m = U_mᵀ M U_m` as diagonal `alphas` and off-diagonal `betas`.
#[derive(Clone, Debug)]
pub struct LanczosResult {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    /// `n × m` basis, kept when reorthogonalizing.
    pub basis: Option<DenseMatrix>,
    /// Set when the Krylov space became invariant before `m` steps.
    pub breakdown: bool,
    /// Running estimate of `‖M‖₂` (max of `‖M u_j‖`).
    pub norm_estimate: f64,
}

impl LanczosResult {
    pub fn steps(&self) -> usize {
        self.alphas.len()
    }

    pub fn tridiagonal(&self) -> DenseMatrix {
        let mut t = DenseMatrix::from_diag(&self.alphas);
        for (j, &b) in self.betas.iter().enumerate() {
            t[(j, j + 1)] = b;
            t[(j + 1, j)] = b;
        }
        t
    }
}

/// `m` steps of symmetric Lanczos from the unit vector `v0`.
///
/// With `reorthogonalize` every new direction is orthogonalized twice against
/// the whole basis (classical Gram-Schmidt, repeated).
pub fn lanczos<Op: LinearOperator + ?Sized>(
    op: &Op,
    v0: &[f64],
    m: usize,
    reorthogonalize: bool,
) -> Result<LanczosResult> {
    let n = op.dim();
    if v0.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: v0.len(),
        });
    }
    if m == 0 {
        return Err(Error::domain("Lanczos needs at least one step"));
    }
    let nv = norm2(v0);
    if (nv - 1.0).abs() > UNIT_TOL {
        return Err(Error::domain(format!("starting vector has norm {nv}, expected 1")));
    }
    let m = m.min(n);
    let mut basis: Vec<Vec<f64>> = vec![v0.to_vec()];
    let mut alphas = Vec::with_capacity(m);
    let mut betas: Vec<f64> = Vec::with_capacity(m.saturating_sub(1));
    let mut prev: Option<Vec<f64>> = None;
    let mut w = vec![0.0; n];
    let mut norm_estimate: f64 = 0.0;
    let mut breakdown = false;

    for j in 0..m {
        let u = basis.last().expect("non-empty basis").clone();
        op.apply(&u, &mut w);
        norm_estimate = norm_estimate.max(norm2(&w));
        let alpha = dot(&u, &w);
        alphas.push(alpha);
        axpy(-alpha, &u, &mut w);
        if let (Some(p), Some(&b)) = (prev.as_ref(), betas.last()) {
            axpy(-b, p, &mut w);
        }
        if reorthogonalize {
            for _ in 0..2 {
                for q in &basis {
                    let c = dot(q, &w);
                    axpy(-c, q, &mut w);
                }
            }
        }
        if j + 1 == m {
            break;
        }
        let beta = norm2(&w);
        if beta <= BREAKDOWN_RTOL * norm_estimate {
            breakdown = true;
            break;
        }
        betas.push(beta);
        let next: Vec<f64> = w.iter().map(|x| x / beta).collect();
        if reorthogonalize {
            basis.push(next);
            prev = Some(u);
        } else {
            prev = Some(u);
            basis.clear();
            basis.push(next);
        }
    }

    let basis = reorthogonalize.then(|| DenseMatrix::from_columns(n, &basis));
    Ok(LanczosResult {
        alphas,
        betas,
        basis,
        breakdown,
        norm_estimate,
    })
}
