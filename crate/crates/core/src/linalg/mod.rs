//! Dense and sparse kernels: Cholesky and IC(0) factors, triangular solves,
//! the symmetric eigensolver and Lanczos tridiagonalization.

mod eig;
mod factor;
mod ic0;
mod lanczos;
mod operator;

pub use eig::{sym_eig, tridiag_eig_first_components, EigenDecomposition};
pub use factor::{cholesky, cholesky_sparse, logdet_spd, tri_solve, FactorKind, LowerTriFactor, SolveMode};
pub use ic0::ic0;
pub use lanczos::{lanczos, LanczosResult};
pub use operator::{FnOperator, LinearOperator, ScaledIdentity};

use crate::error::Result;
use crate::matio::DenseMatrix;

/// `A⁻¹` for SPD `A` via Cholesky.
pub fn spd_inverse(a: &DenseMatrix) -> Result<DenseMatrix> {
    let q = cholesky(a)?;
    let n = a.n_rows();
    // A⁻¹ = Q⁻ᵀ Q⁻¹ = (Q⁻¹)ᵀ (Q⁻¹)
    let qinv = q.solve_dense(&DenseMatrix::identity(n))?;
    let mut inv = qinv.t_matmul(&qinv);
    inv.symmetrize();
    Ok(inv)
}
