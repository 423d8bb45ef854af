//! Low-rank corrections of an approximate factor `Q`.
//!
//! With `A = Q(I + Ẽ)Qᵀ` and `Ẽ = UΘUᵀ`, a rank-`r` term `V D Vᵀ` built from
//! `r` eigenpairs of `Ẽ` defines
//!
//! ```text
//! P_α = Q (α (I − VVᵀ) + V (I_r + D) Vᵀ) Qᵀ
//! ```
//!
//! Because `V` spans eigenvectors of `Ẽ`, the spectrum of `P_α⁻¹A` is known in
//! closed form: `1` on the selected directions and `(1 + θ_i)/α` elsewhere.
//! The `*_alpha` functions evaluate the divergence and condition numbers from
//! that spectrum.

use std::cmp::Ordering;
use std::sync::Arc;

use crate::divergence::{gamma_unchecked, ln_kaporin_k_spectrum, scalar_divergence};
use crate::error::{Error, Result};
use crate::linalg::{sym_eig, EigenDecomposition, LinearOperator, LowerTriFactor, SolveMode};
use crate::matio::vector::dot;
use crate::matio::{DenseMatrix, SparseSymMatrix};

const INDEFINITE_MARGIN: f64 = 1e-12;

/// Eigendecomposition of `Ẽ = Q⁻¹AQ⁻ᵀ − I` with the γ-induced ordering.
#[derive(Clone, Debug)]
pub struct ErrorCore {
    eig: EigenDecomposition,
    gamma_order: Vec<usize>,
    factor: Arc<LowerTriFactor>,
}

impl ErrorCore {
    pub fn new(a: &SparseSymMatrix, factor: Arc<LowerTriFactor>) -> Result<Self> {
        Self::from_dense(&a.to_dense(), factor)
    }

    pub fn from_dense(a: &DenseMatrix, factor: Arc<LowerTriFactor>) -> Result<Self> {
        if a.n_rows() != factor.order() {
            return Err(Error::Dimension {
                expected: factor.order(),
                got: a.n_rows(),
            });
        }
        let mut e = factor.congruence_inverse(a)?;
        for i in 0..e.n_rows() {
            e[(i, i)] -= 1.0;
        }
        let eig = sym_eig(&e)?;
        if let Some(&t) = eig.values.iter().find(|&&t| t <= -1.0 + INDEFINITE_MARGIN) {
            return Err(Error::NotSpd(format!(
                "error core has eigenvalue {t} ≤ −1, so A is not positive definite"
            )));
        }
        let gamma_order = gamma_ordering(&eig.values);
        Ok(Self {
            eig,
            gamma_order,
            factor,
        })
    }

    pub fn order(&self) -> usize {
        self.eig.order()
    }

    /// Eigenvalues `θ_i` of `Ẽ`, algebraically non-increasing.
    pub fn theta(&self) -> &[f64] {
        &self.eig.values
    }

    pub fn eig(&self) -> &EigenDecomposition {
        &self.eig
    }

    /// Indices into `theta()` sorted by `γ(θ)` non-increasing.
    pub fn gamma_order(&self) -> &[usize] {
        &self.gamma_order
    }

    pub fn factor(&self) -> &Arc<LowerTriFactor> {
        &self.factor
    }
}

fn gamma_ordering(theta: &[f64]) -> Vec<usize> {
    let gamma: Vec<f64> = theta.iter().map(|&t| gamma_unchecked(t)).collect();
    let mut order: Vec<usize> = (0..theta.len()).collect();
    order.sort_by(|&a, &b| {
        gamma[b]
            .total_cmp(&gamma[a])
            .then(theta[b].total_cmp(&theta[a]))
            .then(a.cmp(&b))
    });
    order
}

fn magnitude_ordering(theta: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..theta.len()).collect();
    order.sort_by(|&a, &b| {
        theta[b]
            .abs()
            .total_cmp(&theta[a].abs())
            .then_with(|| match (theta[a] >= 0.0, theta[b] >= 0.0) {
                (true, false) => Ordering::Less,
                (false, true) => Ordering::Greater,
                _ => Ordering::Equal,
            })
            .then(a.cmp(&b))
    });
    order
}

/// `V D Vᵀ` with orthonormal `V` (n × r) and diagonal `D`.
#[derive(Clone, Debug)]
pub struct LowRankTerm {
    v: DenseMatrix,
    d: Vec<f64>,
    selection: Vec<usize>,
}

impl LowRankTerm {
    pub fn empty(n: usize) -> Self {
        Self {
            v: DenseMatrix::zeros(n, 0),
            d: vec![],
            selection: vec![],
        }
    }

    fn from_selection(core: &ErrorCore, selection: Vec<usize>) -> Self {
        let n = core.order();
        let mut v = DenseMatrix::zeros(n, selection.len());
        for (col, &k) in selection.iter().enumerate() {
            v.set_column(col, &core.eig.vector(k));
        }
        let d = selection.iter().map(|&k| core.theta()[k]).collect();
        Self { v, d, selection }
    }

    pub fn rank(&self) -> usize {
        self.d.len()
    }

    pub fn v(&self) -> &DenseMatrix {
        &self.v
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    /// Indices into the error core's eigenvalues.
    pub fn selection(&self) -> &[usize] {
        &self.selection
    }
}

fn check_rank(core: &ErrorCore, r: usize) -> Result<()> {
    if r >= core.order() {
        return Err(Error::Rank {
            rank: r,
            n: core.order(),
        });
    }
    Ok(())
}

/// Keeps the `r` eigenpairs of `Ẽ` with the largest `γ(θ)`.
pub fn bld_truncate(core: &ErrorCore, r: usize) -> Result<LowRankTerm> {
    check_rank(core, r)?;
    Ok(LowRankTerm::from_selection(core, core.gamma_order[..r].to_vec()))
}

/// Keeps the `r` eigenpairs of `Ẽ` with the largest `|θ|`.
pub fn tsvd_truncate(core: &ErrorCore, r: usize) -> Result<LowRankTerm> {
    check_rank(core, r)?;
    let order = magnitude_ordering(core.theta());
    Ok(LowRankTerm::from_selection(core, order[..r].to_vec()))
}

/// `1 + θ_i` over the indices not selected by `term`.
pub fn remaining_values(core: &ErrorCore, term: &LowRankTerm) -> Vec<f64> {
    let mut selected = vec![false; core.order()];
    for &k in term.selection() {
        selected[k] = true;
    }
    core.theta()
        .iter()
        .zip(&selected)
        .filter(|(_, &s)| !s)
        .map(|(&t, _)| 1.0 + t)
        .collect()
}

/// `α* = mean of (1 + θ_i)` over the unselected indices.
pub fn optimal_alpha(core: &ErrorCore, term: &LowRankTerm) -> Result<f64> {
    let rest = remaining_values(core, term);
    if rest.is_empty() {
        return Err(Error::Rank {
            rank: term.rank(),
            n: core.order(),
        });
    }
    Ok(rest.iter().sum::<f64>() / rest.len() as f64)
}

/// `[l, L] = [min, max]` of the unselected `1 + θ_i`.
pub fn flat_interval(core: &ErrorCore, term: &LowRankTerm) -> Result<(f64, f64)> {
    let rest = remaining_values(core, term);
    if rest.is_empty() {
        return Err(Error::Rank {
            rank: term.rank(),
            n: core.order(),
        });
    }
    Ok(rest
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v))))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::domain(format!("α = {alpha} must be positive")));
    }
    Ok(())
}

/// Eigenvalues of `P_α⁻¹A`: `1` (× r) followed by `(1+θ_i)/α` on the rest.
pub fn preconditioned_spectrum_alpha(
    core: &ErrorCore,
    term: &LowRankTerm,
    alpha: f64,
) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    let mut spec = vec![1.0; term.rank()];
    spec.extend(remaining_values(core, term).into_iter().map(|v| v / alpha));
    Ok(spec)
}

/// `D_LD(A, P_α) = Σ_rest ((1+θ)/α − ln((1+θ)/α) − 1)`.
pub fn divergence_alpha(core: &ErrorCore, term: &LowRankTerm, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(remaining_values(core, term)
        .into_iter()
        .map(|v| scalar_divergence(v / alpha))
        .sum())
}

/// `ln K(P_α⁻¹A)` from the closed-form spectrum.
pub fn ln_kaporin_alpha(core: &ErrorCore, term: &LowRankTerm, alpha: f64) -> Result<f64> {
    ln_kaporin_k_spectrum(&preconditioned_spectrum_alpha(core, term, alpha)?)
}

/// `κ₂(P_α^{-1/2} A P_α^{-1/2})`; for `r > 0` this is
/// `max(1, L/α) / min(1, l/α)`.
pub fn kappa2_alpha(core: &ErrorCore, term: &LowRankTerm, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let (l, big_l) = flat_interval(core, term)?;
    if term.rank() == 0 {
        return Ok(big_l / l);
    }
    Ok((big_l / alpha).max(1.0) / (l / alpha).min(1.0))
}

/// `P_α = Q(α(I − VVᵀ) + V(I_r + D)Vᵀ)Qᵀ`, applied matrix-free.
#[derive(Clone, Debug)]
pub struct Preconditioner {
    factor: Arc<LowerTriFactor>,
    low_rank: LowRankTerm,
    alpha: f64,
}

impl Preconditioner {
    pub fn new(factor: Arc<LowerTriFactor>, low_rank: LowRankTerm, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        let n = factor.order();
        if low_rank.v.n_rows() != n {
            return Err(Error::Dimension {
                expected: n,
                got: low_rank.v.n_rows(),
            });
        }
        if let Some(index) = (0..n).find(|&i| factor.diag(i) == 0.0) {
            return Err(Error::Singular { index });
        }
        if let Some(&d) = low_rank.d.iter().find(|&&d| !(d > -1.0)) {
            return Err(Error::NotSpd(format!("I + D has nonpositive entry 1 + {d}")));
        }
        Ok(Self {
            factor,
            low_rank,
            alpha,
        })
    }

    /// `P = QQᵀ`.
    pub fn from_factor(factor: Arc<LowerTriFactor>) -> Result<Self> {
        let n = factor.order();
        Self::new(factor, LowRankTerm::empty(n), 1.0)
    }

    /// `P_α` built from a BLD truncation of `core`.
    pub fn bld(core: &ErrorCore, r: usize, alpha: f64) -> Result<Self> {
        Self::new(core.factor().clone(), bld_truncate(core, r)?, alpha)
    }

    pub fn order(&self) -> usize {
        self.factor.order()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn rank(&self) -> usize {
        self.low_rank.rank()
    }

    pub fn factor(&self) -> &Arc<LowerTriFactor> {
        &self.factor
    }

    pub fn low_rank(&self) -> &LowRankTerm {
        &self.low_rank
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::new(self.factor.clone(), self.low_rank.clone(), alpha)
    }

    /// `c P_α`, realized by scaling `Q` by `√c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        check_alpha(c)?;
        Self::new(
            Arc::new(self.factor.scaled(c.sqrt())),
            self.low_rank.clone(),
            self.alpha,
        )
    }

    /// `y ↦ Δ^s y` with `Δ = α(I − VVᵀ) + V(I+D)Vᵀ` and `s ∈ {1, −1, ±½}`.
    fn apply_core_power(&self, y: &mut [f64], power: f64) {
        let v = &self.low_rank.v;
        let coeffs = v.t_matvec(y);
        let a_pow = self.alpha.powf(power);
        for yi in y.iter_mut() {
            *yi *= a_pow;
        }
        if coeffs.is_empty() {
            return;
        }
        let weights: Vec<f64> = coeffs
            .iter()
            .zip(&self.low_rank.d)
            .map(|(c, d)| c * ((1.0 + d).powf(power) - a_pow))
            .collect();
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += dot(v.row(i), &weights);
        }
    }

    /// `P_α⁻¹ x = Q⁻ᵀ Δ⁻¹ Q⁻¹ x`.
    pub fn apply_inverse(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.order());
        let mut y = x.to_vec();
        self.factor.solve_in_place(&mut y, SolveMode::Forward);
        self.apply_core_power(&mut y, -1.0);
        self.factor.solve_in_place(&mut y, SolveMode::Adjoint);
        y
    }

    /// `P_α x = Q Δ Qᵀ x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.factor.mul_adjoint(x);
        self.apply_core_power(&mut y, 1.0);
        self.factor.mul(&y)
    }

    /// `ln det P_α = ln det(QQᵀ) + (n − r) ln α + Σ ln(1 + d_k)`.
    pub fn logdet(&self) -> f64 {
        let n = self.order() as f64;
        let r = self.rank() as f64;
        self.factor.logdet_gram()
            + (n - r) * self.alpha.ln()
            + self.low_rank.d.iter().map(|d| d.ln_1p()).sum::<f64>()
    }

    /// Dense `P_α`.
    pub fn to_dense(&self) -> DenseMatrix {
        let n = self.order();
        let mut cols = Vec::with_capacity(n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            cols.push(self.apply(&e));
        }
        let mut p = DenseMatrix::from_columns(n, &cols);
        p.symmetrize();
        p
    }

    pub fn inverse_operator(&self) -> InverseOperator<'_> {
        InverseOperator(self)
    }

    /// `x ↦ Δ^{-1/2} Q⁻¹ A Q⁻ᵀ Δ^{-1/2} x`, symmetric and similar to `P_α⁻¹A`.
    pub fn symmetric_preconditioned<'a, Op: LinearOperator>(
        &'a self,
        a: &'a Op,
    ) -> SymmetricPreconditioned<'a, Op> {
        SymmetricPreconditioned { p: self, a }
    }

    /// Exact `trace(P_α⁻¹A)` by `n` applications of `P_α⁻¹` to the columns of `A`.
    pub fn trace_pinv_a<Op: LinearOperator>(&self, a: &Op) -> f64 {
        let n = self.order();
        (0..n)
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                self.apply_inverse(&a.apply_vec(&e))[j]
            })
            .sum()
    }
}

/// `H = P_α⁻¹` as an operator.
pub struct InverseOperator<'a>(&'a Preconditioner);

impl LinearOperator for InverseOperator<'_> {
    fn dim(&self) -> usize {
        self.0.order()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(&self.0.apply_inverse(x));
    }
}

pub struct SymmetricPreconditioned<'a, Op> {
    p: &'a Preconditioner,
    a: &'a Op,
}

impl<Op: LinearOperator> LinearOperator for SymmetricPreconditioned<'_, Op> {
    fn dim(&self) -> usize {
        self.p.order()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut t = x.to_vec();
        self.p.apply_core_power(&mut t, -0.5);
        self.p.factor.solve_in_place(&mut t, SolveMode::Adjoint);
        self.a.apply(&t, y);
        self.p.factor.solve_in_place(y, SolveMode::Forward);
        self.p.apply_core_power(y, -0.5);
    }
}

/// `c = trace(P⁻¹A)/n` and `cP`, for which `trace((cP)⁻¹A) = n`.
pub fn scale_to_unit_trace<Op: LinearOperator>(
    a: &Op,
    p: &Preconditioner,
) -> Result<(f64, Preconditioner)> {
    let c = p.trace_pinv_a(a) / p.order() as f64;
    if !(c > 0.0) {
        return Err(Error::NotSpd(format!("trace(P⁻¹A)/n = {c} is not positive")));
    }
    Ok((c, p.scaled(c)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{cholesky, FactorKind};

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    fn identity_core(theta: &[f64]) -> ErrorCore {
        // Q = I, A = I + diag(θ)
        let a = DenseMatrix::from_diag(&theta.iter().map(|t| 1.0 + t).collect::<Vec<_>>());
        ErrorCore::from_dense(&a, Arc::new(LowerTriFactor::identity(theta.len()))).unwrap()
    }

    #[test]
    fn exact_factor_gives_zero_core() {
        let a = DenseMatrix::from_rows(&[&[4.0, 1.0, 0.5], &[1.0, 3.0, 0.2], &[0.5, 0.2, 2.0]]);
        let q = Arc::new(cholesky(&a).unwrap());
        let core = ErrorCore::from_dense(&a, q).unwrap();
        assert!(core.theta().iter().all(|t| t.abs() < 1e-14));
        let term = bld_truncate(&core, 1).unwrap();
        close(optimal_alpha(&core, &term).unwrap(), 1.0, 1e-14);
    }

    #[test]
    fn core_with_identity_factor() {
        let core = identity_core(&[1.0, 0.0]);
        assert_eq!(core.theta(), &[1.0, 0.0]);
    }

    #[test]
    fn core_rejects_indefinite() {
        let a = DenseMatrix::from_diag(&[1.0, -0.5]);
        let res = ErrorCore::from_dense(&a, Arc::new(LowerTriFactor::identity(2)));
        assert!(matches!(res, Err(Error::NotSpd(_))));
    }

    fn close_all(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            close(*x, *y, tol);
        }
    }

    #[test]
    fn gamma_order_prefers_negative_outlier() {
        let core = identity_core(&[0.5, -0.45, 0.1]);
        let order: Vec<f64> = core.gamma_order().iter().map(|&k| core.theta()[k]).collect();
        close_all(&order, &[-0.45, 0.5, 0.1], 1e-14);
    }

    #[test]
    fn truncation_selections() {
        let core = identity_core(&[0.5, -0.45]);
        close_all(bld_truncate(&core, 1).unwrap().d(), &[-0.45], 1e-14);
        close_all(tsvd_truncate(&core, 1).unwrap().d(), &[0.5], 1e-14);
        assert_eq!(bld_truncate(&core, 0).unwrap().rank(), 0);
        assert_eq!(tsvd_truncate(&core, 0).unwrap().rank(), 0);
        assert!(matches!(bld_truncate(&core, 2), Err(Error::Rank { .. })));
        assert!(matches!(tsvd_truncate(&core, 3), Err(Error::Rank { .. })));

        let core = identity_core(&[3.0, 0.5, -0.2]);
        close_all(bld_truncate(&core, 1).unwrap().d(), &[3.0], 1e-14);
        close(gamma_unchecked(3.0), 3.0 - 4f64.ln(), 1e-15);
    }

    #[test]
    fn tsvd_tie_break() {
        let core = identity_core(&[-0.3, 0.3, -0.3, 0.3]);
        let term = tsvd_truncate(&core, 3).unwrap();
        let picked: Vec<f64> = term.d().to_vec();
        close_all(&picked, &[0.3, 0.3, -0.3], 1e-14);
        // positive ones come first by original (sorted) index
        let sel = term.selection();
        assert!(sel[0] < sel[1]);
    }

    #[test]
    fn optimal_alpha_example() {
        let core = identity_core(&[3.0, 0.5, -0.2]);
        let term = bld_truncate(&core, 1).unwrap();
        close(optimal_alpha(&core, &term).unwrap(), 1.15, 1e-15);
    }

    #[test]
    fn remaining_pair_examples() {
        // selected θ = 2 (γ(2) ≈ 0.90 beats γ(0.5), γ(−0.5)), remaining 1 + θ = (1.5, 0.5)
        let core = identity_core(&[2.0, 0.5, -0.5]);
        let term = bld_truncate(&core, 1).unwrap();
        assert_eq!(term.d(), &[2.0]);
        let a_star = optimal_alpha(&core, &term).unwrap();
        close(a_star, 1.0, 1e-15);
        let d = divergence_alpha(&core, &term, a_star).unwrap();
        close(d, -0.75f64.ln(), 1e-15);
        close(d, 0.2876821, 1e-7);
        let lnk = ln_kaporin_alpha(&core, &term, a_star).unwrap();
        close(lnk, d, 1e-15);
        assert!(divergence_alpha(&core, &term, 2.0 * a_star).unwrap() > d);

        for alpha in [0.5, 1.0, 1.5] {
            close(kappa2_alpha(&core, &term, alpha).unwrap(), 3.0, 1e-15);
        }
        close(kappa2_alpha(&core, &term, 3.0).unwrap(), 6.0, 1e-14);
        close(kappa2_alpha(&core, &term, 0.25).unwrap(), 6.0, 1e-14);
        assert_eq!(flat_interval(&core, &term).unwrap(), (0.5, 1.5));
    }

    #[test]
    fn zero_core_divergence_in_alpha() {
        let core = identity_core(&[0.0; 4]);
        let term = bld_truncate(&core, 1).unwrap();
        for alpha in [0.3f64, 1.0, 2.5] {
            let want = 3.0 * (1.0 / alpha - (1.0 / alpha).ln() - 1.0);
            close(divergence_alpha(&core, &term, alpha).unwrap(), want, 1e-14);
        }
        close(divergence_alpha(&core, &term, 1.0).unwrap(), 0.0, 0.0);
        assert!(divergence_alpha(&core, &term, 0.0).is_err());
        assert!(divergence_alpha(&core, &term, -1.0).is_err());
    }

    #[test]
    fn apply_inverse_trivial_cases() {
        let q = Arc::new(LowerTriFactor::identity(3));
        let p = Preconditioner::from_factor(q.clone()).unwrap();
        assert_eq!(p.apply_inverse(&[1.0, 2.0, 3.0]), vec![1.0, 2.0, 3.0]);
        let p2 = Preconditioner::new(q, LowRankTerm::empty(3), 2.0).unwrap();
        assert_eq!(p2.apply_inverse(&[1.0, 2.0, 3.0]), vec![0.5, 1.0, 1.5]);
    }

    #[test]
    fn singular_factor_rejected() {
        let l = LowerTriFactor::from_dense(&DenseMatrix::from_diag(&[1.0, 0.0]), FactorKind::Custom).unwrap();
        assert!(matches!(
            Preconditioner::from_factor(Arc::new(l)),
            Err(Error::Singular { index: 1 })
        ));
    }

    #[test]
    fn dense_matches_apply_and_logdet() {
        let a = DenseMatrix::from_rows(&[&[4.0, 1.0, 0.5], &[1.0, 3.0, 0.2], &[0.5, 0.2, 2.0]]);
        let q = Arc::new(LowerTriFactor::diagonal_sqrt(&a.diagonal()).unwrap());
        let core = ErrorCore::from_dense(&a, q).unwrap();
        let p = Preconditioner::bld(&core, 1, 0.8).unwrap();
        let dense = p.to_dense();
        let ld = crate::linalg::logdet_spd(&dense).unwrap();
        close(ld, p.logdet(), 1e-12);
        let x = [0.3, -1.0, 2.0];
        let y = p.apply_inverse(&x);
        let back = dense.matvec(&y);
        for (u, v) in back.iter().zip(&x) {
            close(*u, *v, 1e-13);
        }
    }
}
