//! Scalar functionals of SPD matrices: spectral condition number, Kaporin's
//! `B` and `ln K`, the log-determinant Bregman divergence and its dual form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, spd_inverse, sym_eig, LowerTriFactor};
use crate::matio::{DenseMatrix, SparseSymMatrix};

fn check_spectrum(spectrum: &[f64]) -> Result<()> {
    if spectrum.is_empty() {
        return Err(Error::domain("empty spectrum"));
    }
    match spectrum.iter().find(|&&v| !(v > 0.0) || !v.is_finite()) {
        Some(v) => Err(Error::domain(format!("spectrum entry {v} is not positive"))),
        None => Ok(()),
    }
}

/// `λ_max / λ_min`.
pub fn kappa2(spectrum: &[f64]) -> Result<f64> {
    check_spectrum(spectrum)?;
    let (lo, hi) = spectrum
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    Ok(hi / lo)
}

/// Arithmetic mean over geometric mean.
pub fn kaporin_b(spectrum: &[f64]) -> Result<f64> {
    check_spectrum(spectrum)?;
    let n = spectrum.len() as f64;
    let mean = spectrum.iter().sum::<f64>() / n;
    let mean_ln = spectrum.iter().map(|v| v.ln()).sum::<f64>() / n;
    Ok(mean / mean_ln.exp())
}

/// `ln K = n ln(trace/n) − ln det`.
pub fn ln_kaporin_k(trace: f64, logdet: f64, n: usize) -> Result<f64> {
    if !(trace > 0.0) || !trace.is_finite() {
        return Err(Error::domain(format!("trace {trace} must be positive")));
    }
    if n == 0 {
        return Err(Error::domain("n must be positive"));
    }
    let nf = n as f64;
    Ok(nf * (trace / nf).ln() - logdet)
}

pub fn ln_kaporin_k_spectrum(spectrum: &[f64]) -> Result<f64> {
    check_spectrum(spectrum)?;
    let trace: f64 = spectrum.iter().sum();
    let logdet: f64 = spectrum.iter().map(|v| v.ln()).sum();
    ln_kaporin_k(trace, logdet, spectrum.len())
}

/// `γ(λ) = λ − ln(1 + λ)`.
pub fn gamma_map(lambda: f64) -> Result<f64> {
    if !(lambda > -1.0) || !lambda.is_finite() {
        return Err(Error::domain(format!("γ is undefined at {lambda}")));
    }
    Ok(gamma_unchecked(lambda))
}

#[inline]
pub(crate) fn gamma_unchecked(lambda: f64) -> f64 {
    lambda - lambda.ln_1p()
}

/// Scalar summand `x − ln x − 1` of the divergence.
#[inline]
pub(crate) fn scalar_divergence(x: f64) -> f64 {
    x - x.ln() - 1.0
}

/// First antieigenvalue `2√(λ₁λₙ)/(λ₁+λₙ)`.
pub fn antieigen_cos(lambda1: f64, lambda_n: f64) -> Result<f64> {
    if !(lambda_n > 0.0) || lambda1 < lambda_n {
        return Err(Error::domain(format!(
            "need λ₁ ≥ λₙ > 0, got ({lambda1}, {lambda_n})"
        )));
    }
    Ok(2.0 * (lambda1 * lambda_n).sqrt() / (lambda1 + lambda_n))
}

/// `diag(A)^{-1/2} A diag(A)^{-1/2}`. The diagonal of the result is exactly 1.
pub fn jacobi_scale(a: &SparseSymMatrix) -> Result<SparseSymMatrix> {
    let d = a.diagonal();
    if let Some(i) = d.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::domain(format!("diagonal entry {i} = {} is not positive", d[i])));
    }
    let s: Vec<f64> = d.iter().map(|v| v.sqrt().recip()).collect();
    Ok(a.map_entries(|i, j, v| if i == j { 1.0 } else { v * s[i] * s[j] }))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DivergenceMethod {
    /// Cholesky-based `trace(P⁻¹A) − ln det(P⁻¹A) − n`.
    DenseDirect,
    /// Double sum over both eigendecompositions.
    EigenSum,
}

/// Two dense SPD matrices, validated by Cholesky.
#[derive(Clone, Debug)]
pub struct SpdPair {
    a: DenseMatrix,
    p: DenseMatrix,
    a_factor: LowerTriFactor,
    p_factor: LowerTriFactor,
}

impl SpdPair {
    pub fn new(a: DenseMatrix, p: DenseMatrix) -> Result<Self> {
        if a.n_rows() != p.n_rows() || !a.is_square() || !p.is_square() {
            return Err(Error::Dimension {
                expected: a.n_rows(),
                got: p.n_rows(),
            });
        }
        let a_factor = cholesky(&a).map_err(|e| Error::NotSpd(format!("A: {e}")))?;
        let p_factor = cholesky(&p).map_err(|e| Error::NotSpd(format!("P: {e}")))?;
        Ok(Self {
            a,
            p,
            a_factor,
            p_factor,
        })
    }

    pub fn a(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn p(&self) -> &DenseMatrix {
        &self.p
    }

    pub fn order(&self) -> usize {
        self.a.n_rows()
    }

    /// `L_P⁻¹ A L_P⁻ᵀ`, similar to `P⁻¹A`.
    pub fn preconditioned_symmetric(&self) -> Result<DenseMatrix> {
        self.p_factor.congruence_inverse(&self.a)
    }

    pub fn trace_pinv_a(&self) -> Result<f64> {
        Ok(self.preconditioned_symmetric()?.trace())
    }

    /// `ln det(P⁻¹A)`.
    pub fn logdet_pinv_a(&self) -> f64 {
        self.a_factor.logdet_gram() - self.p_factor.logdet_gram()
    }

    /// Eigenvalues of `P⁻¹A`, non-increasing.
    pub fn preconditioned_spectrum(&self) -> Result<Vec<f64>> {
        Ok(sym_eig(&self.preconditioned_symmetric()?)?.values)
    }

    /// Same `A`, preconditioner replaced by `c P`.
    pub fn with_scaled_p(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::domain(format!("scale {c} must be positive")));
        }
        Ok(Self {
            a: self.a.clone(),
            p: self.p.scaled(c),
            a_factor: self.a_factor.clone(),
            p_factor: self.p_factor.scaled(c.sqrt()),
        })
    }

    /// `c = trace(P⁻¹A)/n` and the pair with `cP`, for which `trace((cP)⁻¹A) = n`.
    pub fn scale_to_unit_trace(&self) -> Result<(f64, Self)> {
        let c = self.trace_pinv_a()? / self.order() as f64;
        Ok((c, self.with_scaled_p(c)?))
    }
}

/// `D_LD(A, P) = trace(AP⁻¹) − ln det(AP⁻¹) − n`.
pub fn bregman_logdet(pair: &SpdPair, method: DivergenceMethod) -> Result<f64> {
    let n = pair.order() as f64;
    match method {
        DivergenceMethod::DenseDirect => {
            Ok(pair.trace_pinv_a()? - pair.logdet_pinv_a() - n)
        }
        DivergenceMethod::EigenSum => {
            let ea = sym_eig(pair.a())?;
            let ep = sym_eig(pair.p())?;
            if let Some(&w) = ep.values.iter().find(|&&w| !(w > 0.0)) {
                return Err(Error::NotSpd(format!("P has eigenvalue {w}")));
            }
            // (u_iᵀ v_j)² as the entries of UᵀV
            let overlap = ea.vectors.t_matmul(&ep.vectors);
            let mut total = 0.0;
            for (i, &xi) in ea.values.iter().enumerate() {
                for (j, &omega) in ep.values.iter().enumerate() {
                    let c = overlap[(i, j)];
                    total += c * c * scalar_divergence(xi / omega);
                }
            }
            Ok(total)
        }
    }
}

/// `X* = ∇φ(X) = −X⁻¹` for symmetric `X`.
pub fn dual_coords(x: &DenseMatrix) -> Result<DenseMatrix> {
    let inv = spd_inverse(x).map_err(|e| Error::domain(format!("dual coordinates: {e}")))?;
    Ok(inv.scaled(-1.0))
}

/// `∇φ⁻¹(X*) = −(X*)⁻¹`, mapping negative definite back to SPD.
pub fn primal_coords(x_star: &DenseMatrix) -> Result<DenseMatrix> {
    let inv = spd_inverse(&x_star.scaled(-1.0))
        .map_err(|e| Error::domain(format!("argument is not negative definite: {e}")))?;
    Ok(inv)
}

/// `φ*(X*) = −n − ln det(−X*)`.
pub fn dual_seed(x_star: &DenseMatrix) -> Result<f64> {
    let neg = x_star.scaled(-1.0);
    let q = cholesky(&neg).map_err(|e| Error::domain(format!("not negative definite: {e}")))?;
    Ok(-(x_star.n_rows() as f64) - q.logdet_gram())
}

/// `D_φ*(Θ, Σ) = φ*(Θ) − φ*(Σ) − ⟨∇φ*(Σ), Θ − Σ⟩` with `∇φ*(Σ) = −Σ⁻¹`.
pub fn dual_divergence(theta: &DenseMatrix, sigma: &DenseMatrix) -> Result<f64> {
    if theta.n_rows() != sigma.n_rows() {
        return Err(Error::Dimension {
            expected: sigma.n_rows(),
            got: theta.n_rows(),
        });
    }
    let phi_theta = dual_seed(theta)?;
    let phi_sigma = dual_seed(sigma)?;
    // ∇φ*(Σ) = −Σ⁻¹ = ∇φ⁻¹(Σ)
    let grad = primal_coords(sigma)?;
    let diff = theta.sub(sigma);
    let inner: f64 = grad
        .as_slice()
        .iter()
        .zip(diff.as_slice())
        .map(|(g, d)| g * d)
        .sum();
    Ok(phi_theta - phi_sigma - inner)
}

/// Condition measures of a preconditioned matrix `M` from its spectrum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub n: usize,
    pub kappa2: f64,
    pub kaporin_b: f64,
    pub ln_kaporin_k: f64,
    pub d_ld: f64,
    pub trace_m: f64,
    pub logdet_m: f64,
}

impl ConditionReport {
    pub fn from_spectrum(spectrum: &[f64]) -> Result<Self> {
        check_spectrum(spectrum)?;
        let n = spectrum.len();
        let trace_m: f64 = spectrum.iter().sum();
        let logdet_m: f64 = spectrum.iter().map(|v| v.ln()).sum();
        Ok(Self {
            n,
            kappa2: kappa2(spectrum)?,
            kaporin_b: kaporin_b(spectrum)?,
            ln_kaporin_k: ln_kaporin_k(trace_m, logdet_m, n)?,
            d_ld: trace_m - logdet_m - n as f64,
            trace_m,
            logdet_m,
        })
    }

    pub fn for_pair(pair: &SpdPair) -> Result<Self> {
        Self::from_spectrum(&pair.preconditioned_spectrum()?)
    }

    /// Checks `B ≤ κ₂ ≤ (√κ₂ + 1/√κ₂)² ≤ 4K` with relative slack `rtol`
    /// (last link in log space). Returns the worst relative violation (≤ 0 when all hold).
    pub fn sandwich_violation(&self, rtol: f64) -> f64 {
        let k = self.kappa2;
        let middle = (k.sqrt() + k.sqrt().recip()).powi(2);
        let v1 = (self.kaporin_b - k) / k;
        let v2 = (k - middle) / middle;
        let v3 = middle.ln() - (4.0_f64.ln() + self.ln_kaporin_k);
        v1.max(v2).max(v3) - rtol
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LN2: f64 = std::f64::consts::LN_2;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn kappa2_examples() {
        assert_eq!(kappa2(&[1.0, 1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(kappa2(&[4.0, 1.0]).unwrap(), 4.0);
        close(kappa2(&[1.5, 0.5]).unwrap(), 3.0, 1e-15);
        assert!(kappa2(&[1.0, 0.0]).is_err());
        assert!(kappa2(&[1.0, -2.0]).is_err());
    }

    #[test]
    fn kaporin_b_examples() {
        close(kaporin_b(&[0.7; 5]).unwrap(), 1.0, 1e-15);
        close(kaporin_b(&[4.0, 1.0]).unwrap(), 1.25, 1e-15);
        close(kaporin_b(&[1.5, 0.5]).unwrap(), 1.0 / 0.75f64.sqrt(), 1e-15);
        close(1.0 / 0.75f64.sqrt(), 1.1547005, 1e-7);
        assert!(kaporin_b(&[0.0]).is_err());
    }

    #[test]
    fn ln_k_examples() {
        close(ln_kaporin_k(3.0, 0.0, 3).unwrap(), 0.0, 1e-15);
        close(ln_kaporin_k(5.0, 4f64.ln(), 2).unwrap(), 2.0 * 2.5f64.ln() - 4f64.ln(), 1e-15);
        close(ln_kaporin_k(5.0, 4f64.ln(), 2).unwrap(), 0.4462871, 1e-7);
        close(ln_kaporin_k(2.0, 0.75f64.ln(), 2).unwrap(), 0.2876821, 1e-7);
        assert!(ln_kaporin_k(0.0, 0.0, 2).is_err());
        assert!(ln_kaporin_k(-1.0, 0.0, 2).is_err());
    }

    #[test]
    fn bregman_examples() {
        let a = DenseMatrix::from_rows(&[&[3.0, 1.0], &[1.0, 2.0]]);
        let same = SpdPair::new(a.clone(), a).unwrap();
        for m in [DivergenceMethod::DenseDirect, DivergenceMethod::EigenSum] {
            close(bregman_logdet(&same, m).unwrap(), 0.0, 1e-14);
        }

        let pair = SpdPair::new(DenseMatrix::from_diag(&[2.0, 1.0]), DenseMatrix::identity(2)).unwrap();
        for m in [DivergenceMethod::DenseDirect, DivergenceMethod::EigenSum] {
            close(bregman_logdet(&pair, m).unwrap(), 1.0 - LN2, 1e-15);
        }
        close(1.0 - LN2, 0.3068528, 1e-7);

        let pair = SpdPair::new(DenseMatrix::from_diag(&[3.0, 1.0]), DenseMatrix::from_diag(&[2.0, 2.0]))
            .unwrap();
        for m in [DivergenceMethod::DenseDirect, DivergenceMethod::EigenSum] {
            close(bregman_logdet(&pair, m).unwrap(), -0.75f64.ln(), 1e-15);
        }
    }

    #[test]
    fn bregman_rejects_indefinite_p() {
        let p = DenseMatrix::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]);
        assert!(matches!(
            SpdPair::new(DenseMatrix::identity(2), p),
            Err(Error::NotSpd(_))
        ));
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(gamma_map(0.0).unwrap(), 0.0);
        close(gamma_map(1.0).unwrap(), 1.0 - LN2, 1e-15);
        let neg = gamma_map(-0.45).unwrap();
        close(neg, -0.45 - 0.55f64.ln(), 1e-15);
        close(neg, 0.1478365, 1e-6);
        close(neg, 0.147_837_000_755_620_4, 1e-15);
        let pos = gamma_map(0.5).unwrap();
        close(pos, 0.0945349, 1e-7);
        assert!(neg > pos);
        assert!(gamma_map(-1.0).is_err());
        assert!(gamma_map(-2.0).is_err());
    }

    #[test]
    fn gamma_monotonicity() {
        let left: Vec<f64> = (1..100).map(|k| -1.0 + k as f64 * 0.01).collect();
        for w in left.windows(2) {
            assert!(gamma_map(w[0]).unwrap() > gamma_map(w[1]).unwrap());
        }
        let right: Vec<f64> = (0..100).map(|k| k as f64 * 0.05).collect();
        for w in right.windows(2) {
            assert!(gamma_map(w[0]).unwrap() < gamma_map(w[1]).unwrap());
        }
    }

    #[test]
    fn dual_coords_examples() {
        assert_eq!(dual_coords(&DenseMatrix::identity(3)).unwrap(), DenseMatrix::identity(3).scaled(-1.0));
        let d = dual_coords(&DenseMatrix::from_diag(&[2.0, 4.0])).unwrap();
        assert!(d.sub(&DenseMatrix::from_diag(&[-0.5, -0.25])).max_abs() < 1e-15);
        assert!(dual_coords(&DenseMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn dual_divergence_examples() {
        let s = DenseMatrix::from_diag(&[-1.0, -3.0]);
        close(dual_divergence(&s, &s).unwrap(), 0.0, 1e-15);

        let a = DenseMatrix::from_diag(&[2.0, 1.0]);
        let b = DenseMatrix::identity(2);
        let lhs = dual_divergence(&dual_coords(&b).unwrap(), &dual_coords(&a).unwrap()).unwrap();
        close(lhs, 1.0 - LN2, 1e-15);
        let pair = SpdPair::new(a, b).unwrap();
        close(lhs, bregman_logdet(&pair, DivergenceMethod::DenseDirect).unwrap(), 1e-15);

        assert!(dual_divergence(&DenseMatrix::identity(2), &s).is_err());
    }

    #[test]
    fn antieigen_examples() {
        close(antieigen_cos(2.0, 2.0).unwrap(), 1.0, 1e-15);
        let c = antieigen_cos(4.0, 1.0).unwrap();
        close(c, 0.8, 1e-15);
        close(1.0 / c, kaporin_b(&[4.0, 1.0]).unwrap(), 1e-15);
        close(antieigen_cos(1.5, 0.5).unwrap(), 3f64.sqrt() / 2.0, 1e-15);
        assert!(antieigen_cos(1.0, 0.0).is_err());
        assert!(antieigen_cos(1.0, 2.0).is_err());
    }

    #[test]
    fn jacobi_examples() {
        let d = SparseSymMatrix::from_triplets(2, [(0, 0, 2.0), (1, 1, 5.0)]).unwrap();
        assert_eq!(jacobi_scale(&d).unwrap().to_dense(), DenseMatrix::identity(2));

        let a = SparseSymMatrix::from_triplets(2, [(0, 0, 4.0), (1, 0, 2.0), (1, 1, 1.0)]).unwrap();
        let s = jacobi_scale(&a).unwrap().to_dense();
        assert_eq!(s, DenseMatrix::from_rows(&[&[1.0, 1.0], &[1.0, 1.0]]));

        let z = SparseSymMatrix::from_triplets(2, [(0, 0, 1.0), (1, 1, -1.0)]).unwrap();
        assert!(jacobi_scale(&z).is_err());
    }

    #[test]
    fn unit_trace_scaling_trivial_cases() {
        let a = DenseMatrix::from_rows(&[&[3.0, 1.0], &[1.0, 2.0]]);
        let pair = SpdPair::new(a.clone(), a.scaled(0.5)).unwrap();
        let (c, scaled) = pair.scale_to_unit_trace().unwrap();
        close(c, 2.0, 1e-14);
        close(bregman_logdet(&scaled, DivergenceMethod::DenseDirect).unwrap(), 0.0, 1e-14);

        let pair = SpdPair::new(DenseMatrix::from_diag(&[3.0, 1.0]), DenseMatrix::from_diag(&[2.0, 2.0])).unwrap();
        let (c, _) = pair.scale_to_unit_trace().unwrap();
        close(c, 1.0, 1e-15);
    }

    #[test]
    fn condition_report_consistency() {
        let r = ConditionReport::from_spectrum(&[4.0, 1.0]).unwrap();
        close(r.ln_kaporin_k, 2.0 * r.kaporin_b.ln(), 1e-15);
        close(r.d_ld, r.trace_m - r.logdet_m - 2.0, 0.0);
        assert!(r.sandwich_violation(0.0) <= 0.0);
    }
}
