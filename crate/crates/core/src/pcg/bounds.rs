//! A priori PCG convergence bounds and iteration estimates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

// ln K or D slightly below zero from rounding is treated as zero
const NEG_SLACK: f64 = 1e-12;

fn check_nonneg(name: &str, v: f64) -> Result<f64> {
    if v.is_nan() || v < -NEG_SLACK {
        return Err(Error::domain(format!("{name} = {v} must be nonnegative")));
    }
    Ok(v.max(0.0))
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::domain(format!("ε = {eps} must lie in (0, 1)")));
    }
    Ok(())
}

fn ceil_clamped(v: f64) -> usize {
    (v.ceil().max(1.0)) as usize
}

/// `2/(Cᵏ + C⁻ᵏ)` with `C = (√κ − 1)/(√κ + 1)`; bounds `‖x − x_k‖_A / ‖x − x₀‖_A`.
pub fn bound_kappa(kappa2: f64, k: usize) -> Result<f64> {
    if !(kappa2 >= 1.0) {
        return Err(Error::domain(format!("κ₂ = {kappa2} must be ≥ 1")));
    }
    if k == 0 {
        return Ok(1.0);
    }
    let s = kappa2.sqrt();
    let c = (s - 1.0) / (s + 1.0);
    // 2 Cᵏ / (1 + C²ᵏ) avoids overflow of C⁻ᵏ
    let ck = c.powi(k as i32);
    Ok(2.0 * ck / (1.0 + ck * ck))
}

/// Shared form `(e^{x/k} − 1)^{k/2}`, evaluated in log space.
fn superlinear_bound(x: f64, k: usize) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let kf = k as f64;
    (0.5 * kf * (x / kf).exp_m1().ln()).exp()
}

/// `(K^{1/k} − 1)^{k/2}`; bounds `‖r_k‖_{P⁻¹} / ‖r₀‖_{P⁻¹}`.
pub fn bound_kaporin(ln_k: f64, k: usize) -> Result<f64> {
    let ln_k = check_nonneg("ln K", ln_k)?;
    if k == 0 {
        return Err(Error::domain("Kaporin bound needs k ≥ 1"));
    }
    Ok(superlinear_bound(ln_k, k))
}

/// The Kaporin bound is informative only when `B < 2`, i.e. `ln K < n ln 2`.
pub fn kaporin_useful(ln_k: f64, n: usize) -> bool {
    ln_k < n as f64 * std::f64::consts::LN_2
}

/// `(e^{D/k} − 1)^{k/2}`; bounds `‖r_k‖_{P⁻¹} / ‖r₀‖_{P⁻¹}`.
pub fn bound_divergence(d_ld: f64, k: usize) -> Result<f64> {
    let d = check_nonneg("D_LD", d_ld)?;
    if k == 0 {
        return Err(Error::domain("divergence bound needs k ≥ 1"));
    }
    Ok(superlinear_bound(d, k))
}

/// Whether `k` is even and `3D ≤ k < n`.
pub fn three_ln_d_valid(d_ld: f64, k: usize, n: usize) -> bool {
    k % 2 == 0 && k > 0 && 3.0 * d_ld <= k as f64 && k < n
}

/// `(3D/k)^{k/2}`; bounds `‖x − x_k‖_A / ‖x − x₀‖_A` for even `k` with `3D ≤ k < n`.
#[allow(non_snake_case)]
pub fn bound_3lnD(d_ld: f64, k: usize, n: usize) -> Result<f64> {
    let d = check_nonneg("D_LD", d_ld)?;
    if !three_ln_d_valid(d, k, n) {
        return Err(Error::domain(format!(
            "need k even with 3D ≤ k < n (D = {d}, k = {k}, n = {n})"
        )));
    }
    if d == 0.0 {
        return Ok(0.0);
    }
    let kf = k as f64;
    Ok((0.5 * kf * (3.0 * d / kf).ln()).exp())
}

/// `⌈½ √κ ln(2/ε)⌉`, at least 1.
pub fn iter_estimate_kappa(kappa2: f64, eps: f64) -> Result<usize> {
    if !(kappa2 >= 1.0) {
        return Err(Error::domain(format!("κ₂ = {kappa2} must be ≥ 1")));
    }
    check_eps(eps)?;
    Ok(ceil_clamped(0.5 * kappa2.sqrt() * (2.0 / eps).ln()))
}

/// `σ = 2 + ln(ε⁻¹)/ln K`.
pub fn recommended_sigma(ln_k: f64, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    if !(ln_k > 0.0) {
        return Err(Error::domain(format!(
            "recommended σ needs ln K > 0, got {ln_k}"
        )));
    }
    Ok(2.0 + (1.0 / eps).ln() / ln_k)
}

/// `⌈(σ ln K + 2 ln ε⁻¹) / (σ ln σ − (σ − 1) ln(σ − 1))⌉`, at least 1.
pub fn iter_estimate_kaporin(ln_k: f64, eps: f64, sigma: f64) -> Result<usize> {
    let ln_k = check_nonneg("ln K", ln_k)?;
    check_eps(eps)?;
    if !(sigma >= 2.0) || !sigma.is_finite() {
        return Err(Error::domain(format!("σ = {sigma} must be ≥ 2")));
    }
    let denom = sigma * sigma.ln() - (sigma - 1.0) * (sigma - 1.0).ln();
    Ok(ceil_clamped((sigma * ln_k + 2.0 * (1.0 / eps).ln()) / denom))
}

/// `iter_estimate_kaporin` with the recommended σ; falls back to σ = 2 when `ln K = 0`.
pub fn iter_estimate_kaporin_recommended(ln_k: f64, eps: f64) -> Result<usize> {
    let ln_k = check_nonneg("ln K", ln_k)?;
    let sigma = if ln_k > 0.0 {
        recommended_sigma(ln_k, eps)?
    } else {
        2.0
    };
    iter_estimate_kaporin(ln_k, eps, sigma)
}

/// `⌈(ln ε⁻¹ + D)/ln 2⌉`, at least 1. Valid when `trace(P⁻¹A) = n`.
pub fn iter_estimate_divergence(d_ld: f64, eps: f64) -> Result<usize> {
    let d = check_nonneg("D_LD", d_ld)?;
    check_eps(eps)?;
    Ok(ceil_clamped(((1.0 / eps).ln() + d) / std::f64::consts::LN_2))
}

/// All bound curves for `k = 0..=k_max` from precomputed condition measures.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundCurves {
    pub n: usize,
    pub kappa2: f64,
    pub ln_kaporin_k: f64,
    pub d_ld: f64,
    pub kaporin_useful: bool,
    pub kappa: Vec<f64>,
    /// Index 0 holds 1.0 (the `k = 0` ratio).
    pub kaporin: Vec<f64>,
    pub divergence: Vec<f64>,
    pub three_ln_d: Vec<Option<f64>>,
}

impl BoundCurves {
    pub fn compute(n: usize, kappa2: f64, ln_k: f64, d_ld: f64, k_max: usize) -> Result<Self> {
        let mut kappa = Vec::with_capacity(k_max + 1);
        let mut kaporin = vec![1.0];
        let mut divergence = vec![1.0];
        let mut three = vec![None];
        kappa.push(bound_kappa(kappa2, 0)?);
        for k in 1..=k_max {
            kappa.push(bound_kappa(kappa2, k)?);
            kaporin.push(bound_kaporin(ln_k, k)?);
            divergence.push(bound_divergence(d_ld, k)?);
            three.push(bound_3lnD(d_ld, k, n).ok());
        }
        Ok(Self {
            n,
            kappa2,
            ln_kaporin_k: ln_k,
            d_ld,
            kaporin_useful: kaporin_useful(ln_k, n),
            kappa,
            kaporin,
            divergence,
            three_ln_d: three,
        })
    }
}
