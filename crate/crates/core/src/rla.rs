//! Randomized trace and log-determinant estimation: Hutchinson probing and
//! stochastic Lanczos quadrature (SLQ), plus the plug-in approximations of
//! `ln K`, `α*` and `D_LD` built from them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{lanczos, tridiag_eig_first_components, LinearOperator};
use crate::matio::vector::{dot, norm2, scale};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ProbeDistribution {
    #[default]
    Rademacher,
    Gaussian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    /// Lanczos steps per probe.
    pub m: usize,
    pub n_v: usize,
    pub seed: u64,
    #[serde(default)]
    pub distribution: ProbeDistribution,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            m: 40,
            n_v: 30,
            seed: 0,
            distribution: ProbeDistribution::Rademacher,
        }
    }
}

impl ProbeConfig {
    fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n_v == 0 {
            return Err(Error::domain(format!(
                "probe config needs m ≥ 1 and n_v ≥ 1 (m = {}, n_v = {})",
                self.m, self.n_v
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EstimateReport {
    pub n: usize,
    pub trace_est: f64,
    /// Γ; `NaN` for trace-only estimators.
    pub logdet_est: f64,
    /// Per probe, before the factor `n`.
    pub trace_contributions: Vec<f64>,
    pub logdet_contributions: Vec<f64>,
    pub probes_used: usize,
    pub config: ProbeConfig,
}

/// Unit-norm probe for probe index `i`, from its own ChaCha stream.
pub fn probe_vector(n: usize, cfg: &ProbeConfig, i: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(i as u64);
    match cfg.distribution {
        ProbeDistribution::Rademacher => {
            let s = 1.0 / (n as f64).sqrt();
            (0..n)
                .map(|_| if rng.random::<bool>() { s } else { -s })
                .collect()
        }
        ProbeDistribution::Gaussian => loop {
            let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let nv = norm2(&v);
            if nv > 0.0 {
                scale(1.0 / nv, &mut v);
                break v;
            }
        },
    }
}

fn mean_times_n(values: &[f64], n: usize) -> f64 {
    n as f64 * values.iter().sum::<f64>() / values.len() as f64
}

/// Hutchinson estimate `n · mean(vᵀMv)` over unit probes, which equals the mean of
/// `zᵀMz` for unnormalized Rademacher `z`.
pub fn hutchinson_trace<Op: LinearOperator + ?Sized>(
    op: &Op,
    cfg: &ProbeConfig,
) -> Result<EstimateReport> {
    cfg.validate()?;
    let n = op.dim();
    let mut y = vec![0.0; n];
    let contributions: Vec<f64> = (0..cfg.n_v)
        .map(|i| {
            let v = probe_vector(n, cfg, i);
            op.apply(&v, &mut y);
            dot(&v, &y)
        })
        .collect();
    Ok(EstimateReport {
        n,
        trace_est: mean_times_n(&contributions, n),
        logdet_est: f64::NAN,
        trace_contributions: contributions,
        logdet_contributions: vec![],
        probes_used: cfg.n_v,
        config: cfg.clone(),
    })
}

/// SLQ estimates of `trace(M)` and `ln det M` for SPD `M`: per probe
/// `Σ_k τ_k² f(θ_k)` over the Ritz pairs of `T_m`, aggregated as `n · mean`.
pub fn slq_trace_logdet<Op: LinearOperator + ?Sized>(
    op: &Op,
    cfg: &ProbeConfig,
) -> Result<EstimateReport> {
    cfg.validate()?;
    let n = op.dim();
    let mut tr = Vec::with_capacity(cfg.n_v);
    let mut ld = Vec::with_capacity(cfg.n_v);
    for i in 0..cfg.n_v {
        let v = probe_vector(n, cfg, i);
        let lz = lanczos(op, &v, cfg.m, true)?;
        let ritz = tridiag_eig_first_components(&lz.alphas, &lz.betas)?;
        let (mut t, mut l) = (0.0, 0.0);
        for &(theta, tau) in &ritz {
            if !(theta > 0.0) {
                return Err(Error::NotSpd(format!(
                    "Ritz value {theta} on probe {i}"
                )));
            }
            let w = tau * tau;
            t += w * theta;
            l += w * theta.ln();
        }
        tr.push(t);
        ld.push(l);
    }
    Ok(EstimateReport {
        n,
        trace_est: mean_times_n(&tr, n),
        logdet_est: mean_times_n(&ld, n),
        trace_contributions: tr,
        logdet_contributions: ld,
        probes_used: cfg.n_v,
        config: cfg.clone(),
    })
}

/// `ln K̂ = n ln(t̂r/n) − Γ`.
pub fn approx_ln_kaporin(trace_est: f64, logdet_est: f64, n: usize) -> Result<f64> {
    if !(trace_est > 0.0) {
        return Err(Error::domain(format!(
            "trace estimate {trace_est} must be positive"
        )));
    }
    let nf = n as f64;
    Ok(nf * (trace_est / nf).ln() - logdet_est)
}

/// `α̂ = (t̂r(P⁻¹A) − r)/(n − r)`.
pub fn approx_alpha(trace_est: f64, n: usize, r: usize) -> Result<f64> {
    if r >= n {
        return Err(Error::Rank { rank: r, n });
    }
    Ok((trace_est - r as f64) / (n - r) as f64)
}

/// `D̂ = −Γ + (n − r) ln α̂`.
pub fn approx_divergence(logdet_est: f64, alpha_hat: f64, n: usize, r: usize) -> Result<f64> {
    if r >= n {
        return Err(Error::Rank { rank: r, n });
    }
    if !(alpha_hat > 0.0) || !logdet_est.is_finite() {
        return Err(Error::domain(format!(
            "need α̂ > 0 and finite Γ (α̂ = {alpha_hat}, Γ = {logdet_est})"
        )));
    }
    Ok(-logdet_est + (n - r) as f64 * alpha_hat.ln())
}
