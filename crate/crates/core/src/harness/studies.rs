use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::spec::{ExperimentSpec, Instance};
use super::synthetic::{haar_orthogonal, random_spd, with_spectrum};
use crate::divergence::{bregman_logdet, ln_kaporin_k, DivergenceMethod, SpdPair};
use crate::error::{Error, Result};
use crate::linalg::cholesky;
use crate::matio::table::{row, Row};
use crate::matio::DenseMatrix;
use crate::precond::{
    bld_truncate, divergence_alpha, optimal_alpha, remaining_values, Preconditioner,
};
use crate::rla::{
    approx_alpha, approx_divergence, approx_ln_kaporin, slq_trace_logdet, ProbeConfig,
};

pub const ERROR_ORDER_HEADER: [&str; 2] = ["eps", "err"];

pub const DEFAULT_ERROR_EPS: [f64; 5] = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3];

#[derive(Clone, Debug, Serialize)]
pub struct ErrorOrderResult {
    pub n: usize,
    pub seed: u64,
    pub eps: Vec<f64>,
    pub err: Vec<f64>,
    /// Least-squares slope of `ln err` against `ln ε` over `ε > 0`.
    pub slope: f64,
}

impl ErrorOrderResult {
    pub fn rows(&self) -> Vec<Row> {
        self.eps
            .iter()
            .zip(&self.err)
            .map(|(&e, &r)| row([("eps", e), ("err", r)]))
            .collect()
    }
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// `err(ε) = |ln K(P⁻¹A) − D_LD(A, P)|` for `A = Q(I + εX)Qᵀ`, `P = QQᵀ`, with a
/// fixed random `X` (spectrum in `(0, 1)`, so `trace X ≠ 0`), evaluated densely.
pub fn error_order_study(n: usize, seed: u64, eps_list: &[f64]) -> Result<ErrorOrderResult> {
    if n < 2 {
        return Err(Error::domain("error-order study needs n ≥ 2"));
    }
    if eps_list.iter().any(|&e| !(e >= 0.0))
        || eps_list.windows(2).any(|w| !(w[1] < w[0]))
    {
        return Err(Error::domain("ε list must be nonnegative and strictly decreasing"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (p, _) = random_spd(n, 1.0, &mut rng);
    let q = cholesky(&p)?.to_dense();
    let w = haar_orthogonal(n, &mut rng);
    let u: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let x = with_spectrum(&w, &u);
    let mut err = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let core = DenseMatrix::identity(n).add(&x.scaled(eps));
        let mut a = q.matmul(&core).matmul(&q.transpose());
        a.symmetrize();
        let pair = SpdPair::new(a, p.clone())?;
        let d = bregman_logdet(&pair, DivergenceMethod::DenseDirect)?;
        let lnk = ln_kaporin_k(pair.trace_pinv_a()?, pair.logdet_pinv_a(), n)?;
        err.push(if eps == 0.0 { 0.0 } else { (lnk - d).abs() });
    }
    let (lx, ly): (Vec<f64>, Vec<f64>) = eps_list
        .iter()
        .zip(&err)
        .filter(|(&e, &r)| e > 0.0 && r > 0.0)
        .map(|(e, r)| (e.ln(), r.ln()))
        .unzip();
    let slope = if lx.len() >= 2 { fit_slope(&lx, &ly) } else { f64::NAN };
    Ok(ErrorOrderResult {
        n,
        seed,
        eps: eps_list.to_vec(),
        err,
        slope,
    })
}

pub const ESTIMATOR_HEADER: [&str; 17] = [
    "m",
    "n_v",
    "trace_exact",
    "trace_hat",
    "logdet_exact",
    "logdet_hat",
    "ln_k_exact",
    "ln_k_hat",
    "alpha_exact",
    "alpha_hat",
    "d_ld_exact",
    "d_ld_hat",
    "rel_err_trace",
    "rel_err_logdet",
    "rel_err_alpha",
    "rel_err_d_ld",
    "sign_ln_k_hat_minus_ln_k",
];

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct EstimatorRow {
    pub m: usize,
    pub n_v: usize,
    pub trace_exact: f64,
    pub trace_hat: f64,
    pub logdet_exact: f64,
    pub logdet_hat: f64,
    pub ln_k_exact: f64,
    pub ln_k_hat: f64,
    pub alpha_exact: f64,
    pub alpha_hat: f64,
    pub d_ld_exact: f64,
    pub d_ld_hat: f64,
}

fn rel_err(hat: f64, exact: f64) -> f64 {
    (hat - exact).abs() / exact.abs().max(f64::MIN_POSITIVE)
}

impl EstimatorRow {
    pub fn row(&self) -> Row {
        row([
            ("m", self.m as f64),
            ("n_v", self.n_v as f64),
            ("trace_exact", self.trace_exact),
            ("trace_hat", self.trace_hat),
            ("logdet_exact", self.logdet_exact),
            ("logdet_hat", self.logdet_hat),
            ("ln_k_exact", self.ln_k_exact),
            ("ln_k_hat", self.ln_k_hat),
            ("alpha_exact", self.alpha_exact),
            ("alpha_hat", self.alpha_hat),
            ("d_ld_exact", self.d_ld_exact),
            ("d_ld_hat", self.d_ld_hat),
            ("rel_err_trace", rel_err(self.trace_hat, self.trace_exact)),
            ("rel_err_logdet", rel_err(self.logdet_hat, self.logdet_exact)),
            ("rel_err_alpha", rel_err(self.alpha_hat, self.alpha_exact)),
            ("rel_err_d_ld", rel_err(self.d_ld_hat, self.d_ld_exact)),
            ("sign_ln_k_hat_minus_ln_k", (self.ln_k_hat - self.ln_k_exact).signum()),
        ])
    }
}

/// Estimates for `M = P₁⁻¹A` (BLD rank `r`, `α = 1`) against the closed-form values,
/// one row per `(m, n_v)` setting. SLQ runs on the symmetric form of `M`.
pub fn estimator_instance(
    inst: &Instance,
    settings: &[(usize, usize)],
    base: &ProbeConfig,
) -> Result<Vec<EstimatorRow>> {
    let n = inst.order();
    let r = inst.rank;
    let core = &inst.core;
    let term = bld_truncate(core, r)?;
    let rest = remaining_values(core, &term);
    let trace_exact = r as f64 + rest.iter().sum::<f64>();
    let logdet_exact: f64 = rest.iter().map(|v| v.ln()).sum();
    let ln_k_exact = ln_kaporin_k(trace_exact, logdet_exact, n)?;
    let alpha_exact = optimal_alpha(core, &term)?;
    let d_ld_exact = divergence_alpha(core, &term, alpha_exact)?;
    let p1 = Preconditioner::new(Arc::clone(core.factor()), term, 1.0)?;
    let op = p1.symmetric_preconditioned(&inst.a);
    settings
        .iter()
        .map(|&(m, n_v)| {
            let cfg = ProbeConfig {
                m,
                n_v,
                ..base.clone()
            };
            let est = slq_trace_logdet(&op, &cfg)?;
            let alpha_hat = approx_alpha(est.trace_est, n, r)?;
            Ok(EstimatorRow {
                m,
                n_v,
                trace_exact,
                trace_hat: est.trace_est,
                logdet_exact,
                logdet_hat: est.logdet_est,
                ln_k_exact,
                ln_k_hat: approx_ln_kaporin(est.trace_est, est.logdet_est, n)?,
                alpha_exact,
                alpha_hat,
                d_ld_exact,
                d_ld_hat: approx_divergence(est.logdet_est, alpha_hat, n, r)?,
            })
        })
        .collect()
}

pub fn estimator_study(spec: &ExperimentSpec, settings: &[(usize, usize)]) -> Result<Vec<EstimatorRow>> {
    let inst = Instance::build(spec)?;
    if inst.order() > 2000 {
        return Err(Error::domain("estimator study needs n ≤ 2000 for exact references"));
    }
    estimator_instance(&inst, settings, &spec.probe)
}
