use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::spec::{ExperimentSpec, Instance};
use super::synthetic::gaussian_matrix;
use crate::error::{Error, Result};
use crate::linalg::LinearOperator;
use crate::matio::table::Row;
use crate::pcg::{
    bound_3lnD, bound_divergence, bound_kaporin, bound_kappa, iter_estimate_divergence,
    iter_estimate_kaporin_recommended, iter_estimate_kappa, kaporin_useful, pcg_solve,
    recommended_sigma, SolveConfig, SolveReport,
};
use crate::precond::{
    bld_truncate, divergence_alpha, kappa2_alpha, ln_kaporin_alpha, optimal_alpha, ErrorCore,
    LowRankTerm, Preconditioner,
};

pub const OVERLAY_HEADER: [&str; 14] = [
    "k",
    "rel_res_2",
    "rel_res_pinv",
    "rel_err_a",
    "bound_kappa",
    "bound_kaporin",
    "bound_divergence",
    "bound_3lnD",
    "bound_3lnD_valid",
    "violation_kappa",
    "violation_kaporin",
    "violation_divergence",
    "violation_3lnD",
    "kaporin_useful",
];

/// Multiplicative slack on every bound comparison.
pub const BOUND_SLACK: f64 = 1e-6;

/// Observed ratios below this are at rounding level and never flagged.
pub const ROUNDING_FLOOR: f64 = 1e-12;

pub const OVERLAY_EPS: [f64; 3] = [1e-2, 1e-6, 1e-10];

/// Condition measures of `P⁻¹A` that feed the bounds.
#[derive(Clone, Debug, Serialize)]
pub struct OverlayCondition {
    pub n: usize,
    pub kappa2: f64,
    pub ln_k: f64,
    pub d_ld: f64,
    /// `trace(P⁻¹A) = n`, so the divergence iteration estimate applies.
    pub trace_normalized: bool,
}

impl OverlayCondition {
    /// Closed-form measures of `P_α` built from `core` and `term`.
    pub fn closed_form(core: &ErrorCore, term: &LowRankTerm, alpha: f64) -> Result<Self> {
        let alpha_star = optimal_alpha(core, term)?;
        Ok(Self {
            n: core.order(),
            kappa2: kappa2_alpha(core, term, alpha)?,
            ln_k: ln_kaporin_alpha(core, term, alpha)?,
            d_ld: divergence_alpha(core, term, alpha)?,
            trace_normalized: (alpha - alpha_star).abs() <= 1e-12 * alpha_star,
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct IterationEstimate {
    pub eps: f64,
    /// First `k` with `‖r_k‖_{P⁻¹} ≤ ε‖r₀‖_{P⁻¹}`, if reached.
    pub observed: Option<usize>,
    pub i_kappa: usize,
    pub sigma: Option<f64>,
    pub i_kaporin: usize,
    pub i_divergence: Option<usize>,
    pub exceeds_kaporin: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct OverlayResult {
    pub condition: OverlayCondition,
    pub estimates: Vec<IterationEstimate>,
    pub violations: Vec<String>,
    #[serde(skip)]
    pub rows: Vec<Row>,
    #[serde(skip)]
    pub report: SolveReport,
}

/// Solves `A x = b` for a seeded random `x` and overlays the bounds on the history.
pub fn overlay_run<Op: LinearOperator>(
    a: &Op,
    p: &Preconditioner,
    condition: OverlayCondition,
    config: &SolveConfig,
    seed: u64,
) -> Result<OverlayResult> {
    let n = a.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x_true = gaussian_matrix(n, 1, &mut rng).column(0);
    let b = a.apply_vec(&x_true);
    let cfg = SolveConfig {
        known_solution: Some(x_true),
        record_history: true,
        track_pinv_norm: true,
        ..config.clone()
    };
    let h = p.inverse_operator();
    let report = match pcg_solve(a, &b, &h, &cfg) {
        Ok(r) => r,
        Err(Error::Breakdown { report, .. }) => *report,
        Err(e) => return Err(e),
    };
    Ok(overlay_report(report, condition))
}

/// Bound table, violation list and iteration estimates for an existing solve history.
pub fn overlay_report(report: SolveReport, condition: OverlayCondition) -> OverlayResult {
    let c = &condition;
    let res2 = report.relative_residuals();
    let resp = report.relative_pinv_residuals();
    let erra = report.relative_errors().unwrap_or_else(|| vec![f64::NAN; res2.len()]);
    let useful = kaporin_useful(c.ln_k, c.n);
    let mut rows = Vec::with_capacity(res2.len());
    let mut violations = Vec::new();
    let over = |v: f64, bound: f64| v > ROUNDING_FLOOR && v > bound * (1.0 + BOUND_SLACK);
    for k in 0..res2.len() {
        let b_kappa = bound_kappa(c.kappa2, k).unwrap_or(f64::NAN);
        let (b_kap, b_div) = if k == 0 {
            (1.0, 1.0)
        } else {
            (
                bound_kaporin(c.ln_k, k).unwrap_or(f64::NAN),
                bound_divergence(c.d_ld, k).unwrap_or(f64::NAN),
            )
        };
        // outside its validity window the 3 ln D bound is replaced by the trivial 1
        let b3 = bound_3lnD(c.d_ld, k, c.n).ok();
        let v_kappa = over(erra[k], b_kappa);
        let v_kap = over(resp[k], b_kap);
        let v_div = over(resp[k], b_div);
        let v_3 = b3.is_some_and(|b| over(erra[k], b));
        for (flag, name, value, bound) in [
            (v_kappa, "kappa", erra[k], b_kappa),
            (v_kap, "kaporin", resp[k], b_kap),
            (v_div, "divergence", resp[k], b_div),
            (v_3, "3lnD", erra[k], b3.unwrap_or(1.0)),
        ] {
            if flag {
                violations.push(format!("k = {k}: {name} bound {bound:e} < observed {value:e}"));
            }
        }
        let flag = |b: bool| if b { 1.0 } else { 0.0 };
        rows.push(vec![
            ("k".to_string(), k as f64),
            ("rel_res_2".to_string(), res2[k]),
            ("rel_res_pinv".to_string(), resp[k]),
            ("rel_err_a".to_string(), erra[k]),
            ("bound_kappa".to_string(), b_kappa),
            ("bound_kaporin".to_string(), b_kap),
            ("bound_divergence".to_string(), b_div),
            ("bound_3lnD".to_string(), b3.unwrap_or(1.0)),
            ("bound_3lnD_valid".to_string(), flag(b3.is_some())),
            ("violation_kappa".to_string(), flag(v_kappa)),
            ("violation_kaporin".to_string(), flag(v_kap)),
            ("violation_divergence".to_string(), flag(v_div)),
            ("violation_3lnD".to_string(), flag(v_3)),
            ("kaporin_useful".to_string(), flag(useful)),
        ]);
    }

    let estimates = OVERLAY_EPS
        .iter()
        .map(|&eps| {
            let observed = report.iterations_to_pinv_reduction(eps);
            let i_kaporin = iter_estimate_kaporin_recommended(c.ln_k, eps).unwrap_or(usize::MAX);
            let exceeds = match observed {
                Some(k) => k > i_kaporin,
                None => !report.converged && report.iterations >= i_kaporin,
            };
            IterationEstimate {
                eps,
                observed,
                i_kappa: iter_estimate_kappa(c.kappa2, eps).unwrap_or(usize::MAX),
                sigma: recommended_sigma(c.ln_k, eps).ok(),
                i_kaporin,
                i_divergence: if c.trace_normalized {
                    iter_estimate_divergence(c.d_ld, eps).ok()
                } else {
                    None
                },
                exceeds_kaporin: exceeds,
            }
        })
        .collect::<Vec<_>>();
    for e in &estimates {
        if e.exceeds_kaporin {
            violations.push(format!(
                "ε = {:e}: observed {:?} iterations exceed the Kaporin estimate {}",
                e.eps, e.observed, e.i_kaporin
            ));
        }
    }

    OverlayResult {
        condition,
        estimates,
        violations,
        rows,
        report,
    }
}

/// BLD preconditioner of rank `spec.rank` at `spec.alpha` (default `α*`).
pub fn bound_overlay(spec: &ExperimentSpec) -> Result<OverlayResult> {
    let inst = Instance::build(spec)?;
    let term = bld_truncate(&inst.core, inst.rank)?;
    let alpha = match spec.alpha {
        Some(a) => a,
        None => optimal_alpha(&inst.core, &term)?,
    };
    let condition = OverlayCondition::closed_form(&inst.core, &term, alpha)?;
    let p = Preconditioner::new(inst.core.factor().clone(), term, alpha)?;
    let cfg = SolveConfig {
        tol: spec.pcg.tol,
        max_iter: spec.pcg.max_iter,
        ..SolveConfig::default()
    };
    overlay_run(&inst.a, &p, condition, &cfg, spec.seed)
}
