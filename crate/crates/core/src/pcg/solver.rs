use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::LinearOperator;
use crate::matio::vector::{axpy, dot, norm2, sub};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveConfig {
    /// Stop once `‖r_k‖₂ / ‖b‖₂ ≤ tol`.
    pub tol: f64,
    /// Defaults to `10 n`.
    pub max_iter: Option<usize>,
    pub track_pinv_norm: bool,
    /// Exact solution, for `‖x − x_k‖_A` tracking.
    #[serde(skip)]
    pub known_solution: Option<Vec<f64>>,
    pub record_history: bool,
    #[serde(skip)]
    pub x0: Option<Vec<f64>>,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: None,
            track_pinv_norm: true,
            known_solution: None,
            record_history: true,
            x0: None,
        }
    }
}

impl SolveConfig {
    pub fn with_solution(mut self, x: Vec<f64>) -> Self {
        self.known_solution = Some(x);
        self
    }
}

/// Per-iteration history of a PCG run. History vectors hold `k = 0..=iterations`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub converged: bool,
    pub residual_norms: Vec<f64>,
    /// `‖r_k‖_{P⁻¹} = √(r_kᵀ H r_k)`
    pub pinv_residual_norms: Vec<f64>,
    pub error_a_norms: Option<Vec<f64>>,
    pub x: Vec<f64>,
}

impl SolveReport {
    pub fn relative_residuals(&self) -> Vec<f64> {
        let r0 = self.residual_norms.first().copied().unwrap_or(1.0);
        self.residual_norms.iter().map(|r| r / r0).collect()
    }

    pub fn relative_pinv_residuals(&self) -> Vec<f64> {
        let r0 = self.pinv_residual_norms.first().copied().unwrap_or(1.0);
        self.pinv_residual_norms.iter().map(|r| r / r0).collect()
    }

    pub fn relative_errors(&self) -> Option<Vec<f64>> {
        self.error_a_norms.as_ref().map(|e| {
            let e0 = e.first().copied().unwrap_or(1.0);
            e.iter().map(|v| v / e0).collect()
        })
    }

    /// First `k` with `‖r_k‖_{P⁻¹} ≤ ε ‖r₀‖_{P⁻¹}`.
    pub fn iterations_to_pinv_reduction(&self, eps: f64) -> Option<usize> {
        self.relative_pinv_residuals().iter().position(|&v| v <= eps)
    }

    /// First `k` with `‖x − x_k‖_A ≤ ε ‖x − x₀‖_A`.
    pub fn iterations_to_error_reduction(&self, eps: f64) -> Option<usize> {
        self.relative_errors()?.iter().position(|&v| v <= eps)
    }
}

fn a_norm<A: LinearOperator + ?Sized>(a: &A, e: &[f64]) -> f64 {
    dot(e, &a.apply_vec(e)).max(0.0).sqrt()
}

/// Preconditioned conjugate gradients with `H ≈ A⁻¹`.
pub fn pcg_solve<A, H>(a: &A, b: &[f64], h: &H, config: &SolveConfig) -> Result<SolveReport>
where
    A: LinearOperator + ?Sized,
    H: LinearOperator + ?Sized,
{
    let n = a.dim();
    if b.len() != n || h.dim() != n {
        return Err(Error::Dimension {
            expected: n,
            got: if b.len() != n { b.len() } else { h.dim() },
        });
    }
    if !(config.tol > 0.0) {
        return Err(Error::domain("tolerance must be positive"));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("right-hand side has non-finite entries"));
    }
    let max_iter = config.max_iter.unwrap_or(10 * n).max(1);
    let b_norm = norm2(b);

    let mut x = config.x0.clone().unwrap_or_else(|| vec![0.0; n]);
    let mut r = sub(b, &a.apply_vec(&x));
    let mut z = h.apply_vec(&r);
    let mut rz = dot(&r, &z);
    let mut p = z.clone();
    let mut q = vec![0.0; n];

    let mut report = SolveReport::default();
    let record = |report: &mut SolveReport, x: &[f64], r: &[f64], rz: f64| {
        if !config.record_history {
            return;
        }
        report.residual_norms.push(norm2(r));
        if config.track_pinv_norm {
            report.pinv_residual_norms.push(rz.max(0.0).sqrt());
        }
        if let Some(xs) = &config.known_solution {
            let e = sub(xs, x);
            report
                .error_a_norms
                .get_or_insert_with(Vec::new)
                .push(a_norm(a, &e));
        }
    };
    record(&mut report, &x, &r, rz);

    let scale = if b_norm > 0.0 { b_norm } else { 1.0 };
    let mut k = 0;
    loop {
        if norm2(&r) / scale <= config.tol {
            report.converged = true;
            break;
        }
        if k == max_iter {
            break;
        }
        a.apply(&p, &mut q);
        let curvature = dot(&p, &q);
        if !(curvature > 0.0) {
            report.iterations = k;
            report.x = x;
            return Err(Error::Breakdown {
                iteration: k,
                curvature,
                report: Box::new(report),
            });
        }
        let step = rz / curvature;
        axpy(step, &p, &mut x);
        axpy(-step, &q, &mut r);
        h.apply(&r, &mut z);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
        k += 1;
        record(&mut report, &x, &r, rz);
    }
    report.iterations = k;
    report.x = x;
    Ok(report)
}
