//! Randomized batteries for the divergence, Kaporin and preconditioner invariants.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::report::SuiteResult;
use super::spec::{AlphaGrid, FactorChoice, Instance};
use super::synthetic::{gaussian_matrix, haar_orthogonal, random_spd, sparse_network, with_spectrum};
use crate::divergence::{
    bregman_logdet, dual_coords, dual_divergence, kaporin_b, kappa2, ln_kaporin_k,
    ln_kaporin_k_spectrum, ConditionReport, DivergenceMethod, SpdPair,
};
use crate::error::Result;
use crate::linalg::{logdet_spd, spd_inverse, sym_eig};
use crate::matio::DenseMatrix;
use crate::precond::{
    bld_truncate, divergence_alpha, flat_interval, kappa2_alpha, ln_kaporin_alpha, optimal_alpha,
    tsvd_truncate, Preconditioner,
};

pub const SUITES: [&str; 19] = [
    "nonnegativity",
    "identity_of_indiscernibles",
    "eigen_sum_agreement",
    "congruence_invariance",
    "main_inequality",
    "equality_unit_trace",
    "c_scaling_identity",
    "dual_identity",
    "kaporin_at_least_one",
    "kaporin_scale_invariance",
    "kaporin_similarity_invariance",
    "sandwich_chain",
    "alpha_optimality",
    "four_way_identity",
    "kappa2_flatness",
    "alpha_star_in_interval",
    "bld_beats_tsvd",
    "dense_consistency",
    "adversarial_inequality",
];

#[derive(Clone, Debug, Serialize)]
pub struct VerifyResults {
    pub trials: usize,
    pub n_min: usize,
    pub n_max: usize,
    pub seed: u64,
    pub suites: Vec<SuiteResult>,
    pub all_passed: bool,
}

impl VerifyResults {
    pub fn suite(&self, name: &str) -> Option<&SuiteResult> {
        self.suites.iter().find(|s| s.name == name)
    }

    pub fn violations(&self) -> Vec<String> {
        self.suites
            .iter()
            .filter(|s| !s.passed)
            .map(|s| {
                format!(
                    "{}: {} of {} checks failed (worst excess {})",
                    s.name, s.failures, s.checks, s.worst_violation
                )
            })
            .collect()
    }
}

struct Suites(Vec<SuiteResult>);

impl Suites {
    fn new() -> Self {
        Self(SUITES.iter().map(|n| SuiteResult::new(n)).collect())
    }

    fn get(&mut self, name: &str) -> &mut SuiteResult {
        self.0
            .iter_mut()
            .find(|s| s.name == name)
            .expect("known suite")
    }

    /// Records `|got − want| − tol`.
    fn close(&mut self, name: &str, got: f64, want: f64, tol: f64) {
        self.get(name).record((got - want).abs() - tol);
    }
}

fn rel(x: f64) -> f64 {
    1.0 + x.abs()
}

/// `X⁻¹ M X` for `X = W₁ diag(s) W₂` with random orthogonal `W₁, W₂`.
fn random_similarity<R: Rng>(m: &DenseMatrix, rng: &mut R) -> DenseMatrix {
    let n = m.n_rows();
    let w1 = haar_orthogonal(n, rng);
    let w2 = haar_orthogonal(n, rng);
    let s: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    let x = DenseMatrix::from_fn(n, n, |i, j| w1[(i, j)] * s[j]).matmul(&w2);
    let x_inv = DenseMatrix::from_fn(n, n, |i, j| w2[(j, i)] / s[j]).matmul(&w1.transpose());
    x_inv.matmul(m).matmul(&x)
}

/// `ln|det X|` by Gaussian elimination with partial pivoting.
fn log_abs_det(x: &DenseMatrix) -> f64 {
    let n = x.n_rows();
    let mut a = x.clone();
    let mut total = 0.0;
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[(i, k)].abs().total_cmp(&a[(j, k)].abs()))
            .unwrap();
        if a[(p, k)] == 0.0 {
            return f64::NEG_INFINITY;
        }
        if p != k {
            for j in 0..n {
                let t = a[(k, j)];
                a[(k, j)] = a[(p, j)];
                a[(p, j)] = t;
            }
        }
        let pivot = a[(k, k)];
        total += pivot.abs().ln();
        for i in k + 1..n {
            let f = a[(i, k)] / pivot;
            if f != 0.0 {
                for j in k..n {
                    a[(i, j)] -= f * a[(k, j)];
                }
            }
        }
    }
    total
}

fn pair_suites<R: Rng>(rng: &mut R, n: usize, s: &mut Suites) -> Result<()> {
    let nf = n as f64;
    let spread = rng.random_range(0.1..2.5);
    let (a, _) = random_spd(n, spread, rng);
    let (p, _) = random_spd(n, rng.random_range(0.1..2.5), rng);
    let pair = SpdPair::new(a.clone(), p.clone())?;

    let d = bregman_logdet(&pair, DivergenceMethod::DenseDirect)?;
    let d_eig = bregman_logdet(&pair, DivergenceMethod::EigenSum)?;
    s.get("nonnegativity").record(-1e-12 * nf - d);
    s.close("eigen_sum_agreement", d_eig, d, 1e-8 * rel(d));

    let same = SpdPair::new(a.clone(), a.clone())?;
    let d0 = bregman_logdet(&same, DivergenceMethod::DenseDirect)?;
    s.close("identity_of_indiscernibles", d0, 0.0, 1e-10 * nf);
    let lnk0 = ln_kaporin_k_spectrum(&same.preconditioned_spectrum()?)?;
    s.close("identity_of_indiscernibles", lnk0, 0.0, 1e-10 * nf);
    s.get("identity_of_indiscernibles").record(if d > 1e-8 { -1.0 } else { 1.0 });

    let p0 = DenseMatrix::identity(n).add(&gaussian_matrix(n, n, rng).scaled(0.3 / nf.sqrt()));
    let mut ca = p0.t_matmul(&a).matmul(&p0);
    let mut cp = p0.t_matmul(&p).matmul(&p0);
    ca.symmetrize();
    cp.symmetrize();
    let dc = bregman_logdet(&SpdPair::new(ca, cp)?, DivergenceMethod::DenseDirect)?;
    s.close("congruence_invariance", dc, d, 1e-8 * rel(d));

    let spectrum = pair.preconditioned_spectrum()?;
    let lnk = ln_kaporin_k_spectrum(&spectrum)?;
    s.get("main_inequality").record(lnk - 1e-10 - d);

    let (c, scaled) = pair.scale_to_unit_trace()?;
    let ds = bregman_logdet(&scaled, DivergenceMethod::DenseDirect)?;
    let lnks = ln_kaporin_k_spectrum(&scaled.preconditioned_spectrum()?)?;
    s.close("equality_unit_trace", ds, lnks, 1e-10 * nf);
    s.close("c_scaling_identity", d - ds, nf * (c - 1.0 - c.ln()), 1e-9 * rel(d - ds));

    let a_star = dual_coords(&a)?;
    let p_star = dual_coords(&p)?;
    let dd = dual_divergence(&p_star, &a_star)?;
    s.close("dual_identity", dd, d, 1e-9 * rel(d));
    let inv = SpdPair::new(spd_inverse(&p)?, spd_inverse(&a)?)?;
    let di = bregman_logdet(&inv, DivergenceMethod::DenseDirect)?;
    s.close("dual_identity", di, d, 1e-9 * rel(d));

    kaporin_checks(rng, &spectrum, s)?;

    Ok(())
}

fn kaporin_checks<R: Rng>(rng: &mut R, spectrum: &[f64], s: &mut Suites) -> Result<()> {
    let n = spectrum.len();
    let nf = n as f64;
    let lnk = ln_kaporin_k_spectrum(spectrum)?;
    s.get("kaporin_at_least_one").record(-1e-12 * nf - lnk);
    let flat = vec![spectrum[0]; n];
    s.close("kaporin_at_least_one", ln_kaporin_k_spectrum(&flat)?, 0.0, 1e-12 * nf);

    let c = 10f64.powf(rng.random_range(-3.0..3.0));
    let scaled: Vec<f64> = spectrum.iter().map(|v| v * c).collect();
    s.close("kaporin_scale_invariance", ln_kaporin_k_spectrum(&scaled)?, lnk, 1e-10);

    let w = haar_orthogonal(n, rng);
    let m = with_spectrum(&w, spectrum);
    let rotated = sym_eig(&m)?.values;
    s.close("kaporin_similarity_invariance", ln_kaporin_k_spectrum(&rotated)?, lnk, 1e-8 * rel(lnk));
    s.close("kaporin_similarity_invariance", kappa2(&rotated)?, kappa2(spectrum)?, 1e-8 * kappa2(spectrum)?);
    s.close("kaporin_similarity_invariance", kaporin_b(&rotated)?, kaporin_b(spectrum)?, 1e-10);
    let sim = random_similarity(&m, rng);
    let lnk_sim = ln_kaporin_k(sim.trace(), log_abs_det(&sim), n)?;
    s.close("kaporin_similarity_invariance", lnk_sim, lnk, 1e-8 * rel(lnk));

    let report = ConditionReport::from_spectrum(spectrum)?;
    s.get("sandwich_chain").record(report.sandwich_violation(1e-12));
    Ok(())
}

fn precond_suites<R: Rng>(rng: &mut R, n: usize, s: &mut Suites) -> Result<()> {
    let a = sparse_network(n, rng.random())?;
    let inst = Instance::from_matrix(a, FactorChoice::Ic0, Some(0))?;
    let core = &inst.core;
    let a_dense = inst.a.to_dense();
    let ranks = [0, n / 10, n / 4];
    for &r in &ranks {
        let term = bld_truncate(core, r)?;
        let alpha_star = optimal_alpha(core, &term)?;
        let d_star = divergence_alpha(core, &term, alpha_star)?;
        let grid = AlphaGrid {
            min: Some(alpha_star / 4.0),
            max: Some(alpha_star * 4.0),
            count: 101,
            log: true,
        }
        .points(alpha_star, &[alpha_star])?;
        for &al in &grid {
            let d = divergence_alpha(core, &term, al)?;
            s.get("alpha_optimality").record(d_star - 1e-12 - d);
            if al != alpha_star {
                s.get("alpha_optimality").record_bool(d > d_star);
            }
        }

        let lnk_star = ln_kaporin_alpha(core, &term, alpha_star)?;
        let p_star = Preconditioner::new(Arc::clone(core.factor()), term.clone(), alpha_star)?;
        let p1 = Preconditioner::new(Arc::clone(core.factor()), term.clone(), 1.0)?;
        let logdet_a = logdet_spd(&a_dense)?;
        let neg_ld_star = p_star.logdet() - logdet_a;
        let neg_ld_1 = p1.logdet() - logdet_a + (n - r) as f64 * alpha_star.ln();
        let four = [d_star, lnk_star, neg_ld_star, neg_ld_1];
        // the log-det routes carry rounding of order ε|ln det A|, which dominates when D ≈ 0
        let scale = four
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(1e-6 * (1.0 + logdet_a.abs()));
        for i in 0..4 {
            for j in i + 1..4 {
                s.get("four_way_identity")
                    .record((four[i] - four[j]).abs() / scale - 1e-9);
            }
        }

        let (l, big_l) = flat_interval(core, &term)?;
        s.get("alpha_star_in_interval")
            .record_bool(l <= alpha_star && alpha_star <= big_l);
        if r > 0 {
            let ks: Vec<f64> = (0..20)
                .map(|i| l + (big_l - l) * i as f64 / 19.0)
                .map(|al| kappa2_alpha(core, &term, al))
                .collect::<Result<_>>()?;
            let (lo, hi) = ks
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            s.get("kappa2_flatness").record((hi - lo) / lo - 1e-12);
            let flat = big_l / l;
            s.get("kappa2_flatness")
                .record_bool(kappa2_alpha(core, &term, 2.0 * big_l)? > flat);
            s.get("kappa2_flatness")
                .record_bool(kappa2_alpha(core, &term, l / 2.0)? > flat);
        }

        let tsvd = tsvd_truncate(core, r)?;
        let alpha = rng.random_range(0.5..2.0) * alpha_star;
        let d_bld_1 = divergence_alpha(core, &term, 1.0)?;
        let d_tsvd_1 = divergence_alpha(core, &tsvd, 1.0)?;
        s.get("bld_beats_tsvd").record(d_bld_1 - d_tsvd_1 - 1e-12);

        let p_alpha = Preconditioner::new(Arc::clone(core.factor()), term.clone(), alpha)?;
        let dense = bregman_logdet(
            &SpdPair::new(a_dense.clone(), p_alpha.to_dense())?,
            DivergenceMethod::DenseDirect,
        )?;
        let closed = divergence_alpha(core, &term, alpha)?;
        s.close("dense_consistency", dense, closed, 1e-8 * rel(closed));
    }
    Ok(())
}

fn adversarial_suite<R: Rng>(rng: &mut R, n: usize, s: &mut Suites) -> Result<()> {
    let w = haar_orthogonal(n, rng);
    let lambda: Vec<f64> = (0..n)
        .map(|i| 1e8f64.powf(i as f64 / (n - 1).max(1) as f64))
        .collect();
    let a = with_spectrum(&w, &lambda);
    let (p, _) = random_spd(n, 1.0, rng);
    let pair = SpdPair::new(a, p)?;
    let d = bregman_logdet(&pair, DivergenceMethod::DenseDirect)?;
    let lnk = ln_kaporin_k_spectrum(&pair.preconditioned_spectrum()?)?;
    s.get("adversarial_inequality").record(lnk - 1e-10 * rel(d) - d);
    let (_, scaled) = pair.scale_to_unit_trace()?;
    let ds = bregman_logdet(&scaled, DivergenceMethod::DenseDirect)?;
    s.get("adversarial_inequality").record(-1e-12 * n as f64 - ds);
    Ok(())
}

fn run_trial(seed: u64, t: usize, n_min: usize, n_max: usize) -> Suites {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t as u64);
    let n = rng.random_range(n_min..=n_max);
    let mut s = Suites::new();
    let outcome = pair_suites(&mut rng, n, &mut s)
        .and_then(|_| precond_suites(&mut rng, n.max(4), &mut s))
        .and_then(|_| {
            if t % 10 == 0 {
                adversarial_suite(&mut rng, n.min(30), &mut s)
            } else {
                Ok(())
            }
        });
    if outcome.is_err() {
        // a numerical failure inside a trial counts against every suite it would have fed
        for suite in s.0.iter_mut() {
            suite.record(f64::NAN);
        }
    }
    s
}

/// Runs `trials` seeded trials with `n` drawn from `[n_min, n_max]`. Trials run in
/// parallel on the current rayon pool and are merged in trial order.
pub fn verify_theorems(trials: usize, n_min: usize, n_max: usize, seed: u64) -> VerifyResults {
    let n_min = n_min.max(2);
    let n_max = n_max.max(n_min);
    let per_trial: Vec<Suites> = (0..trials.max(1))
        .into_par_iter()
        .map(|t| run_trial(seed, t, n_min, n_max))
        .collect();
    let mut total = Suites::new();
    for trial in &per_trial {
        for (acc, s) in total.0.iter_mut().zip(&trial.0) {
            acc.merge(s);
        }
    }
    let all_passed = total.0.iter().all(|s| s.passed);
    VerifyResults {
        trials: trials.max(1),
        n_min,
        n_max,
        seed,
        suites: total.0,
        all_passed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_abs_det_matches_cholesky() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (a, lambda) = random_spd(8, 1.0, &mut rng);
        let want: f64 = lambda.iter().map(|v| v.ln()).sum();
        assert!((log_abs_det(&a) - want).abs() < 1e-12);
        let sim = random_similarity(&a, &mut rng);
        assert!((log_abs_det(&sim) - want).abs() < 1e-10);
        assert!((sim.trace() - lambda.iter().sum::<f64>()).abs() < 1e-10);
    }

    #[test]
    fn small_battery_passes() {
        let res = verify_theorems(6, 8, 20, 3);
        assert!(res.all_passed, "{:?}", res.violations());
        for s in &res.suites {
            assert!(s.checks > 0, "suite {} never ran", s.name);
        }
    }

    #[test]
    fn battery_is_deterministic() {
        let a = verify_theorems(3, 5, 12, 9);
        let b = verify_theorems(3, 5, 12, 9);
        assert_eq!(a.suites, b.suites);
    }
}
