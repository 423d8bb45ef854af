use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bld_kaporin::harness::{
    self, bound_overlay, error_order_study, estimator_study, sweep_alpha, verify_theorems,
    ExperimentSpec, FactorChoice, Instance, MatrixSource, Report, SpectrumSpec, SyntheticSpec,
    DEFAULT_ERROR_EPS, ESTIMATOR_HEADER, OVERLAY_HEADER, SWEEP_HEADER,
};
use bld_kaporin::linalg::cholesky_sparse;
use bld_kaporin::matio::write_table;
use bld_kaporin::pcg::{iter_estimate_kaporin, recommended_sigma};
use bld_kaporin::precond::{
    bld_truncate, divergence_alpha, flat_interval, kappa2_alpha, ln_kaporin_alpha, optimal_alpha,
};
use bld_kaporin::rla::{ProbeConfig, ProbeDistribution};
use bld_kaporin::Error;

#[derive(Parser, Debug)]
#[command(name = "bld-kaporin", version, about = "Low-rank log-det preconditioners and PCG bound experiments")]
struct Cli {
    /// Worker threads for trial parallelism (falls back to BLD_KAPORIN_THREADS).
    #[arg(long, global = true, env = "BLD_KAPORIN_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Order, sparsity, diagonal positivity and SPD check of a matrix.
    Info(MatrixArgs),
    /// Builds the BLD preconditioner and reports α*, [l, L], κ₂, D_LD and ln K.
    Precondition(ExperimentArgs),
    /// κ₂, D_LD and ln K over a grid of α.
    SweepAlpha(ExperimentArgs),
    /// PCG solve with bound overlay and iteration estimates.
    Solve(SolveArgs),
    /// Randomized invariant batteries.
    Verify(VerifyArgs),
    /// SLQ estimates of ln K, α* and D_LD against exact values.
    Estimate(EstimateArgs),
}

#[derive(Args, Debug, Clone)]
struct MatrixArgs {
    /// Matrix Market file.
    #[arg(long, conflicts_with_all = ["network", "synthetic_n"])]
    matrix: Option<PathBuf>,

    /// Sparse network stand-in of this order.
    #[arg(long, conflicts_with = "synthetic_n")]
    network: Option<usize>,

    /// Dense synthetic matrix of this order.
    #[arg(long = "synthetic-n")]
    synthetic_n: Option<usize>,

    /// Synthetic spectrum: uniform:a,b | geometric:kappa | explicit:v1,v2,... | clustered:v*m,...
    #[arg(long, default_value = "geometric:100", value_parser = parse_spectrum)]
    spectrum: SpectrumSpec,

    /// Seed of the synthetic basis or network.
    #[arg(long = "matrix-seed", default_value_t = 0)]
    matrix_seed: u64,

    /// Full experiment spec as JSON; other flags override its fields.
    #[arg(long)]
    spec: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct ExperimentArgs {
    #[command(flatten)]
    matrix: MatrixArgs,

    #[arg(long, value_parser = parse_factor)]
    factor: Option<FactorChoice>,

    /// Low-rank size r (default ⌈n/10⌉).
    #[arg(long)]
    rank: Option<usize>,

    /// Scaling α (default α*).
    #[arg(long)]
    alpha: Option<f64>,

    /// Number of α grid points.
    #[arg(long = "grid-count")]
    grid_count: Option<usize>,

    #[arg(long)]
    seed: Option<u64>,

    /// Output file (CSV or JSON depending on the command).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct SolveArgs {
    #[command(flatten)]
    exp: ExperimentArgs,

    #[arg(long)]
    tol: Option<f64>,

    #[arg(long = "max-iter")]
    max_iter: Option<usize>,

    /// Extra ε for the Kaporin iteration estimate.
    #[arg(long)]
    eps: Option<f64>,

    /// σ for the Kaporin iteration estimate (default: recommended).
    #[arg(long)]
    sigma: Option<f64>,
}

#[derive(Args, Debug, Clone)]
struct VerifyArgs {
    #[arg(long, default_value_t = 100)]
    trials: usize,

    #[arg(long = "n-min", default_value_t = 10)]
    n_min: usize,

    #[arg(long = "n-max", default_value_t = 60)]
    n_max: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Also run the error-order study for this many seeds.
    #[arg(long = "error-order", default_value_t = 0)]
    error_order: usize,

    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct EstimateArgs {
    #[command(flatten)]
    exp: ExperimentArgs,

    /// Lanczos steps per probe.
    #[arg(long, default_value_t = 40)]
    m: usize,

    /// Number of probes.
    #[arg(long, default_value_t = 30)]
    nv: usize,

    #[arg(long, default_value_t = false)]
    gaussian: bool,
}

fn parse_factor(s: &str) -> Result<FactorChoice, String> {
    s.parse()
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect()
}

fn parse_spectrum(s: &str) -> Result<SpectrumSpec, String> {
    let (kind, rest) = s.split_once(':').ok_or("expected kind:parameters")?;
    match kind {
        "uniform" => match parse_list(rest)?.as_slice() {
            [a, b] => Ok(SpectrumSpec::Uniform { a: *a, b: *b }),
            _ => Err("uniform needs a,b".into()),
        },
        "geometric" => match parse_list(rest)?.as_slice() {
            [k] => Ok(SpectrumSpec::Geometric { kappa: *k }),
            _ => Err("geometric needs kappa".into()),
        },
        "explicit" => Ok(SpectrumSpec::Explicit {
            values: parse_list(rest)?,
        }),
        "clustered" => {
            let mut values = Vec::new();
            let mut multiplicities = Vec::new();
            for part in rest.split(',') {
                let (v, m) = part.split_once('*').ok_or("clustered needs value*multiplicity")?;
                values.push(v.trim().parse::<f64>().map_err(|e| e.to_string())?);
                multiplicities.push(m.trim().parse::<usize>().map_err(|e| e.to_string())?);
            }
            Ok(SpectrumSpec::Clustered {
                values,
                multiplicities,
            })
        }
        other => Err(format!("unknown spectrum kind {other:?}")),
    }
}

fn read_spec(path: &Path) -> Result<ExperimentSpec, Error> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

fn matrix_source(m: &MatrixArgs) -> Option<MatrixSource> {
    if let Some(path) = &m.matrix {
        Some(MatrixSource::Path { path: path.clone() })
    } else if let Some(n) = m.network {
        Some(MatrixSource::Network {
            n,
            seed: m.matrix_seed,
        })
    } else {
        m.synthetic_n.map(|n| {
            MatrixSource::Synthetic(SyntheticSpec {
                n,
                spectrum: m.spectrum.clone(),
                seed: m.matrix_seed,
            })
        })
    }
}

fn build_spec(e: &ExperimentArgs) -> Result<ExperimentSpec, Error> {
    let from_flags = matrix_source(&e.matrix);
    let mut spec = match (&e.matrix.spec, from_flags) {
        (Some(path), src) => {
            let mut s = read_spec(path)?;
            if let Some(src) = src {
                s.matrix = src;
            }
            s
        }
        (None, Some(src)) => ExperimentSpec::new(src),
        (None, None) => {
            return Err(Error::Schema(
                "one of --matrix, --network, --synthetic-n or --spec is required".into(),
            ))
        }
    };
    if let Some(f) = e.factor {
        spec.factor = f;
    }
    if e.rank.is_some() {
        spec.rank = e.rank;
    }
    if e.alpha.is_some() {
        spec.alpha = e.alpha;
    }
    if let Some(c) = e.grid_count {
        spec.alpha_grid.count = c;
    }
    if let Some(s) = e.seed {
        spec.seed = s;
        spec.probe.seed = s;
    }
    Ok(spec)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn cmd_info(m: &MatrixArgs) -> Result<(), Error> {
    let spec = build_spec(&ExperimentArgs {
        matrix: m.clone(),
        factor: None,
        rank: None,
        alpha: None,
        grid_count: None,
        seed: None,
        out: None,
    })?;
    let a = harness::load_matrix(&spec.matrix)?;
    let n = a.order();
    let diag = a.diagonal();
    let positive = diag.iter().all(|&d| d > 0.0);
    let spd = cholesky_sparse(&a);
    println!("n={n}");
    let stored_diag = a.triplets().filter(|&(i, j, _)| i == j).count();
    println!("nnz={}", 2 * a.nnz_lower() - stored_diag);
    println!("nnz_lower={}", a.nnz_lower());
    println!("trace={:.16e}", a.trace());
    println!("diagonal_positive={positive}");
    match spd {
        Ok(l) => println!("spd=true logdet={:.16e}", l.logdet_gram()),
        Err(e) => println!("spd=false ({e})"),
    }
    Ok(())
}

fn cmd_precondition(e: &ExperimentArgs) -> Result<(), Error> {
    let spec = build_spec(e)?;
    let inst = Instance::build(&spec)?;
    let core = &inst.core;
    let term = bld_truncate(core, inst.rank)?;
    let alpha_star = optimal_alpha(core, &term)?;
    let alpha = spec.alpha.unwrap_or(alpha_star);
    let (l, big_l) = flat_interval(core, &term)?;
    let kappa2 = kappa2_alpha(core, &term, alpha)?;
    let d_ld = divergence_alpha(core, &term, alpha)?;
    let ln_k = ln_kaporin_alpha(core, &term, alpha)?;
    let results = serde_json::json!({
        "n": inst.order(),
        "rank": inst.rank,
        "factor": spec.factor,
        "factor_shift": core.factor().shift(),
        "alpha": alpha,
        "alpha_star": alpha_star,
        "interval": [l, big_l],
        "kappa2": kappa2,
        "d_ld": d_ld,
        "ln_k": ln_k,
        "selected_theta": term.d(),
    });
    println!("n={} r={} shift={}", inst.order(), inst.rank, core.factor().shift());
    println!("alpha_star={alpha_star:.12} interval=[{l:.12}, {big_l:.12}]");
    println!("alpha={alpha:.12} kappa2={kappa2:.6e} d_ld={d_ld:.12} ln_k={ln_k:.12}");
    if let Some(out) = &e.out {
        Report::new("precondition", &spec, results, vec![]).write(out)?;
    }
    Ok(())
}

fn cmd_sweep(e: &ExperimentArgs) -> Result<bool, Error> {
    let spec = build_spec(e)?;
    let res = sweep_alpha(&spec)?;
    let violations = res.check_shape(1e-12, 1e-8);
    let s = &res.summary;
    println!("n={} r={} points={}", s.n, s.rank, s.grid_points);
    println!(
        "alpha_star={:.12} interval=[{:.12}, {:.12}] inside={}",
        s.alpha_star, s.interval_lo, s.interval_hi, s.alpha_star_in_interval
    );
    println!(
        "d_ld(alpha_star)={:.12} ln_k(alpha_star)={:.12} kappa2_flat={:.12}",
        s.d_ld_at_alpha_star, s.ln_k_at_alpha_star, s.kappa2_on_interval
    );
    for v in &violations {
        eprintln!("violation: {v}");
    }
    if let Some(out) = &e.out {
        write_table(&res.rows(), &SWEEP_HEADER, out)?;
        Report::new("sweep_alpha", &spec, s, violations.clone()).write(sibling(out, "json"))?;
    }
    Ok(violations.is_empty())
}

fn cmd_solve(a: &SolveArgs) -> Result<bool, Error> {
    let mut spec = build_spec(&a.exp)?;
    if let Some(t) = a.tol {
        spec.pcg.tol = t;
    }
    if a.max_iter.is_some() {
        spec.pcg.max_iter = a.max_iter;
    }
    if let Some(eps) = a.eps {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Schema(format!("--eps {eps} must lie in (0, 1)")));
        }
    }
    let res = bound_overlay(&spec)?;
    let c = &res.condition;
    println!(
        "n={} iterations={} converged={}",
        c.n, res.report.iterations, res.report.converged
    );
    println!("kappa2={:.6e} ln_k={:.12} d_ld={:.12}", c.kappa2, c.ln_k, c.d_ld);
    for est in &res.estimates {
        println!(
            "eps={:e} observed={} i_kappa={} i_kaporin={} i_divergence={}",
            est.eps,
            est.observed.map_or("-".into(), |k| k.to_string()),
            est.i_kappa,
            est.i_kaporin,
            est.i_divergence.map_or("-".into(), |k| k.to_string())
        );
    }
    let mut extra = serde_json::Value::Null;
    if let Some(eps) = a.eps {
        let sigma = match a.sigma {
            Some(s) => s,
            None => recommended_sigma(c.ln_k, eps).unwrap_or(2.0),
        };
        let est = iter_estimate_kaporin(c.ln_k, eps, sigma)?;
        let observed = res.report.iterations_to_pinv_reduction(eps);
        println!(
            "eps={eps:e} sigma={sigma} i_kaporin={est} observed={}",
            observed.map_or("-".into(), |k| k.to_string())
        );
        extra = serde_json::json!({"eps": eps, "sigma": sigma, "i_kaporin": est, "observed": observed});
    }
    for v in &res.violations {
        eprintln!("violation: {v}");
    }
    if let Some(out) = &a.exp.out {
        write_table(&res.rows, &OVERLAY_HEADER, out)?;
        let results = serde_json::json!({
            "condition": c,
            "iterations": res.report.iterations,
            "converged": res.report.converged,
            "estimates": res.estimates,
            "requested_estimate": extra,
        });
        Report::new("bound_overlay", &spec, results, res.violations.clone())
            .write(sibling(out, "json"))?;
    }
    Ok(res.violations.is_empty())
}

fn cmd_verify(a: &VerifyArgs) -> Result<bool, Error> {
    if a.trials == 0 || a.n_min < 2 || a.n_max < a.n_min {
        return Err(Error::Schema("need trials ≥ 1 and 2 ≤ n-min ≤ n-max".into()));
    }
    let res = verify_theorems(a.trials, a.n_min, a.n_max, a.seed);
    for s in &res.suites {
        println!(
            "{:<32} {} checks={} failures={} worst={:e}",
            s.name,
            if s.passed { "PASS" } else { "FAIL" },
            s.checks,
            s.failures,
            s.worst_violation
        );
    }
    let mut violations = res.violations();
    let mut orders = Vec::new();
    for k in 0..a.error_order {
        let seed = a.seed.wrapping_add(k as u64);
        let study = error_order_study(40, seed, &DEFAULT_ERROR_EPS)?;
        let ok = (1.8..=2.2).contains(&study.slope);
        println!("error_order seed={seed} slope={:.4} {}", study.slope, if ok { "PASS" } else { "FAIL" });
        if !ok {
            violations.push(format!("error-order slope {} for seed {seed}", study.slope));
        }
        orders.push(study);
    }
    let all = violations.is_empty();
    println!("all_passed={all}");
    if let Some(out) = &a.out {
        let spec = serde_json::json!({
            "trials": a.trials, "n_min": a.n_min, "n_max": a.n_max, "seed": a.seed,
            "error_order": a.error_order,
        });
        let results = serde_json::json!({"battery": res, "error_order": orders});
        Report::new("verify_theorems", &spec, results, violations).write(out)?;
    }
    Ok(all)
}

fn cmd_estimate(a: &EstimateArgs) -> Result<(), Error> {
    let mut spec = build_spec(&a.exp)?;
    spec.probe = ProbeConfig {
        m: a.m,
        n_v: a.nv,
        seed: spec.seed,
        distribution: if a.gaussian {
            ProbeDistribution::Gaussian
        } else {
            ProbeDistribution::Rademacher
        },
    };
    if a.m == 0 || a.nv == 0 {
        return Err(Error::Schema("--m and --nv must be positive".into()));
    }
    let rows = estimator_study(&spec, &[(a.m, a.nv)])?;
    for r in &rows {
        println!("m={} n_v={}", r.m, r.n_v);
        println!("ln_k exact={:.10} hat={:.10}", r.ln_k_exact, r.ln_k_hat);
        println!("alpha exact={:.10} hat={:.10}", r.alpha_exact, r.alpha_hat);
        println!("d_ld exact={:.10} hat={:.10}", r.d_ld_exact, r.d_ld_hat);
    }
    if let Some(out) = &a.exp.out {
        let table: Vec<_> = rows.iter().map(|r| r.row()).collect();
        write_table(&table, &ESTIMATOR_HEADER, out)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool, Error> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::Schema("--threads must be positive".into()));
        }
        // a second initialization only happens in-process, never from the CLI
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match &cli.command {
        Command::Info(m) => cmd_info(m).map(|_| true),
        Command::Precondition(e) => cmd_precondition(e).map(|_| true),
        Command::SweepAlpha(e) => cmd_sweep(e),
        Command::Solve(s) => cmd_solve(s),
        Command::Verify(v) => cmd_verify(v),
        Command::Estimate(e) => cmd_estimate(e).map(|_| true),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 1 } else { 2 })
        }
    }
}
