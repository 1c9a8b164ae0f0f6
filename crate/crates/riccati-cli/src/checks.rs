//! `verify`: the runnable pass/fail table. Each check exercises one identity
//! the solver stack must satisfy: control-theoretic (value, suboptimality,
//! payoff-deficit), analytic (mild form, coercivity, horizon, escape), and
//! algebraic (semigroup law, doubling, duality, pseudo-inverse, recipe versus
//! direct integration).

use std::path::Path;

use riccati_core::linalg;
use riccati_core::problem::ProblemSpec;
use riccati_core::riccati::{
    conservative_horizon, escape_report, integrate_direct, integrate_seed, mild_residuals,
    IntegrateOptions, SeedTrajectory,
};
use riccati_core::rng::SplitMix64;
use riccati_core::semigroup::{
    compose, dualize, iterate_doubling, iterate_linear, seed_kernel, semiconvexity_certificate,
    undualize, Kernel, SemigroupError,
};
use riccati_core::verify::{simulate_closed_loop, suboptimality_probe, value_quadratic, ProbeOptions};
use riccati_core::{LinOp, SymOp};

use crate::config::Config;
use crate::formats::{self, CheckRow};
use crate::setup;
use crate::CliError;

const CHECK_NAMES: [&str; 12] = [
    "value-identity",
    "suboptimality",
    "payoff-deficit",
    "mild-residual",
    "coercivity",
    "horizon",
    "escape",
    "semigroup-law",
    "doubling-linear",
    "duality",
    "penrose",
    "recipe-oracle",
];

// Disjoint RNG stream ids per randomized check.
const VALUE_STREAM: u64 = 0x1001;
const PROBE_STREAM: u64 = 0x1002;
const DUAL_STREAM: u64 = 0x1003;
const PENROSE_STREAM: u64 = 0x1004;

fn rel_gap(a: &LinOp, b: &LinOp) -> f64 {
    a.sub(b).frob_norm() / b.frob_norm().max(1.0)
}

fn kernel_gap(a: &Kernel, b: &Kernel) -> f64 {
    rel_gap(a.b11().op(), b.b11().op())
        .max(rel_gap(a.b12(), b.b12()))
        .max(rel_gap(a.b22().op(), b.b22().op()))
}

fn check_value_identity(
    spec: &ProblemSpec,
    traj: &SeedTrajectory,
    t: f64,
    seed: u64,
) -> Result<CheckRow, CliError> {
    let n = spec.dim();
    let mut rng = SplitMix64::stream(seed, VALUE_STREAM);
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let x = rng.uniform_vec(n, -1.0, 1.0);
        let z = rng.uniform_vec(n, -1.0, 1.0);
        let value = value_quadratic(traj, t, &x, &z);
        let (_, payoff) = simulate_closed_loop(spec, traj, t, &x, &z)?;
        worst = worst.max((payoff - value).abs() / value.abs().max(1.0));
    }
    Ok(CheckRow { name: "value-identity", metric: worst, tolerance: 1e-4, pass: worst <= 1e-4 })
}

fn check_suboptimality(
    spec: &ProblemSpec,
    traj: &SeedTrajectory,
    t: f64,
    cfg: &Config,
    seed: u64,
) -> Result<CheckRow, CliError> {
    let n = spec.dim();
    let mut rng = SplitMix64::stream(seed, PROBE_STREAM);
    let x = rng.uniform_vec(n, -1.0, 1.0);
    let z = rng.uniform_vec(n, -1.0, 1.0);
    let opts = ProbeOptions {
        trials: cfg.probe_trials,
        segments: cfg.probe_segments,
        amplitude: cfg.probe_amplitude,
        seed,
    };
    let out = suboptimality_probe(spec, traj, t, &x, &z, &opts)?;
    Ok(CheckRow {
        name: "suboptimality",
        metric: out.max_excess,
        tolerance: 1e-6,
        pass: out.max_excess <= 1e-6,
    })
}

/// Scalar problem: the reward a perturbed control loses must equal the
/// injected noise energy, within 5%.
fn check_payoff_deficit(seed: u64) -> Result<CheckRow, CliError> {
    let spec = ProblemSpec::scalar(-1.0, 1.0, 1.0, -0.1);
    let t = 0.5;
    let traj = integrate_seed(&spec, t, &IntegrateOptions::default())?;
    let opts = ProbeOptions { trials: 20, segments: 16, amplitude: 0.5, seed };
    let out = suboptimality_probe(&spec, &traj, t, &[1.1], &[-0.4], &opts)?;
    let worst = out
        .trials
        .iter()
        .map(|tr| tr.identity_gap / tr.deficit.max(1e-12))
        .fold(0.0_f64, f64::max);
    Ok(CheckRow { name: "payoff-deficit", metric: worst, tolerance: 0.05, pass: worst <= 0.05 })
}

fn check_mild_residual(
    spec: &ProblemSpec,
    traj: &SeedTrajectory,
) -> Result<CheckRow, CliError> {
    let reports = mild_residuals(spec, traj)?;
    let worst = reports[1..]
        .iter()
        .map(|r| r.residual / r.p_norm.max(1e-300))
        .fold(0.0_f64, f64::max);
    Ok(CheckRow { name: "mild-residual", metric: worst, tolerance: 1e-5, pass: worst <= 1e-5 })
}

fn check_coercivity(spec: &ProblemSpec, traj: &SeedTrajectory) -> Result<CheckRow, CliError> {
    let mut min_margin = f64::INFINITY;
    let mut certs_ok = true;
    for j in 1..traj.len() {
        min_margin = min_margin.min(traj.margin_at(j));
        certs_ok &= semiconvexity_certificate(traj.p_at(j), spec.m(), 0.5)?.ok;
    }
    Ok(CheckRow {
        name: "coercivity",
        metric: min_margin,
        tolerance: 0.0,
        pass: min_margin > 0.0 && certs_ok,
    })
}

fn check_horizon(spec: &ProblemSpec, traj: &SeedTrajectory, cfg: &Config) -> Result<CheckRow, CliError> {
    let bound = conservative_horizon(spec, cfg.horizon_sample_t, 64)?;
    let ratio = bound.bound / traj.tau_star();
    // An infinite bound means the flow provably never grows; nothing to
    // compare against the monitored horizon.
    let pass = !bound.bound.is_finite() || bound.bound <= traj.tau_star();
    Ok(CheckRow { name: "horizon", metric: ratio, tolerance: 1.0, pass })
}

/// Fixed canary: dp/dt = p^2 from 1 blows up at t = 1 and the detector must
/// localize it from below.
fn check_escape() -> Result<CheckRow, CliError> {
    let spec = ProblemSpec::scalar(0.0, 1.0, 0.0, -0.1);
    let report = escape_report(&spec, &SymOp::scalar(1.0), 1.5, &IntegrateOptions::default())?;
    let lower = report.t_escape_lower.unwrap_or(f64::NAN);
    let pass = report.escaped && (0.95..=1.0).contains(&lower);
    Ok(CheckRow { name: "escape", metric: lower, tolerance: 1.0, pass })
}

fn check_semigroup_law(spec: &ProblemSpec, opts: &IntegrateOptions) -> Result<CheckRow, CliError> {
    let traj = integrate_seed(spec, 0.2, opts)?;
    let mut worst = 0.0_f64;
    for delta in [0.05, 0.1] {
        let short = seed_kernel(&traj, delta)?;
        let composed = compose(&short, &short)?;
        let long = seed_kernel(&traj, 2.0 * delta)?;
        worst = worst.max(kernel_gap(&composed, &long));
    }
    Ok(CheckRow { name: "semigroup-law", metric: worst, tolerance: 1e-6, pass: worst <= 1e-6 })
}

fn check_doubling_linear(
    spec: &ProblemSpec,
    cfg: &Config,
    opts: &IntegrateOptions,
) -> Result<CheckRow, CliError> {
    let delta = cfg.recipe_t / 8.0;
    let traj = integrate_seed(spec, delta, opts)?;
    let step = seed_kernel(&traj, delta)?;
    let doubled = iterate_doubling(&step, 3)?;
    let chained = iterate_linear(&step, 8)?;
    let gap = kernel_gap(&doubled.kernel, &chained.kernel);
    let counts_ok = doubled.compositions == 3 && chained.compositions == 7;
    Ok(CheckRow {
        name: "doubling-linear",
        metric: gap,
        tolerance: 1e-8,
        pass: gap <= 1e-8 && counts_ok,
    })
}

fn check_duality(spec: &ProblemSpec, seed: u64) -> Result<CheckRow, CliError> {
    let n = spec.dim();
    let mut rng = SplitMix64::stream(seed, DUAL_STREAM);
    let mut worst = 0.0_f64;
    for trial in 0..200 {
        let eps = setup::MTILDE_EPS[trial % setup::MTILDE_EPS.len()];
        let g = LinOp::from_vec(n, n, rng.uniform_vec(n * n, -1.0, 1.0));
        let mtilde = SymOp::enforce(
            spec.m()
                .op()
                .add(&g.matmul(&g.transpose()).scaled(spec.weight()))
                .add(&LinOp::scaled_identity(n, eps)),
        );
        // Route agreement is enforced inside dualize; a mismatch shows up
        // here as a failing row instead of an abort.
        let roundtrip = dualize(&mtilde, spec.m()).and_then(|d| undualize(&d, spec.m()));
        match roundtrip {
            Ok(back) => worst = worst.max(rel_gap(back.op(), mtilde.op())),
            Err(SemigroupError::DualRouteMismatch { diff }) => worst = worst.max(diff),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(CheckRow { name: "duality", metric: worst, tolerance: 1e-10, pass: worst <= 1e-10 })
}

fn check_penrose(cfg: &Config, seed: u64) -> Result<CheckRow, CliError> {
    let mut rng = SplitMix64::stream(seed, PENROSE_STREAM);
    let mut worst = 0.0_f64;
    for trial in 0..1000 {
        let n = 1 + trial % 8;
        let raw = LinOp::from_vec(n, n, rng.uniform_vec(n * n, -1.0, 1.0));
        let a = SymOp::enforce(raw);
        let pinv = linalg::pseudo_inverse(&a, cfg.pinv_rel_tol)?;
        let apa = a.op().matmul(pinv.op()).matmul(a.op());
        let pap = pinv.op().matmul(a.op()).matmul(pinv.op());
        worst = worst
            .max(apa.sub(a.op()).frob_norm() / a.op().frob_norm().max(1.0))
            .max(pap.sub(pinv.op()).frob_norm() / pinv.op().frob_norm().max(1.0));
    }
    Ok(CheckRow { name: "penrose", metric: worst, tolerance: 1e-9, pass: worst <= 1e-9 })
}

fn check_recipe_oracle(
    spec: &ProblemSpec,
    cfg: &Config,
    opts: &IntegrateOptions,
    seed: u64,
) -> Result<CheckRow, CliError> {
    let t = cfg.recipe_t;
    let kappa = cfg.recipe_kappa;
    let delta = t / kappa as f64;
    let traj = integrate_seed(spec, delta, opts)?;
    let kernel = seed_kernel(&traj, delta)?;
    let iterated = iterate_linear(&kernel, kappa)?;
    let family = setup::mtilde_family(spec, cfg, seed)?;
    let mut worst = 0.0_f64;
    for mtilde in &family {
        let recipe = riccati_core::semigroup::reconstruct(&iterated.kernel, mtilde, spec.m())?;
        let direct = integrate_direct(spec, mtilde, &[t], opts)?;
        worst = worst.max(rel_gap(recipe.op(), direct.p[0].op()));
    }
    Ok(CheckRow { name: "recipe-oracle", metric: worst, tolerance: 1e-5, pass: worst <= 1e-5 })
}

fn check_trajectory_file(path: &Path) -> Result<CheckRow, CliError> {
    let rows = formats::read_trajectory(path)?;
    let min_margin = rows
        .iter()
        .filter(|r| r.t > 0.0)
        .map(|r| r.margin)
        .fold(f64::INFINITY, f64::min);
    Ok(CheckRow {
        name: "trajectory-file",
        metric: min_margin,
        tolerance: 0.0,
        pass: min_margin.is_finite() && min_margin > 0.0,
    })
}

pub fn run(
    cfg: &Config,
    out: &Path,
    seed: u64,
    only: Option<&str>,
    trajectory: Option<&Path>,
) -> Result<(), CliError> {
    if let Some(name) = only {
        let known = name == "trajectory-file" || CHECK_NAMES.contains(&name);
        if !known {
            return Err(CliError::Config(format!(
                "verify: unknown check `{name}`; available: {}, trajectory-file",
                CHECK_NAMES.join(", ")
            )));
        }
        if name == "trajectory-file" && trajectory.is_none() {
            return Err(CliError::Config(
                "verify: --only trajectory-file requires --trajectory <PATH>".to_owned(),
            ));
        }
    }
    let wants = |name: &str| only.map_or(true, |o| o == name);

    let spec = setup::build_spec(cfg)?;
    let opts = setup::integrate_opts(cfg);
    let mut rows: Vec<CheckRow> = Vec::new();

    // Trajectory file validation first: a corrupted file is an input error,
    // not a failing check.
    if let Some(path) = trajectory {
        if wants("trajectory-file") {
            rows.push(check_trajectory_file(path)?);
        }
    }

    if wants("value-identity") || wants("suboptimality") {
        let traj = integrate_seed(&spec, cfg.verify_t, &opts)?;
        if wants("value-identity") {
            rows.push(check_value_identity(&spec, &traj, cfg.verify_t, seed)?);
        }
        if wants("suboptimality") {
            rows.push(check_suboptimality(&spec, &traj, cfg.verify_t, cfg, seed)?);
        }
    }
    if wants("payoff-deficit") {
        rows.push(check_payoff_deficit(seed)?);
    }
    if wants("mild-residual") || wants("coercivity") || wants("horizon") {
        let traj = integrate_seed(&spec, cfg.solve_t, &opts)?;
        if wants("mild-residual") {
            rows.push(check_mild_residual(&spec, &traj)?);
        }
        if wants("coercivity") {
            rows.push(check_coercivity(&spec, &traj)?);
        }
        if wants("horizon") {
            rows.push(check_horizon(&spec, &traj, cfg)?);
        }
    }
    if wants("escape") {
        rows.push(check_escape()?);
    }
    if wants("semigroup-law") {
        rows.push(check_semigroup_law(&spec, &opts)?);
    }
    if wants("doubling-linear") {
        rows.push(check_doubling_linear(&spec, cfg, &opts)?);
    }
    if wants("duality") {
        rows.push(check_duality(&spec, seed)?);
    }
    if wants("penrose") {
        rows.push(check_penrose(cfg, seed)?);
    }
    if wants("recipe-oracle") {
        rows.push(check_recipe_oracle(&spec, cfg, &opts, seed)?);
    }

    let path = out.join("verify.csv");
    formats::write_verify(&path, &rows)?;
    println!("{:<18} {:>14} {:>12} {:>7}", "check", "metric", "tolerance", "status");
    for row in &rows {
        println!(
            "{:<18} {:>14.6e} {:>12.1e} {:>7}",
            row.name,
            row.metric,
            row.tolerance,
            row.status()
        );
    }
    println!("wrote {}", path.display());

    let failed = rows.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        return Err(CliError::CheckFailed(format!("{failed} of {} checks failed", rows.len())));
    }
    Ok(())
}
