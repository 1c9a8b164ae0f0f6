//! `bench`: error versus computation time for the three ways of reaching
//! P(t) from one terminal matrix. The reference is a direct integration at
//! tolerances two decades tighter than anything in the sweep; wall time is
//! measured around pure compute, file writing excluded.

use std::path::Path;
use std::time::Instant;

use riccati_core::problem::ProblemSpec;
use riccati_core::riccati::{integrate_direct, integrate_seed, IntegrateOptions};
use riccati_core::semigroup::{iterate_doubling, iterate_linear, reconstruct, seed_kernel};
use riccati_core::{LinOp, SymOp};

use crate::config::Config;
use crate::formats::{self, BenchRecord};
use crate::setup;
use crate::CliError;

/// rtol sweep for the direct rows; the kappa_or_k column carries -log10(rtol).
const DIRECT_RTOLS: [f64; 4] = [1e-3, 1e-5, 1e-7, 1e-9];
const LINEAR_KAPPAS: [usize; 5] = [1, 2, 4, 8, 16];
const DOUBLING_KS: [usize; 5] = [0, 1, 2, 3, 4];

fn rel_to(p: &SymOp, p_ref: &SymOp, ref_norm: f64) -> f64 {
    p.op().sub(p_ref.op()).frob_norm() / ref_norm
}

fn recipe_once(
    spec: &ProblemSpec,
    mtilde: &SymOp,
    t: f64,
    steps: usize,
    doubling: bool,
    opts: &IntegrateOptions,
) -> Result<(SymOp, usize), CliError> {
    let kappa = if doubling { 1usize << steps } else { steps };
    let delta = t / kappa as f64;
    let traj = integrate_seed(spec, delta, opts)?;
    let kernel = seed_kernel(&traj, delta)?;
    let it = if doubling {
        iterate_doubling(&kernel, steps)?
    } else {
        iterate_linear(&kernel, steps)?
    };
    let p = reconstruct(&it.kernel, mtilde, spec.m())?;
    Ok((p, it.compositions))
}

pub fn run(cfg: &Config, out: &Path) -> Result<(), CliError> {
    let spec = setup::build_spec(cfg)?;
    let opts = setup::integrate_opts(cfg);
    let t = cfg.recipe_t;
    let n = spec.dim();

    // Fixed, seed-independent terminal matrix so bench artifacts are
    // comparable across invocations.
    let mtilde = SymOp::enforce(spec.m().op().add(&LinOp::scaled_identity(n, 0.2)));

    let tight = IntegrateOptions { rtol: 1e-12, atol: 1e-14, ..opts.clone() };
    let p_ref = integrate_direct(&spec, &mtilde, &[t], &tight)?.p.pop().expect("recorded");
    let ref_norm = p_ref.op().frob_norm();

    let mut rows: Vec<BenchRecord> = Vec::new();

    for rtol in DIRECT_RTOLS {
        let run_opts = IntegrateOptions { rtol, atol: rtol * 1e-2, ..opts.clone() };
        let start = Instant::now();
        let p = integrate_direct(&spec, &mtilde, &[t], &run_opts)?.p.pop().expect("recorded");
        let wall_time_s = start.elapsed().as_secs_f64();
        rows.push(BenchRecord {
            method: "direct-rk45",
            t,
            kappa_or_k: (-rtol.log10()).round() as usize,
            compositions: 0,
            wall_time_s,
            rel_error: rel_to(&p, &p_ref, ref_norm),
        });
    }

    for kappa in LINEAR_KAPPAS {
        let start = Instant::now();
        let (p, compositions) = recipe_once(&spec, &mtilde, t, kappa, false, &opts)?;
        let wall_time_s = start.elapsed().as_secs_f64();
        rows.push(BenchRecord {
            method: "recipe-linear",
            t,
            kappa_or_k: kappa,
            compositions,
            wall_time_s,
            rel_error: rel_to(&p, &p_ref, ref_norm),
        });
    }

    for k in DOUBLING_KS {
        let start = Instant::now();
        let (p, compositions) = recipe_once(&spec, &mtilde, t, k, true, &opts)?;
        let wall_time_s = start.elapsed().as_secs_f64();
        rows.push(BenchRecord {
            method: "recipe-doubling",
            t,
            kappa_or_k: k,
            compositions,
            wall_time_s,
            rel_error: rel_to(&p, &p_ref, ref_norm),
        });
    }

    rows.sort_by(|a, b| {
        a.wall_time_s
            .total_cmp(&b.wall_time_s)
            .then_with(|| a.method.cmp(b.method))
            .then_with(|| a.kappa_or_k.cmp(&b.kappa_or_k))
    });
    let path = out.join("bench.csv");
    formats::write_bench(&path, &rows)?;

    println!("bench: problem={} dim={n} t={t}", spec.label());
    let count_of = |method: &str, kk: usize| {
        rows.iter().find(|r| r.method == method && r.kappa_or_k == kk).map(|r| r.compositions)
    };
    let mut dominates = true;
    for k in DOUBLING_KS.iter().filter(|&&k| (1usize << k) >= 4) {
        let kappa = 1usize << k;
        let dbl = count_of("recipe-doubling", *k).expect("doubling row present");
        let lin = count_of("recipe-linear", kappa).expect("linear row present");
        let ok = dbl < lin;
        dominates &= ok;
        println!(
            "  kappa={kappa}: doubling uses {dbl} compositions, linear uses {lin} ({})",
            if ok { "doubling dominates" } else { "no advantage" }
        );
    }
    println!(
        "recipe-doubling dominates recipe-linear in compositions for all kappa=2^k>=4: {}",
        if dominates { "yes" } else { "no" }
    );
    println!("wrote {}", path.display());
    Ok(())
}
