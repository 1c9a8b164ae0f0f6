//! `solve`: integrate the configured problem and dump the trajectory and
//! final matrix. Seed mode runs the anchored (P, Q, R) system from P(0) = M;
//! direct mode runs the plain flow from the terminal matrix.

use std::path::Path;

use riccati_core::linalg;
use riccati_core::problem::ProblemSpec;
use riccati_core::riccati::{
    escape_report, integrate_direct, integrate_seed, IntegrateOptions, RiccatiError,
};
use riccati_core::SymOp;

use crate::config::{Config, SolveMode};
use crate::formats::{self, TrajRow};
use crate::setup;
use crate::CliError;

/// On finite escape, put the full report on stderr before the exit code.
fn report_escape(spec: &ProblemSpec, p0: &SymOp, t: f64, opts: &IntegrateOptions) {
    match escape_report(spec, p0, t, opts) {
        Ok(rep) => {
            eprintln!(
                "escape report: escaped={} t_escape_lower={} ceiling={:.3e} t_max={}",
                rep.escaped,
                rep.t_escape_lower.map_or_else(|| "-".to_owned(), |t| format!("{t:.6}")),
                rep.ceiling,
                rep.t_max
            );
            for (t, norm) in rep.norm_history.iter().rev().take(5).rev() {
                eprintln!("  |P({t:.9})|_F = {norm:.6e}");
            }
        }
        Err(e) => eprintln!("escape report unavailable: {e}"),
    }
}

pub fn run(cfg: &Config, out: &Path, t_override: Option<f64>, seed: u64) -> Result<(), CliError> {
    let spec = setup::build_spec(cfg)?;
    let opts = setup::integrate_opts(cfg);
    let t = t_override.unwrap_or(cfg.solve_t);
    if !(t.is_finite() && t >= 0.0) {
        return Err(CliError::Config(format!("solve: horizon must be nonnegative, got {t}")));
    }

    let matrix_path = out.join("p_final.csv");
    let traj_path = out.join("trajectory.csv");

    match cfg.solve_mode {
        SolveMode::Seed => {
            if t == 0.0 {
                formats::write_matrix(&matrix_path, spec.m().op())?;
                println!("t = 0: wrote the anchor matrix to {}", matrix_path.display());
                return Ok(());
            }
            let traj = integrate_seed(&spec, t, &opts).map_err(|e| {
                if matches!(e, RiccatiError::FiniteEscape { .. }) {
                    report_escape(&spec, spec.m(), t, &opts);
                }
                CliError::from(e)
            })?;
            let rows: Vec<TrajRow> = (0..traj.len())
                .map(|j| TrajRow {
                    t: traj.times()[j],
                    frob_p: traj.p_at(j).op().frob_norm(),
                    frob_q: traj.q_at(j).frob_norm(),
                    frob_r: traj.r_at(j).op().frob_norm(),
                    margin: traj.margin_at(j),
                })
                .collect();
            formats::write_trajectory(&traj_path, &rows)?;
            formats::write_matrix(&matrix_path, traj.final_p().op())?;
            println!(
                "seed run: problem={} dim={} tau*={:.6} min_margin={:.6e}",
                spec.label(),
                spec.dim(),
                traj.tau_star(),
                traj.min_margin()
            );
            println!("wrote {} and {}", traj_path.display(), matrix_path.display());
            Ok(())
        }
        SolveMode::Direct => {
            let mtilde = setup::mtilde_family(&spec, cfg, seed)?.swap_remove(0);
            if t == 0.0 {
                formats::write_matrix(&matrix_path, mtilde.op())?;
                println!("t = 0: wrote the terminal matrix to {}", matrix_path.display());
                return Ok(());
            }
            let record: Vec<f64> =
                (1..=opts.checkpoints).map(|j| t * j as f64 / opts.checkpoints as f64).collect();
            let sol = integrate_direct(&spec, &mtilde, &record, &opts).map_err(|e| {
                if matches!(e, RiccatiError::FiniteEscape { .. }) {
                    report_escape(&spec, &mtilde, t, &opts);
                }
                CliError::from(e)
            })?;
            // Q and R are not propagated by the direct flow; their columns
            // stay zero in this mode.
            let mut rows = Vec::with_capacity(sol.p.len() + 1);
            rows.push(TrajRow {
                t: 0.0,
                frob_p: mtilde.op().frob_norm(),
                frob_q: 0.0,
                frob_r: 0.0,
                margin: linalg::coercivity_margin(&mtilde.sub(spec.m()))?,
            });
            for (tj, p) in sol.times.iter().zip(&sol.p) {
                rows.push(TrajRow {
                    t: *tj,
                    frob_p: p.op().frob_norm(),
                    frob_q: 0.0,
                    frob_r: 0.0,
                    margin: linalg::coercivity_margin(&p.sub(spec.m()))?,
                });
            }
            formats::write_trajectory(&traj_path, &rows)?;
            formats::write_matrix(&matrix_path, sol.p.last().expect("nonempty record").op())?;
            println!(
                "direct run: problem={} dim={} t={} accepted_steps={} rejected_steps={}",
                spec.label(),
                spec.dim(),
                t,
                sol.n_accepted,
                sol.n_rejected
            );
            println!("wrote {} and {}", traj_path.display(), matrix_path.display());
            Ok(())
        }
    }
}
