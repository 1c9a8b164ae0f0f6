//! Problem assembly from a configuration plus generation and admission of
//! terminal matrices.

use riccati_core::linalg;
use riccati_core::problem::{Grid, ProblemSpec, KERNEL_SYM_TOL};
use riccati_core::riccati::IntegrateOptions;
use riccati_core::rng::SplitMix64;
use riccati_core::{LinOp, SymOp};

use crate::config::{Config, ProblemName};
use crate::formats;
use crate::CliError;

/// A terminal matrix is admissible when its gap above the anchor is coercive
/// by at least this much.
pub const ADMISSIBLE_MARGIN: f64 = 1e-8;

/// Identity-shift sizes cycled through when generating a terminal batch.
pub const MTILDE_EPS: [f64; 3] = [0.05, 0.2, 1.0];

/// Stream offset separating terminal-batch draws from probe-noise draws.
const MTILDE_STREAM: u64 = 0x4d54;

pub fn integrate_opts(cfg: &Config) -> IntegrateOptions {
    IntegrateOptions {
        rtol: cfg.rtol,
        atol: cfg.atol,
        checkpoints: cfg.checkpoints,
        escape_ceiling: cfg.escape_ceiling,
        ..Default::default()
    }
}

pub fn build_spec(cfg: &Config) -> Result<ProblemSpec, CliError> {
    match cfg.problem_name {
        ProblemName::Transport => {
            let grid = Grid::new(cfg.grid_n, cfg.grid_length)?;
            Ok(ProblemSpec::transport(&grid, cfg.anchor_m)?)
        }
        ProblemName::Custom => {
            let a = formats::read_matrix(cfg.custom_a.as_ref().expect("validated"))?;
            let sigma = formats::read_matrix(cfg.custom_sigma.as_ref().expect("validated"))?;
            let c = formats::read_matrix(cfg.custom_c.as_ref().expect("validated"))?;
            let m = formats::read_matrix(cfg.custom_m.as_ref().expect("validated"))?;
            let c = SymOp::with_tol(c, KERNEL_SYM_TOL)
                .map_err(|e| CliError::Config(format!("custom.c: {e}")))?;
            let m = SymOp::with_tol(m, KERNEL_SYM_TOL)
                .map_err(|e| CliError::Config(format!("custom.m: {e}")))?;
            let neg_margin = linalg::coercivity_margin(&SymOp::enforce(m.op().neg()))?;
            if neg_margin <= 0.0 {
                return Err(CliError::Config(format!(
                    "custom.m must be negative definite (margin of -M is {neg_margin:.3e})"
                )));
            }
            Ok(ProblemSpec::new(a, sigma, c, m, cfg.custom_weight, "custom")?)
        }
    }
}

fn admission_margin(mtilde: &SymOp, anchor: &SymOp) -> Result<f64, CliError> {
    Ok(linalg::coercivity_margin(&mtilde.sub(anchor))?)
}

/// The batch of terminal matrices: either the single configured file or
/// `mtilde.count` generated ones, anchor + eps I + weight G G' with G drawn
/// from the seed. Every member is checked for admissibility.
pub fn mtilde_family(spec: &ProblemSpec, cfg: &Config, seed: u64) -> Result<Vec<SymOp>, CliError> {
    let n = spec.dim();
    if let Some(path) = &cfg.mtilde_file {
        let raw = formats::read_matrix(path)?;
        let mtilde = SymOp::with_tol(raw, KERNEL_SYM_TOL)
            .map_err(|e| CliError::Config(format!("mtilde.file: {e}")))?;
        if mtilde.dim() != n {
            return Err(CliError::Config(format!(
                "mtilde.file: dimension {} does not match the problem ({n})",
                mtilde.dim()
            )));
        }
        let margin = admission_margin(&mtilde, spec.m())?;
        if margin <= ADMISSIBLE_MARGIN {
            return Err(CliError::Unbounded(format!(
                "terminal matrix not admissible: margin above the anchor is {margin:.3e} (needs > {ADMISSIBLE_MARGIN:.0e})"
            )));
        }
        return Ok(vec![mtilde]);
    }

    let mut family = Vec::with_capacity(cfg.mtilde_count);
    for i in 0..cfg.mtilde_count {
        let eps = MTILDE_EPS[i % MTILDE_EPS.len()];
        let mut rng = SplitMix64::stream(seed, MTILDE_STREAM + i as u64);
        let g = LinOp::from_vec(n, n, rng.uniform_vec(n * n, -1.0, 1.0));
        let bump = g.matmul(&g.transpose()).scaled(spec.weight());
        let mtilde = SymOp::enforce(
            spec.m().op().add(&bump).add(&LinOp::scaled_identity(n, eps)),
        );
        debug_assert!(admission_margin(&mtilde, spec.m())? > ADMISSIBLE_MARGIN);
        family.push(mtilde);
    }
    Ok(family)
}
