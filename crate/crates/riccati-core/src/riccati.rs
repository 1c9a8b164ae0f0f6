//! Direct integration of the matrix Riccati flow and its seed system.
//!
//! The flow is dP/dt = A'P + PA + P Sig P + C with Sig = sigma sigma'. The
//! seed system augments it with the auxiliary blocks that feed the kernel
//! construction:
//!
//!   dQ/dt = A'Q + P Sig Q,        Q(0) = -M,
//!   dR/dt = Q' Sig Q,             R(0) =  M,    P(0) = M,
//!
//! where M is the anchor. P and R stay symmetric along the flow; Q does not.
//! Trajectories are recorded at evenly spaced checkpoints together with
//! their time derivatives, so intermediate states can be recovered by cubic
//! Hermite interpolation without re-integrating.
//!
//! Two runtime hazards are monitored: finite-time escape (the quadratic term
//! can blow up in finite time) via a Frobenius norm ceiling checked at every
//! accepted step, and loss of the anchor gap (P(t) - M must stay coercive
//! for the kernel algebra) checked at checkpoints, where an eigensolve is
//! affordable.

use alloc::vec::Vec;
use core::fmt;

use crate::expm::expm;
use crate::linalg::{self, LinalgError, SymOp};
use crate::linop::LinOp;
use crate::ode::{self, OdeError, OdeOptions, OdeOutcome};
use crate::problem::ProblemSpec;

/// Default number of stored checkpoints per seed integration.
pub const DEFAULT_CHECKPOINTS: usize = 128;

/// Frobenius norm ceiling above which the flow counts as escaped.
pub const ESCAPE_CEILING: f64 = 1e6;

/// Margin at or below which the anchor gap P(t) - M counts as lost.
pub const COERCIVITY_EPS: f64 = 1e-10;

/// Accepted asymmetry in recorded P and R blocks; integration arithmetic
/// leaves roundoff-level asymmetry only, so violations indicate a bug.
pub const STORAGE_SYM_TOL: f64 = 1e-9;

/// Default sample count for the semigroup growth scan.
pub const DEFAULT_HORIZON_SAMPLES: usize = 64;

#[derive(Clone, Debug)]
pub struct IntegrateOptions {
    pub rtol: f64,
    pub atol: f64,
    pub checkpoints: usize,
    pub escape_ceiling: f64,
    pub coercivity_eps: f64,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions {
            rtol: 1e-10,
            atol: 1e-12,
            checkpoints: DEFAULT_CHECKPOINTS,
            escape_ceiling: ESCAPE_CEILING,
            coercivity_eps: COERCIVITY_EPS,
        }
    }
}

impl IntegrateOptions {
    fn ode(&self) -> OdeOptions {
        OdeOptions { rtol: self.rtol, atol: self.atol, ..Default::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RiccatiError {
    /// The flow left the norm ceiling before the requested horizon.
    FiniteEscape { t: f64, norm: f64 },
    /// The anchor gap P(t) - M stopped being coercive.
    CoercivityLost { t: f64, margin: f64 },
    BadHorizon { t: f64 },
    Ode(OdeError),
    Linalg(LinalgError),
}

impl fmt::Display for RiccatiError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RiccatiError::FiniteEscape { t, norm } => {
                write!(f, "finite-time escape at t = {t:.6e} (norm {norm:.3e})")
            }
            RiccatiError::CoercivityLost { t, margin } => {
                write!(f, "anchor gap lost coercivity at t = {t:.6e} (margin {margin:.3e})")
            }
            RiccatiError::BadHorizon { t } => {
                write!(f, "horizon must be positive and finite, got {t:.6e}")
            }
            RiccatiError::Ode(e) => write!(f, "{e}"),
            RiccatiError::Linalg(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for RiccatiError {}

impl From<OdeError> for RiccatiError {
    fn from(e: OdeError) -> Self {
        RiccatiError::Ode(e)
    }
}

impl From<LinalgError> for RiccatiError {
    fn from(e: LinalgError) -> Self {
        RiccatiError::Linalg(e)
    }
}

/// Right-hand side of the Riccati flow at a symmetric state.
pub fn riccati_rhs(spec: &ProblemSpec, p: &SymOp) -> SymOp {
    let (dp, _, _) = seed_derivatives(
        spec.a(),
        &spec.a().transpose(),
        spec.sigma_sq().op(),
        spec.c().op(),
        p.op(),
        None,
    );
    SymOp::enforce(dp)
}

/// Shared derivative formulas. `q` is optional: direct integration carries
/// only the P block. Returns (dP, dQ, dR) with zero-size placeholders when
/// q is absent.
fn seed_derivatives(
    a: &LinOp,
    at: &LinOp,
    sig: &LinOp,
    c: &LinOp,
    p: &LinOp,
    q: Option<&LinOp>,
) -> (LinOp, LinOp, LinOp) {
    let ps = p.matmul(sig);
    let dp = at.matmul(p).add(&p.matmul(a)).add(&ps.matmul(p)).add(c);
    match q {
        Some(q) => {
            let dq = at.matmul(q).add(&ps.matmul(q));
            let sq = sig.matmul(q);
            let dr = q.transpose().matmul(&sq);
            (dp, dq, dr)
        }
        None => (dp, LinOp::zeros(0, 0), LinOp::zeros(0, 0)),
    }
}

fn frob_of(block: &[f64]) -> f64 {
    libm::sqrt(block.iter().map(|&v| v * v).sum())
}

fn checkpoint_times(horizon: f64, checkpoints: usize) -> Vec<f64> {
    let cp = checkpoints.max(1);
    let mut times: Vec<f64> = (1..=cp).map(|j| horizon * j as f64 / cp as f64).collect();
    // Guard against rounding on the last node: it must be the horizon itself.
    *times.last_mut().expect("cp >= 1") = horizon;
    times
}

/// Reasons the seed monitor can halt the integrator.
enum Halt {
    Escape { norm: f64 },
    Coercivity { margin: f64 },
}

/// Checkpointed seed trajectory (P, Q, R) with derivatives for Hermite
/// interpolation, anchor-gap margins, and the anchor itself.
#[derive(Clone, Debug)]
pub struct SeedTrajectory {
    times: Vec<f64>,
    p: Vec<SymOp>,
    q: Vec<LinOp>,
    r: Vec<SymOp>,
    dp: Vec<LinOp>,
    dq: Vec<LinOp>,
    dr: Vec<LinOp>,
    /// Coercivity margin of P(t_j) - M; exactly 0.0 at t = 0 by the seed.
    margins: Vec<f64>,
    m: SymOp,
    weight: f64,
}

impl SeedTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Reached horizon (the largest stored time).
    pub fn tau_star(&self) -> f64 {
        *self.times.last().expect("nonempty trajectory")
    }

    pub fn dim(&self) -> usize {
        self.m.dim()
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// The anchor M.
    pub fn anchor(&self) -> &SymOp {
        &self.m
    }

    pub fn p_at(&self, j: usize) -> &SymOp {
        &self.p[j]
    }

    pub fn q_at(&self, j: usize) -> &LinOp {
        &self.q[j]
    }

    pub fn r_at(&self, j: usize) -> &SymOp {
        &self.r[j]
    }

    pub fn margin_at(&self, j: usize) -> f64 {
        self.margins[j]
    }

    pub fn final_p(&self) -> &SymOp {
        self.p.last().expect("nonempty trajectory")
    }

    pub fn final_q(&self) -> &LinOp {
        self.q.last().expect("nonempty trajectory")
    }

    pub fn final_r(&self) -> &SymOp {
        self.r.last().expect("nonempty trajectory")
    }

    /// Smallest anchor-gap margin over the positive-time checkpoints.
    pub fn min_margin(&self) -> f64 {
        self.margins[1..].iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    /// State at an arbitrary time in [0, tau*] by cubic Hermite interpolation
    /// between checkpoints (exact at the checkpoints themselves). Out-of-range
    /// times clamp to the ends.
    pub fn sample(&self, t: f64) -> (SymOp, LinOp, SymOp) {
        let last = self.len() - 1;
        if t <= self.times[0] {
            return (self.p[0].clone(), self.q[0].clone(), self.r[0].clone());
        }
        if t >= self.times[last] {
            return (self.p[last].clone(), self.q[last].clone(), self.r[last].clone());
        }
        let j = self.times.partition_point(|&tj| tj <= t) - 1;
        let dt = self.times[j + 1] - self.times[j];
        let s = (t - self.times[j]) / dt;
        if s == 0.0 {
            return (self.p[j].clone(), self.q[j].clone(), self.r[j].clone());
        }
        let p = hermite(self.p[j].op(), &self.dp[j], self.p[j + 1].op(), &self.dp[j + 1], dt, s);
        let q = hermite(&self.q[j], &self.dq[j], &self.q[j + 1], &self.dq[j + 1], dt, s);
        let r = hermite(self.r[j].op(), &self.dr[j], self.r[j + 1].op(), &self.dr[j + 1], dt, s);
        (SymOp::enforce(p), q, SymOp::enforce(r))
    }
}

/// Cubic Hermite basis on one interval; `s` is the normalized coordinate.
fn hermite(x0: &LinOp, d0: &LinOp, x1: &LinOp, d1: &LinOp, dt: f64, s: f64) -> LinOp {
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    x0.scaled(h00)
        .add_scaled(dt * h10, d0)
        .add(&x1.scaled(h01))
        .add_scaled(dt * h11, d1)
}

/// Integrates the seed system from the anchor to `horizon`, recording at
/// evenly spaced checkpoints. Fails with `FiniteEscape` or `CoercivityLost`
/// if a monitor trips before the horizon.
pub fn integrate_seed(
    spec: &ProblemSpec,
    horizon: f64,
    opts: &IntegrateOptions,
) -> Result<SeedTrajectory, RiccatiError> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(RiccatiError::BadHorizon { t: horizon });
    }
    let n = spec.dim();
    let nn = n * n;
    let m = spec.m().clone();

    let mut y0 = Vec::with_capacity(3 * nn);
    y0.extend_from_slice(m.op().data());
    y0.extend_from_slice(m.op().neg().data());
    y0.extend_from_slice(m.op().data());

    let record = checkpoint_times(horizon, opts.checkpoints);

    let a = spec.a().clone();
    let at = a.transpose();
    let sig = spec.sigma_sq().op().clone();
    let c = spec.c().op().clone();
    let mut rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
        let p = LinOp::from_vec(n, n, y[..nn].to_vec());
        let q = LinOp::from_vec(n, n, y[nn..2 * nn].to_vec());
        let (dp, dq, dr) = seed_derivatives(&a, &at, &sig, &c, &p, Some(&q));
        dy[..nn].copy_from_slice(dp.data());
        dy[nn..2 * nn].copy_from_slice(dq.data());
        dy[2 * nn..].copy_from_slice(dr.data());
    };

    let slack = 1e-12 * horizon;
    let mut next_check = 0usize;
    let ceiling = opts.escape_ceiling;
    let eps = opts.coercivity_eps;
    let m_for_monitor = m.clone();
    let mut monitor = |t: f64, y: &[f64]| -> Option<Halt> {
        let norm = frob_of(&y[..nn]);
        if !norm.is_finite() || norm > ceiling {
            return Some(Halt::Escape { norm });
        }
        while next_check < record.len() && t >= record[next_check] - slack {
            next_check += 1;
            let p = SymOp::enforce(LinOp::from_vec(n, n, y[..nn].to_vec()));
            let gap = p.sub(&m_for_monitor);
            // Eigensolve failures are deferred to the post-pass, which
            // propagates them properly.
            if let Ok(margin) = linalg::coercivity_margin(&gap) {
                if margin <= eps {
                    return Some(Halt::Coercivity { margin });
                }
            }
        }
        None
    };

    let sol = ode::dopri5(&mut rhs, 0.0, &y0, horizon, &record, &opts.ode(), &mut monitor)?;
    match sol.outcome {
        OdeOutcome::Halted { t, reason: Halt::Escape { norm } } => {
            return Err(RiccatiError::FiniteEscape { t, norm });
        }
        OdeOutcome::Halted { t, reason: Halt::Coercivity { margin } } => {
            return Err(RiccatiError::CoercivityLost { t, margin });
        }
        OdeOutcome::Reached => {}
    }

    let mut times = Vec::with_capacity(sol.t_out.len() + 1);
    times.push(0.0);
    times.extend_from_slice(&sol.t_out);

    let mut p = Vec::with_capacity(times.len());
    let mut q = Vec::with_capacity(times.len());
    let mut r = Vec::with_capacity(times.len());
    let mut dp = Vec::with_capacity(times.len());
    let mut dq = Vec::with_capacity(times.len());
    let mut dr = Vec::with_capacity(times.len());
    let mut margins = Vec::with_capacity(times.len());

    let mut push_state = |pj: LinOp, qj: LinOp, rj: LinOp| -> Result<(), RiccatiError> {
        let pj = SymOp::with_tol(pj, STORAGE_SYM_TOL)?;
        let rj = SymOp::with_tol(rj, STORAGE_SYM_TOL)?;
        let (dpj, dqj, drj) = seed_derivatives(&a, &at, &sig, &c, pj.op(), Some(&qj));
        p.push(pj);
        q.push(qj);
        r.push(rj);
        dp.push(dpj);
        dq.push(dqj);
        dr.push(drj);
        Ok(())
    };

    push_state(m.op().clone(), m.op().neg(), m.op().clone())?;
    for y in &sol.y_out {
        push_state(
            LinOp::from_vec(n, n, y[..nn].to_vec()),
            LinOp::from_vec(n, n, y[nn..2 * nn].to_vec()),
            LinOp::from_vec(n, n, y[2 * nn..].to_vec()),
        )?;
    }

    margins.push(0.0);
    for pj in &p[1..] {
        margins.push(linalg::coercivity_margin(&pj.sub(&m))?);
    }

    Ok(SeedTrajectory { times, p, q, r, dp, dq, dr, margins, m, weight: spec.weight() })
}

/// Direct P-only integration from an arbitrary symmetric initial state,
/// recorded exactly at the requested (strictly ascending, positive) times.
/// This is the oracle route against which kernel propagation is checked.
#[derive(Clone, Debug)]
pub struct DirectSolution {
    pub times: Vec<f64>,
    pub p: Vec<SymOp>,
    pub n_accepted: usize,
    pub n_rejected: usize,
}

pub fn integrate_direct(
    spec: &ProblemSpec,
    p0: &SymOp,
    record: &[f64],
    opts: &IntegrateOptions,
) -> Result<DirectSolution, RiccatiError> {
    assert!(!record.is_empty(), "at least one recording time required");
    assert!(
        record.windows(2).all(|w| w[0] < w[1]) && record[0] > 0.0,
        "recording times must be strictly ascending and positive"
    );
    let horizon = *record.last().expect("nonempty record");
    if !horizon.is_finite() {
        return Err(RiccatiError::BadHorizon { t: horizon });
    }
    let n = spec.dim();
    assert_eq!(p0.dim(), n, "initial state dimension mismatch");

    let a = spec.a().clone();
    let at = a.transpose();
    let sig = spec.sigma_sq().op().clone();
    let c = spec.c().op().clone();
    let mut rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
        let p = LinOp::from_vec(n, n, y.to_vec());
        let (dp, _, _) = seed_derivatives(&a, &at, &sig, &c, &p, None);
        dy.copy_from_slice(dp.data());
    };

    let ceiling = opts.escape_ceiling;
    let mut monitor = |_t: f64, y: &[f64]| -> Option<f64> {
        let norm = frob_of(y);
        if !norm.is_finite() || norm > ceiling {
            Some(norm)
        } else {
            None
        }
    };

    let sol =
        ode::dopri5(&mut rhs, 0.0, p0.op().data(), horizon, record, &opts.ode(), &mut monitor)?;
    if let OdeOutcome::Halted { t, reason: norm } = sol.outcome {
        return Err(RiccatiError::FiniteEscape { t, norm });
    }

    let mut p = Vec::with_capacity(sol.y_out.len());
    for y in &sol.y_out {
        p.push(SymOp::with_tol(LinOp::from_vec(n, n, y.clone()), STORAGE_SYM_TOL)?);
    }
    Ok(DirectSolution {
        times: sol.t_out,
        p,
        n_accepted: sol.n_accepted,
        n_rejected: sol.n_rejected,
    })
}

/// Outcome of probing the flow for finite-time escape up to `t_max`.
#[derive(Clone, Debug)]
pub struct EscapeReport {
    pub escaped: bool,
    /// Time of the last accepted step (solution still finite there); a lower
    /// bound for the true escape time when `escaped` is set.
    pub t_escape_lower: Option<f64>,
    pub ceiling: f64,
    pub t_max: f64,
    /// Decimated (t, ||P||_F) samples along the accepted steps.
    pub norm_history: Vec<(f64, f64)>,
}

const HISTORY_CAP: usize = 512;

pub fn escape_report(
    spec: &ProblemSpec,
    p0: &SymOp,
    t_max: f64,
    opts: &IntegrateOptions,
) -> Result<EscapeReport, RiccatiError> {
    if !(t_max.is_finite() && t_max > 0.0) {
        return Err(RiccatiError::BadHorizon { t: t_max });
    }
    let n = spec.dim();
    assert_eq!(p0.dim(), n, "initial state dimension mismatch");

    let a = spec.a().clone();
    let at = a.transpose();
    let sig = spec.sigma_sq().op().clone();
    let c = spec.c().op().clone();
    let mut rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
        let p = LinOp::from_vec(n, n, y.to_vec());
        let (dp, _, _) = seed_derivatives(&a, &at, &sig, &c, &p, None);
        dy.copy_from_slice(dp.data());
    };

    let ceiling = opts.escape_ceiling;
    let mut history: Vec<(f64, f64)> = Vec::new();
    let mut monitor = |t: f64, y: &[f64]| -> Option<f64> {
        let norm = frob_of(y);
        history.push((t, norm));
        if !norm.is_finite() || norm > ceiling {
            Some(norm)
        } else {
            None
        }
    };

    let result = ode::dopri5(&mut rhs, 0.0, p0.op().data(), t_max, &[], &opts.ode(), &mut monitor);
    let (escaped, t_escape_lower) = match result {
        Ok(sol) => match sol.outcome {
            OdeOutcome::Reached => (false, None),
            OdeOutcome::Halted { t, .. } => (true, Some(t)),
        },
        // Step collapse right at the blowup front also certifies escape.
        Err(OdeError::StepUnderflow { t }) => (true, Some(t)),
        Err(e) => return Err(e.into()),
    };

    if history.len() > HISTORY_CAP {
        let stride = history.len().div_ceil(HISTORY_CAP);
        let last = *history.last().expect("nonempty history");
        let mut kept: Vec<(f64, f64)> =
            history.iter().step_by(stride).copied().collect();
        if kept.last() != Some(&last) {
            kept.push(last);
        }
        history = kept;
    }

    Ok(EscapeReport { escaped, t_escape_lower, ceiling, t_max, norm_history: history })
}

/// Residual of the mild (variation-of-constants) form at one time:
/// P(t) - e^{A't} M e^{At} - integral of e^{A'(t-s)} (P Sig P + C)
/// e^{A(t-s)} ds. The integral uses Simpson's rule per checkpoint interval
/// with Hermite-interpolated midpoints, keeping the quadrature error well
/// below the integrator tolerance.
#[derive(Clone, Debug)]
pub struct MildReport {
    pub t: f64,
    pub residual: f64,
    pub p_norm: f64,
    /// residual / max(1, ||P(t)||_F).
    pub relative: f64,
}

/// Running prefix of the mild-form data at the stored checkpoints:
/// prefix[j] is the integral term at t_j, conj[j] = e^{A t_j}. One interval
/// advances by conjugating the previous prefix with the interval shift and
/// adding a local Simpson term, so the sweep costs two matrix exponentials
/// total on a uniformly spaced trajectory.
fn mild_prefix(spec: &ProblemSpec, traj: &SeedTrajectory) -> (Vec<LinOp>, Vec<LinOp>) {
    let times = traj.times();
    let n = traj.dim();
    let sig = spec.sigma_sq().op();
    let c = spec.c().op();
    let f_of = |p: &SymOp| -> LinOp { p.op().matmul(sig).matmul(p.op()).add(c) };

    let mut prefix = Vec::with_capacity(times.len());
    let mut conj = Vec::with_capacity(times.len());
    prefix.push(LinOp::zeros(n, n));
    conj.push(LinOp::identity(n));

    let mut cached_dt = f64::NAN;
    let mut e_full = LinOp::identity(n);
    let mut e_half = LinOp::identity(n);
    let mut f_left = f_of(traj.p_at(0));
    for j in 0..times.len() - 1 {
        let dt = times[j + 1] - times[j];
        if !((dt - cached_dt).abs() <= 1e-12 * dt) {
            e_full = expm(&spec.a().scaled(dt));
            e_half = expm(&spec.a().scaled(0.5 * dt));
            cached_dt = dt;
        }
        let (p_mid, _, _) = traj.sample(0.5 * (times[j] + times[j + 1]));
        let f_right = f_of(traj.p_at(j + 1));
        let local = e_full
            .transpose()
            .matmul(&f_left)
            .matmul(&e_full)
            .add(&e_half.transpose().matmul(&f_of(&p_mid)).matmul(&e_half).scaled(4.0))
            .add(&f_right)
            .scaled(dt / 6.0);
        let carried = e_full.transpose().matmul(prefix.last().expect("nonempty")).matmul(&e_full);
        prefix.push(carried.add(&local));
        conj.push(e_full.matmul(conj.last().expect("nonempty")));
        f_left = f_right;
    }
    (prefix, conj)
}

fn mild_report(p: &SymOp, anchor: &SymOp, integral: &LinOp, conj: &LinOp, t: f64) -> MildReport {
    let homogeneous = conj.transpose().matmul(anchor.op()).matmul(conj);
    let residual = p.op().sub(&homogeneous).sub(integral).frob_norm();
    let p_norm = p.op().frob_norm();
    MildReport { t, residual, p_norm, relative: residual / p_norm.max(1.0) }
}

/// Mild-form residual at every stored checkpoint.
pub fn mild_residuals(
    spec: &ProblemSpec,
    traj: &SeedTrajectory,
) -> Result<Vec<MildReport>, RiccatiError> {
    if traj.len() < 2 {
        return Err(RiccatiError::BadHorizon { t: traj.tau_star() });
    }
    let (prefix, conj) = mild_prefix(spec, traj);
    Ok(traj
        .times()
        .iter()
        .enumerate()
        .map(|(j, &t)| mild_report(traj.p_at(j), traj.anchor(), &prefix[j], &conj[j], t))
        .collect())
}

/// Mild-form residual at an arbitrary t inside the trajectory range; between
/// checkpoints the prefix is extended by one partial Simpson interval.
pub fn mild_residual(
    spec: &ProblemSpec,
    traj: &SeedTrajectory,
    t: f64,
) -> Result<MildReport, RiccatiError> {
    if traj.len() < 2 || !(t >= 0.0 && t <= traj.tau_star() * (1.0 + 1e-12)) {
        return Err(RiccatiError::BadHorizon { t });
    }
    let times = traj.times();
    let (prefix, conj) = mild_prefix(spec, traj);
    let j = times.partition_point(|&tj| tj <= t).min(times.len()) - 1;
    let tail = t - times[j];
    if tail <= 1e-14 * t.max(1.0) {
        return Ok(mild_report(traj.p_at(j), traj.anchor(), &prefix[j], &conj[j], times[j]));
    }

    let sig = spec.sigma_sq().op();
    let c = spec.c().op();
    let f_of = |p: &SymOp| -> LinOp { p.op().matmul(sig).matmul(p.op()).add(c) };
    let e_full = expm(&spec.a().scaled(tail));
    let e_half = expm(&spec.a().scaled(0.5 * tail));
    let (p_mid, _, _) = traj.sample(times[j] + 0.5 * tail);
    let (p_t, _, _) = traj.sample(t);
    let local = e_full
        .transpose()
        .matmul(&f_of(traj.p_at(j)))
        .matmul(&e_full)
        .add(&e_half.transpose().matmul(&f_of(&p_mid)).matmul(&e_half).scaled(4.0))
        .add(&f_of(&p_t))
        .scaled(tail / 6.0);
    let integral = e_full.transpose().matmul(&prefix[j]).matmul(&e_full).add(&local);
    let conj_t = e_full.matmul(&conj[j]);
    Ok(mild_report(&p_t, traj.anchor(), &integral, &conj_t, t))
}

/// A horizon below which the flow provably stays bounded, from norm data
/// alone: with a = ||M||, b = ||Sig||, c = ||C||, and G the largest sampled
/// semigroup gain ||e^{At}||, any solution starting on the anchor ball of
/// radius a stays inside radius r = 2 G^2 a up to
///
///   min( a / (r^2 b + c),  1 / (4 r G^2 b) ),
///
/// a standard contraction-window estimate for the quadratic term. The gain
/// scan samples [0, sample_t] at `samples + 1` points.
#[derive(Clone, Debug)]
pub struct HorizonBound {
    pub bound: f64,
    /// Largest sampled ||e^{At}||.
    pub growth: f64,
    /// Invariant-ball radius used by the estimate.
    pub radius: f64,
    pub anchor_norm: f64,
    pub noise_norm: f64,
    pub cost_norm: f64,
}

pub fn conservative_horizon(
    spec: &ProblemSpec,
    sample_t: f64,
    samples: usize,
) -> Result<HorizonBound, RiccatiError> {
    if !(sample_t.is_finite() && sample_t > 0.0) {
        return Err(RiccatiError::BadHorizon { t: sample_t });
    }
    let samples = samples.max(1);
    let a_norm = linalg::spectral_norm(spec.m().op())?;
    let b_norm = linalg::spectral_norm(spec.sigma_sq().op())?;
    let c_norm = linalg::spectral_norm(spec.c().op())?;

    let mut growth = 0.0_f64;
    for k in 0..=samples {
        let s = sample_t * k as f64 / samples as f64;
        growth = growth.max(linalg::spectral_norm(&expm(&spec.a().scaled(s)))?);
    }

    // Small headroom so the ball radius strictly contains the sampled norms.
    let radius = 2.0 * growth * growth * a_norm * (1.0 + 1e-6);
    let denom1 = radius * radius * b_norm + c_norm;
    let term1 = if denom1 > 0.0 { a_norm / denom1 } else { f64::INFINITY };
    let denom2 = 4.0 * radius * growth * growth * b_norm;
    let term2 = if denom2 > 0.0 { 1.0 / denom2 } else { f64::INFINITY };

    Ok(HorizonBound {
        bound: term1.min(term2),
        growth,
        radius,
        anchor_norm: a_norm,
        noise_norm: b_norm,
        cost_norm: c_norm,
    })
}
