//! Control-theoretic verification of a seed trajectory.
//!
//! The seed triple (P, Q, R) at time t is the value function of a noise
//! maximization problem with terminal payoff psi(x, z) = 1/2<x-z, M(x-z)>
//! and running reward 1/2<xi, C xi> - 1/2||w||^2:
//!
//!   W_t(x, z) = sup_w [ psi(xi(t), z) + int (1/2<xi,C xi> - 1/2||w||^2) ds ],
//!   dxi/ds = A xi + sigma w,  xi(0) = x,
//!
//! all in the weighted inner product. Completion of squares makes the check
//! exact, not merely approximate: for ANY control w,
//!
//!   W - J(w) = 1/2 int ||w - w*||^2 ds,   w*(s) = sigma' (P(t-s) xi + Q(t-s) z),
//!
//! so `simulate_closed_loop` rolls the optimal feedback and must recover W
//! itself, while `suboptimality_probe` integrates perturbed loops and checks
//! that the identity holds per trial to integration accuracy.

use alloc::vec::Vec;

use crate::linop::dot;
use crate::ode::{self, OdeOptions};
use crate::problem::ProblemSpec;
use crate::riccati::{RiccatiError, SeedTrajectory};
use crate::rng::SplitMix64;
use crate::linalg::SymOp;

/// Time nodes stored in a closed-loop record.
const RECORD_NODES: usize = 33;

/// Terminal payoff psi(x, z) = 1/2 <x - z, M (x - z)> in the weighted inner
/// product.
pub fn terminal_payoff(m: &SymOp, x: &[f64], z: &[f64], weight: f64) -> f64 {
    let d: Vec<f64> = x.iter().zip(z).map(|(a, b)| a - b).collect();
    0.5 * weight * m.quad(&d)
}

/// Value quadratic W_t(x, z) = 1/2<x,Px> + <x,Qz> + 1/2<z,Rz> (weighted),
/// with the triple interpolated at t.
pub fn value_quadratic(traj: &SeedTrajectory, t: f64, x: &[f64], z: &[f64]) -> f64 {
    let (p, q, r) = traj.sample(t);
    traj.weight() * (0.5 * p.quad(x) + dot(x, &q.apply(z)) + 0.5 * r.quad(z))
}

/// Optimal feedback w*(s) = sigma' (P(t-s) xi + Q(t-s) z).
fn feedback(spec: &ProblemSpec, traj: &SeedTrajectory, t: f64, s: f64, xi: &[f64], z: &[f64]) -> Vec<f64> {
    let (p_s, q_s, _) = traj.sample(t - s);
    let mut grad = p_s.op().apply(xi);
    for (g, qz) in grad.iter_mut().zip(q_s.apply(z)) {
        *g += qz;
    }
    spec.sigma().apply_transpose(&grad)
}

/// A rolled-out closed loop: states and controls on a uniform time record,
/// plus the accumulated running payoff (terminal payoff excluded).
#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub controls: Vec<Vec<f64>>,
    pub running_payoff: f64,
}

/// Integrates the optimal feedback loop from x (against reference z) over
/// [0, t] and returns the rollout record with the total payoff, which equals
/// W_t(x, z) up to integration error.
pub fn simulate_closed_loop(
    spec: &ProblemSpec,
    traj: &SeedTrajectory,
    t: f64,
    x: &[f64],
    z: &[f64],
) -> Result<(TrajectoryRecord, f64), RiccatiError> {
    let n = spec.dim();
    assert_eq!(x.len(), n, "state dimension mismatch");
    assert_eq!(z.len(), n, "reference dimension mismatch");
    assert!(
        t >= 0.0 && t <= traj.tau_star() * (1.0 + 1e-12),
        "loop time outside the trajectory horizon"
    );
    let weight = traj.weight();

    let record: Vec<f64> =
        (1..RECORD_NODES).map(|i| t * i as f64 / (RECORD_NODES - 1) as f64).collect();
    let mut state = Vec::with_capacity(n + 1);
    state.extend_from_slice(x);
    state.push(0.0);

    let mut times = Vec::with_capacity(RECORD_NODES);
    let mut states = Vec::with_capacity(RECORD_NODES);
    times.push(0.0);
    states.push(x.to_vec());

    if t > 0.0 {
        let mut rhs = |s: f64, y: &[f64], dy: &mut [f64]| {
            let xi = &y[..n];
            let w_star = feedback(spec, traj, t, s, xi, z);
            let drift = spec.a().apply(xi);
            let forced = spec.sigma().apply(&w_star);
            for i in 0..n {
                dy[i] = drift[i] + forced[i];
            }
            dy[n] = 0.5 * weight * (spec.c().quad(xi) - dot(&w_star, &w_star));
        };
        let sol = ode::dopri5(
            &mut rhs,
            0.0,
            &state,
            t,
            &record,
            &OdeOptions::default(),
            &mut |_, _| None::<()>,
        )?;
        for (s, y) in record.iter().zip(&sol.y_out) {
            times.push(*s);
            states.push(y[..n].to_vec());
        }
        state = sol.y_out.last().expect("endpoint recorded").clone();
    }

    let controls: Vec<Vec<f64>> = times
        .iter()
        .zip(&states)
        .map(|(s, xi)| feedback(spec, traj, t, *s, xi, z))
        .collect();
    let running_payoff = state[n];
    let payoff = running_payoff + terminal_payoff(traj.anchor(), &state[..n], z, weight);
    Ok((TrajectoryRecord { times, states, controls, running_payoff }, payoff))
}

#[derive(Clone, Debug)]
pub struct ProbeOptions {
    pub trials: usize,
    /// Piecewise-constant noise segments per trial.
    pub segments: usize,
    /// Noise components are uniform in [-amplitude, amplitude].
    pub amplitude: f64,
    pub seed: u64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions { trials: 8, segments: 16, amplitude: 0.5, seed: 0x5eed_cafe }
    }
}

/// One perturbed closed-loop rollout.
#[derive(Clone, Debug)]
pub struct ProbeTrial {
    pub payoff: f64,
    /// 1/2 int ||w - w*||^2 ds along the rollout.
    pub deficit: f64,
    /// |W - payoff - deficit|; zero in exact arithmetic.
    pub identity_gap: f64,
}

#[derive(Clone, Debug)]
pub struct ProbeOutcome {
    /// W_t(x, z) from the value quadratic.
    pub value: f64,
    pub trials: Vec<ProbeTrial>,
    pub max_identity_gap: f64,
    /// Largest payoff - value over the trials; a positive excess would mean a
    /// perturbed control beats the supremum.
    pub max_excess: f64,
}

/// Rolls `opts.trials` noise-perturbed loops from state x (against reference
/// z) over [0, t]. Each trial applies w = w* + eta with eta piecewise
/// constant, reproducible from the seed, and checks the completion-of-squares
/// identity along the rollout.
pub fn suboptimality_probe(
    spec: &ProblemSpec,
    traj: &SeedTrajectory,
    t: f64,
    x: &[f64],
    z: &[f64],
    opts: &ProbeOptions,
) -> Result<ProbeOutcome, RiccatiError> {
    let n = spec.dim();
    assert_eq!(x.len(), n, "state dimension mismatch");
    assert_eq!(z.len(), n, "reference dimension mismatch");
    assert!(
        t > 0.0 && t <= traj.tau_star() * (1.0 + 1e-12),
        "probe time outside the trajectory horizon"
    );
    let weight = traj.weight();
    let value = value_quadratic(traj, t, x, z);

    let noise_dim = spec.sigma().cols();
    let mut trials = Vec::with_capacity(opts.trials);
    let mut max_identity_gap = 0.0_f64;
    let mut max_excess = f64::NEG_INFINITY;
    for trial in 0..opts.trials {
        let mut rng = SplitMix64::stream(opts.seed, trial as u64);
        let segments = opts.segments.max(1);

        // State: [xi (n), running payoff, running deficit].
        let mut state = Vec::with_capacity(n + 2);
        state.extend_from_slice(x);
        state.push(0.0);
        state.push(0.0);

        for k in 0..segments {
            let s0 = t * k as f64 / segments as f64;
            let s1 = if k + 1 == segments { t } else { t * (k + 1) as f64 / segments as f64 };
            let eta = rng.uniform_vec(noise_dim, -opts.amplitude, opts.amplitude);

            let mut rhs = |s: f64, y: &[f64], dy: &mut [f64]| {
                let xi = &y[..n];
                let w_star = feedback(spec, traj, t, s, xi, z);
                let w: Vec<f64> = w_star.iter().zip(&eta).map(|(ws, e)| ws + e).collect();

                let drift = spec.a().apply(xi);
                let forced = spec.sigma().apply(&w);
                for i in 0..n {
                    dy[i] = drift[i] + forced[i];
                }
                dy[n] = 0.5 * weight * (spec.c().quad(xi) - dot(&w, &w));
                dy[n + 1] = 0.5 * weight * dot(&eta, &eta);
            };
            let sol = ode::dopri5(
                &mut rhs,
                s0,
                &state,
                s1,
                &[s1],
                &OdeOptions::default(),
                &mut |_, _| None::<()>,
            )?;
            state = sol.y_out.last().expect("segment endpoint recorded").clone();
        }

        let payoff = state[n] + terminal_payoff(traj.anchor(), &state[..n], z, weight);
        let deficit = state[n + 1];
        let identity_gap = (value - payoff - deficit).abs();
        max_identity_gap = max_identity_gap.max(identity_gap);
        max_excess = max_excess.max(payoff - value);
        trials.push(ProbeTrial { payoff, deficit, identity_gap });
    }

    Ok(ProbeOutcome { value, trials, max_identity_gap, max_excess })
}
