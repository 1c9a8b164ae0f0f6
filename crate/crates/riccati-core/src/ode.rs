//! Adaptive Dormand-Prince 5(4) integration with PI step-size control.
//!
//! The driver integrates a first-order system on a flat state vector,
//! records the state exactly at caller-requested times (steps are clamped to
//! land on them), and consults a monitor callback after every accepted step
//! so callers can halt on domain conditions (norm ceilings, lost coercivity)
//! without the integrator knowing about them.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[derive(Clone, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub h_max: Option<f64>,
    pub h_init: Option<f64>,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-10, atol: 1e-12, max_steps: 10_000_000, h_max: None, h_init: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum OdeError {
    /// Step size shrank below the resolution of the time variable.
    StepUnderflow { t: f64 },
    /// Accepted-step budget exhausted before reaching the end time.
    MaxSteps { t: f64 },
}

impl fmt::Display for OdeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OdeError::StepUnderflow { t } => write!(f, "step size underflow at t = {t:.6e}"),
            OdeError::MaxSteps { t } => write!(f, "step budget exhausted at t = {t:.6e}"),
        }
    }
}

impl core::error::Error for OdeError {}

/// How an integration ended. `Halted` carries the monitor's reason and the
/// time of the accepted step that triggered it.
#[derive(Clone, Debug, PartialEq)]
pub enum OdeOutcome<R> {
    Reached,
    Halted { t: f64, reason: R },
}

#[derive(Clone, Debug)]
pub struct OdeSolution<R> {
    /// Times at which the state was recorded (a prefix of the request when
    /// the run halted early).
    pub t_out: Vec<f64>,
    pub y_out: Vec<Vec<f64>>,
    pub n_accepted: usize,
    pub n_rejected: usize,
    pub outcome: OdeOutcome<R>,
}

// Dormand-Prince coefficients.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const A7: [f64; 6] =
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0];
/// Difference between the 5th and embedded 4th order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

// PI controller constants (standard Dormand-Prince tuning).
const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
const FAC_MIN: f64 = 0.2; // strongest shrink per step
const FAC_MAX: f64 = 10.0; // strongest growth per step

/// Integrates dy/dt = rhs(t, y) from `t0` to `t_end`.
///
/// `record` must be sorted ascending within (t0, t_end]; the state is stored
/// exactly at those times. `monitor` runs after every accepted step and halts
/// the run by returning `Some(reason)`.
pub fn dopri5<R>(
    rhs: &mut dyn FnMut(f64, &[f64], &mut [f64]),
    t0: f64,
    y0: &[f64],
    t_end: f64,
    record: &[f64],
    opts: &OdeOptions,
    monitor: &mut dyn FnMut(f64, &[f64]) -> Option<R>,
) -> Result<OdeSolution<R>, OdeError> {
    assert!(t_end >= t0, "backward integration not supported");
    let n = y0.len();
    let span = t_end - t0;
    let mut sol = OdeSolution {
        t_out: Vec::with_capacity(record.len()),
        y_out: Vec::with_capacity(record.len()),
        n_accepted: 0,
        n_rejected: 0,
        outcome: OdeOutcome::Reached,
    };
    if span == 0.0 {
        return Ok(sol);
    }

    let h_max = opts.h_max.unwrap_or(span).min(span);
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut k: Vec<Vec<f64>> = (0..7).map(|_| vec![0.0; n]).collect();
    let mut y_stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];

    rhs(t, &y, &mut k[0]);
    let mut h = match opts.h_init {
        Some(h) => h.min(h_max),
        None => initial_step(rhs, t, &y, &k[0], opts, h_max),
    };

    let mut rec_idx = record.iter().position(|&r| r > t0).unwrap_or(record.len());
    let mut facold: f64 = 1e-4;
    let mut last_rejected = false;

    loop {
        if t >= t_end - 1e-14 * span.max(1.0) {
            return Ok(sol);
        }
        if sol.n_accepted >= opts.max_steps {
            return Err(OdeError::MaxSteps { t });
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(OdeError::StepUnderflow { t });
        }

        // Clamp onto the next recording time or the end.
        let mut target: Option<f64> = None;
        let next_stop = if rec_idx < record.len() { record[rec_idx].min(t_end) } else { t_end };
        if t + h >= next_stop - 1e-14 * span.max(1.0) {
            h = next_stop - t;
            target = Some(next_stop);
        }

        // Seven stages (FSAL: k7 reusable as the next k1).
        stage(&mut y_stage, &y, h, &[(&k[0], A2[0])]);
        rhs(t + C[1] * h, &y_stage, &mut k[1]);
        stage(&mut y_stage, &y, h, &[(&k[0], A3[0]), (&k[1], A3[1])]);
        rhs(t + C[2] * h, &y_stage, &mut k[2]);
        stage(&mut y_stage, &y, h, &[(&k[0], A4[0]), (&k[1], A4[1]), (&k[2], A4[2])]);
        rhs(t + C[3] * h, &y_stage, &mut k[3]);
        stage(
            &mut y_stage,
            &y,
            h,
            &[(&k[0], A5[0]), (&k[1], A5[1]), (&k[2], A5[2]), (&k[3], A5[3])],
        );
        rhs(t + C[4] * h, &y_stage, &mut k[4]);
        stage(
            &mut y_stage,
            &y,
            h,
            &[(&k[0], A6[0]), (&k[1], A6[1]), (&k[2], A6[2]), (&k[3], A6[3]), (&k[4], A6[4])],
        );
        rhs(t + C[5] * h, &y_stage, &mut k[5]);
        stage(
            &mut y_new,
            &y,
            h,
            &[
                (&k[0], A7[0]),
                (&k[2], A7[2]),
                (&k[3], A7[3]),
                (&k[4], A7[4]),
                (&k[5], A7[5]),
            ],
        );
        rhs(t + h, &y_new, &mut k[6]);

        // Scaled RMS error of the embedded pair.
        let mut err_acc = 0.0;
        for i in 0..n {
            let e = h
                * (E[0] * k[0][i]
                    + E[2] * k[2][i]
                    + E[3] * k[3][i]
                    + E[4] * k[4][i]
                    + E[5] * k[5][i]
                    + E[6] * k[6][i]);
            let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            let q = e / sc;
            err_acc += q * q;
        }
        let err = libm::sqrt(err_acc / n as f64);

        if !err.is_finite() {
            // Arithmetic blew up inside the step: retry much smaller.
            sol.n_rejected += 1;
            last_rejected = true;
            h *= FAC_MIN;
            continue;
        }

        if err <= 1.0 {
            // Accept.
            sol.n_accepted += 1;
            t = target.unwrap_or(t + h);
            core::mem::swap(&mut y, &mut y_new);
            k.swap(0, 6); // FSAL

            if let Some(tr) = target {
                while rec_idx < record.len()
                    && record[rec_idx] <= tr + 1e-14 * span.max(1.0)
                {
                    sol.t_out.push(record[rec_idx]);
                    sol.y_out.push(y.clone());
                    rec_idx += 1;
                }
            }
            if let Some(reason) = monitor(t, &y) {
                sol.outcome = OdeOutcome::Halted { t, reason };
                return Ok(sol);
            }

            let fac11 = libm::pow(err.max(1e-16), EXPO1);
            let mut fac = fac11 / libm::pow(facold, BETA);
            fac = (fac / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h / fac;
            if last_rejected {
                h_new = h_new.min(h);
            }
            h = h_new.min(h_max);
            facold = err.max(1e-4);
            last_rejected = false;
        } else {
            sol.n_rejected += 1;
            last_rejected = true;
            let fac11 = libm::pow(err, EXPO1);
            h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
        }
    }
}

fn stage(out: &mut [f64], y: &[f64], h: f64, terms: &[(&Vec<f64>, f64)]) {
    out.copy_from_slice(y);
    for &(kj, aj) in terms {
        let w = h * aj;
        for (o, &kv) in out.iter_mut().zip(kj.iter()) {
            *o += w * kv;
        }
    }
}

/// Standard automatic initial step selection (Hairer-style): balance the
/// size of the state against its derivative, refine with one Euler probe.
fn initial_step(
    rhs: &mut dyn FnMut(f64, &[f64], &mut [f64]),
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    opts: &OdeOptions,
    h_max: f64,
) -> f64 {
    let n = y0.len();
    let sc: Vec<f64> = y0.iter().map(|&v| opts.atol + opts.rtol * v.abs()).collect();
    let d0 = rms_scaled(y0, &sc);
    let d1 = rms_scaled(f0, &sc);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(h_max);

    let y1: Vec<f64> = y0.iter().zip(f0).map(|(&y, &f)| y + h0 * f).collect();
    let mut f1 = vec![0.0; n];
    rhs(t0 + h0, &y1, &mut f1);
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(&a, &b)| a - b).collect();
    let d2 = rms_scaled(&diff, &sc) / h0;

    let d_max = d1.max(d2);
    let h1 = if d_max <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        libm::pow(0.01 / d_max, 0.2)
    };
    (100.0 * h0).min(h1).min(h_max)
}

fn rms_scaled(v: &[f64], sc: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&x, &s) in v.iter().zip(sc) {
        let q = x / s;
        acc += q * q;
    }
    libm::sqrt(acc / v.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn never(_: f64, _: &[f64]) -> Option<core::convert::Infallible> {
        None
    }

    #[test]
    fn exponential_decay_matches_closed_form() {
        let mut rhs = |_t: f64, y: &[f64], dy: &mut [f64]| dy[0] = -2.0 * y[0];
        let sol = dopri5(
            &mut rhs,
            0.0,
            &[1.0],
            1.0,
            &[0.5, 1.0],
            &OdeOptions::default(),
            &mut never,
        )
        .unwrap();
        assert_eq!(sol.t_out, vec![0.5, 1.0]);
        assert!((sol.y_out[0][0] - (-1.0_f64).exp()).abs() < 1e-10);
        assert!((sol.y_out[1][0] - (-2.0_f64).exp()).abs() < 1e-10);
        assert!(matches!(sol.outcome, OdeOutcome::Reached));
    }

    #[test]
    fn harmonic_oscillator_energy_preserved_to_tolerance() {
        let mut rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -y[0];
        };
        let sol = dopri5(
            &mut rhs,
            0.0,
            &[1.0, 0.0],
            10.0,
            &[10.0],
            &OdeOptions { rtol: 1e-12, atol: 1e-14, ..Default::default() },
            &mut never,
        )
        .unwrap();
        let y = &sol.y_out[0];
        assert!((y[0] - 10.0_f64.cos()).abs() < 1e-9);
        assert!((y[1] + 10.0_f64.sin()).abs() < 1e-9);
    }

    #[test]
    fn records_exactly_at_requested_times() {
        let mut rhs = |t: f64, _y: &[f64], dy: &mut [f64]| dy[0] = t;
        let record = [0.1, 0.25, 0.700001, 1.0];
        let sol =
            dopri5(&mut rhs, 0.0, &[0.0], 1.0, &record, &OdeOptions::default(), &mut never)
                .unwrap();
        assert_eq!(sol.t_out, record.to_vec());
        for (t, y) in sol.t_out.iter().zip(&sol.y_out) {
            assert!((y[0] - 0.5 * t * t).abs() < 1e-12);
        }
    }

    #[test]
    fn monitor_halts_on_threshold() {
        let mut rhs = |_t: f64, y: &[f64], dy: &mut [f64]| dy[0] = y[0];
        let mut monitor = |_t: f64, y: &[f64]| if y[0] > 2.0 { Some("over") } else { None };
        let sol = dopri5(
            &mut rhs,
            0.0,
            &[1.0],
            5.0,
            &[5.0],
            &OdeOptions::default(),
            &mut monitor,
        )
        .unwrap();
        match sol.outcome {
            OdeOutcome::Halted { t, reason } => {
                assert_eq!(reason, "over");
                // e^t crosses 2 at ln 2.
                assert!(t >= 2.0_f64.ln() - 1e-9);
            }
            OdeOutcome::Reached => panic!("expected halt"),
        }
    }

    #[test]
    fn step_halving_self_consistency() {
        // Solve with default tolerance and with a much tighter one; the two
        // answers agree far better than the loose tolerance.
        let mut rhs1 = |t: f64, y: &[f64], dy: &mut [f64]| dy[0] = y[0] * (t).sin();
        let loose = dopri5(
            &mut rhs1,
            0.0,
            &[1.0],
            3.0,
            &[3.0],
            &OdeOptions { rtol: 1e-8, atol: 1e-10, ..Default::default() },
            &mut never,
        )
        .unwrap();
        let mut rhs2 = |t: f64, y: &[f64], dy: &mut [f64]| dy[0] = y[0] * (t).sin();
        let tight = dopri5(
            &mut rhs2,
            0.0,
            &[1.0],
            3.0,
            &[3.0],
            &OdeOptions { rtol: 1e-13, atol: 1e-15, ..Default::default() },
            &mut never,
        )
        .unwrap();
        // Global error is a small multiple of rtol times the solution scale
        // (y(3) = e^{1 - cos 3} ~ 7.3).
        let diff = (loose.y_out[0][0] - tight.y_out[0][0]).abs();
        let scale = tight.y_out[0][0].abs();
        assert!(diff < 1e-7 * scale, "self-consistency {diff:.3e} at scale {scale:.3e}");
    }

    #[test]
    fn zero_span_returns_empty() {
        let mut rhs = |_t: f64, _y: &[f64], dy: &mut [f64]| dy[0] = 1.0;
        let sol =
            dopri5(&mut rhs, 0.0, &[1.0], 0.0, &[], &OdeOptions::default(), &mut never).unwrap();
        assert!(sol.t_out.is_empty());
        assert_eq!(sol.n_accepted, 0);
    }
}
