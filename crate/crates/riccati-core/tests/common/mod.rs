//! Shared oracles for the integration tests: closed-form scalar Riccati
//! solutions, the rational double-root toy, random problem generators, and a
//! brute-force grid maximizer. Everything here is independent of the solver
//! code paths it checks.

#![allow(dead_code)]

use riccati_core::rng::SplitMix64;
use riccati_core::{LinOp, SymOp};

/// Closed-form solution of dp/dt = 2 a p + s^2 p^2 + c from p(0) = p0.
///
/// Branches on the discriminant a^2 - s^2 c of the stationary equation:
/// distinct real roots give a logistic interpolation between them, a double
/// root gives the rational hyperbola, a negative discriminant gives the
/// rotating tangent form (finite escape when the angle reaches pi/2), and
/// s = 0 degenerates to the affine flow.
pub fn scalar_riccati(a: f64, s: f64, c: f64, p0: f64, t: f64) -> f64 {
    if s == 0.0 {
        // dp/dt = 2 a p + c.
        if a == 0.0 {
            return p0 + c * t;
        }
        let shift = c / (2.0 * a);
        return (p0 + shift) * (2.0 * a * t).exp() - shift;
    }
    let s2 = s * s;
    let disc = a * a - s2 * c;
    if disc.abs() <= 1e-12 * (a * a).max(s2 * c.abs()).max(1e-300) {
        // Double root p* = -a/s^2: (p - p*)' = s^2 (p - p*)^2.
        let pstar = -a / s2;
        let v0 = p0 - pstar;
        return pstar + v0 / (1.0 - s2 * v0 * t);
    }
    if disc > 0.0 {
        let omega = disc.sqrt();
        let p_plus = (-a + omega) / s2;
        let p_minus = (-a - omega) / s2;
        if p0 == p_minus {
            return p_minus;
        }
        let phi = (p0 - p_plus) / (p0 - p_minus) * (2.0 * omega * t).exp();
        return (p_plus - p_minus * phi) / (1.0 - phi);
    }
    // Oscillatory branch: p = (nu tan(nu t + theta0) - a) / s^2.
    let nu = (-disc).sqrt();
    let theta0 = ((s2 * p0 + a) / nu).atan();
    (nu * (nu * t + theta0).tan() - a) / s2
}

/// Escape time of the oscillatory branch (angle reaching pi/2); callers must
/// be on that branch.
pub fn scalar_escape_time(a: f64, s: f64, c: f64, p0: f64) -> f64 {
    let s2 = s * s;
    let nu = (s2 * c - a * a).sqrt();
    let theta0 = ((s2 * p0 + a) / nu).atan();
    (core::f64::consts::FRAC_PI_2 - theta0) / nu
}

/// Seed blocks of the double-root toy (a = -1, s = 1, c = 1) with anchor m:
/// with u0 = 1/(m - 1) and d = u0 - t,
///   p = 1 + 1/d,  q = -m u0 / d,  r = m + m^2 u0 t / d.
pub fn toy_seed(m: f64, t: f64) -> (f64, f64, f64) {
    let u0 = 1.0 / (m - 1.0);
    let d = u0 - t;
    (1.0 + 1.0 / d, -m * u0 / d, m + m * m * u0 * t / d)
}

/// Relative Frobenius distance ||a - b||_F / max(1, ||b||_F).
pub fn rel_frob(a: &LinOp, b: &LinOp) -> f64 {
    a.sub(b).frob_norm() / b.frob_norm().max(1.0)
}

pub fn rand_vec(rng: &mut SplitMix64, n: usize, amp: f64) -> Vec<f64> {
    rng.uniform_vec(n, -amp, amp)
}

/// Random symmetric matrix with entries of size ~amp.
pub fn rand_sym(rng: &mut SplitMix64, n: usize, amp: f64) -> SymOp {
    let raw = LinOp::from_vec(n, n, rng.uniform_vec(n * n, -amp, amp));
    SymOp::enforce(raw.symmetric_part())
}

/// Random symmetric nonpositive matrix: -G G' scaled to unit-ish size.
pub fn rand_nonpositive(rng: &mut SplitMix64, n: usize, amp: f64) -> SymOp {
    let g = LinOp::from_vec(n, n, rng.uniform_vec(n * n, -amp, amp));
    SymOp::enforce(g.matmul(&g.transpose()).neg())
}

/// Random admissible initial state: anchor + eps I + h G G', coercive above
/// the anchor by at least eps.
pub fn rand_admissible(rng: &mut SplitMix64, anchor: &SymOp, eps: f64, h: f64) -> SymOp {
    let n = anchor.dim();
    let g = LinOp::from_vec(n, n, rng.uniform_vec(n * n, -1.0, 1.0));
    let bump = g.matmul(&g.transpose()).scaled(h);
    SymOp::enforce(anchor.op().add(&bump).add(&LinOp::scaled_identity(n, eps)))
}

/// Brute-force maximizer of f over [-l, l]^dim. Dimension 1 scans the full
/// 1e-3 grid; higher dimensions refine coarse-to-fine down to an effective
/// 1e-3 step, which locates the maximum of a concave objective. Returns
/// (value, argmax).
pub fn grid_sup(f: &dyn Fn(&[f64]) -> f64, dim: usize, l: f64) -> (f64, Vec<f64>) {
    assert!(dim >= 1 && dim <= 3, "oracle covers dim 1..=3");
    let mut center = vec![0.0; dim];
    let mut half = l;
    let (steps, levels): (f64, usize) = match dim {
        1 => (1e-3, 1),
        2 => (0.02, 3),
        _ => (0.05, 4),
    };
    let mut step = steps;
    let mut best = (f64::NEG_INFINITY, vec![0.0; dim]);
    for level in 0..levels {
        best = scan_box(f, &center, half, step, dim);
        center = best.1.clone();
        if level + 1 < levels {
            // Next level covers +-2 coarse cells around the winner.
            half = 2.0 * step;
            step = if level + 2 == levels { 1e-3 } else { step / 10.0 };
        }
    }
    best
}

fn scan_box(
    f: &dyn Fn(&[f64]) -> f64,
    center: &[f64],
    half: f64,
    step: f64,
    dim: usize,
) -> (f64, Vec<f64>) {
    let count = (2.0 * half / step).round() as usize + 1;
    let mut idx = vec![0usize; dim];
    let mut x = vec![0.0; dim];
    let mut best_v = f64::NEG_INFINITY;
    let mut best_x = vec![0.0; dim];
    loop {
        for d in 0..dim {
            x[d] = center[d] - half + idx[d] as f64 * step;
        }
        let v = f(&x);
        if v > best_v {
            best_v = v;
            best_x.copy_from_slice(&x);
        }
        // Odometer increment over the dim-dimensional index.
        let mut d = 0;
        loop {
            idx[d] += 1;
            if idx[d] < count {
                break;
            }
            idx[d] = 0;
            d += 1;
            if d == dim {
                return (best_v, best_x);
            }
        }
    }
}
