//! Fundamental max-plus kernels, their composition semigroup, and the dual
//! transforms connecting kernels back to Riccati solutions.
//!
//! A seed trajectory (P, Q, R) anchored at M induces a bivariate quadratic
//! kernel B_t(y, z) = 1/2<y,B11 y> + <z,B12 y> + 1/2<z,B22 z> with
//!
//!   B11 = -M - M G M,   B12 = -Q' G M,   B22 = R - Q' G Q,   G = (P - M)^{-1}.
//!
//! Kernels compose by a max-plus (supremum) contraction over the shared
//! argument, which reduces to Schur-complement algebra, and the composition
//! carries horizon t + s: propagating a short kernel repeatedly reaches long
//! horizons without re-integrating. Value matrices travel through the kernel
//! in dual form z -> -1/2<z,N z>; `dualize`/`undualize` convert between a
//! Riccati state and its dual, and `maxplus_apply` pushes a dual through a
//! kernel. The full pipeline
//!
//!   undualize(maxplus_apply(B_t, dualize(Mt, M)), M)
//!
//! evaluates the Riccati solution at t with initial state Mt, for every
//! admissible Mt from one kernel.

use core::fmt;

use crate::linalg::{
    self, LinalgError, SymOp, PINV_REL_TOL, RANGE_REL_TOL,
};
use crate::linop::{dot, LinOp};
use crate::riccati::{SeedTrajectory, COERCIVITY_EPS};

/// Pivot blocks must be nonpositive up to lambda_max <= tol * max(1, ||S||_F).
pub const NONPOS_REL_TOL: f64 = 1e-8;

/// Two computations of the dual that must agree, relative to max(1, ||N||_F).
pub const DUAL_ROUTE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum SemigroupError {
    /// P - M (or value - anchor) is not coercive, so the kernel or dual does
    /// not exist at this state.
    AnchorGapNotCoercive { margin: f64 },
    /// A supremum pivot block has positive curvature.
    NotNonpositive { lambda: f64, context: &'static str },
    /// The linear data does not lie in the range of a singular pivot block.
    RangeDefect { residual: f64, tol: f64, context: &'static str },
    /// The two algebraic routes to the dual disagreed beyond tolerance.
    DualRouteMismatch { diff: f64 },
    /// Requested kernel time outside the validated range (0, tau*].
    HorizonOutOfRange { t: f64, tau_star: f64 },
    DimensionMismatch { what: &'static str },
    Linalg(LinalgError),
}

impl fmt::Display for SemigroupError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SemigroupError::AnchorGapNotCoercive { margin } => {
                write!(f, "anchor gap not coercive (margin {margin:.3e})")
            }
            SemigroupError::NotNonpositive { lambda, context } => {
                write!(f, "{context}: pivot block not nonpositive (lambda_max {lambda:.3e})")
            }
            SemigroupError::RangeDefect { residual, tol, context } => {
                write!(f, "{context}: range defect {residual:.3e} exceeds {tol:.3e}")
            }
            SemigroupError::DualRouteMismatch { diff } => {
                write!(f, "dual computed two ways disagrees by {diff:.3e}")
            }
            SemigroupError::HorizonOutOfRange { t, tau_star } => {
                write!(f, "kernel time {t:.6} outside validated range (0, {tau_star:.6}]")
            }
            SemigroupError::DimensionMismatch { what } => write!(f, "dimension mismatch: {what}"),
            SemigroupError::Linalg(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for SemigroupError {}

impl From<LinalgError> for SemigroupError {
    fn from(e: LinalgError) -> Self {
        SemigroupError::Linalg(e)
    }
}

/// Nonpositivity gate shared by every supremum pivot.
fn require_nonpositive(s: &SymOp, context: &'static str) -> Result<(), SemigroupError> {
    let lambda = linalg::lambda_max(s)?;
    if lambda > NONPOS_REL_TOL * s.op().frob_norm().max(1.0) {
        return Err(SemigroupError::NotNonpositive { lambda, context });
    }
    Ok(())
}

/// Range gate: the columns of `data` must lie in range(s), checked through
/// the pseudo-inverse projector.
fn require_in_range(
    s: &SymOp,
    s_pinv: &SymOp,
    data: &LinOp,
    context: &'static str,
) -> Result<(), SemigroupError> {
    let projected = s.op().matmul(s_pinv.op()).matmul(data);
    let residual = projected.sub(data).frob_norm();
    let tol = RANGE_REL_TOL * data.frob_norm().max(1.0);
    if residual > tol {
        return Err(SemigroupError::RangeDefect { residual, tol, context });
    }
    Ok(())
}

/// Bivariate quadratic kernel with its horizon and the quadrature weight of
/// the underlying space.
#[derive(Clone, Debug)]
pub struct Kernel {
    b11: SymOp,
    b12: LinOp,
    b22: SymOp,
    horizon: f64,
    weight: f64,
}

impl Kernel {
    /// Builds the kernel of a seed trajectory at its reached horizon.
    pub fn from_seed(traj: &SeedTrajectory) -> Result<Kernel, SemigroupError> {
        seed_kernel(traj, traj.tau_star())
    }

    /// Kernel algebra from explicit seed blocks. Fails unless P - M is
    /// coercive.
    pub fn from_parts(
        p: &SymOp,
        q: &LinOp,
        r: &SymOp,
        m: &SymOp,
        horizon: f64,
        weight: f64,
    ) -> Result<Kernel, SemigroupError> {
        let n = m.dim();
        if p.dim() != n || r.dim() != n || q.rows() != n || q.cols() != n {
            return Err(SemigroupError::DimensionMismatch { what: "seed blocks must be n x n" });
        }
        let gap = p.sub(m);
        let g = linalg::coercive_inverse(&gap, COERCIVITY_EPS).map_err(|e| match e {
            LinalgError::NotCoercive { margin } => SemigroupError::AnchorGapNotCoercive { margin },
            other => SemigroupError::Linalg(other),
        })?;

        let mgm = m.op().matmul(g.op()).matmul(m.op());
        let b11 = SymOp::enforce(m.op().neg().sub(&mgm));
        let qt_g = q.transpose().matmul(g.op());
        let b12 = qt_g.matmul(m.op()).neg();
        let b22 = SymOp::enforce(r.op().sub(&qt_g.matmul(q)));
        Ok(Kernel { b11, b12, b22, horizon, weight })
    }

    /// Rebuilds a kernel from stored blocks, e.g. a deserialized bundle.
    /// Checks shapes and finiteness only; algebraic validity is the
    /// producer's contract.
    pub fn from_blocks(
        b11: SymOp,
        b12: LinOp,
        b22: SymOp,
        horizon: f64,
        weight: f64,
    ) -> Result<Kernel, SemigroupError> {
        let n = b11.dim();
        if b22.dim() != n || b12.rows() != n || b12.cols() != n {
            return Err(SemigroupError::DimensionMismatch { what: "kernel blocks" });
        }
        if !(horizon.is_finite() && horizon > 0.0 && weight.is_finite() && weight > 0.0) {
            return Err(SemigroupError::HorizonOutOfRange { t: horizon, tau_star: f64::INFINITY });
        }
        if !(b11.op().all_finite() && b12.all_finite() && b22.op().all_finite()) {
            return Err(SemigroupError::DimensionMismatch { what: "non-finite kernel block" });
        }
        Ok(Kernel { b11, b12, b22, horizon, weight })
    }

    pub fn b11(&self) -> &SymOp {
        &self.b11
    }

    pub fn b12(&self) -> &LinOp {
        &self.b12
    }

    pub fn b22(&self) -> &SymOp {
        &self.b22
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn dim(&self) -> usize {
        self.b11.dim()
    }

    /// Kernel value B(y, z) in the weighted inner product.
    pub fn eval(&self, y: &[f64], z: &[f64]) -> f64 {
        let quad = 0.5 * self.b11.quad(y) + dot(z, &self.b12.apply(y)) + 0.5 * self.b22.quad(z);
        self.weight * quad
    }
}

/// Kernel of the seed at an intermediate time delta in (0, tau*]. Off
/// checkpoints the seed blocks are Hermite-interpolated; at delta = 0 the gap
/// P - M vanishes and the coercivity gate fires.
pub fn seed_kernel(traj: &SeedTrajectory, delta: f64) -> Result<Kernel, SemigroupError> {
    // delta = 0 passes through so the coercivity gate reports the vanishing
    // gap P(0) - M = 0 rather than a range error.
    if !(delta >= 0.0 && delta <= traj.tau_star()) {
        return Err(SemigroupError::HorizonOutOfRange { t: delta, tau_star: traj.tau_star() });
    }
    let (p, q, r) = traj.sample(delta);
    Kernel::from_parts(&p, &q, &r, traj.anchor(), delta, traj.weight())
}

/// Max-plus composition: contracts the outer kernel's second argument with
/// the inner kernel's first over a supremum, adding horizons. The pivot is
/// S = B22_outer + B11_inner, and the result is Schur-complement algebra in
/// its pseudo-inverse.
pub fn compose(outer: &Kernel, inner: &Kernel) -> Result<Kernel, SemigroupError> {
    if outer.dim() != inner.dim() {
        return Err(SemigroupError::DimensionMismatch { what: "kernel dims differ" });
    }
    if outer.weight != inner.weight {
        return Err(SemigroupError::DimensionMismatch { what: "kernel weights differ" });
    }
    let pivot = outer.b22.add(&inner.b11);
    require_nonpositive(&pivot, "composition pivot")?;
    let s = linalg::pseudo_inverse(&pivot, PINV_REL_TOL)?;
    require_in_range(&pivot, &s, &outer.b12, "composition pivot")?;
    require_in_range(&pivot, &s, &inner.b12.transpose(), "composition pivot")?;

    let b11 = SymOp::enforce(
        outer.b11.op().sub(&outer.b12.transpose().matmul(s.op()).matmul(&outer.b12)),
    );
    let b12 = inner.b12.matmul(s.op()).matmul(&outer.b12).neg();
    let b22 = SymOp::enforce(
        inner.b22.op().sub(&inner.b12.matmul(s.op()).matmul(&inner.b12.transpose())),
    );
    Ok(Kernel {
        b11,
        b12,
        b22,
        horizon: outer.horizon + inner.horizon,
        weight: outer.weight,
    })
}

/// An iterated kernel together with the number of compositions spent on it,
/// the currency of the benchmark.
#[derive(Clone, Debug)]
pub struct Iterated {
    pub kernel: Kernel,
    pub compositions: usize,
}

/// Reaches horizon steps * delta.horizon by left-composing the step kernel,
/// spending steps - 1 compositions.
pub fn iterate_linear(delta: &Kernel, steps: usize) -> Result<Iterated, SemigroupError> {
    assert!(steps >= 1, "at least one step");
    let mut acc = delta.clone();
    let mut compositions = 0;
    for _ in 1..steps {
        acc = compose(delta, &acc)?;
        compositions += 1;
    }
    Ok(Iterated { kernel: acc, compositions })
}

/// Reaches horizon 2^doublings * delta.horizon by repeated self-composition,
/// spending one composition per doubling.
pub fn iterate_doubling(delta: &Kernel, doublings: usize) -> Result<Iterated, SemigroupError> {
    let mut acc = delta.clone();
    let mut compositions = 0;
    for _ in 0..doublings {
        acc = compose(&acc, &acc)?;
        compositions += 1;
    }
    Ok(Iterated { kernel: acc, compositions })
}

/// Dual representation of a value state: the functional z -> -1/2<z,N z>.
#[derive(Clone, Debug)]
pub struct DualQuad {
    n: SymOp,
}

impl DualQuad {
    pub fn new(n: SymOp) -> DualQuad {
        DualQuad { n }
    }

    pub fn n(&self) -> &SymOp {
        &self.n
    }

    pub fn into_n(self) -> SymOp {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.n.dim()
    }

    /// Functional value at z in the weighted inner product.
    pub fn eval(&self, z: &[f64], weight: f64) -> f64 {
        -0.5 * weight * self.n.quad(z)
    }
}

/// Dual of a value state against the anchor: N = M + M (V - M)^{-1} M,
/// defined whenever V - M is coercive. The algebraically equivalent route
/// N = M (V - M)^{-1} V is evaluated as a cross-check; disagreement beyond
/// [`DUAL_ROUTE_TOL`] indicates a conditioning problem and is rejected.
pub fn dualize(value: &SymOp, anchor: &SymOp) -> Result<DualQuad, SemigroupError> {
    if value.dim() != anchor.dim() {
        return Err(SemigroupError::DimensionMismatch { what: "value vs anchor" });
    }
    let gap = value.sub(anchor);
    let g = linalg::coercive_inverse(&gap, COERCIVITY_EPS).map_err(|e| match e {
        LinalgError::NotCoercive { margin } => SemigroupError::AnchorGapNotCoercive { margin },
        other => SemigroupError::Linalg(other),
    })?;
    let mg = anchor.op().matmul(g.op());
    let n = SymOp::enforce(anchor.op().add(&mg.matmul(anchor.op())));
    let n_check = mg.matmul(value.op());
    let diff = n_check.sub(n.op()).frob_norm();
    if diff > DUAL_ROUTE_TOL * n.op().frob_norm().max(1.0) {
        return Err(SemigroupError::DualRouteMismatch { diff });
    }
    Ok(DualQuad { n })
}

/// Pushes a dual through a kernel: the supremum over the kernel's second
/// argument of B(y, .) against the dual functional, reduced to the Schur
/// complement T = B11 - B12' (B22 - N)^+ B12 and returned as the dual -T.
pub fn maxplus_apply(kernel: &Kernel, dual: &DualQuad) -> Result<DualQuad, SemigroupError> {
    if kernel.dim() != dual.dim() {
        return Err(SemigroupError::DimensionMismatch { what: "kernel vs dual" });
    }
    let pivot = kernel.b22.sub(&dual.n);
    require_nonpositive(&pivot, "propagation pivot")?;
    let s = linalg::pseudo_inverse(&pivot, PINV_REL_TOL)?;
    require_in_range(&pivot, &s, &kernel.b12, "propagation pivot")?;
    let t = SymOp::enforce(
        kernel.b11.op().sub(&kernel.b12.transpose().matmul(s.op()).matmul(&kernel.b12)),
    );
    Ok(DualQuad { n: t.scaled(-1.0) })
}

/// Inverts the dual transform: V = M - M (M - N)^+ M, requiring M - N
/// nonpositive with M in its range.
pub fn undualize(dual: &DualQuad, anchor: &SymOp) -> Result<SymOp, SemigroupError> {
    if dual.dim() != anchor.dim() {
        return Err(SemigroupError::DimensionMismatch { what: "dual vs anchor" });
    }
    let pivot = anchor.sub(&dual.n);
    require_nonpositive(&pivot, "undualize pivot")?;
    let s = linalg::pseudo_inverse(&pivot, PINV_REL_TOL)?;
    require_in_range(&pivot, &s, anchor.op(), "undualize pivot")?;
    let msm = anchor.op().matmul(s.op()).matmul(anchor.op());
    Ok(SymOp::enforce(anchor.op().sub(&msm)))
}

/// Full pipeline: the Riccati solution at the kernel's horizon with initial
/// state `terminal`, computed entirely in the dual space.
pub fn reconstruct(
    kernel: &Kernel,
    terminal: &SymOp,
    anchor: &SymOp,
) -> Result<SymOp, SemigroupError> {
    let dual = dualize(terminal, anchor)?;
    let propagated = maxplus_apply(kernel, &dual)?;
    undualize(&propagated, anchor)
}

/// Quadratic semiconvexity witness: K = -alpha P - (1-alpha) M splits the
/// anchor gap, so P + K = (1-alpha)(P - M) and -K - M = alpha (P - M) are
/// simultaneously coercive exactly when the gap is. A passing certificate
/// places the value between the anchor class and the flow, the condition
/// under which the dual transforms above are defined.
#[derive(Clone, Debug)]
pub struct Certificate {
    pub k: SymOp,
    pub alpha: f64,
    /// Coercivity margin of P + K.
    pub margin_value: f64,
    /// Coercivity margin of -K - M.
    pub margin_anchor: f64,
    pub ok: bool,
}

pub fn semiconvexity_certificate(
    p: &SymOp,
    anchor: &SymOp,
    alpha: f64,
) -> Result<Certificate, LinalgError> {
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must lie strictly inside (0, 1)");
    let k = SymOp::enforce(p.op().scaled(-alpha).add_scaled(-(1.0 - alpha), anchor.op()));
    let margin_value = linalg::coercivity_margin(&p.add(&k))?;
    let margin_anchor =
        linalg::coercivity_margin(&SymOp::enforce(k.op().neg().sub(anchor.op())))?;
    Ok(Certificate {
        k,
        alpha,
        margin_value,
        margin_anchor,
        ok: margin_value > 0.0 && margin_anchor > 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::ProblemSpec;
    use crate::riccati::{integrate_direct, IntegrateOptions};

    // Double-root toy (a = -1, s = 1, c = 1, m = -1/10). The seed blocks at
    // time t are rational: with u0 = 1/(m-1) = -10/11 and d = u0 - t,
    // p = 1 + 1/d, q = -m u0 / d, r = m + m^2 u0 t / d.
    const M: f64 = -0.1;

    fn toy_blocks(t: f64) -> (SymOp, LinOp, SymOp) {
        let u0 = 1.0 / (M - 1.0);
        let d = u0 - t;
        (
            SymOp::scalar(1.0 + 1.0 / d),
            LinOp::scalar(-M * u0 / d),
            SymOp::scalar(M + M * M * u0 * t / d),
        )
    }

    fn toy_kernel(t: f64) -> Kernel {
        let (p, q, r) = toy_blocks(t);
        Kernel::from_parts(&p, &q, &r, &SymOp::scalar(M), t, 1.0).unwrap()
    }

    /// Direct flow from an arbitrary initial scalar v: 1 + 1/(1/(v-1) - t).
    fn toy_direct(v: f64, t: f64) -> f64 {
        1.0 + 1.0 / (1.0 / (v - 1.0) - t)
    }

    #[test]
    fn toy_kernel_has_rational_blocks() {
        // At t = 1/2 the blocks are exactly 9/121, 2/121, -13/121.
        let k = toy_kernel(0.5);
        assert!((k.b11().get(0, 0) - 9.0 / 121.0).abs() < 1e-13);
        assert!((k.b12().get(0, 0) - 2.0 / 121.0).abs() < 1e-13);
        assert!((k.b22().get(0, 0) + 13.0 / 121.0).abs() < 1e-13);
        assert_eq!(k.horizon(), 0.5);
    }

    #[test]
    fn composition_matches_direct_kernel() {
        let quarter = toy_kernel(0.25);
        // Hand Schur algebra: pivot = -15/121 + 7/121 = -8/121, and the
        // composed blocks collapse to the half-horizon kernel exactly.
        let half = compose(&quarter, &quarter).unwrap();
        let expected = toy_kernel(0.5);
        assert!((half.b11().get(0, 0) - expected.b11().get(0, 0)).abs() < 1e-13);
        assert!((half.b12().get(0, 0) - expected.b12().get(0, 0)).abs() < 1e-13);
        assert!((half.b22().get(0, 0) - expected.b22().get(0, 0)).abs() < 1e-13);
        assert_eq!(half.horizon(), 0.5);
    }

    #[test]
    fn composition_commutes_across_unequal_horizons() {
        let a = toy_kernel(0.2);
        let b = toy_kernel(0.3);
        let ab = compose(&a, &b).unwrap();
        let ba = compose(&b, &a).unwrap();
        let direct = toy_kernel(0.5);
        for (lhs, rhs) in [(&ab, &ba), (&ab, &direct)] {
            assert!((lhs.b11().get(0, 0) - rhs.b11().get(0, 0)).abs() < 1e-12);
            assert!((lhs.b12().get(0, 0) - rhs.b12().get(0, 0)).abs() < 1e-12);
            assert!((lhs.b22().get(0, 0) - rhs.b22().get(0, 0)).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_and_doubling_iteration_agree_with_direct_kernel() {
        let delta = toy_kernel(0.125);
        let lin = iterate_linear(&delta, 4).unwrap();
        let dbl = iterate_doubling(&delta, 2).unwrap();
        assert_eq!(lin.compositions, 3);
        assert_eq!(dbl.compositions, 2);
        let expected = toy_kernel(0.5);
        for k in [&lin.kernel, &dbl.kernel] {
            assert!((k.horizon() - 0.5).abs() < 1e-15);
            assert!((k.b11().get(0, 0) - expected.b11().get(0, 0)).abs() < 1e-12);
            assert!((k.b12().get(0, 0) - expected.b12().get(0, 0)).abs() < 1e-12);
            assert!((k.b22().get(0, 0) - expected.b22().get(0, 0)).abs() < 1e-12);
        }
    }

    #[test]
    fn iteration_composition_counts() {
        let delta = toy_kernel(0.05);
        // One step / zero doublings leave the kernel untouched at no cost.
        let lin = iterate_linear(&delta, 1).unwrap();
        assert_eq!(lin.compositions, 0);
        assert_eq!(lin.kernel.horizon(), 0.05);
        let dbl = iterate_doubling(&delta, 0).unwrap();
        assert_eq!(dbl.compositions, 0);
        // kappa steps cost kappa - 1, k doublings cost k.
        assert_eq!(iterate_linear(&delta, 8).unwrap().compositions, 7);
        assert_eq!(iterate_doubling(&delta, 3).unwrap().compositions, 3);
    }

    #[test]
    fn seed_kernel_samples_the_trajectory() {
        let spec = ProblemSpec::scalar(-1.0, 1.0, 1.0, M);
        let traj =
            crate::riccati::integrate_seed(&spec, 0.5, &IntegrateOptions::default()).unwrap();
        let k = seed_kernel(&traj, 0.5).unwrap();
        let expected = toy_kernel(0.5);
        assert!((k.b11().get(0, 0) - expected.b11().get(0, 0)).abs() < 1e-9);
        assert!((k.b12().get(0, 0) - expected.b12().get(0, 0)).abs() < 1e-9);
        assert!((k.b22().get(0, 0) - expected.b22().get(0, 0)).abs() < 1e-9);

        // Interior time off the checkpoint grid goes through interpolation.
        let k = seed_kernel(&traj, 0.3).unwrap();
        let expected = toy_kernel(0.3);
        assert!((k.b11().get(0, 0) - expected.b11().get(0, 0)).abs() < 1e-8);
        assert_eq!(k.horizon(), 0.3);

        // Zero time fails on the vanished gap, out of range on the horizon.
        assert!(matches!(
            seed_kernel(&traj, 0.0),
            Err(SemigroupError::AnchorGapNotCoercive { .. })
        ));
        assert!(matches!(
            seed_kernel(&traj, 0.6),
            Err(SemigroupError::HorizonOutOfRange { .. })
        ));
    }

    #[test]
    fn certificate_splits_the_anchor_gap() {
        let spec = ProblemSpec::scalar(-1.0, 1.0, 1.0, M);
        let traj =
            crate::riccati::integrate_seed(&spec, 0.5, &IntegrateOptions::default()).unwrap();
        let cert = semiconvexity_certificate(traj.final_p(), traj.anchor(), 0.5).unwrap();
        assert!(cert.ok);
        // Both margins are half the gap margin for alpha = 1/2.
        let gap = traj.final_p().sub(traj.anchor());
        let gap_margin = linalg::coercivity_margin(&gap).unwrap();
        assert!((cert.margin_value - 0.5 * gap_margin).abs() < 1e-12);
        assert!((cert.margin_anchor - 0.5 * gap_margin).abs() < 1e-12);

        let degenerate = semiconvexity_certificate(traj.anchor(), traj.anchor(), 0.5).unwrap();
        assert!(!degenerate.ok);
    }

    #[test]
    fn dualize_undualize_roundtrip() {
        // Scalar hand values: anchor 1, value 3 gives N = 1 + 1/2 * ... = 3/2,
        // and undualize maps 3/2 back to 3 through (1 - 3/2)^+ = -2.
        let n = dualize(&SymOp::scalar(3.0), &SymOp::scalar(1.0)).unwrap();
        assert!((n.n().get(0, 0) - 1.5).abs() < 1e-14);
        let back = undualize(&n, &SymOp::scalar(1.0)).unwrap();
        assert!((back.get(0, 0) - 3.0).abs() < 1e-13);

        // A diagonal matrix case through the same path.
        let anchor = SymOp::scaled_identity(3, -0.1);
        let value = SymOp::enforce(LinOp::from_fn(3, 3, |i, j| {
            if i == j {
                [0.5, 0.2, -0.05][i]
            } else {
                0.02
            }
        }));
        let dual = dualize(&value, &anchor).unwrap();
        let back = undualize(&dual, &anchor).unwrap();
        assert!(back.op().sub(value.op()).frob_norm() < 1e-12);
    }

    #[test]
    fn propagation_reproduces_direct_flow() {
        let t = 0.5;
        let kernel = toy_kernel(t);
        let terminal = -0.05;
        let rec = reconstruct(&kernel, &SymOp::scalar(terminal), &SymOp::scalar(M)).unwrap();
        let expected = toy_direct(terminal, t);
        assert!((rec.get(0, 0) - expected).abs() < 1e-10, "reconstructed {}", rec.get(0, 0));

        // Independent route: numerical integration from the same state.
        let spec = ProblemSpec::scalar(-1.0, 1.0, 1.0, M);
        let direct = integrate_direct(
            &spec,
            &SymOp::scalar(terminal),
            &[t],
            &IntegrateOptions::default(),
        )
        .unwrap();
        assert!((rec.get(0, 0) - direct.p[0].get(0, 0)).abs() < 1e-9);
    }

    #[test]
    fn dual_propagation_is_consistent_with_dualized_flow() {
        // Propagating the dual through the kernel must equal dualizing the
        // directly propagated value.
        let t = 0.5;
        let kernel = toy_kernel(t);
        let terminal = -0.05;
        let pushed =
            maxplus_apply(&kernel, &dualize(&SymOp::scalar(terminal), &SymOp::scalar(M)).unwrap())
                .unwrap();
        let value_t = toy_direct(terminal, t);
        let dual_t = dualize(&SymOp::scalar(value_t), &SymOp::scalar(M)).unwrap();
        assert!((pushed.n().get(0, 0) - dual_t.n().get(0, 0)).abs() < 1e-10);
    }

    #[test]
    fn huge_dual_margin_collapses_to_b11() {
        let kernel = toy_kernel(0.5);
        let pushed = maxplus_apply(&kernel, &DualQuad::new(SymOp::scalar(1e8))).unwrap();
        // (B22 - N)^+ ~ -1/N, so T ~ B11 and the dual is ~ -B11.
        assert!((pushed.n().get(0, 0) + 9.0 / 121.0).abs() < 1e-6);
    }

    #[test]
    fn eval_orientation_and_weight() {
        let k = toy_kernel(0.5);
        let v = k.eval(&[2.0], &[3.0]);
        let expected = 0.5 * 4.0 * (9.0 / 121.0) + 3.0 * 2.0 * (2.0 / 121.0)
            + 0.5 * 9.0 * (-13.0 / 121.0);
        assert!((v - expected).abs() < 1e-13);

        let (p, q, r) = toy_blocks(0.5);
        let k =
            Kernel::from_parts(&p, &q, &r, &SymOp::scalar(M), 0.5, 0.25).unwrap();
        assert!((k.eval(&[2.0], &[3.0]) - 0.25 * expected).abs() < 1e-13);
    }

    #[test]
    fn kernel_requires_coercive_gap() {
        let m = SymOp::scalar(M);
        let err =
            Kernel::from_parts(&m, &LinOp::scalar(0.1), &m, &m, 0.1, 1.0).unwrap_err();
        assert!(matches!(err, SemigroupError::AnchorGapNotCoercive { .. }));
    }

    #[test]
    fn apply_rejects_indefinite_pivot() {
        let kernel = toy_kernel(0.5);
        // N = -1 makes B22 - N = -13/121 + 1 > 0.
        let err = maxplus_apply(&kernel, &DualQuad::new(SymOp::scalar(-1.0))).unwrap_err();
        assert!(matches!(err, SemigroupError::NotNonpositive { .. }));
    }

    #[test]
    fn undualize_rejects_positive_pivot() {
        let err =
            undualize(&DualQuad::new(SymOp::scalar(0.5)), &SymOp::scalar(1.0)).unwrap_err();
        assert!(matches!(err, SemigroupError::NotNonpositive { .. }));
    }

    #[test]
    fn dualize_requires_margin() {
        let err = dualize(&SymOp::scalar(M), &SymOp::scalar(M)).unwrap_err();
        assert!(matches!(err, SemigroupError::AnchorGapNotCoercive { .. }));
    }
}
