//! Problem data: grids, operator builders, and the assembled specification.
//!
//! The reference problem lives on L2((0, length)) with homogeneous boundary
//! value at the left end: dynamics -(2 + d/d eta), isotropic noise gain
//! 1/sqrt(2), and a rank-one averaging cost (1/3) * integral. Discretization
//! uses n interior nodes, spacing h = length/(n+1), and a left-endpoint
//! quadrature rule with uniform weight h folded into every integral-operator
//! matrix at build time. With uniform weights the discrete adjoint of any
//! matrix is its plain transpose, so all downstream algebra is ordinary
//! matrix algebra; only scalar evaluations (inner products, payoffs) carry
//! the weight.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::linalg::{self, LinalgError, SymOp};
use crate::linop::LinOp;

/// Smallest admissible interior node count; coarser grids make the upwind
/// stencil meaningless.
pub const MIN_GRID_NODES: usize = 4;

/// PSD acceptance tolerance for the cost operator.
pub const PSD_ABS_TOL: f64 = 1e-10;

/// Asymmetry rejection threshold for user-supplied kernel samples.
pub const KERNEL_SYM_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub enum ProblemError {
    GridTooCoarse { n: usize },
    BadLength { length: f64 },
    AnchorNotNegative { m: f64 },
    KernelAsymmetric { asymmetry: f64 },
    CostNotPsd { margin: f64 },
    ShapeMismatch { what: &'static str },
    Linalg(LinalgError),
}

impl fmt::Display for ProblemError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProblemError::GridTooCoarse { n } => {
                write!(f, "grid needs at least {MIN_GRID_NODES} interior nodes, got {n}")
            }
            ProblemError::BadLength { length } => {
                write!(f, "domain length must be positive and finite, got {length}")
            }
            ProblemError::AnchorNotNegative { m } => {
                write!(f, "anchor multiple must be negative, got {m}")
            }
            ProblemError::KernelAsymmetric { asymmetry } => {
                write!(f, "kernel samples asymmetric by {asymmetry:.3e} (tol {KERNEL_SYM_TOL:.0e})")
            }
            ProblemError::CostNotPsd { margin } => {
                write!(f, "cost operator not positive semidefinite (margin {margin:.3e})")
            }
            ProblemError::ShapeMismatch { what } => write!(f, "shape mismatch: {what}"),
            ProblemError::Linalg(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for ProblemError {}

impl From<LinalgError> for ProblemError {
    fn from(e: LinalgError) -> Self {
        ProblemError::Linalg(e)
    }
}

/// Uniform grid of interior nodes on (0, length).
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    n: usize,
    length: f64,
    h: f64,
}

impl Grid {
    pub fn new(n: usize, length: f64) -> Result<Grid, ProblemError> {
        if n < MIN_GRID_NODES {
            return Err(ProblemError::GridTooCoarse { n });
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(ProblemError::BadLength { length });
        }
        let h = length / (n + 1) as f64;
        Ok(Grid { n, length, h })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Node spacing, which is also the uniform quadrature weight.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Interior node coordinates (i+1) * h.
    pub fn nodes(&self) -> Vec<f64> {
        (1..=self.n).map(|i| i as f64 * self.h).collect()
    }
}

/// Upwind discretization of the transport generator -(2 + d/d eta) with a
/// zero left boundary value: backward differences put -2 - 1/h on the
/// diagonal and +1/h on the first subdiagonal.
pub fn build_transport_a(grid: &Grid) -> LinOp {
    let n = grid.n();
    let inv_h = 1.0 / grid.h();
    LinOp::from_fn(n, n, |i, j| {
        if i == j {
            -2.0 - inv_h
        } else if j + 1 == i {
            inv_h
        } else {
            0.0
        }
    })
}

/// Isotropic noise gain (1/sqrt 2) I.
pub fn build_sigma(grid: &Grid) -> LinOp {
    LinOp::scaled_identity(grid.n(), 1.0 / libm::sqrt(2.0))
}

/// Averaging cost (C x)(eta) = (1/3) * integral of x: with the quadrature
/// weight folded in, every entry is h/3. Rank one, PSD, top eigenvalue n*h/3.
pub fn build_c(grid: &Grid) -> SymOp {
    let v = grid.h() / 3.0;
    SymOp::enforce(LinOp::from_fn(grid.n(), grid.n(), |_, _| v))
}

/// Anchor M = m I with m < 0; positive or zero multiples are rejected
/// because the anchor must sit strictly below every admissible initial
/// condition.
pub fn build_m_anchor(grid: &Grid, m: f64) -> Result<SymOp, ProblemError> {
    if !(m.is_finite() && m < 0.0) {
        return Err(ProblemError::AnchorNotNegative { m });
    }
    Ok(SymOp::scaled_identity(grid.n(), m))
}

/// General integral operator from kernel samples K(eta_i, zeta_j): folds the
/// quadrature weight in (entries K_ij * h) and symmetrizes. Samples whose
/// asymmetry exceeds [`KERNEL_SYM_TOL`] are rejected.
pub fn build_kernel_operator(grid: &Grid, samples: &LinOp) -> Result<SymOp, ProblemError> {
    let n = grid.n();
    if samples.rows() != n || samples.cols() != n {
        return Err(ProblemError::ShapeMismatch { what: "kernel samples must be n x n" });
    }
    let asymmetry = samples.max_asymmetry();
    if asymmetry > KERNEL_SYM_TOL {
        return Err(ProblemError::KernelAsymmetric { asymmetry });
    }
    Ok(SymOp::enforce(samples.scaled(grid.h())))
}

/// Assembled problem data for the Riccati flow dP/dt = A'P + PA + P S P + C
/// with S = sigma sigma'.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    a: LinOp,
    sigma: LinOp,
    /// Cached sigma sigma'.
    sigma_sq: SymOp,
    c: SymOp,
    m: SymOp,
    weight: f64,
    cond_a: f64,
    label: String,
}

impl ProblemSpec {
    /// Validates shapes and definiteness. The condition number of A is
    /// recorded for diagnostics (Assumption-style invertibility report), not
    /// enforced: degenerate dynamics are legitimate test fixtures.
    pub fn new(
        a: LinOp,
        sigma: LinOp,
        c: SymOp,
        m: SymOp,
        weight: f64,
        label: &str,
    ) -> Result<ProblemSpec, ProblemError> {
        if !a.is_square() {
            return Err(ProblemError::ShapeMismatch { what: "A must be square" });
        }
        let n = a.rows();
        if sigma.rows() != n {
            return Err(ProblemError::ShapeMismatch { what: "sigma must map into the state space" });
        }
        if c.dim() != n || m.dim() != n {
            return Err(ProblemError::ShapeMismatch { what: "C and M must match the state dim" });
        }
        if !(weight.is_finite() && weight > 0.0) {
            return Err(ProblemError::ShapeMismatch { what: "quadrature weight must be positive" });
        }
        let c_margin = linalg::coercivity_margin(&c)?;
        if c_margin < -PSD_ABS_TOL {
            return Err(ProblemError::CostNotPsd { margin: c_margin });
        }
        let cond_a = linalg::condition_number(&a)?;
        let sigma_sq = SymOp::enforce(sigma.matmul(&sigma.transpose()));
        Ok(ProblemSpec {
            a,
            sigma,
            sigma_sq,
            c,
            m,
            weight,
            cond_a,
            label: String::from(label),
        })
    }

    /// The reference transport problem on the given grid with anchor m I.
    pub fn transport(grid: &Grid, m: f64) -> Result<ProblemSpec, ProblemError> {
        ProblemSpec::new(
            build_transport_a(grid),
            build_sigma(grid),
            build_c(grid),
            build_m_anchor(grid, m)?,
            grid.h(),
            "transport",
        )
    }

    /// One-dimensional problem dp/dt = 2 a p + s^2 p^2 + c with unit
    /// quadrature weight; the workhorse for closed-form oracles.
    pub fn scalar(a: f64, s: f64, c: f64, m: f64) -> ProblemSpec {
        ProblemSpec::new(
            LinOp::scalar(a),
            LinOp::scalar(s),
            SymOp::scalar(c),
            SymOp::scalar(m),
            1.0,
            "scalar",
        )
        .expect("scalar problems always validate shapes; c >= 0 required")
    }

    pub fn dim(&self) -> usize {
        self.a.rows()
    }

    pub fn a(&self) -> &LinOp {
        &self.a
    }

    pub fn sigma(&self) -> &LinOp {
        &self.sigma
    }

    /// sigma sigma', cached.
    pub fn sigma_sq(&self) -> &SymOp {
        &self.sigma_sq
    }

    pub fn c(&self) -> &SymOp {
        &self.c
    }

    pub fn m(&self) -> &SymOp {
        &self.m
    }

    /// Uniform quadrature weight of the discrete inner product.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Condition number of A (diagnostic only).
    pub fn cond_a(&self) -> f64 {
        self.cond_a
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Coercivity margin of dP/dt at the anchor: positive means the seed
    /// flow immediately lifts off the anchor, certifying the coercivity
    /// assumption near t = 0.
    pub fn drift_margin(&self) -> Result<f64, LinalgError> {
        let rhs = crate::riccati::riccati_rhs(self, self.m());
        linalg::coercivity_margin(&rhs)
    }
}
