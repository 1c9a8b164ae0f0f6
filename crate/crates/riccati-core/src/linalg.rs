//! Symmetric operators, eigensolver, pseudo-inverse, quadratic suprema.
//!
//! Everything downstream (kernel algebra, duality, reconstruction) reduces to
//! symmetric eigendecompositions. The solver is cyclic Jacobi: at these
//! dimensions it is simple, unconditionally convergent, and accurate to a
//! small multiple of machine epsilon.
//!
//! Inner products here are plain Euclidean. Quadrature-weighted spaces fold
//! their weight into scalar evaluations at the call site (see `problem`);
//! with uniform weights, adjoints, inverses and pseudo-inverses coincide with
//! their plain matrix counterparts, so nothing in this module needs to know
//! about the weight.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::linop::{dot, norm2, LinOp};

/// Absolute entrywise tolerance for accepting user-supplied symmetric input.
pub const SYM_ABS_TOL: f64 = 1e-12;

/// Eigenvalues at or below `rel * max|lambda|` are treated as zero.
pub const PINV_REL_TOL: f64 = 1e-10;

/// Positive eigenvalues above `1e-10 * max|lambda|` make a supremum unbounded.
pub const UNBOUNDED_REL_TOL: f64 = 1e-10;

/// Residual tolerance (relative to the linear term) for range membership.
pub const RANGE_REL_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub enum LinalgError {
    /// Input expected symmetric had a larger asymmetry than allowed.
    NotSymmetric { asymmetry: f64, tol: f64 },
    /// Jacobi sweeps did not reduce the off-diagonal mass; carries the
    /// leftover off-diagonal Frobenius norm for diagnosis.
    EigDidNotConverge { off_diagonal: f64, sweeps: usize },
    /// A coercive (symmetric positive definite) matrix was required.
    NotCoercive { margin: f64 },
    /// The quadratic supremum is +infinity.
    Unbounded(UnboundedReason),
    /// Square matrix expected.
    NotSquare { rows: usize, cols: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub enum UnboundedReason {
    /// Curvature has a positive direction.
    PositiveCurvature { lambda: f64 },
    /// The linear term has a component outside the range of the curvature.
    RangeDefect { residual: f64, tol: f64 },
}

impl fmt::Display for LinalgError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinalgError::NotSymmetric { asymmetry, tol } => {
                write!(f, "matrix asymmetry {asymmetry:.3e} exceeds tolerance {tol:.3e}")
            }
            LinalgError::EigDidNotConverge { off_diagonal, sweeps } => write!(
                f,
                "eigensolver left off-diagonal mass {off_diagonal:.3e} after {sweeps} sweeps"
            ),
            LinalgError::NotCoercive { margin } => {
                write!(f, "matrix is not coercive (margin {margin:.3e})")
            }
            LinalgError::Unbounded(UnboundedReason::PositiveCurvature { lambda }) => {
                write!(f, "supremum unbounded: positive curvature eigenvalue {lambda:.3e}")
            }
            LinalgError::Unbounded(UnboundedReason::RangeDefect { residual, tol }) => write!(
                f,
                "supremum unbounded: linear term outside curvature range \
                 (residual {residual:.3e}, tol {tol:.3e})"
            ),
            LinalgError::NotSquare { rows, cols } => {
                write!(f, "square matrix expected, got {rows}x{cols}")
            }
        }
    }
}

impl core::error::Error for LinalgError {}

/// Symmetric operator. Construction symmetrizes, so the stored matrix is
/// exactly equal to its transpose.
#[derive(Clone, Debug, PartialEq)]
pub struct SymOp {
    inner: LinOp,
}

impl SymOp {
    /// Strict constructor for externally supplied data: rejects asymmetry
    /// beyond [`SYM_ABS_TOL`], then stores the symmetric part.
    pub fn new(m: LinOp) -> Result<SymOp, LinalgError> {
        SymOp::with_tol(m, SYM_ABS_TOL)
    }

    /// Constructor with a caller-chosen absolute asymmetry tolerance.
    /// Integration output uses a looser tolerance than hand-entered data
    /// because Runge-Kutta arithmetic leaves roundoff-level asymmetry.
    pub fn with_tol(m: LinOp, tol: f64) -> Result<SymOp, LinalgError> {
        if !m.is_square() {
            return Err(LinalgError::NotSquare { rows: m.rows(), cols: m.cols() });
        }
        let asymmetry = m.max_asymmetry();
        if asymmetry > tol {
            return Err(LinalgError::NotSymmetric { asymmetry, tol });
        }
        Ok(SymOp { inner: m.symmetric_part() })
    }

    /// Symmetrizes unconditionally. For matrices that are symmetric by
    /// construction of a formula, where any asymmetry is roundoff.
    pub fn enforce(m: LinOp) -> SymOp {
        assert!(m.is_square(), "SymOp requires a square matrix");
        SymOp { inner: m.symmetric_part() }
    }

    pub fn zeros(n: usize) -> SymOp {
        SymOp { inner: LinOp::zeros(n, n) }
    }

    pub fn identity(n: usize) -> SymOp {
        SymOp { inner: LinOp::identity(n) }
    }

    pub fn scaled_identity(n: usize, s: f64) -> SymOp {
        SymOp { inner: LinOp::scaled_identity(n, s) }
    }

    pub fn scalar(v: f64) -> SymOp {
        SymOp { inner: LinOp::scalar(v) }
    }

    pub fn dim(&self) -> usize {
        self.inner.rows()
    }

    pub fn op(&self) -> &LinOp {
        &self.inner
    }

    pub fn into_op(self) -> LinOp {
        self.inner
    }

    pub fn add(&self, other: &SymOp) -> SymOp {
        SymOp { inner: self.inner.add(&other.inner) }
    }

    pub fn sub(&self, other: &SymOp) -> SymOp {
        SymOp { inner: self.inner.sub(&other.inner) }
    }

    pub fn scaled(&self, s: f64) -> SymOp {
        SymOp { inner: self.inner.scaled(s) }
    }

    /// Quadratic form x'Fx (unweighted).
    pub fn quad(&self, x: &[f64]) -> f64 {
        dot(x, &self.inner.apply(x))
    }
}

impl core::ops::Deref for SymOp {
    type Target = LinOp;

    fn deref(&self) -> &LinOp {
        &self.inner
    }
}

/// Quadratic functional x -> 1/2<x,Fx> + <x,xi> + c in a space whose inner
/// product carries a uniform quadrature weight.
#[derive(Clone, Debug)]
pub struct QuadForm {
    pub f: SymOp,
    pub xi: Vec<f64>,
    pub c: f64,
}

impl QuadForm {
    pub fn new(f: SymOp, xi: Vec<f64>, c: f64) -> QuadForm {
        assert_eq!(f.dim(), xi.len(), "quadratic form dimension mismatch");
        QuadForm { f, xi, c }
    }

    /// Evaluation; `weight` is the quadrature weight of the inner product
    /// (1.0 for plain Euclidean spaces).
    pub fn eval(&self, x: &[f64], weight: f64) -> f64 {
        weight * (0.5 * self.f.quad(x) + dot(&self.xi, x)) + self.c
    }
}

/// Eigendecomposition F = V diag(values) V' with `values` descending and the
/// columns of `vectors` the matching orthonormal eigenvectors.
#[derive(Clone, Debug)]
pub struct EigDecomp {
    pub values: Vec<f64>,
    pub vectors: LinOp,
}

impl EigDecomp {
    /// Reassembles V f(lambda) V' symmetrized.
    pub fn assemble(&self, f: impl Fn(f64) -> f64) -> SymOp {
        let n = self.values.len();
        let v = &self.vectors;
        let mut out = LinOp::zeros(n, n);
        for k in 0..n {
            let fk = f(self.values[k]);
            if fk == 0.0 {
                continue;
            }
            for i in 0..n {
                let vik = v.get(i, k) * fk;
                if vik == 0.0 {
                    continue;
                }
                for j in 0..n {
                    let e = out.get(i, j) + vik * v.get(j, k);
                    out.set(i, j, e);
                }
            }
        }
        SymOp::enforce(out)
    }
}

const JACOBI_MAX_SWEEPS: usize = 64;

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
pub fn sym_eig(f: &SymOp) -> Result<EigDecomp, LinalgError> {
    let n = f.dim();
    let mut a: Vec<f64> = f.op().data().to_vec();
    let mut v = LinOp::identity(n);
    let frob = f.op().frob_norm();
    if frob == 0.0 || n == 1 {
        let values = (0..n).map(|i| a[i * n + i]).collect::<Vec<_>>();
        return Ok(sorted_desc(values, v));
    }
    let target = frob * 1e-15;

    let mut sweeps = 0;
    loop {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[i * n + j] * a[i * n + j];
            }
        }
        let off = libm::sqrt(2.0 * off);
        if off <= target {
            break;
        }
        if sweeps >= JACOBI_MAX_SWEEPS {
            return Err(LinalgError::EigDidNotConverge { off_diagonal: off, sweeps });
        }
        sweeps += 1;

        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if libm::fabs(apq) <= target / (n as f64) {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + libm::sqrt(theta * theta + 1.0))
                } else {
                    -1.0 / (-theta + libm::sqrt(theta * theta + 1.0))
                };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;

                // Rotate rows/columns p and q of A.
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                // Accumulate the rotation into V.
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }

    let values = (0..n).map(|i| a[i * n + i]).collect::<Vec<_>>();
    Ok(sorted_desc(values, v))
}

fn sorted_desc(values: Vec<f64>, vectors: LinOp) -> EigDecomp {
    let n = values.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| values[j].partial_cmp(&values[i]).unwrap());
    let sorted_values: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
    let sorted_vectors = LinOp::from_fn(n, n, |i, j| vectors.get(i, idx[j]));
    EigDecomp { values: sorted_values, vectors: sorted_vectors }
}

/// Moore-Penrose pseudo-inverse of a symmetric matrix with a relative
/// spectral cutoff: eigenvalues with |lambda| <= rel_tol * max|lambda| are
/// zeroed rather than inverted.
pub fn pseudo_inverse(f: &SymOp, rel_tol: f64) -> Result<SymOp, LinalgError> {
    let eig = sym_eig(f)?;
    let lam_max = eig.values.iter().fold(0.0_f64, |m, &l| m.max(libm::fabs(l)));
    let cutoff = rel_tol * lam_max;
    Ok(eig.assemble(|l| if libm::fabs(l) <= cutoff { 0.0 } else { 1.0 / l }))
}

/// True inverse of a coercive matrix; fails if the smallest eigenvalue is at
/// or below `eps`.
pub fn coercive_inverse(f: &SymOp, eps: f64) -> Result<SymOp, LinalgError> {
    let eig = sym_eig(f)?;
    let margin = *eig.values.last().expect("nonempty spectrum");
    if margin <= eps {
        return Err(LinalgError::NotCoercive { margin });
    }
    Ok(eig.assemble(|l| 1.0 / l))
}

/// Smallest eigenvalue: the best epsilon with <x,Fx> >= eps<x,x>.
/// Uniform quadrature weights cancel, so this is weight-independent.
pub fn coercivity_margin(f: &SymOp) -> Result<f64, LinalgError> {
    let eig = sym_eig(f)?;
    Ok(*eig.values.last().expect("nonempty spectrum"))
}

/// Largest eigenvalue.
pub fn lambda_max(f: &SymOp) -> Result<f64, LinalgError> {
    let eig = sym_eig(f)?;
    Ok(*eig.values.first().expect("nonempty spectrum"))
}

/// Spectral norm of a general rectangular matrix via eig(A'A).
pub fn spectral_norm(a: &LinOp) -> Result<f64, LinalgError> {
    let gram = SymOp::enforce(a.transpose().matmul(a));
    let top = lambda_max(&gram)?;
    Ok(libm::sqrt(top.max(0.0)))
}

/// Condition number estimate sigma_max / sigma_min (infinite when singular).
pub fn condition_number(a: &LinOp) -> Result<f64, LinalgError> {
    let gram = SymOp::enforce(a.transpose().matmul(a));
    let eig = sym_eig(&gram)?;
    let hi = libm::sqrt(eig.values.first().unwrap().max(0.0));
    let lo = libm::sqrt(eig.values.last().unwrap().max(0.0));
    if lo == 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(hi / lo)
    }
}

/// Finite supremum of the quadratic functional x -> 1/2<x,Fx> + <x,xi>.
#[derive(Clone, Debug)]
pub struct SupQuad {
    pub value: f64,
    pub argmax: Vec<f64>,
    /// ||F argmax + xi||, the stationarity defect; small when finite.
    pub grad_residual: f64,
}

/// Evaluates sup_x [ 1/2<x,Fx> + <x,xi> ] in the plain Euclidean inner
/// product. Finite iff F is non-positive and xi lies in range(F); then the
/// supremum is -1/2<xi, F^+ xi>, attained at -F^+ xi. Weighted callers scale
/// the value by their quadrature weight (the argmax is weight-independent).
pub fn maxplus_sup_quad(f: &SymOp, xi: &[f64], rel_tol: f64) -> Result<SupQuad, LinalgError> {
    assert_eq!(f.dim(), xi.len(), "dimension mismatch");
    let eig = sym_eig(f)?;
    let lam_max_abs = eig.values.iter().fold(0.0_f64, |m, &l| m.max(libm::fabs(l)));

    let pos_tol = UNBOUNDED_REL_TOL * lam_max_abs;
    if let Some(&lam) = eig.values.iter().find(|&&l| l > pos_tol) {
        return Err(LinalgError::Unbounded(UnboundedReason::PositiveCurvature { lambda: lam }));
    }

    // Coordinates of xi in the eigenbasis.
    let coeffs = eig.vectors.apply_transpose(xi);
    let cutoff = rel_tol * lam_max_abs;
    let mut kernel_mass = 0.0;
    for (k, &lam) in eig.values.iter().enumerate() {
        if libm::fabs(lam) <= cutoff {
            kernel_mass += coeffs[k] * coeffs[k];
        }
    }
    let range_tol = RANGE_REL_TOL * norm2(xi);
    let kernel_resid = libm::sqrt(kernel_mass);
    if kernel_resid > range_tol {
        return Err(LinalgError::Unbounded(UnboundedReason::RangeDefect {
            residual: kernel_resid,
            tol: range_tol,
        }));
    }

    // argmax = -F^+ xi, value = -1/2 <xi, F^+ xi>, assembled in the basis.
    let n = f.dim();
    let mut argmax = vec![0.0; n];
    let mut value = 0.0;
    for (k, &lam) in eig.values.iter().enumerate() {
        if libm::fabs(lam) <= cutoff {
            continue;
        }
        let w = coeffs[k] / lam;
        value -= 0.5 * coeffs[k] * w;
        for i in 0..n {
            argmax[i] -= eig.vectors.get(i, k) * w;
        }
    }

    let mut grad = f.op().apply(&argmax);
    for (g, &x) in grad.iter_mut().zip(xi) {
        *g += x;
    }
    Ok(SupQuad { value, argmax, grad_residual: norm2(&grad) })
}
