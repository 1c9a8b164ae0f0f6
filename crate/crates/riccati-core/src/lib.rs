//! Max-plus dual-space propagation of operator differential Riccati equations.
//!
//! The library computes solutions of the matrix Riccati initial value problem
//!
//! ```text
//! dP/dt = A'P + PA + P sigma sigma' P + C,    P(0) = M-tilde,
//! ```
//!
//! two ways: directly by adaptive Runge-Kutta integration, and by propagating
//! a single *seed* solution (initialized at a fixed anchor `M`) into a
//! quadratic kernel triple that acts on terminal data in the max-plus dual
//! space. Once the seed kernel for a short horizon `delta` is known, the
//! solution at `t = kappa * delta` for *any* admissible initial matrix is
//! obtained by pure matrix algebra: kernel self-composition followed by a
//! dual-space reconstruction. No further integration is needed when the
//! initial matrix changes.
//!
//! Modules follow the pipeline:
//!
//! * [`linop`] / [`linalg`] - dense matrices, symmetric eigensolver,
//!   spectral-cutoff pseudo-inverse, quadratic suprema.
//! * [`problem`] - grids and problem data (transport example, custom specs).
//! * [`riccati`] - seed and direct integration, mild-form residual,
//!   conservative horizon bound.
//! * [`semigroup`] - kernel triples: seeding, composition, linear/doubling
//!   iteration, duality with terminal data, reconstruction.
//! * [`verify`] - control-theoretic consistency: closed-loop simulation,
//!   value identity, suboptimality probes.
//!
//! The crate is `no_std` (requires `alloc`); all file formats and the CLI
//! live in the companion binary crate.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod expm;
pub mod linalg;
pub mod linop;
pub mod ode;
pub mod problem;
pub mod riccati;
pub mod rng;
pub mod semigroup;
pub mod verify;

pub use linalg::SymOp;
pub use linop::LinOp;
