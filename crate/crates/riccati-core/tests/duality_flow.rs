//! Semiconvex duality as an exact transform pair: two-route agreement inside
//! the dual, roundtrip identity, and commutation of dual propagation with
//! the direct Riccati flow.

mod common;

use common::{rand_admissible, rel_frob};
use riccati_core::problem::{Grid, ProblemSpec};
use riccati_core::riccati::{integrate_direct, integrate_seed, IntegrateOptions};
use riccati_core::rng::SplitMix64;
use riccati_core::semigroup::{dualize, maxplus_apply, seed_kernel, undualize};
use riccati_core::SymOp;

#[test]
fn dual_spot_values() {
    // Scalar: anchor 1, state 3 gives N = 1 + 1*(1/2)*1 = 3/2.
    let n = dualize(&SymOp::scalar(3.0), &SymOp::scalar(1.0)).unwrap();
    assert!((n.n().get(0, 0) - 1.5).abs() < 1e-14);

    // State 2M with a coercive anchor is a fixed point shape: N = 2M.
    let anchor = SymOp::identity(3);
    let n = dualize(&anchor.scaled(2.0), &anchor).unwrap();
    assert!(rel_frob(n.n().op(), anchor.scaled(2.0).op()) < 1e-14);

    // M = -I, state I: N = -I + (-I)(2I)^{-1}(-I) = -I/2.
    let anchor = SymOp::scaled_identity(4, -1.0);
    let n = dualize(&SymOp::identity(4), &anchor).unwrap();
    assert!(rel_frob(n.n().op(), SymOp::scaled_identity(4, -0.5).op()) < 1e-14);
}

#[test]
fn roundtrip_over_random_admissible_states() {
    // 200 random admissible states: the dual's two internal routes agree
    // (dualize rejects disagreement beyond 1e-12) and undualize retrieves
    // the state to 1e-10.
    let grid = Grid::new(16, 2.0).unwrap();
    let spec = ProblemSpec::transport(&grid, -0.1).unwrap();
    let mut rng = SplitMix64::new(7);
    for trial in 0..200 {
        let eps = [0.05, 0.2, 1.0][trial % 3];
        let m_tilde = rand_admissible(&mut rng, spec.m(), eps, grid.h());
        let dual = dualize(&m_tilde, spec.m()).unwrap();
        let back = undualize(&dual, spec.m()).unwrap();
        let gap = rel_frob(back.op(), m_tilde.op());
        assert!(gap < 1e-10, "roundtrip gap {gap:.3e} on trial {trial}");
    }
}

#[test]
fn dual_propagation_commutes_with_the_direct_flow() {
    // Pushing the dual through the kernel equals dualizing the directly
    // integrated solution: the commutation square closes.
    let t = 0.2;
    let grid = Grid::new(16, 2.0).unwrap();
    let spec = ProblemSpec::transport(&grid, -0.1).unwrap();
    let opts = IntegrateOptions { checkpoints: 129, ..Default::default() };
    let traj = integrate_seed(&spec, t, &opts).unwrap();
    let kernel = seed_kernel(&traj, t).unwrap();

    let mut rng = SplitMix64::new(23);
    for trial in 0..5 {
        let m_tilde = rand_admissible(&mut rng, spec.m(), 0.1 + 0.2 * trial as f64, grid.h());
        let pushed = maxplus_apply(&kernel, &dualize(&m_tilde, spec.m()).unwrap()).unwrap();

        let direct =
            integrate_direct(&spec, &m_tilde, &[t], &IntegrateOptions::default()).unwrap();
        let dual_direct = dualize(&direct.p[0], spec.m()).unwrap();
        let gap = rel_frob(pushed.n().op(), dual_direct.n().op());
        assert!(gap < 1e-8, "commutation gap {gap:.3e} on trial {trial}");

        // Closing the square the other way: undualizing the pushed dual is
        // the direct solution.
        let back = undualize(&pushed, spec.m()).unwrap();
        assert!(rel_frob(back.op(), direct.p[0].op()) < 1e-8);
    }
}

#[test]
fn admissibility_family_margins() {
    // The documented admissible family anchor + eps I + h G G' clears the
    // required coercivity margin for every eps in the published set.
    let grid = Grid::new(16, 2.0).unwrap();
    let spec = ProblemSpec::transport(&grid, -0.1).unwrap();
    let mut rng = SplitMix64::new(99);
    for &eps in &[0.05, 0.2, 1.0] {
        let m_tilde = rand_admissible(&mut rng, spec.m(), eps, grid.h());
        let gap = m_tilde.sub(spec.m());
        let margin = riccati_core::linalg::coercivity_margin(&gap).unwrap();
        assert!(margin > 1e-8, "family margin {margin:.3e} at eps {eps}");
        assert!(margin >= eps * 0.999, "bump is PSD, margin at least eps");
    }
}
