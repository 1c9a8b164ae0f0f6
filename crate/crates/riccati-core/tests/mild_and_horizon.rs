//! Run-level health checks: mild-form residuals at every checkpoint,
//! coercivity of the anchor gap, the conservative horizon bound, and
//! escape detection on a blowup problem.

mod common;

use riccati_core::problem::{Grid, ProblemSpec};
use riccati_core::riccati::{
    conservative_horizon, escape_report, integrate_direct, integrate_seed, mild_residuals,
    IntegrateOptions, RiccatiError,
};
use riccati_core::semigroup::semiconvexity_certificate;
use riccati_core::SymOp;

#[test]
fn mild_residuals_stay_small_along_the_default_run() {
    let grid = Grid::new(16, 2.0).unwrap();
    let spec = ProblemSpec::transport(&grid, -0.1).unwrap();
    let traj = integrate_seed(&spec, 0.5, &IntegrateOptions::default()).unwrap();
    let reports = mild_residuals(&spec, &traj).unwrap();
    assert_eq!(reports.len(), traj.len());
    for report in &reports[1..] {
        assert!(
            report.residual <= 1e-5 * report.p_norm,
            "mild residual {:.3e} at t = {} exceeds 1e-5 * ||P|| = {:.3e}",
            report.residual,
            report.t,
            1e-5 * report.p_norm
        );
    }
}

#[test]
fn coercivity_holds_at_every_checkpoint_with_certificates() {
    let grid = Grid::new(16, 2.0).unwrap();
    let spec = ProblemSpec::transport(&grid, -0.1).unwrap();
    let traj = integrate_seed(&spec, 0.5, &IntegrateOptions::default()).unwrap();
    assert!(traj.min_margin() > 0.0);
    for j in 1..traj.len() {
        let margin = traj.margin_at(j);
        assert!(margin > 0.0, "margin {margin:.3e} at checkpoint {j}");
        let cert = semiconvexity_certificate(traj.p_at(j), spec.m(), 0.5).unwrap();
        assert!(cert.ok, "certificate failed at checkpoint {j}");
        assert!(cert.margin_value > 0.0 && cert.margin_anchor > 0.0);
    }
}

#[test]
fn conservative_horizon_undershoots_the_monitored_one() {
    let grid = Grid::new(32, 2.0).unwrap();
    let spec = ProblemSpec::transport(&grid, -0.1).unwrap();
    let bound = conservative_horizon(&spec, 0.5, 8).unwrap();
    assert!(bound.bound > 0.0);
    let traj = integrate_seed(&spec, 0.5, &IntegrateOptions::default()).unwrap();
    assert!(
        bound.bound <= traj.tau_star(),
        "a priori bound {} exceeds monitored horizon {}",
        bound.bound,
        traj.tau_star()
    );
}

#[test]
fn pure_quadratic_blowup_escapes_inside_the_unit_interval() {
    // dp/dt = p^2 from p(0) = 1 blows up at t = 1.
    let spec = ProblemSpec::scalar(0.0, 1.0, 0.0, -0.1);
    let p0 = SymOp::scalar(1.0);
    let report = escape_report(&spec, &p0, 1.5, &IntegrateOptions::default()).unwrap();
    assert!(report.escaped);
    let lower = report.t_escape_lower.unwrap();
    assert!(
        (0.95..=1.0).contains(&lower),
        "escape lower bound {lower} outside [0.95, 1.0]"
    );
    assert!(!report.norm_history.is_empty());

    let err = integrate_direct(&spec, &p0, &[1.2], &IntegrateOptions::default()).unwrap_err();
    match err {
        RiccatiError::FiniteEscape { t, .. } => {
            assert!((0.95..=1.0).contains(&t), "escape time {t}");
        }
        other => panic!("expected finite escape, got {other}"),
    }
}
