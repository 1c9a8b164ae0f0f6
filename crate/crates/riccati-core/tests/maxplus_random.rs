//! Randomized property corpus for the spectral primitives: Penrose
//! identities of the pseudo-inverse, the quadratic supremum against a
//! brute-force grid, and the convexity-iff-margin equivalence.

mod common;

use common::{grid_sup, rand_nonpositive, rand_sym, rand_vec};
use riccati_core::linalg::{self, SymOp, PINV_REL_TOL};
use riccati_core::rng::SplitMix64;

#[test]
fn penrose_identities_hold_on_random_symmetric_matrices() {
    let mut rng = SplitMix64::new(2024);
    for trial in 0..1000 {
        let n = 1 + trial % 8;
        let f = rand_sym(&mut rng, n, 2.0);
        let pinv = linalg::pseudo_inverse(&f, PINV_REL_TOL).unwrap();
        let a = f.op();
        let p = pinv.op();
        let scale = a.frob_norm().max(1.0);
        let pscale = p.frob_norm().max(1.0);

        let apa = a.matmul(p).matmul(a);
        assert!(apa.sub(a).frob_norm() <= 1e-9 * scale, "A A+ A = A on trial {trial}");
        let pap = p.matmul(a).matmul(p);
        assert!(pap.sub(p).frob_norm() <= 1e-9 * pscale, "A+ A A+ = A+ on trial {trial}");
        let ap = a.matmul(p);
        assert!(ap.sub(&ap.transpose()).frob_norm() <= 1e-9 * ap.frob_norm().max(1.0));
        let pa = p.matmul(a);
        assert!(pa.sub(&pa.transpose()).frob_norm() <= 1e-9 * pa.frob_norm().max(1.0));
    }
}

#[test]
fn quadratic_supremum_matches_the_grid_oracle() {
    let mut rng = SplitMix64::new(7777);
    let mut trial = 0;
    while trial < 12 {
        let dim = 1 + trial % 3;
        // Strictly concave most of the time; every third problem is made
        // genuinely singular by a rank-one drop, with the linear term forced
        // into the range so the supremum stays finite.
        let mut f = rand_nonpositive(&mut rng, dim, 1.0);
        if trial % 3 != 2 {
            f = SymOp::enforce(
                f.op().add(&riccati_core::LinOp::scaled_identity(dim, -0.3)),
            );
        }
        let xi = f.op().apply(&rand_vec(&mut rng, dim, 0.8));

        let sup = linalg::maxplus_sup_quad(&f, &xi, PINV_REL_TOL).unwrap();
        let inf_norm = sup.argmax.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
        if inf_norm > 2.0 {
            // Ill-conditioned draw would need a huge grid; skip, redraw.
            continue;
        }
        let l = (2.0 * inf_norm).max(1.0);
        let objective = |x: &[f64]| 0.5 * f.quad(x) + x.iter().zip(&xi).map(|(a, b)| a * b).sum::<f64>();
        let (grid_value, _) = grid_sup(&objective, dim, l);
        assert!(
            (sup.value - grid_value).abs() <= 1e-4,
            "trial {trial} dim {dim}: sup {} vs grid {}",
            sup.value,
            grid_value
        );
        assert!(sup.value >= grid_value - 1e-12, "grid never beats the exact supremum");
        trial += 1;
    }
}

#[test]
fn convexity_of_the_quadratic_is_equivalent_to_the_margin_sign() {
    let mut rng = SplitMix64::new(31337);
    for trial in 0..200 {
        let n = 1 + trial % 4;
        let f = rand_sym(&mut rng, n, 1.5);
        let eig = linalg::sym_eig(&f).unwrap();
        let margin = *eig.values.last().unwrap();

        if margin >= -1e-12 {
            // PSD side: midpoint convexity holds on random pairs.
            for _ in 0..30 {
                let x = rand_vec(&mut rng, n, 2.0);
                let y = rand_vec(&mut rng, n, 2.0);
                let mid: Vec<f64> =
                    x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
                let lhs = 0.5 * f.quad(&x) + 0.5 * f.quad(&y) - f.quad(&mid);
                assert!(lhs >= -1e-10 * f.op().frob_norm().max(1.0), "midpoint convexity");
            }
        } else if margin < -1e-9 {
            // Indefinite side: the bottom eigenvector violates midpoint
            // convexity through the origin.
            let k = eig.values.len() - 1;
            let v: Vec<f64> = (0..n).map(|i| eig.vectors.get(i, k)).collect();
            let neg: Vec<f64> = v.iter().map(|a| -a).collect();
            let lhs = 0.5 * f.quad(&v) + 0.5 * f.quad(&neg) - f.quad(&[0.0].repeat(n));
            assert!(lhs < 0.0, "violation witness on trial {trial}");
        }
    }
}
