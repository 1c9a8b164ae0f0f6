//! Matrix exponential by Pade(13) approximation with scaling and squaring.
//!
//! Used by the mild-form residual (semigroup conjugations e^{A'(t-s)} G
//! e^{A(t-s)}) and by closed-form oracles in tests. The [13/13] diagonal Pade
//! approximant with the standard theta threshold is accurate to machine
//! precision after undoing the scaling.

use alloc::vec;

use crate::linop::LinOp;

/// Pade 13 numerator coefficients b_0..b_13.
const B: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// theta_13: largest 1-norm for which an unscaled Pade 13 evaluation keeps
/// full accuracy.
const THETA_13: f64 = 5.371920351148152;

/// e^A for a square matrix.
pub fn expm(a: &LinOp) -> LinOp {
    assert!(a.is_square(), "expm requires a square matrix");
    let n = a.rows();
    if n == 0 {
        return LinOp::zeros(0, 0);
    }

    let norm = a.one_norm();
    let s = if norm > THETA_13 {
        libm::ceil(libm::log2(norm / THETA_13)) as u32
    } else {
        0
    };
    let scaled = a.scaled(libm::pow(2.0, -(s as f64)));

    let a2 = scaled.matmul(&scaled);
    let a4 = a2.matmul(&a2);
    let a6 = a4.matmul(&a2);

    // U = A (A6 (b13 A6 + b11 A4 + b9 A2) + b7 A6 + b5 A4 + b3 A2 + b1 I)
    let mut w = a6.scaled(B[13]).add(&a4.scaled(B[11])).add(&a2.scaled(B[9]));
    w = a6.matmul(&w);
    w = w.add(&a6.scaled(B[7])).add(&a4.scaled(B[5])).add(&a2.scaled(B[3]));
    w = w.add(&LinOp::scaled_identity(n, B[1]));
    let u = scaled.matmul(&w);

    // V = A6 (b12 A6 + b10 A4 + b8 A2) + b6 A6 + b4 A4 + b2 A2 + b0 I
    let mut v = a6.scaled(B[12]).add(&a4.scaled(B[10])).add(&a2.scaled(B[8]));
    v = a6.matmul(&v);
    v = v.add(&a6.scaled(B[6])).add(&a4.scaled(B[4])).add(&a2.scaled(B[2]));
    v = v.add(&LinOp::scaled_identity(n, B[0]));

    // (V - U) X = (V + U)
    let lhs = v.sub(&u);
    let rhs = v.add(&u);
    let mut e = solve_lu(&lhs, &rhs).expect("Pade denominator is nonsingular for scaled input");

    for _ in 0..s {
        e = e.matmul(&e);
    }
    e
}

/// Solves A X = B by LU with partial pivoting. Returns None when A is
/// numerically singular.
pub(crate) fn solve_lu(a: &LinOp, b: &LinOp) -> Option<LinOp> {
    assert!(a.is_square());
    assert_eq!(a.rows(), b.rows());
    let n = a.rows();
    let m = b.cols();
    let mut lu = a.data().to_vec();
    let mut x = b.data().to_vec();
    let mut piv: alloc::vec::Vec<usize> = (0..n).collect();

    for k in 0..n {
        let mut p = k;
        let mut best = libm::fabs(lu[piv[k] * n + k]);
        for i in (k + 1)..n {
            let v = libm::fabs(lu[piv[i] * n + k]);
            if v > best {
                best = v;
                p = i;
            }
        }
        if best == 0.0 {
            return None;
        }
        piv.swap(k, p);
        let pk = piv[k];
        let pivot = lu[pk * n + k];
        for i in (k + 1)..n {
            let pi = piv[i];
            let factor = lu[pi * n + k] / pivot;
            lu[pi * n + k] = factor;
            for j in (k + 1)..n {
                lu[pi * n + j] -= factor * lu[pk * n + j];
            }
            for j in 0..m {
                x[pi * m + j] -= factor * x[pk * m + j];
            }
        }
    }

    // Back substitution in pivot order.
    let mut out = vec![0.0; n * m];
    for j in 0..m {
        for i in (0..n).rev() {
            let pi = piv[i];
            let mut acc = x[pi * m + j];
            for k in (i + 1)..n {
                acc -= lu[pi * n + k] * out[k * m + j];
            }
            out[i * m + j] = acc / lu[pi * n + i];
        }
    }
    Some(LinOp::from_vec(n, m, out))
}
