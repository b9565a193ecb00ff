//! Small dense factorizations used by the inversion code.

use nalgebra::{ComplexField, DMatrix};

use crate::error::{Error, Result};

/// Singular values (descending) and right singular vectors (as columns, in
/// the same order) of a real matrix.
///
/// The matrix is first reduced to its triangular QR factor; the factor is
/// then diagonalized by one-sided Jacobi rotations, which keeps small
/// singular values accurate to working precision relative to the largest.
pub fn right_svd(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.ncols();
    let mut w = if a.nrows() > n {
        a.clone().qr().r()
    } else {
        a.clone()
    };
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dot(&w.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let sigma = order.iter().map(|&j| norms[j]).collect();
    let vs = DMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    (sigma, vs)
}

fn rotate(m: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    for i in 0..m.nrows() {
        let x = m[(i, p)];
        let y = m[(i, q)];
        m[(i, p)] = c * x - s * y;
        m[(i, q)] = s * x + c * y;
    }
}

/// Least-squares solution of `a x ≈ b` for a full-column-rank `a`.
pub fn lstsq<T: ComplexField<RealField = f64>>(a: &DMatrix<T>, b: &DMatrix<T>) -> Result<DMatrix<T>> {
    if a.nrows() < a.ncols() {
        return Err(Error::Numerical("underdetermined least-squares system".into()));
    }
    let qr = a.clone().qr();
    let q = qr.q();
    let r = qr.r();
    let rhs = q.adjoint() * b;
    r.solve_upper_triangular(&rhs)
        .filter(|x| x.iter().all(|v| v.clone().modulus().is_finite()))
        .ok_or_else(|| Error::Numerical("rank-deficient least-squares system".into()))
}
