//! Matrix exponential by scaling and squaring with a diagonal Padé approximant.
//!
//! No eigendecomposition is involved, so defective (Jordan) matrices at
//! exceptional points are handled like any other.

use nalgebra::{ComplexField, DMatrix, Matrix3};

/// Degree of the diagonal Padé approximant.
const PADE_DEGREE: usize = 8;

/// The scaled matrix is brought below this 1-norm before the Padé step.
const SCALED_NORM: f64 = 0.5;

fn pade_coefficients() -> [f64; PADE_DEGREE + 1] {
    // c_k = (2q - k)! q! / ((2q)! k! (q - k)!)
    let q = PADE_DEGREE;
    let mut c = [0.0; PADE_DEGREE + 1];
    c[0] = 1.0;
    for k in 1..=q {
        c[k] = c[k - 1] * (q - k + 1) as f64 / (k * (2 * q - k + 1)) as f64;
    }
    c
}

fn one_norm<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|x| x.clone().modulus()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// e^A for a square matrix over real or complex numbers.
pub fn expm<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> DMatrix<T> {
    assert!(a.is_square(), "matrix exponential of a non-square matrix");
    let n = a.nrows();
    let norm = one_norm(a);
    if norm == 0.0 {
        return DMatrix::identity(n, n);
    }
    let squarings = if norm > SCALED_NORM {
        (norm / SCALED_NORM).log2().ceil() as u32
    } else {
        0
    };
    let scale = T::from_real(0.5f64.powi(squarings as i32));
    let a_s = a * scale;

    let c = pade_coefficients();
    let ident = DMatrix::<T>::identity(n, n);
    let mut power = ident.clone();
    let mut num = ident.clone();
    let mut den = ident;
    for (k, &ck) in c.iter().enumerate().skip(1) {
        power = &power * &a_s;
        let term = &power * T::from_real(ck);
        num += &term;
        if k % 2 == 0 {
            den += &term;
        } else {
            den -= &term;
        }
    }
    let mut result = den
        .lu()
        .solve(&num)
        .expect("Padé denominator is nonsingular for a scaled matrix");
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// e^A for a real 3×3 matrix.
pub fn expm3(a: &Matrix3<f64>) -> Matrix3<f64> {
    let d = DMatrix::from_column_slice(3, 3, a.as_slice());
    let e = expm(&d);
    Matrix3::from_column_slice(e.as_slice())
}
