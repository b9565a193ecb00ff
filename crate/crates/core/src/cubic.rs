//! Roots of real monic cubics.
//!
//! Used as the fallback path for the closed-form Bloch spectrum near the
//! triple root, where the Cardano expression degenerates to 0/0.

use num_complex::Complex64 as C64;
use std::f64::consts::PI;

/// Evaluate `x^3 + a x^2 + b x + c` at a complex point.
pub fn eval_monic(a: f64, b: f64, c: f64, x: C64) -> C64 {
    ((x + a) * x + b) * x + c
}

/// Roots of `x^3 + a x^2 + b x + c` with real coefficients.
///
/// Three real roots are computed with the trigonometric form, a single real
/// root plus a conjugate pair with the cancellation-free Cardano form. Real
/// roots get one Newton polish step on the original polynomial when the
/// derivative is not vanishing.
pub fn solve_real_cubic(a: f64, b: f64, c: f64) -> [C64; 3] {
    let shift = -a / 3.0;
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;

    let scale = a.abs().max(b.abs().sqrt()).max(c.abs().cbrt());
    if scale == 0.0 {
        return [C64::new(0.0, 0.0); 3];
    }
    let pn = p / (scale * scale);
    let qn = q / (scale * scale * scale);

    let roots = if pn.abs() < 1e-300 && qn.abs() < 1e-300 {
        [C64::new(shift, 0.0); 3]
    } else {
        let disc = (qn / 2.0).powi(2) + (pn / 3.0).powi(3);
        if disc < 0.0 {
            // pn < 0 is implied
            let r = 2.0 * (-pn / 3.0).sqrt();
            let arg = ((3.0 * qn) / (2.0 * pn) * (-3.0 / pn).sqrt()).clamp(-1.0, 1.0);
            let phi = arg.acos() / 3.0;
            let mut out = [C64::new(0.0, 0.0); 3];
            for (k, slot) in out.iter_mut().enumerate() {
                let y = r * (phi - 2.0 * PI * k as f64 / 3.0).cos();
                *slot = C64::new(shift + y * scale, 0.0);
            }
            out
        } else {
            let sd = disc.sqrt();
            let big_a = -qn.signum() * (qn.abs() / 2.0 + sd).cbrt();
            let big_b = if big_a != 0.0 { -pn / (3.0 * big_a) } else { 0.0 };
            let real = big_a + big_b;
            let re = -real / 2.0;
            let im = 3f64.sqrt() / 2.0 * (big_a - big_b);
            [
                C64::new(shift + real * scale, 0.0),
                C64::new(shift + re * scale, im * scale),
                C64::new(shift + re * scale, -im * scale),
            ]
        }
    };

    let mut polished = roots;
    for root in polished.iter_mut().filter(|r| r.im == 0.0) {
        let x = root.re;
        let f = ((x + a) * x + b) * x + c;
        let df = (3.0 * x + 2.0 * a) * x + b;
        if df.abs() > 1e-8 * scale * scale {
            let next = x - f / df;
            let fn_ = ((next + a) * next + b) * next + c;
            if fn_.abs() <= f.abs() {
                root.re = next;
            }
        }
    }
    polished
}
