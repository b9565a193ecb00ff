//! The rotating-frame Bloch generator and its analytic spectrum.
//!
//! The reduced generator is
//!
//! ```text
//!     | -Γ/2   Δ    0 |
//! M = |  -Δ  -Γ/2   ε |
//!     |   0   -ε   -Γ |
//! ```
//!
//! with relaxation coefficient Γ, detuning Δ and drive ε. Its eigenvalues
//! `m_k` are related to the complex frequencies of the polarization signal by
//! `m_k = -i ω_k`, i.e. `ω_k = i m_k`.

use nalgebra::Matrix3;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::cubic;
use crate::error::{Error, Result};

/// √(1/108): EP3 detuning in units of Γ.
pub const EP3_DETUNING_RATIO: f64 = 0.096_225_044_864_937_62;
/// √(8/108): EP3 drive in units of Γ.
pub const EP3_DRIVE_RATIO: f64 = 0.272_165_526_975_908_7;

/// Tolerance on the normalized discriminant used by [`classify_region`].
pub const REGION_TOL: f64 = 1e-12;

/// Below this value of `|W + ΓX| / scale^3` the closed form is abandoned for
/// the cubic solver.
const CARDANO_SINGULAR: f64 = 1e-14;

/// The generator's three parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlParams {
    /// Relaxation coefficient Γ (1/time).
    pub gamma_rate: f64,
    /// Detuning Δ (angular frequency).
    pub detuning: f64,
    /// Rabi coupling amplitude ε (angular frequency).
    pub drive: f64,
}

impl ControlParams {
    pub fn new(gamma_rate: f64, detuning: f64, drive: f64) -> Result<Self> {
        let p = Self { gamma_rate, detuning, drive };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_rate.is_finite() && self.detuning.is_finite() && self.drive.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite control parameters {self:?}")));
        }
        if self.gamma_rate < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "relaxation coefficient must be >= 0, got {}",
                self.gamma_rate
            )));
        }
        Ok(())
    }

    /// Rabi frequency Ω = √(Δ² + ε²).
    pub fn rabi_frequency(&self) -> f64 {
        self.detuning.hypot(self.drive)
    }

    /// Overall frequency scale √(Γ² + Δ² + ε²), used for normalization.
    pub fn scale(&self) -> f64 {
        (self.gamma_rate.powi(2) + self.detuning.powi(2) + self.drive.powi(2)).sqrt()
    }

    /// Same parameters multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            gamma_rate: self.gamma_rate * c,
            detuning: self.detuning * c,
            drive: self.drive * c,
        }
    }
}

/// Kinetic coefficients of the two-level master equation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RateParams {
    /// Downward rate κ₋.
    pub kappa_down: f64,
    /// Upward rate κ₊.
    pub kappa_up: f64,
    /// Pure dephasing rate γ.
    pub dephasing: f64,
}

impl RateParams {
    pub fn new(kappa_down: f64, kappa_up: f64, dephasing: f64) -> Result<Self> {
        let r = Self { kappa_down, kappa_up, dephasing };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("kappa_down", self.kappa_down),
            ("kappa_up", self.kappa_up),
            ("dephasing", self.dephasing),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// 1/T₁ = κ₊ + κ₋.
    pub fn inv_t1(&self) -> f64 {
        self.kappa_up + self.kappa_down
    }

    /// 1/T₂ = γ + (κ₊ + κ₋)/2.
    pub fn inv_t2(&self) -> f64 {
        self.dephasing + 0.5 * self.inv_t1()
    }

    /// Longitudinal relaxation time; infinite when all rates vanish.
    pub fn t1(&self) -> f64 {
        1.0 / self.inv_t1()
    }

    /// Transverse relaxation time; infinite when all rates vanish.
    pub fn t2(&self) -> f64 {
        1.0 / self.inv_t2()
    }

    /// Γ = κ₋ + κ₊ − γ.
    pub fn gamma_rate(&self) -> f64 {
        self.kappa_down + self.kappa_up - self.dephasing
    }

    /// Γ = (3/2)(1/T₁) − 1/T₂, the same quantity written with relaxation times.
    pub fn gamma_rate_from_times(&self) -> f64 {
        1.5 * self.inv_t1() - self.inv_t2()
    }

    /// Detailed-balance equilibrium polarization (κ₊ − κ₋) / (2(κ₊ + κ₋)), or 0.
    pub fn equilibrium_sz(&self) -> f64 {
        let total = self.inv_t1();
        if total > 0.0 {
            (self.kappa_up - self.kappa_down) / (2.0 * total)
        } else {
            0.0
        }
    }
}

/// The 3×3 generator M.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorMatrix(pub Matrix3<f64>);

impl GeneratorMatrix {
    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// Determinant by cofactor expansion along the first row.
    pub fn cofactor_det(&self) -> f64 {
        let m = &self.0;
        m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
            - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
            + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)])
    }
}

/// Eigenvalues of M.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTriple {
    pub eigenvalues: [C64; 3],
}

impl SpectrumTriple {
    /// Complex frequencies ω_k = i·m_k.
    pub fn frequencies(&self) -> [C64; 3] {
        self.eigenvalues.map(|m| C64::i() * m)
    }

    pub fn from_frequencies(omega: [C64; 3]) -> Self {
        Self { eigenvalues: omega.map(|w| -C64::i() * w) }
    }

    pub fn sum(&self) -> C64 {
        self.eigenvalues.iter().sum()
    }

    pub fn product(&self) -> C64 {
        self.eigenvalues.iter().product()
    }

    /// Smallest pairwise distance between eigenvalues (equal to the
    /// smallest frequency gap).
    pub fn min_gap(&self) -> f64 {
        let e = &self.eigenvalues;
        (e[0] - e[1]).norm().min((e[1] - e[2]).norm()).min((e[2] - e[0]).norm())
    }
}

/// Auxiliary quantities of the closed-form spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpAuxiliaries {
    /// X = −36Δ² + 18ε² − Γ².
    pub x: f64,
    /// Y = 12Δ² + 12ε² − Γ².
    pub y: f64,
    /// W = √(Γ²X² + Y³), principal branch.
    pub w: C64,
    /// Γ⁴Δ² + 16(Δ² + ε²)³ + Γ²(8Δ⁴ − 20Δ²ε² − ε⁴), vanishing on the EP2 curve.
    pub ep2_poly: f64,
    /// Γ²X² + Y³ (= 108 · `ep2_poly`).
    pub radicand: f64,
}

/// Eigenvalue structure of a parameter point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Region {
    AllReal,
    ComplexPair,
    Degenerate,
}

impl Region {
    pub fn as_str(&self) -> &'static str {
        match self {
            Region::AllReal => "all-real",
            Region::ComplexPair => "complex-pair",
            Region::Degenerate => "degenerate",
        }
    }
}

/// Coefficients of the monic cubic `ω³ + rω² + sω + t` whose roots are the
/// frequencies ω_k.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharCoeffs {
    pub r: C64,
    pub s: C64,
    pub t: C64,
}

impl CharCoeffs {
    /// Vieta's formulas applied to three frequencies.
    pub fn from_frequencies(w: &[C64; 3]) -> Self {
        Self {
            r: -(w[0] + w[1] + w[2]),
            s: w[0] * w[1] + w[1] * w[2] + w[2] * w[0],
            t: -(w[0] * w[1] * w[2]),
        }
    }

    pub fn eval(&self, w: C64) -> C64 {
        ((w + self.r) * w + self.s) * w + self.t
    }

    /// Depressed-cubic coefficients (p, q): the roots of `z³ + p z + q` are
    /// `ω_k + r/3`.
    pub fn depressed(&self) -> (C64, C64) {
        let r = self.r;
        let s = self.s;
        let p = s - r * r / 3.0;
        let q = 2.0 / 27.0 * r * r * r - r * s / 3.0 + self.t;
        (p, q)
    }

    /// Γ²X² + Y³ recovered from the coefficients alone.
    ///
    /// In the eigenvalue variable m = −iω the depressed cubic has real
    /// coefficients P = −p and Q = −i q, and Γ²X² + Y³ = 216²(Q²/4 + P³/27).
    pub fn radicand(&self) -> f64 {
        let (p, q) = self.depressed();
        let big_p = -p.re;
        let big_q = q.im;
        11664.0 * big_q * big_q + 1728.0 * big_p * big_p * big_p
    }
}

/// Builds M for the given controls.
pub fn build_matrix(p: &ControlParams) -> GeneratorMatrix {
    let g = p.gamma_rate;
    let d = p.detuning;
    let e = p.drive;
    GeneratorMatrix(Matrix3::new(
        -0.5 * g, d, 0.0, //
        -d, -0.5 * g, e, //
        0.0, -e, -g,
    ))
}

/// Relaxation coefficient Γ = κ₋ + κ₊ − γ together with the field parameters.
pub fn rates_to_controls(r: &RateParams, detuning: f64, drive: f64) -> Result<ControlParams> {
    r.validate()?;
    let gamma = r.gamma_rate();
    if gamma < 0.0 {
        // dephasing-dominated bath: M is still defined, but Γ < 0 sits outside
        // the range `ControlParams::validate` accepts
        return Ok(ControlParams { gamma_rate: gamma, detuning, drive });
    }
    ControlParams::new(gamma, detuning, drive)
}

pub fn auxiliaries(p: &ControlParams) -> EpAuxiliaries {
    let g2 = p.gamma_rate * p.gamma_rate;
    let d2 = p.detuning * p.detuning;
    let e2 = p.drive * p.drive;
    let x = -36.0 * d2 + 18.0 * e2 - g2;
    let y = 12.0 * d2 + 12.0 * e2 - g2;
    let ep2_poly = g2 * g2 * d2 + 16.0 * (d2 + e2).powi(3) + g2 * (8.0 * d2 * d2 - 20.0 * d2 * e2 - e2 * e2);
    // X and Y are small near EP3, so this form avoids the cancellation
    // between the Γ⁶-sized terms of the expanded polynomial
    let radicand = g2 * x * x + y * y * y;
    let w = if radicand >= 0.0 {
        C64::new(radicand.sqrt(), 0.0)
    } else {
        C64::new(0.0, (-radicand).sqrt())
    };
    EpAuxiliaries { x, y, w, ep2_poly, radicand }
}

/// Coefficients (a, b, c) of det(mI − M) = m³ + a m² + b m + c.
fn char_poly_m(p: &ControlParams) -> (f64, f64, f64) {
    let g = p.gamma_rate;
    let d2 = p.detuning * p.detuning;
    let e2 = p.drive * p.drive;
    let a = 2.0 * g;
    let b = 1.25 * g * g + d2 + e2;
    let c = 0.25 * g * g * g + 0.5 * e2 * g + d2 * g;
    (a, b, c)
}

/// Closed-form eigenvalues of M (Cardano form in the auxiliaries X, Y, W).
///
/// The principal cube root is taken; the sign of W is chosen to maximise
/// |W + ΓX| (both signs give the same root set). When that quantity
/// vanishes relative to the parameter scale, the cubic is solved directly.
/// Exact structure is restored afterwards: in the all-real region imaginary
/// parts are dropped, in the complex-pair region the pair is made exactly
/// conjugate.
pub fn eigenvalues_closed_form(p: &ControlParams) -> SpectrumTriple {
    let g = p.gamma_rate;
    let scale = p.scale();
    if scale == 0.0 {
        return SpectrumTriple { eigenvalues: [C64::new(0.0, 0.0); 3] };
    }
    let aux = auxiliaries(p);
    let (a, b, c) = char_poly_m(p);
    let gx = C64::new(g * aux.x, 0.0);
    let mut u3 = aux.w + gx;
    let alt = -aux.w + gx;
    if alt.norm() > u3.norm() {
        u3 = alt;
    }

    let mut eig = None;
    if u3.norm() > CARDANO_SINGULAR * scale.powi(3) {
        let cr = u3.powf(1.0 / 3.0);
        let zeta = C64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
        let base = -2.0 / 3.0 * g;
        let rot = [C64::new(1.0, 0.0), zeta, zeta.conj()];
        let m = rot.map(|z| {
            let u = z * cr;
            base + (u - aux.y / u) / 6.0
        });
        let worst = m
            .iter()
            .map(|&mk| cubic::eval_monic(a, b, c, mk).norm())
            .fold(0.0, f64::max);
        if worst <= 1e-8 * scale.powi(3) {
            eig = Some(m);
        }
    }
    let mut m = eig.unwrap_or_else(|| cubic::solve_real_cubic(a, b, c));

    let normalized = aux.radicand / scale.powi(6);
    if normalized < -REGION_TOL {
        for mk in m.iter_mut() {
            mk.im = 0.0;
        }
    } else if normalized > REGION_TOL {
        let real_idx = (0..3)
            .min_by(|&i, &j| m[i].im.abs().partial_cmp(&m[j].im.abs()).unwrap())
            .unwrap();
        m[real_idx].im = 0.0;
        let others: Vec<usize> = (0..3).filter(|&k| k != real_idx).collect();
        let (i, j) = (others[0], others[1]);
        let avg = (m[i] + m[j].conj()) / 2.0;
        m[i] = avg;
        m[j] = avg.conj();
    }
    SpectrumTriple { eigenvalues: m }
}

/// Classifies the eigenvalue structure by the sign of the normalized
/// discriminant (Γ²X² + Y³)/(Γ² + Δ² + ε²)³.
///
/// Negative values mean three real eigenvalues (the inside of the EP2
/// triangle), positive values a real eigenvalue plus a conjugate pair.
pub fn classify_region(p: &ControlParams) -> Region {
    let scale = p.scale();
    if scale == 0.0 {
        return Region::Degenerate;
    }
    let v = auxiliaries(p).radicand / scale.powi(6);
    if v < -REGION_TOL {
        Region::AllReal
    } else if v > REGION_TOL {
        Region::ComplexPair
    } else {
        Region::Degenerate
    }
}

/// Coefficients of ∏(ω − ω_k) computed analytically from the controls.
pub fn char_coeffs(p: &ControlParams) -> CharCoeffs {
    // ∏(ω − i m_k) = −i · det(mI − M) at m = −iω
    let (a, b, c) = char_poly_m(p);
    CharCoeffs {
        r: C64::new(0.0, a),
        s: C64::new(-b, 0.0),
        t: C64::new(0.0, -c),
    }
}

/// The pair (p, q) of the depressed cubic; both vanish exactly at EP3.
pub fn discriminant_pq(p: &ControlParams) -> (C64, C64) {
    char_coeffs(p).depressed()
}

/// The two EP3 points for a given Γ, the +Δ branch first.
pub fn ep3_locus(gamma_rate: f64) -> Result<[ControlParams; 2]> {
    if !(gamma_rate > 0.0) || !gamma_rate.is_finite() {
        return Err(Error::InvalidParameter(format!("EP3 locus needs Γ > 0, got {gamma_rate}")));
    }
    let d = EP3_DETUNING_RATIO * gamma_rate;
    let e = EP3_DRIVE_RATIO * gamma_rate;
    Ok([
        ControlParams { gamma_rate, detuning: d, drive: e },
        ControlParams { gamma_rate, detuning: -d, drive: e },
    ])
}
