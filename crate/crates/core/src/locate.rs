//! Locating exceptional points in the control plane.
//!
//! Three procedures are provided: a 1-D scan for EP2 crossings, the valley
//! ascend on the objective F towards the EP3 cusp, and a 2-D root search on
//! the depressed-cubic coefficients (p, q). All of them talk to the system
//! through a [`Probe`], which returns the three complex frequencies at a
//! control point either from the closed form or from a simulated and
//! inverted signal.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bloch::{
    auxiliaries, build_matrix, char_coeffs, classify_region, eigenvalues_closed_form, CharCoeffs,
    ControlParams, RateParams, Region, REGION_TOL,
};
use crate::error::{Error, Result};
use crate::harminv::{min_pairwise_gap, standard_invert, InversionConfig};
use crate::optim::{golden_section, nelder_mead};
use crate::propagator::{add_noise, simulate, BlochState, TimeSeries};

/// Default cap on F (natural-log scale).
pub const F_CAP: f64 = 80.0;

/// Where the frequencies come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveMode {
    /// Closed-form spectrum.
    Oracle,
    /// Simulated polarization signal followed by harmonic inversion.
    Experimental,
}

impl std::str::FromStr for ObjectiveMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(Self::Oracle),
            "experimental" => Ok(Self::Experimental),
            _ => Err(Error::InvalidParameter(format!("unknown mode `{s}`"))),
        }
    }
}

/// Signal acquisition settings for experimental mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentalConfig {
    pub samples: usize,
    /// Sampling step; `None` means 0.1/Γ.
    pub dt: Option<f64>,
    /// Standard deviation of additive Gaussian noise.
    pub noise: f64,
    /// Number of noisy records averaged per measurement.
    pub averages: usize,
    /// Run seed; record k uses `(seed << 32) + k` at every control point.
    pub seed: u64,
    pub inversion: InversionConfig,
}

impl Default for ExperimentalConfig {
    fn default() -> Self {
        Self {
            samples: 2000,
            dt: None,
            noise: 0.0,
            averages: 1,
            seed: 0,
            inversion: InversionConfig::default(),
        }
    }
}

/// The objective F(Δ, ε) at fixed Γ, with an evaluation counter.
#[derive(Debug)]
pub struct Objective {
    pub mode: ObjectiveMode,
    pub gamma_rate: f64,
    pub experimental: ExperimentalConfig,
    pub f_cap: f64,
    evaluations: AtomicUsize,
}

impl Clone for Objective {
    fn clone(&self) -> Self {
        Self {
            mode: self.mode,
            gamma_rate: self.gamma_rate,
            experimental: self.experimental,
            f_cap: self.f_cap,
            evaluations: AtomicUsize::new(self.evaluations()),
        }
    }
}

impl Objective {
    pub fn new(mode: ObjectiveMode, gamma_rate: f64, experimental: ExperimentalConfig) -> Result<Self> {
        if !(gamma_rate > 0.0) || !gamma_rate.is_finite() {
            return Err(Error::InvalidParameter(format!("objective needs Γ > 0, got {gamma_rate}")));
        }
        if mode == ObjectiveMode::Experimental {
            experimental.inversion.validate()?;
            if experimental.inversion.model_order != 3 {
                return Err(Error::InvalidParameter("experimental mode needs model order 3".into()));
            }
            if experimental.averages == 0 || !(experimental.noise >= 0.0) {
                return Err(Error::InvalidParameter("need averages >= 1 and noise >= 0".into()));
            }
            if let Some(dt) = experimental.dt {
                if !(dt > 0.0) {
                    return Err(Error::InvalidParameter(format!("time step must be > 0, got {dt}")));
                }
            }
        }
        Ok(Self { mode, gamma_rate, experimental, f_cap: F_CAP, evaluations: AtomicUsize::new(0) })
    }

    pub fn oracle(gamma_rate: f64) -> Result<Self> {
        Self::new(ObjectiveMode::Oracle, gamma_rate, ExperimentalConfig::default())
    }

    pub fn experimental(gamma_rate: f64, cfg: ExperimentalConfig) -> Result<Self> {
        Self::new(ObjectiveMode::Experimental, gamma_rate, cfg)
    }

    /// Number of measurements made so far.
    pub fn evaluations(&self) -> usize {
        self.evaluations.load(Ordering::Relaxed)
    }

    pub fn controls(&self, delta: f64, eps: f64) -> ControlParams {
        ControlParams { gamma_rate: self.gamma_rate, detuning: delta, drive: eps }
    }

    pub fn sampling_step(&self) -> f64 {
        self.experimental.dt.unwrap_or(0.1 / self.gamma_rate)
    }

    /// The (possibly averaged) signal recorded in experimental mode.
    pub fn record(&self, p: &ControlParams) -> Result<TimeSeries> {
        let cfg = &self.experimental;
        let clean = simulate(p, &RateParams::default(), &BlochState::ground_state(), cfg.samples, self.sampling_step())?;
        if cfg.noise == 0.0 {
            return Ok(clean);
        }
        let records = (0..cfg.averages as u64)
            .map(|k| add_noise(&clean, cfg.noise, (cfg.seed << 32).wrapping_add(k)))
            .collect::<Result<Vec<_>>>()?;
        TimeSeries::average(&records)
    }

    fn measure_oracle(&self, p: &ControlParams) -> Measurement {
        let frequencies = eigenvalues_closed_form(p).frequencies();
        let coeffs = char_coeffs(p);
        Measurement::build(
            frequencies,
            coeffs,
            auxiliaries(p).radicand / self.gamma_rate.powi(6),
            oracle_amp_norm(p),
            3,
            Some(classify_region(p)),
            self.f_cap,
        )
    }

    fn measure_experimental(&self, p: &ControlParams) -> Result<Measurement> {
        let s = self.record(p)?;
        let r = standard_invert(&s, &self.experimental.inversion)?;
        let w: [C64; 3] = r
            .frequencies
            .as_slice()
            .try_into()
            .map_err(|_| Error::Numerical("expected three frequencies".into()))?;
        let coeffs = CharCoeffs::from_frequencies(&w);
        let radicand = coeffs.radicand() / self.gamma_rate.powi(6);
        let region = (r.subspace_rank >= 3).then(|| {
            if radicand < -REGION_TOL {
                Region::AllReal
            } else if radicand > REGION_TOL {
                Region::ComplexPair
            } else {
                Region::Degenerate
            }
        });
        Ok(Measurement::build(w, coeffs, radicand, r.amp_norm, r.subspace_rank, region, self.f_cap))
    }
}

/// Amplitudes of the ground-state S_z signal on the exponentials e^{m_k t},
/// from the first three time derivatives at t = 0. Infinite when two
/// eigenvalues coincide.
fn oracle_amp_norm(p: &ControlParams) -> f64 {
    let m = build_matrix(p).0;
    let x0 = BlochState::ground_state().vector();
    let mx = m * x0;
    let mmx = m * mx;
    let moments = Vector3::new(C64::new(x0[2], 0.0), C64::new(mx[2], 0.0), C64::new(mmx[2], 0.0));
    let e = eigenvalues_closed_form(p).eigenvalues;
    let v = Matrix3::from_fn(|j, k| e[k].powi(j as i32));
    match v.lu().solve(&moments) {
        Some(d) if d.iter().all(|z| z.re.is_finite() && z.im.is_finite()) => d.iter().map(|z| z.norm()).sum(),
        _ => f64::INFINITY,
    }
}

/// Everything a search needs to know about one control point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub frequencies: [C64; 3],
    pub coeffs: CharCoeffs,
    /// (Γ²X² + Y³)/Γ⁶ from the frequencies' symmetric functions: negative
    /// inside the EP2 triangle.
    pub radicand: f64,
    pub min_gap: f64,
    pub amp_norm: f64,
    pub rank: usize,
    /// `None` when fewer than three modes were resolved.
    pub region: Option<Region>,
    pub f_value: f64,
}

impl Measurement {
    fn build(
        frequencies: [C64; 3],
        coeffs: CharCoeffs,
        radicand: f64,
        amp_norm: f64,
        rank: usize,
        region: Option<Region>,
        cap: f64,
    ) -> Self {
        Self {
            frequencies,
            coeffs,
            radicand,
            min_gap: min_pairwise_gap(&frequencies),
            amp_norm,
            rank,
            region,
            f_value: f_from_coeffs(&coeffs, cap),
        }
    }

    /// Inside the all-real region with all three modes resolved.
    pub fn is_interior(&self) -> bool {
        self.rank >= 3 && self.radicand < 0.0
    }

    /// (p, q) normalized to be dimensionless: (Re p / Γ², Im q / Γ³).
    pub fn pq(&self, gamma_rate: f64) -> [f64; 2] {
        let (p, q) = self.coeffs.depressed();
        [p.re / gamma_rate.powi(2), q.im / gamma_rate.powi(3)]
    }
}

/// F = −ln|(ω₁−ω₂)(ω₂−ω₃)(ω₃−ω₁)|, capped.
///
/// The product of the gaps is evaluated as the square root of the cubic's
/// discriminant −4p³ − 27q², which is far less sensitive to rounding near
/// a multiple root than the individual differences. A discriminant at the
/// rounding level of its two terms counts as exact degeneracy.
pub fn f_from_coeffs(c: &CharCoeffs, cap: f64) -> f64 {
    let (p, q) = c.depressed();
    let a = -4.0 * p * p * p;
    let b = -27.0 * q * q;
    let disc = (a + b).norm();
    if disc <= 64.0 * f64::EPSILON * (a.norm() + b.norm()) || disc == 0.0 {
        return cap;
    }
    (-0.5 * disc.ln()).min(cap)
}

/// F computed directly from three frequencies.
pub fn f_from_frequencies(w: &[C64; 3], cap: f64) -> f64 {
    f_from_coeffs(&CharCoeffs::from_frequencies(w), cap)
}

/// A measurement device over a 2-D control plane.
pub trait Probe: Sync {
    fn measure(&self, x: f64, y: f64) -> Result<Measurement>;
    /// Characteristic decay rate, used to normalize (p, q) and the radicand.
    fn rate_scale(&self) -> f64;
    /// Typical extent of the interesting region along each axis.
    fn length_scale(&self) -> [f64; 2];
    /// Sign of dΔ/dx.
    fn delta_sign(&self) -> f64 {
        1.0
    }
    fn axes(&self) -> [&'static str; 2] {
        ["delta", "eps"]
    }
    /// Sign of Δ at a control point: +1, −1, or 0 when it cannot be told.
    fn branch(&self, at: [f64; 2]) -> i8 {
        let s = at[0] * self.delta_sign();
        if s > 0.0 {
            1
        } else if s < 0.0 {
            -1
        } else {
            0
        }
    }
    fn evaluations(&self) -> usize;
}

impl Probe for Objective {
    fn measure(&self, delta: f64, eps: f64) -> Result<Measurement> {
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        let p = self.controls(delta, eps);
        p.validate()?;
        match self.mode {
            ObjectiveMode::Oracle => Ok(self.measure_oracle(&p)),
            ObjectiveMode::Experimental => self.measure_experimental(&p),
        }
    }

    fn rate_scale(&self) -> f64 {
        self.gamma_rate
    }

    fn length_scale(&self) -> [f64; 2] {
        [self.gamma_rate, self.gamma_rate]
    }

    fn evaluations(&self) -> usize {
        Objective::evaluations(self)
    }
}

/// F at (Δ, ε).
pub fn evaluate_f(delta: f64, eps: f64, obj: &Objective) -> Result<f64> {
    Ok(obj.measure(delta, eps)?.f_value)
}

/// Measures a rectangular grid, rows ordered by y then x.
pub fn grid_measure<P: Probe>(probe: &P, xs: &[f64], ys: &[f64]) -> Vec<(f64, f64, Result<Measurement>)> {
    let pts: Vec<(f64, f64)> = ys.iter().flat_map(|&y| xs.iter().map(move |&x| (x, y))).collect();
    pts.into_par_iter().map(|(x, y)| (x, y, probe.measure(x, y))).collect()
}

/// `n` evenly spaced values from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Outcome of a search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchStatus {
    Converged,
    NotFound,
    Stagnated,
    MaxIterations,
}

/// One visited point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub x: f64,
    pub y: f64,
    pub f_value: f64,
    /// Arc radius (valley ascend only).
    pub radius: Option<f64>,
    /// Angular range of the arc in radians (valley ascend only).
    pub angle_lo: Option<f64>,
    pub angle_hi: Option<f64>,
    pub accepted: bool,
}

/// The path of a search.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub steps: Vec<TraceStep>,
}

impl SearchTrace {
    fn push(&mut self, x: f64, y: f64, f_value: f64, accepted: bool) {
        self.steps.push(TraceStep { x, y, f_value, radius: None, angle_lo: None, angle_hi: None, accepted });
    }

    /// Accepted points only.
    pub fn accepted(&self) -> impl Iterator<Item = &TraceStep> {
        self.steps.iter().filter(|s| s.accepted)
    }

    pub fn to_csv(&self, axes: [&str; 2]) -> String {
        let opt = |v: Option<f64>| v.map(|v| format!("{v:.16e}")).unwrap_or_default();
        let mut out = format!("step,{},{},f_value,radius,angle_lo,angle_hi,accepted\n", axes[0], axes[1]);
        for (i, s) in self.steps.iter().enumerate() {
            let _ = writeln!(
                out,
                "{i},{:.16e},{:.16e},{:.16e},{},{},{},{}",
                s.x,
                s.y,
                s.f_value,
                opt(s.radius),
                opt(s.angle_lo),
                opt(s.angle_hi),
                u8::from(s.accepted)
            );
        }
        out
    }
}

/// Result of an EP search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpReport {
    /// Names of the two control axes.
    pub axes: [String; 2],
    pub location: [f64; 2],
    /// 2 or 3.
    pub order: u8,
    pub status: SearchStatus,
    pub f_value: f64,
    pub min_gap: f64,
    /// Infinite at an exact degeneracy; written as `null` in JSON.
    #[serde(deserialize_with = "null_as_infinity")]
    pub amp_norm: f64,
    /// Frequencies measured at `location`.
    pub frequencies: [C64; 3],
    /// |p| + |q| (normalized) at `location`.
    pub pq_residual: f64,
    /// Sign of the detuning at `location` (+1 or −1, 0 when undecided).
    pub branch: i8,
    pub iterations: usize,
    pub evaluations: usize,
    pub trace: SearchTrace,
}

fn null_as_infinity<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

impl EpReport {
    fn new<P: Probe>(probe: &P, at: [f64; 2], m: &Measurement, order: u8, status: SearchStatus) -> Self {
        let pq = m.pq(probe.rate_scale());
        Self {
            axes: probe.axes().map(String::from),
            location: at,
            order,
            status,
            f_value: m.f_value,
            min_gap: m.min_gap,
            amp_norm: m.amp_norm,
            frequencies: m.frequencies,
            pq_residual: pq[0].abs() + pq[1].abs(),
            branch: probe.branch(at),
            iterations: 0,
            evaluations: 0,
            trace: SearchTrace::default(),
        }
    }

    pub fn converged(&self) -> bool {
        self.status == SearchStatus::Converged
    }
}

/// Settings of [`scan_ep2`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanConfig {
    /// Bisection stops when the bracket is shorter than this times Γ.
    pub rel_tol: f64,
    pub max_bisections: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-13, max_bisections: 200 }
    }
}

/// Scans Δ over `range` at fixed ε for a crossing of the EP2 curve.
///
/// Grid points are classified by the sign of the radicand; the crossing
/// nearest the smallest frequency gap is refined by bisection on that sign.
/// Without a crossing the line is checked for touching the curve; failing
/// that the report has status `NotFound` and sits at the smallest gap on the
/// grid.
pub fn scan_ep2(obj: &Objective, eps: f64, range: (f64, f64), steps: usize, cfg: &ScanConfig) -> Result<EpReport> {
    let (a, b) = range;
    if !(a.is_finite() && b.is_finite()) || a == b {
        return Err(Error::InvalidParameter(format!("degenerate scan range [{a}, {b}]")));
    }
    if steps < 3 {
        return Err(Error::InvalidParameter("scan needs at least 3 steps".into()));
    }
    let xs = linspace(a, b, steps);
    let rows = grid_measure(obj, &xs, &[eps]);
    let mut trace = SearchTrace::default();
    let mut grid = Vec::with_capacity(steps);
    for (x, _, m) in rows {
        let m = m?;
        trace.push(x, eps, m.f_value, false);
        grid.push((x, m));
    }
    let best = (0..grid.len())
        .min_by(|&i, &j| grid[i].1.min_gap.total_cmp(&grid[j].1.min_gap))
        .expect("nonempty grid");
    let resolved = |m: &Measurement| m.rank >= 3;
    let crossings: Vec<usize> = (0..grid.len() - 1)
        .filter(|&i| {
            let (l, r) = (&grid[i].1, &grid[i + 1].1);
            resolved(l) && resolved(r) && (l.radicand < 0.0) != (r.radicand < 0.0)
        })
        .collect();
    let Some(&i) = crossings
        .iter()
        .min_by_key(|&&i| (i as isize - best as isize).abs().min((i as isize + 1 - best as isize).abs()))
    else {
        return touch_point(obj, eps, &grid, best, trace);
    };
    let (mut lo, mut hi) = (grid[i].0, grid[i + 1].0);
    let inside_lo = grid[i].1.radicand < 0.0;
    let tol = cfg.rel_tol * obj.gamma_rate;
    let mut iterations = 0;
    while (hi - lo).abs() > tol && iterations < cfg.max_bisections {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let m = obj.measure(mid, eps)?;
        trace.push(mid, eps, m.f_value, true);
        if (m.radicand < 0.0) == inside_lo {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let x = 0.5 * (lo + hi);
    let m = obj.measure(x, eps)?;
    let mut rep = EpReport::new(obj, [x, eps], &m, 2, SearchStatus::Converged);
    rep.iterations = iterations;
    rep.trace = trace;
    rep.evaluations = obj.evaluations();
    Ok(rep)
}

/// Without a sign change the line may still touch the EP2 curve, as it does
/// on the ε line of the EP3. The normalized |radicand| is minimized next to
/// the smallest gap and accepted as a degeneracy at the region tolerance.
fn touch_point(
    obj: &Objective,
    eps: f64,
    grid: &[(f64, Measurement)],
    best: usize,
    mut trace: SearchTrace,
) -> Result<EpReport> {
    let lo = grid[best.saturating_sub(1)].0;
    let hi = grid[(best + 1).min(grid.len() - 1)].0;
    let level = |x: f64| -> f64 {
        match obj.measure(x, eps) {
            Ok(m) if m.rank >= 3 => (m.radicand.abs() / obj.controls(x, eps).scale().powi(6)).sqrt(),
            _ => f64::INFINITY,
        }
    };
    let (x, v) = golden_section(level, lo, hi, 1e-12 * (hi - lo).abs(), 200);
    let m = obj.measure(x, eps)?;
    trace.push(x, eps, m.f_value, true);
    let (at, m, status) = if v * v <= REGION_TOL {
        (x, m, SearchStatus::Converged)
    } else {
        (grid[best].0, grid[best].1.clone(), SearchStatus::NotFound)
    };
    let mut rep = EpReport::new(obj, [at, eps], &m, 2, status);
    rep.trace = trace;
    rep.evaluations = obj.evaluations();
    Ok(rep)
}

/// Interior seeds from a sweep: all resolved all-real grid points.
pub fn interior_points<P: Probe>(probe: &P, xs: &[f64], ys: &[f64]) -> Result<Vec<(f64, f64, Measurement)>> {
    let mut out = Vec::new();
    for (x, y, m) in grid_measure(probe, xs, ys) {
        match m {
            Ok(m) if m.is_interior() => out.push((x, y, m)),
            Ok(_) => {}
            Err(Error::InvalidParameter(msg)) => return Err(Error::InvalidParameter(msg)),
            Err(_) => {}
        }
    }
    Ok(out)
}

/// A point inside the EP2 triangle: the candidate if it is interior,
/// otherwise the interior grid point closest to it (positive Δ first).
pub fn seed_interior_from(obj: &Objective, candidate: (f64, f64)) -> Result<(f64, f64)> {
    if let Ok(m) = obj.measure(candidate.0, candidate.1) {
        if m.is_interior() {
            return Ok(candidate);
        }
    }
    let g = obj.gamma_rate;
    let mut grid: Vec<(f64, f64)> = linspace(0.01 * g, 0.27 * g, 14)
        .into_iter()
        .flat_map(|y| linspace(-0.1 * g, 0.1 * g, 21).into_iter().map(move |x| (x, y)))
        .collect();
    let d = |p: &(f64, f64)| (p.0 - candidate.0).hypot(p.1 - candidate.1);
    grid.sort_by(|a, b| d(a).total_cmp(&d(b)).then(b.0.total_cmp(&a.0)));
    for (x, y) in grid {
        match obj.measure(x, y) {
            Ok(m) if m.is_interior() => return Ok((x, y)),
            Err(Error::InvalidParameter(msg)) => return Err(Error::InvalidParameter(msg)),
            _ => {}
        }
    }
    Err(Error::NoConvergence("no interior point found on the seed grid".into()))
}

/// A point inside the EP2 triangle, by default (0, Γ/8).
pub fn seed_interior(obj: &Objective) -> Result<(f64, f64)> {
    seed_interior_from(obj, (0.0, obj.gamma_rate / 8.0))
}

/// Settings of [`valley_ascend`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValleyConfig {
    pub max_iter: usize,
    /// Initial half-width of the angular range, degrees.
    pub half_angle_deg: f64,
    /// Narrow or widen the range depending on where the arc minimum fell.
    pub adaptive: bool,
    /// Rays used to find the distance to the EP2 curve.
    pub rays: usize,
    /// Coarse samples on the arc before golden-section refinement.
    pub arc_samples: usize,
    /// Stop when the radius falls below this (in units of the length scale).
    pub step_tol: f64,
    /// Relative accuracy of the distance to the EP2 curve.
    pub boundary_tol: f64,
    /// Failed iterations tolerated in a row.
    pub stagnation: usize,
    /// On the first arc, only search the half with this sign of Δ.
    pub prefer_side: Option<f64>,
}

impl Default for ValleyConfig {
    fn default() -> Self {
        Self {
            max_iter: 50,
            half_angle_deg: 45.0,
            adaptive: true,
            rays: 7,
            arc_samples: 21,
            step_tol: 1e-9,
            boundary_tol: 1e-3,
            stagnation: 3,
            prefer_side: Some(1.0),
        }
    }
}

/// Distance from `p` along `dir` to the first exterior point, in normalized
/// units, or `None` if none is found within `s_max`.
fn boundary_distance<P: Probe>(
    probe: &P,
    scale: [f64; 2],
    p: [f64; 2],
    theta: f64,
    guess: f64,
    rel_tol: f64,
    s_max: f64,
) -> Option<f64> {
    let at = |s: f64| -> bool {
        let x = (p[0] + s * theta.cos()) * scale[0];
        let y = (p[1] + s * theta.sin()) * scale[1];
        probe.measure(x, y).map(|m| m.is_interior()).unwrap_or(false)
    };
    let (mut lo, mut hi) = (0.0, guess.max(1e-12));
    while at(hi) {
        lo = hi;
        hi *= 2.0;
        if hi > s_max {
            return None;
        }
    }
    while hi - lo > rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        if at(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

/// Climbs the valley of F from an interior point towards the EP3.
///
/// The start is first moved to the minimum of F on the vertical line through
/// it. Each iteration then takes the distance r to the EP2 curve within the
/// current angular range, minimizes F on the arc of radius r over that range,
/// and accepts the minimum if F increased. Exterior points on the arc count as
/// walls at the cap value.
pub fn valley_ascend<P: Probe>(probe: &P, start: (f64, f64), cfg: &ValleyConfig) -> Result<EpReport> {
    let scale = probe.length_scale();
    let cap = F_CAP;
    let m0 = probe.measure(start.0, start.1)?;
    if !m0.is_interior() {
        return Err(Error::InvalidParameter(format!(
            "valley ascend must start inside the all-real region, ({}, {}) is not",
            start.0, start.1
        )));
    }
    let eval = |u: [f64; 2]| -> f64 {
        match probe.measure(u[0] * scale[0], u[1] * scale[1]) {
            Ok(m) if m.is_interior() => m.f_value,
            _ => cap,
        }
    };
    let mut p = [start.0 / scale[0], start.1 / scale[1]];
    let mut trace = SearchTrace::default();
    trace.push(start.0, start.1, m0.f_value, false);

    // drop to the valley floor along the vertical line through the start
    let up = boundary_distance(probe, scale, p, PI / 2.0, 0.05, cfg.boundary_tol, 100.0);
    let down = boundary_distance(probe, scale, p, -PI / 2.0, 0.05, cfg.boundary_tol, 100.0);
    let (y_lo, y_hi) = (p[1] - down.unwrap_or(0.0), p[1] + up.unwrap_or(0.0));
    let (y_floor, f_floor) = golden_section(|y| eval([p[0], y]), y_lo, y_hi, 1e-12 * (y_hi - y_lo), 200);
    let mut fp = m0.f_value;
    if f_floor < fp {
        p[1] = y_floor;
        fp = f_floor;
    }
    trace.push(p[0] * scale[0], p[1] * scale[1], fp, true);

    let mut dir = PI / 2.0;
    let h_max = cfg.half_angle_deg.to_radians();
    let mut h = h_max;
    let mut radius_guess = 0.05;
    let mut fails = 0;
    let mut status = SearchStatus::MaxIterations;
    let mut iterations = 0;
    let side = cfg.prefer_side.map(|s| s * probe.delta_sign());

    for it in 0..cfg.max_iter {
        iterations = it + 1;
        let (lo, hi) = match side {
            Some(s) if it == 0 && s > 0.0 => (dir - h, dir),
            Some(s) if it == 0 && s < 0.0 => (dir, dir + h),
            _ => (dir - h, dir + h),
        };
        let rays = cfg.rays.max(2);
        let thetas = linspace(lo, hi, rays);
        let dists: Vec<Option<f64>> = thetas
            .par_iter()
            .map(|&t| boundary_distance(probe, scale, p, t, radius_guess, cfg.boundary_tol, 100.0))
            .collect();
        let Some(r) = dists.iter().flatten().copied().reduce(f64::min) else {
            return Err(Error::NoConvergence("no EP2 curve within the angular range".into()));
        };
        radius_guess = r.max(1e-12);
        if r < cfg.step_tol {
            status = SearchStatus::Converged;
            break;
        }
        let arc = |t: f64| [p[0] + r * t.cos(), p[1] + r * t.sin()];
        let samples = cfg.arc_samples.max(3);
        let ts = linspace(lo, hi, samples);
        let fs: Vec<f64> = ts.par_iter().map(|&t| eval(arc(t))).collect();
        let k = (0..samples).min_by(|&i, &j| fs[i].total_cmp(&fs[j])).unwrap();
        let (a, b) = (ts[k.saturating_sub(1)], ts[(k + 1).min(samples - 1)]);
        let (t_best, f_best) = golden_section(|t| eval(arc(t)), a, b, 1e-12 * (hi - lo), 200);
        let (t_best, f_best) = if fs[k] < f_best { (ts[k], fs[k]) } else { (t_best, f_best) };
        let q = arc(t_best);
        let accepted = f_best > fp && f_best < cap;
        trace.steps.push(TraceStep {
            x: q[0] * scale[0],
            y: q[1] * scale[1],
            f_value: f_best,
            radius: Some(r),
            angle_lo: Some(lo),
            angle_hi: Some(hi),
            accepted,
        });
        if accepted {
            fails = 0;
            let centre = 0.5 * (lo + hi);
            let half = 0.5 * (hi - lo);
            if cfg.adaptive {
                if (t_best - centre).abs() < 0.9 * half {
                    h = 0.5 * half;
                } else {
                    h = (2.0 * half).min(h_max);
                }
            }
            dir = t_best;
            p = q;
            fp = f_best;
        } else {
            fails += 1;
            h *= 0.5;
            if fails >= cfg.stagnation {
                status = SearchStatus::Stagnated;
                break;
            }
        }
    }
    let at = [p[0] * scale[0], p[1] * scale[1]];
    let m = probe.measure(at[0], at[1])?;
    let mut rep = EpReport::new(probe, at, &m, 3, status);
    rep.f_value = fp;
    rep.iterations = iterations;
    rep.trace = trace;
    rep.evaluations = probe.evaluations();
    Ok(rep)
}

/// Settings of [`root_search_pq`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RootConfig {
    pub max_iter: usize,
    /// Target for |p| + |q| (normalized).
    pub residual_tol: f64,
    /// Finite-difference step in units of the length scale.
    pub fd_step: f64,
    /// Newton steps shorter than this (in units of the length scale) end the search.
    pub step_tol: f64,
    /// Sign of Δ favoured by the simplex fallback.
    pub prefer_side: f64,
}

impl Default for RootConfig {
    fn default() -> Self {
        Self { max_iter: 100, residual_tol: 1e-14, fd_step: 1e-6, step_tol: 1e-15, prefer_side: 1.0 }
    }
}

impl RootConfig {
    /// Defaults suited to the given mode.
    pub fn for_mode(mode: ObjectiveMode) -> Self {
        match mode {
            ObjectiveMode::Oracle => Self::default(),
            ObjectiveMode::Experimental => Self { residual_tol: 1e-9, fd_step: 1e-5, step_tol: 1e-12, ..Self::default() },
        }
    }
}

/// Damped Newton iteration on (p, q) = 0 with a central-difference Jacobian.
///
/// A singular Jacobian (for instance on the Δ = 0 axis, where det J ∝ Δ)
/// hands over to a Nelder–Mead minimization of p² + q² whose initial
/// simplex leans towards `prefer_side`, after which Newton resumes.
pub fn root_search_pq<P: Probe>(probe: &P, start: (f64, f64), cfg: &RootConfig) -> Result<EpReport> {
    let g = probe.rate_scale();
    let scale = probe.length_scale();
    let resid = |x: [f64; 2]| -> Result<([f64; 2], Measurement)> {
        let m = probe.measure(x[0], x[1])?;
        Ok((m.pq(g), m))
    };
    let norm1 = |v: [f64; 2]| v[0].abs() + v[1].abs();
    let mut x = [start.0, start.1];
    let (mut gx, mut m) = resid(x)?;
    let mut trace = SearchTrace::default();
    trace.push(x[0], x[1], m.f_value, true);
    let mut status = SearchStatus::MaxIterations;
    let mut iterations = 0;
    let mut fallbacks = 0;
    while iterations < cfg.max_iter {
        if norm1(gx) < cfg.residual_tol {
            status = SearchStatus::Converged;
            break;
        }
        iterations += 1;
        let h = [cfg.fd_step * scale[0], cfg.fd_step * scale[1]];
        let mut jac = [[0.0; 2]; 2];
        for k in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h[k];
            xm[k] -= h[k];
            let (gp, _) = resid(xp)?;
            let (gm, _) = resid(xm)?;
            for i in 0..2 {
                jac[i][k] = (gp[i] - gm[i]) / (2.0 * h[k]);
            }
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let size = jac.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs() * scale[0].max(scale[1])));
        let scaled_det = det * scale[0] * scale[1];
        if !(scaled_det.abs() > 1e-8 * size * size) {
            if fallbacks >= 5 {
                status = SearchStatus::Stagnated;
                break;
            }
            fallbacks += 1;
            let side = cfg.prefer_side * probe.delta_sign();
            let obj = |u: [f64; 2]| match resid(u) {
                Ok((v, _)) => v[0] * v[0] + v[1] * v[1],
                Err(_) => f64::INFINITY,
            };
            let (u, _, _) = nelder_mead(obj, x, [0.05 * side * scale[0], 0.05 * scale[1]], 1e-6, 400);
            x = u;
            (gx, m) = resid(x)?;
            trace.push(x[0], x[1], m.f_value, true);
            continue;
        }
        let step = [
            -(jac[1][1] * gx[0] - jac[0][1] * gx[1]) / det,
            -(-jac[1][0] * gx[0] + jac[0][0] * gx[1]) / det,
        ];
        let mut lambda = 1.0;
        let mut moved = false;
        while lambda > 1e-6 {
            let xn = [x[0] + lambda * step[0], x[1] + lambda * step[1]];
            if let Ok((gn, mn)) = resid(xn) {
                if norm1(gn) < norm1(gx) {
                    x = xn;
                    gx = gn;
                    m = mn;
                    moved = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if moved {
            trace.push(x[0], x[1], m.f_value, true);
        }
        let step_len = (lambda * step[0] / scale[0]).hypot(lambda * step[1] / scale[1]);
        if !moved || step_len < cfg.step_tol {
            status = if norm1(gx) < cfg.residual_tol { SearchStatus::Converged } else { SearchStatus::Stagnated };
            break;
        }
    }
    if status == SearchStatus::MaxIterations && norm1(gx) < cfg.residual_tol {
        status = SearchStatus::Converged;
    }
    let mut rep = EpReport::new(probe, x, &m, 3, status);
    rep.iterations = iterations;
    rep.trace = trace;
    rep.evaluations = probe.evaluations();
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::ep3_locus;

    #[test]
    fn f_caps_at_exact_degeneracy() {
        let obj = Objective::oracle(0.1).unwrap();
        assert_eq!(evaluate_f(0.0, 0.0, &obj).unwrap(), F_CAP);
    }

    #[test]
    fn f_far_from_eps_is_moderate() {
        let obj = Objective::oracle(0.1).unwrap();
        let f = evaluate_f(0.5, 0.5, &obj).unwrap();
        let w = eigenvalues_closed_form(&obj.controls(0.5, 0.5)).frequencies();
        let direct = -((w[0] - w[1]) * (w[1] - w[2]) * (w[2] - w[0])).norm().ln();
        assert!((f - direct).abs() < 1e-10, "{f} vs {direct}");
        assert!(f.abs() < 10.0);
    }

    #[test]
    fn f_grows_towards_ep3() {
        let obj = Objective::oracle(0.1).unwrap();
        let [ep, _] = ep3_locus(0.1).unwrap();
        let mut last = f64::NEG_INFINITY;
        for k in 1..8 {
            let d = 10f64.powi(-k);
            let f = evaluate_f(ep.detuning * (1.0 - d), ep.drive * (1.0 - d), &obj).unwrap();
            assert!(f > last);
            last = f;
        }
    }

    #[test]
    fn evaluations_are_counted() {
        let obj = Objective::oracle(0.1).unwrap();
        evaluate_f(0.01, 0.01, &obj).unwrap();
        evaluate_f(0.02, 0.01, &obj).unwrap();
        assert_eq!(obj.evaluations(), 2);
    }

    #[test]
    fn seeds() {
        let obj = Objective::oracle(0.1).unwrap();
        assert_eq!(seed_interior(&obj).unwrap(), (0.0, 0.0125));
        let obj1 = Objective::oracle(1.0).unwrap();
        assert_eq!(seed_interior(&obj1).unwrap(), (0.0, 0.125));
        let replaced = seed_interior_from(&obj, (0.05, 0.05)).unwrap();
        assert_ne!(replaced, (0.05, 0.05));
        assert_eq!(classify_region(&obj.controls(replaced.0, replaced.1)), Region::AllReal);
    }

    #[test]
    fn bad_objectives() {
        assert!(Objective::oracle(0.0).is_err());
        let cfg = ExperimentalConfig { inversion: InversionConfig::with_order(2), ..Default::default() };
        assert!(Objective::experimental(0.1, cfg).is_err());
    }

    #[test]
    fn trace_csv_header() {
        let mut t = SearchTrace::default();
        t.push(1.0, 2.0, 3.0, true);
        let csv = t.to_csv(["delta", "eps"]);
        assert!(csv.starts_with("step,delta,eps,f_value,radius,angle_lo,angle_hi,accepted\n0,"));
        assert!(csv.trim_end().ends_with(",,,,1"));
    }
}
