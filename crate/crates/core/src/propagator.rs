//! Polarization time series.
//!
//! Signals come from two sources: the exact solution of the inhomogeneous
//! Bloch equation, and explicit mode sets of the form
//! `Σ_k Σ_α d_{k,α} t^α exp(−i ω_k t)`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, Matrix3, Vector3};
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::bloch::{build_matrix, ControlParams, GeneratorMatrix, RateParams};
use crate::error::{Error, Result};
use crate::expm::{expm, expm3};

/// Rotating-frame Bloch vector plus the equilibrium polarization S_z⁰.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochState {
    pub sx: f64,
    pub sy: f64,
    pub sz: f64,
    pub sz_eq: f64,
}

impl BlochState {
    /// S_z = −1/2, no transverse polarization, S_z⁰ = 0.
    pub fn ground_state() -> Self {
        Self { sx: 0.0, sy: 0.0, sz: -0.5, sz_eq: 0.0 }
    }

    /// Ground state relaxing towards the detailed-balance polarization of `rates`.
    pub fn ground_state_with(rates: &RateParams) -> Self {
        Self { sz_eq: rates.equilibrium_sz(), ..Self::ground_state() }
    }

    pub fn vector(&self) -> Vector3<f64> {
        Vector3::new(self.sx, self.sy, self.sz)
    }
}

impl Default for BlochState {
    fn default() -> Self {
        Self::ground_state()
    }
}

/// Where a series came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub controls: Option<ControlParams>,
    pub seed: Option<u64>,
}

/// Uniformly sampled real signal `S_z[n] = S_z(t0 + n dt)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub t0: f64,
    pub dt: f64,
    pub samples: Vec<f64>,
    pub meta: Option<SeriesMeta>,
}

impl TimeSeries {
    pub fn new(t0: f64, dt: f64, samples: Vec<f64>) -> Result<Self> {
        let s = Self { t0, dt, samples, meta: None };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!("time step must be > 0, got {}", self.dt)));
        }
        if !self.t0.is_finite() {
            return Err(Error::InvalidParameter("non-finite start time".into()));
        }
        if self.samples.is_empty() {
            return Err(Error::InvalidParameter("empty time series".into()));
        }
        if let Some(i) = self.samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite sample at index {i}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.dt
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Sample-wise mean of series sharing one time grid.
    pub fn average(series: &[TimeSeries]) -> Result<TimeSeries> {
        let first = series
            .first()
            .ok_or_else(|| Error::InvalidParameter("nothing to average".into()))?;
        let n = first.len();
        let mut acc = vec![0.0; n];
        for s in series {
            if s.len() != n || s.dt != first.dt || s.t0 != first.t0 {
                return Err(Error::InvalidParameter("series do not share a time grid".into()));
            }
            for (a, v) in acc.iter_mut().zip(&s.samples) {
                *a += v;
            }
        }
        let k = series.len() as f64;
        acc.iter_mut().for_each(|a| *a /= k);
        Ok(TimeSeries {
            t0: first.t0,
            dt: first.dt,
            samples: acc,
            meta: first.meta.map(|m| SeriesMeta { seed: None, ..m }),
        })
    }

    /// CSV text: one `# key=value` header line followed by `t,value` rows,
    /// all numbers with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(48 * (self.samples.len() + 1));
        let controls = self.meta.and_then(|m| m.controls);
        let field = |v: Option<f64>| v.map(fmt17).unwrap_or_else(|| "none".to_string());
        let _ = writeln!(
            out,
            "# t0={} dt={} gamma={} delta={} eps={} seed={}",
            fmt17(self.t0),
            fmt17(self.dt),
            field(controls.map(|c| c.gamma_rate)),
            field(controls.map(|c| c.detuning)),
            field(controls.map(|c| c.drive)),
            self.meta
                .and_then(|m| m.seed)
                .map(|s| s.to_string())
                .unwrap_or_else(|| "none".into()),
        );
        for (n, v) in self.samples.iter().enumerate() {
            let _ = writeln!(out, "{},{}", fmt17(self.time(n)), fmt17(*v));
        }
        out
    }

    /// Parses the format written by [`TimeSeries::to_csv`]. Additional `#`
    /// comment lines are ignored.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut header: Option<(f64, f64, Option<ControlParams>, Option<u64>)> = None;
        let mut times = Vec::new();
        let mut samples = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if header.is_none() && rest.contains("dt=") {
                    header = Some(parse_header(rest)?);
                }
                continue;
            }
            let (t, v) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("line {}: expected `t,value`", lineno + 1)))?;
            let t: f64 = t
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad time `{t}`", lineno + 1)))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad value `{v}`", lineno + 1)))?;
            times.push(t);
            samples.push(v);
        }
        let (t0, dt, controls, seed) = match header {
            Some(h) => h,
            None => {
                if times.len() < 2 {
                    return Err(Error::Parse("no header and fewer than two rows".into()));
                }
                (times[0], times[1] - times[0], None, None)
            }
        };
        let meta = if controls.is_some() || seed.is_some() {
            Some(SeriesMeta { controls, seed })
        } else {
            None
        };
        let s = TimeSeries { t0, dt, samples, meta };
        s.validate()?;
        Ok(s)
    }
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_header(rest: &str) -> Result<(f64, f64, Option<ControlParams>, Option<u64>)> {
    let mut t0 = 0.0;
    let mut dt = None;
    let mut gamma = None;
    let mut delta = None;
    let mut eps = None;
    let mut seed = None;
    for tok in rest.split_whitespace() {
        let Some((k, v)) = tok.split_once('=') else { continue };
        let num = |v: &str| -> Result<Option<f64>> {
            if v == "none" {
                Ok(None)
            } else {
                v.parse::<f64>()
                    .map(Some)
                    .map_err(|_| Error::Parse(format!("bad header value `{k}={v}`")))
            }
        };
        match k {
            "t0" => t0 = num(v)?.unwrap_or(0.0),
            "dt" => dt = num(v)?,
            "gamma" => gamma = num(v)?,
            "delta" => delta = num(v)?,
            "eps" => eps = num(v)?,
            "seed" => {
                seed = if v == "none" {
                    None
                } else {
                    Some(v.parse::<u64>().map_err(|_| Error::Parse(format!("bad seed `{v}`")))?)
                }
            }
            _ => {}
        }
    }
    let dt = dt.ok_or_else(|| Error::Parse("header lacks dt".into()))?;
    let controls = match (gamma, delta, eps) {
        (Some(g), Some(d), Some(e)) => Some(ControlParams { gamma_rate: g, detuning: d, drive: e }),
        _ => None,
    };
    Ok((t0, dt, controls, seed))
}

/// One term `Σ_α d_α b_α(t)` of a mode set.
///
/// With `nodes` empty the basis is the confluent one, `b_α(t) = t^α e^{−iωt}`.
/// A near-degenerate cluster keeps its distinct frequencies in `nodes`; the
/// basis is then the scaled divided differences of `e^{−iωt}` over those
/// nodes, which tends to the confluent basis as the nodes merge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub omega: C64,
    pub amplitudes: Vec<C64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nodes: Vec<C64>,
}

impl Mode {
    pub fn simple(omega: C64, amplitude: C64) -> Self {
        Self { omega, amplitudes: vec![amplitude], nodes: Vec::new() }
    }

    pub fn confluent(omega: C64, amplitudes: Vec<C64>) -> Self {
        Self { omega, amplitudes, nodes: Vec::new() }
    }

    /// r_k + 1.
    pub fn multiplicity(&self) -> usize {
        self.amplitudes.len()
    }

    /// Frequencies the basis is built on; all equal to `omega` when exact.
    pub fn basis_nodes(&self) -> Vec<C64> {
        if self.nodes.is_empty() {
            vec![self.omega; self.multiplicity()]
        } else {
            self.nodes.clone()
        }
    }

    pub fn amp_norm(&self) -> f64 {
        self.amplitudes.iter().map(|d| d.norm()).sum()
    }
}

/// Extracted or planted complex frequencies with their amplitudes.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ModeSet {
    pub modes: Vec<Mode>,
}

impl ModeSet {
    pub fn new(modes: Vec<Mode>) -> Self {
        Self { modes }
    }

    pub fn model_order(&self) -> usize {
        self.modes.iter().map(Mode::multiplicity).sum()
    }

    pub fn amp_norm(&self) -> f64 {
        self.modes.iter().map(Mode::amp_norm).sum()
    }

    pub fn frequencies(&self) -> Vec<C64> {
        self.modes.iter().map(|m| m.omega).collect()
    }

    pub fn validate(&self) -> Result<()> {
        for m in &self.modes {
            if m.amplitudes.is_empty() {
                return Err(Error::InvalidParameter("mode without amplitudes".into()));
            }
            if !m.nodes.is_empty() && m.nodes.len() != m.amplitudes.len() {
                return Err(Error::InvalidParameter("mode nodes and amplitudes differ in length".into()));
            }
            if !(m.omega.re.is_finite() && m.omega.im.is_finite()) {
                return Err(Error::InvalidParameter("non-finite frequency".into()));
            }
        }
        Ok(())
    }

    /// Complex signal on the grid `t0 + n dt`, `n < len`.
    pub fn evaluate(&self, t0: f64, dt: f64, len: usize) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); len];
        for mode in &self.modes {
            let basis = confluent_basis(&mode.basis_nodes(), t0, dt, len);
            for (alpha, d) in mode.amplitudes.iter().enumerate() {
                for (o, b) in out.iter_mut().zip(&basis[alpha]) {
                    *o += d * b;
                }
            }
        }
        out
    }
}

/// Basis functions `b_α(t_n)` for a cluster of frequencies, one vector per α.
///
/// The divided differences of `f(ω) = e^{−iωt}` over the nodes are the first
/// row of `exp(−i t B)` with `B` the upper bidiagonal matrix carrying the
/// nodes on its diagonal. They are rescaled by `α! i^α` so that coinciding
/// nodes give exactly `t^α e^{−iωt}`.
pub(crate) fn confluent_basis(nodes: &[C64], t0: f64, dt: f64, len: usize) -> Vec<Vec<C64>> {
    let m = nodes.len();
    if m == 1 {
        let w = nodes[0];
        let step = (-C64::i() * w * dt).exp();
        let mut cur = (-C64::i() * w * t0).exp();
        let mut col = Vec::with_capacity(len);
        for _ in 0..len {
            col.push(cur);
            cur *= step;
        }
        return vec![col];
    }
    let mut b = DMatrix::<C64>::zeros(m, m);
    for (i, w) in nodes.iter().enumerate() {
        b[(i, i)] = *w;
        if i + 1 < m {
            b[(i, i + 1)] = C64::new(1.0, 0.0);
        }
    }
    let step = expm(&(&b * C64::new(0.0, -dt)));
    let start = expm(&(&b * C64::new(0.0, -t0)));
    let mut row: Vec<C64> = (0..m).map(|j| start[(0, j)]).collect();
    let mut scale = vec![C64::new(1.0, 0.0); m];
    let mut fact = 1.0;
    for (a, s) in scale.iter_mut().enumerate() {
        if a > 0 {
            fact *= a as f64;
        }
        *s = C64::i().powu(a as u32) * fact;
    }
    let mut cols = vec![Vec::with_capacity(len); m];
    for _ in 0..len {
        for a in 0..m {
            cols[a].push(row[a] * scale[a]);
        }
        let next: Vec<C64> = (0..m)
            .map(|j| (0..=j).map(|k| row[k] * step[(k, j)]).sum())
            .collect();
        row = next;
    }
    cols
}

/// e^{Mt} v, accurate on defective M.
pub fn expm_apply(m: &GeneratorMatrix, t: f64, v: &Vector3<f64>) -> Vector3<f64> {
    debug_assert!(t >= 0.0, "negative propagation time {t}");
    expm3(&(m.matrix() * t)) * v
}

/// Homogeneous generator and steady state used by [`simulate`].
///
/// The generator is `M − γI` with γ the pure dephasing rate, the
/// inhomogeneous term is `(0, 0, S_z⁰ / T₁)` with `1/T₁ = Γ + γ`.
fn dynamics(p: &ControlParams, rates: &RateParams, x0: &BlochState) -> (Matrix3<f64>, Vector3<f64>) {
    let g = build_matrix(p).0 - Matrix3::identity() * rates.dephasing;
    let inv_t1 = -g[(2, 2)];
    let drive = Vector3::new(0.0, 0.0, x0.sz_eq * inv_t1);
    let scale = p.scale() + rates.dephasing;
    let det = g.determinant();
    let steady = if drive.norm() == 0.0 || det.abs() <= 1e-14 * scale.powi(3) {
        Vector3::zeros()
    } else {
        g.lu().solve(&(-drive)).unwrap_or_else(Vector3::zeros)
    };
    (g, steady)
}

/// Bloch vectors at `t = k dt`, `k < n`.
pub fn trajectory(
    p: &ControlParams,
    rates: &RateParams,
    x0: &BlochState,
    n: usize,
    dt: f64,
) -> Result<Vec<Vector3<f64>>> {
    p.validate()?;
    rates.validate()?;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("time step must be > 0, got {dt}")));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    let (g, steady) = dynamics(p, rates, x0);
    let step = expm3(&(g * dt));
    let mut y = x0.vector() - steady;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(steady + y);
        y = step * y;
    }
    Ok(out)
}

/// Samples `S_z(k dt)` of the exact solution of the Bloch equation.
pub fn simulate(
    p: &ControlParams,
    rates: &RateParams,
    x0: &BlochState,
    n: usize,
    dt: f64,
) -> Result<TimeSeries> {
    let states = trajectory(p, rates, x0, n, dt)?;
    Ok(TimeSeries {
        t0: 0.0,
        dt,
        samples: states.iter().map(|s| s[2]).collect(),
        meta: Some(SeriesMeta { controls: Some(*p), seed: None }),
    })
}

/// Sampling defaults: `dt = 0.1 / max(Γ, Ω)`, 2000 samples.
pub fn default_sampling(p: &ControlParams) -> (f64, usize) {
    let rate = p.gamma_rate.max(p.rabi_frequency());
    let dt = if rate > 0.0 { 0.1 / rate } else { 1.0 };
    (dt, 2000)
}

/// Evaluates a mode set on a grid; the result must be real.
pub fn synthesize(modes: &ModeSet, t0: f64, dt: f64, n: usize) -> Result<TimeSeries> {
    modes.validate()?;
    if !(dt > 0.0) || n == 0 {
        return Err(Error::InvalidParameter("synthesis needs dt > 0 and n >= 1".into()));
    }
    let values = modes.evaluate(t0, dt, n);
    let peak = values.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    let residue = values.iter().fold(0.0f64, |m, v| m.max(v.im.abs()));
    if residue > 1e-12 * peak.max(1.0) {
        return Err(Error::ComplexSignal { residue });
    }
    TimeSeries::new(t0, dt, values.iter().map(|v| v.re).collect())
}

/// Adds i.i.d. N(0, σ²) noise, deterministic in `seed`.
pub fn add_noise(s: &TimeSeries, sigma: f64, seed: u64) -> Result<TimeSeries> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("noise level must be >= 0, got {sigma}")));
    }
    let mut out = s.clone();
    if sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, sigma).expect("finite sigma");
        for v in out.samples.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    let meta = out.meta.unwrap_or(SeriesMeta { controls: None, seed: None });
    out.meta = Some(SeriesMeta { seed: Some(seed), ..meta });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::ep3_locus;

    fn cp(g: f64, d: f64, e: f64) -> ControlParams {
        ControlParams::new(g, d, e).unwrap()
    }

    #[test]
    fn zero_generator_is_identity() {
        let m = GeneratorMatrix(Matrix3::zeros());
        let v = Vector3::new(1.0, -2.0, 3.0);
        assert_eq!(expm_apply(&m, 5.0, &v), v);
    }

    #[test]
    fn diagonal_generator() {
        let m = build_matrix(&cp(0.1, 0.0, 0.0));
        let out = expm_apply(&m, 10.0, &Vector3::new(1.0, 1.0, 1.0));
        let want = Vector3::new((-0.5f64).exp(), (-0.5f64).exp(), (-1.0f64).exp());
        assert!((out - want).norm() < 1e-15);
    }

    #[test]
    fn taylor_oracle_at_ep3() {
        let [p, _] = ep3_locus(0.1).unwrap();
        let m = build_matrix(&p);
        let t = 1.0 / p.gamma_rate;
        let a = m.0 * t;
        // 50-term Taylor series
        let mut term = Matrix3::<f64>::identity();
        let mut sum = term;
        for k in 1..50 {
            term = term * a / k as f64;
            sum += term;
        }
        let v = Vector3::new(0.3, -0.2, -0.5);
        let got = expm_apply(&m, t, &v);
        let want = sum * v;
        assert!((got - want).norm() <= 1e-12 * want.norm(), "{}", (got - want).norm());
    }

    #[test]
    fn pure_relaxation_without_drive() {
        let rates = RateParams::new(0.08, 0.02, 0.0).unwrap();
        let p = crate::bloch::rates_to_controls(&rates, 0.0, 0.0).unwrap();
        let x0 = BlochState::ground_state_with(&rates);
        let s = simulate(&p, &rates, &x0, 200, 0.5).unwrap();
        let sz0 = rates.equilibrium_sz();
        for (n, v) in s.samples.iter().enumerate() {
            let t = n as f64 * 0.5;
            let want = sz0 + (-0.5 - sz0) * (-t / rates.t1()).exp();
            assert!((v - want).abs() < 1e-13, "n={n}: {v} vs {want}");
        }
    }

    #[test]
    fn rejects_bad_sampling() {
        let p = cp(0.1, 0.0, 0.01);
        let r = RateParams::default();
        let x0 = BlochState::ground_state();
        assert!(simulate(&p, &r, &x0, 10, 0.0).is_err());
        assert!(simulate(&p, &r, &x0, 10, -1.0).is_err());
        assert!(simulate(&p, &r, &x0, 0, 1.0).is_err());
    }

    #[test]
    fn single_decaying_mode() {
        let ms = ModeSet::new(vec![Mode::simple(C64::new(0.0, -0.1), C64::new(1.0, 0.0))]);
        let s = synthesize(&ms, 0.0, 0.5, 100).unwrap();
        for (n, v) in s.samples.iter().enumerate() {
            assert!((v - (-0.1 * 0.5 * n as f64).exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn conjugate_pair_is_damped_cosine() {
        let ms = ModeSet::new(vec![
            Mode::simple(C64::new(0.5, -0.05), C64::new(0.5, 0.0)),
            Mode::simple(C64::new(-0.5, -0.05), C64::new(0.5, 0.0)),
        ]);
        let s = synthesize(&ms, 0.0, 0.25, 400).unwrap();
        for (n, v) in s.samples.iter().enumerate() {
            let t = 0.25 * n as f64;
            assert!((v - (-0.05 * t).exp() * (0.5 * t).cos()).abs() < 1e-13);
        }
    }

    #[test]
    fn unpaired_mode_is_rejected() {
        let ms = ModeSet::new(vec![Mode::simple(C64::new(0.5, -0.05), C64::new(1.0, 0.0))]);
        assert!(matches!(synthesize(&ms, 0.0, 0.1, 50), Err(Error::ComplexSignal { .. })));
    }

    #[test]
    fn confluent_basis_matches_powers_of_t() {
        let w = C64::new(0.0, -0.07);
        let basis = confluent_basis(&[w, w, w], 0.3, 0.7, 50);
        for n in 0..50 {
            let t = 0.3 + 0.7 * n as f64;
            let e = (-C64::i() * w * t).exp();
            for (a, col) in basis.iter().enumerate() {
                let want = e * t.powi(a as i32);
                assert!((col[n] - want).norm() <= 1e-12 * want.norm().max(1e-300));
            }
        }
    }

    #[test]
    fn divided_difference_basis_spans_split_modes() {
        // two distinct nodes: b_0 = e^{-iω1 t}, b_1 = i (e^{-iω2 t} − e^{-iω1 t})/(ω2 − ω1)
        let (w1, w2) = (C64::new(0.1, -0.05), C64::new(0.1003, -0.0502));
        let basis = confluent_basis(&[w1, w2], 0.0, 1.0, 40);
        for n in 0..40 {
            let t = n as f64;
            let e1 = (-C64::i() * w1 * t).exp();
            let e2 = (-C64::i() * w2 * t).exp();
            assert!((basis[0][n] - e1).norm() < 1e-14);
            let want = C64::i() * (e2 - e1) / (w2 - w1);
            assert!((basis[1][n] - want).norm() < 1e-9 * want.norm().max(1e-3));
        }
    }

    #[test]
    fn csv_round_trip_and_header() {
        let p = cp(0.1, 0.002, 0.01);
        let s = simulate(&p, &RateParams::default(), &BlochState::ground_state(), 20, 1.0).unwrap();
        let s = add_noise(&s, 1e-3, 7).unwrap();
        let text = s.to_csv();
        let first = text.lines().next().unwrap();
        assert!(first.starts_with("# t0=0.0000000000000000e0 dt=1.0000000000000000e0 gamma=1.0000000000000001e-1"));
        assert!(first.ends_with("seed=7"));
        assert_eq!(text.lines().count(), 21);
        let back = TimeSeries::from_csv(&text).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn noise_is_deterministic_and_zero_sigma_is_identity() {
        let s = TimeSeries::new(0.0, 1.0, vec![0.25; 64]).unwrap();
        assert_eq!(add_noise(&s, 0.0, 3).unwrap().samples, s.samples);
        let a = add_noise(&s, 0.1, 11).unwrap();
        let b = add_noise(&s, 0.1, 11).unwrap();
        let c = add_noise(&s, 0.1, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.samples, c.samples);
        assert!(add_noise(&s, -1.0, 0).is_err());
    }
}
