//! Physical parameters from a located EP3.
//!
//! In the laboratory the controls are the drive frequency ν and the field
//! amplitude 𝓔, related to the generator by Δ = ω_s − ν and ε = μ𝓔. Once the
//! EP3 has been found in (ν, 𝓔), the system constants follow from
//! Γ = Re[(i/2)(ω₁+ω₂+ω₃)], ω_s = ν ± √(1/108)Γ and μ = √(8/108)Γ/𝓔.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::bloch::{eigenvalues_closed_form, ep3_locus, ControlParams, EP3_DETUNING_RATIO, EP3_DRIVE_RATIO};
use crate::error::{Error, Result};
use crate::locate::{
    grid_measure, linspace, root_search_pq, valley_ascend, EpReport, ExperimentalConfig, Measurement, Objective,
    ObjectiveMode, Probe, RootConfig, ValleyConfig,
};

/// Relative size of the imaginary trace residue tolerated by
/// [`gamma_from_frequencies`].
pub const TRACE_TOL: f64 = 1e-6;

/// Checks attached to an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Diagnostics {
    /// |Re(ω₁+ω₂+ω₃)|/2, zero for an exact Bloch spectrum.
    pub trace_residue: f64,
    /// Sign of Δ at the EP3 used for ω_s.
    pub branch: i8,
    /// Δ and ε implied by the estimate at (ν, 𝓔).
    pub detuning: f64,
    pub drive: f64,
    /// |p| + |q| (normalized) at the EP3.
    pub pq_residual: f64,
    /// Number of EP3 branches averaged into the estimate.
    pub branches: usize,
}

/// System constants together with the lab controls they were inferred at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub omega_s: f64,
    pub mu: f64,
    #[serde(rename = "gamma")]
    pub gamma_rate: f64,
    pub nu: f64,
    pub field: f64,
    #[serde(default)]
    pub diagnostics: Diagnostics,
}

impl PhysicalParams {
    pub fn new(omega_s: f64, mu: f64, gamma_rate: f64, nu: f64, field: f64) -> Result<Self> {
        let p = Self { omega_s, mu, gamma_rate, nu, field, diagnostics: Diagnostics::default() };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.omega_s, self.mu, self.gamma_rate, self.nu, self.field];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite physical parameters {self:?}")));
        }
        if self.mu < 0.0 || self.field < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "dipole strength and field must be >= 0, got mu={} field={}",
                self.mu, self.field
            )));
        }
        Ok(())
    }

    /// Δ = ω_s − ν, ε = μ𝓔.
    pub fn controls(&self) -> ControlParams {
        ControlParams { gamma_rate: self.gamma_rate, detuning: self.omega_s - self.nu, drive: self.mu * self.field }
    }

    /// The same system driven at other lab controls.
    pub fn at(&self, nu: f64, field: f64) -> Self {
        Self { nu, field, ..*self }
    }

    /// Lab controls (ν, 𝓔) that realize `p` for this system.
    pub fn lab_controls(&self, p: &ControlParams) -> Result<(f64, f64)> {
        if !(self.mu > 0.0) {
            return Err(Error::InvalidParameter("lab controls need mu > 0".into()));
        }
        Ok((self.omega_s - p.detuning, p.drive.abs() / self.mu))
    }

    /// Largest relative deviation of (ω_s, μ, Γ) from `truth`.
    pub fn relative_errors(&self, truth: &Self) -> [f64; 3] {
        let rel = |a: f64, b: f64| if b == 0.0 { a.abs() } else { ((a - b) / b).abs() };
        [rel(self.omega_s, truth.omega_s), rel(self.mu, truth.mu), rel(self.gamma_rate, truth.gamma_rate)]
    }
}

/// Γ = Re[(i/2)(ω₁+ω₂+ω₃)] and the imaginary residue (i/2)Σω should not have.
///
/// The residue must stay below [`TRACE_TOL`]·|Γ| plus a rounding allowance
/// relative to the largest frequency.
pub fn gamma_from_frequencies(w: &[C64; 3]) -> Result<(f64, f64)> {
    if w.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::InvalidParameter("non-finite frequency".into()));
    }
    let half_trace = C64::i() * (w[0] + w[1] + w[2]) * 0.5;
    let gamma = half_trace.re;
    let residue = half_trace.im.abs();
    let size = w.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if residue > TRACE_TOL * gamma.abs() + 1e-12 * size {
        return Err(Error::InconsistentFrequencies { gamma, residue });
    }
    Ok((gamma, residue))
}

/// System constants from an EP3 found at lab controls (ν, 𝓔).
///
/// The sign of the ω_s correction follows `ep.branch`; an undecided branch
/// counts as positive Δ.
pub fn estimate_at_ep3(ep: &EpReport, nu: f64, field: f64, frequencies: &[C64; 3]) -> Result<PhysicalParams> {
    if ep.order != 3 {
        return Err(Error::InvalidParameter(format!("estimation needs an EP3, got order {}", ep.order)));
    }
    if !(field > 0.0) || !field.is_finite() || !nu.is_finite() {
        return Err(Error::InvalidParameter(format!("need a finite field > 0 and finite nu, got {field}, {nu}")));
    }
    let (gamma, residue) = gamma_from_frequencies(frequencies)?;
    let sign = if ep.branch < 0 { -1.0 } else { 1.0 };
    let omega_s = nu + sign * EP3_DETUNING_RATIO * gamma;
    let mu = EP3_DRIVE_RATIO * gamma / field;
    Ok(PhysicalParams {
        omega_s,
        mu,
        gamma_rate: gamma,
        nu,
        field,
        diagnostics: Diagnostics {
            trace_residue: residue,
            branch: if sign > 0.0 { 1 } else { -1 },
            detuning: omega_s - nu,
            drive: mu * field,
            pq_residual: ep.pq_residual,
            branches: 1,
        },
    })
}

/// Which lab control is offset in [`branch_probe`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OffsetAxis {
    /// ν → ν + δ, i.e. Δ → Δ − δ.
    Nu,
    /// 𝓔 → 𝓔 + δ/μ, i.e. ε → ε + δ.
    Field,
}

/// Frequency splitting against control offset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchFit {
    /// Log-log slope of splitting against offset.
    pub exponent: f64,
    pub offsets: Vec<f64>,
    pub splittings: Vec<f64>,
}

fn offset(center: &ControlParams, delta: f64, axis: OffsetAxis) -> ControlParams {
    match axis {
        OffsetAxis::Nu => ControlParams { detuning: center.detuning - delta, ..*center },
        OffsetAxis::Field => ControlParams { drive: center.drive + delta, ..*center },
    }
}

/// max_k |a_k − b_π(k)| minimized over the pairings π.
fn paired_distance(a: &[C64; 3], b: &[C64; 3]) -> f64 {
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    PERMS
        .iter()
        .map(|p| (0..3).map(|k| (a[k] - b[p[k]]).norm()).fold(0.0, f64::max))
        .fold(f64::INFINITY, f64::min)
}

fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Splitting exponent of the closed-form frequencies around `center`.
///
/// The splitting at offset δ is the largest distance between a frequency
/// at the offset point and its partner at the centre, partners chosen by
/// nearest match.
pub fn splitting_exponent(center: &ControlParams, deltas: &[f64], axis: OffsetAxis) -> Result<BranchFit> {
    center.validate()?;
    fit_splitting(center, &eigenvalues_closed_form(center).frequencies(), deltas, axis)
}

/// Splitting exponent at the positive-Δ EP3 for relaxation coefficient Γ,
/// measured from the exact triple frequency −2iΓ/3.
pub fn branch_probe(gamma_rate: f64, deltas: &[f64], axis: OffsetAxis) -> Result<BranchFit> {
    let [ep, _] = ep3_locus(gamma_rate)?;
    fit_splitting(&ep, &[C64::new(0.0, -2.0 * gamma_rate / 3.0); 3], deltas, axis)
}

fn fit_splitting(center: &ControlParams, w0: &[C64; 3], deltas: &[f64], axis: OffsetAxis) -> Result<BranchFit> {
    if deltas.len() < 2 || deltas.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
        return Err(Error::InvalidParameter("need at least two positive offsets".into()));
    }
    let splittings: Vec<f64> = deltas
        .iter()
        .map(|&d| paired_distance(&eigenvalues_closed_form(&offset(center, d, axis)).frequencies(), w0))
        .collect();
    if splittings.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::Numerical("offset produced no measurable splitting".into()));
    }
    Ok(BranchFit { exponent: loglog_slope(deltas, &splittings), offsets: deltas.to_vec(), splittings })
}

/// A simulated laboratory: the system constants are hidden behind a
/// measurement at lab controls (ν, 𝓔).
#[derive(Debug)]
pub struct LabProbe {
    truth: PhysicalParams,
    objective: Objective,
    rate_scale: f64,
    length_scale: [f64; 2],
}

impl LabProbe {
    /// `truth.nu` and `truth.field` are ignored.
    pub fn new(truth: PhysicalParams, experimental: ExperimentalConfig) -> Result<Self> {
        truth.validate()?;
        let objective = Objective::experimental(truth.gamma_rate, experimental)?;
        Ok(Self { truth, objective, rate_scale: 1.0, length_scale: [1.0, 1.0] })
    }

    /// Sets the scales the searches work in; in practice these come from a sweep.
    pub fn with_scales(mut self, rate_scale: f64, length_scale: [f64; 2]) -> Self {
        self.rate_scale = rate_scale;
        self.length_scale = length_scale;
        self
    }
}

impl Probe for LabProbe {
    fn measure(&self, nu: f64, field: f64) -> Result<Measurement> {
        let p = self.truth.at(nu, field).controls();
        self.objective.measure(p.detuning, p.drive)
    }

    fn rate_scale(&self) -> f64 {
        self.rate_scale
    }

    fn length_scale(&self) -> [f64; 2] {
        self.length_scale
    }

    fn delta_sign(&self) -> f64 {
        -1.0
    }

    fn axes(&self) -> [&'static str; 2] {
        ["nu", "field"]
    }

    fn branch(&self, _at: [f64; 2]) -> i8 {
        0
    }

    fn evaluations(&self) -> usize {
        self.objective.evaluations()
    }
}

/// EP3 search used by [`planted_pipeline`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMethod {
    Valley,
    Rootsearch,
}

impl std::str::FromStr for SearchMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "valley" => Ok(Self::Valley),
            "rootsearch" => Ok(Self::Rootsearch),
            _ => Err(Error::InvalidParameter(format!("unknown method `{s}`"))),
        }
    }
}

/// A planted-truth estimation experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantedSetup {
    pub omega_s: f64,
    pub mu: f64,
    pub gamma: f64,
    /// Sweep window in ν.
    pub nu_range: (f64, f64),
    /// Sweep window in 𝓔.
    pub field_range: (f64, f64),
    /// Sweep points along ν and 𝓔.
    pub grid: (usize, usize),
    pub method: SearchMethod,
    pub experimental: ExperimentalConfig,
}

impl Default for PlantedSetup {
    fn default() -> Self {
        Self {
            omega_s: 1.0,
            mu: 0.5,
            gamma: 0.1,
            nu_range: (0.98, 1.02),
            field_range: (0.002, 0.07),
            grid: (21, 14),
            method: SearchMethod::Rootsearch,
            experimental: ExperimentalConfig { samples: 4000, ..ExperimentalConfig::default() },
        }
    }
}

impl PlantedSetup {
    pub fn truth(&self) -> Result<PhysicalParams> {
        PhysicalParams::new(self.omega_s, self.mu, self.gamma, 0.0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        self.truth()?;
        let (a, b) = self.nu_range;
        let (c, d) = self.field_range;
        if !(b > a) || !(d > c) || c < 0.0 {
            return Err(Error::InvalidParameter("empty or negative sweep window".into()));
        }
        if self.grid.0 < 3 || self.grid.1 < 3 {
            return Err(Error::InvalidParameter("sweep grid needs at least 3 points per axis".into()));
        }
        Ok(())
    }
}

/// One EP3 branch found by the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchEstimate {
    pub report: EpReport,
    pub params: PhysicalParams,
}

/// Result of [`planted_pipeline`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutcome {
    /// Average over the branches found; ν and 𝓔 are those of the first branch.
    pub estimate: PhysicalParams,
    pub truth: PhysicalParams,
    /// Relative errors of (ω_s, μ, Γ).
    pub relative_errors: [f64; 3],
    pub branches: Vec<BranchEstimate>,
    pub sweep_points: usize,
    pub interior_points: usize,
    pub evaluations: usize,
}

impl PipelineOutcome {
    pub fn converged(&self) -> bool {
        !self.branches.is_empty() && self.branches.iter().all(|b| b.report.converged())
    }
}

/// Sweeps the lab controls, finds both EP3s and inverts them.
///
/// The sweep gives a rough Γ from the trace of the measured frequencies and
/// the interior of the EP2 triangle. The interior points at the smallest
/// and largest ν seed one search each. The EP3 at smaller ν is the
/// positive-Δ branch. With a single EP3 the branch is decided against the
/// centre of the interior, which sits on Δ = 0.
pub fn planted_pipeline(setup: &PlantedSetup) -> Result<PipelineOutcome> {
    setup.validate()?;
    let truth = setup.truth()?;
    let probe = LabProbe::new(truth, setup.experimental)?;
    let nus = linspace(setup.nu_range.0, setup.nu_range.1, setup.grid.0);
    let fields = linspace(setup.field_range.0, setup.field_range.1, setup.grid.1);
    let sweep = grid_measure(&probe, &nus, &fields);
    let mut gammas = Vec::new();
    let mut interior = Vec::new();
    for (nu, field, m) in &sweep {
        let Ok(m) = m else { continue };
        if let Ok((g, _)) = gamma_from_frequencies(&m.frequencies) {
            gammas.push(g);
        }
        if m.is_interior() {
            interior.push((*nu, *field));
        }
    }
    if gammas.is_empty() || interior.is_empty() {
        return Err(Error::NoConvergence("sweep window contains no interior point".into()));
    }
    gammas.sort_by(f64::total_cmp);
    let gamma_hat = gammas[gammas.len() / 2];
    let extent = |k: usize, step: f64| {
        let vals = interior.iter().map(|p| if k == 0 { p.0 } else { p.1 });
        let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        (hi - lo).max(step)
    };
    let scale = [extent(0, nus[1] - nus[0]), extent(1, fields[1] - fields[0])];
    let probe = probe.with_scales(gamma_hat, scale);
    let nu_centre = interior.iter().map(|p| p.0).sum::<f64>() / interior.len() as f64;

    let lowest = *interior.iter().min_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1))).unwrap();
    let highest = *interior.iter().max_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1))).unwrap();
    let mut seeds = vec![(lowest, 1.0)];
    if highest.0 > lowest.0 {
        seeds.push((highest, -1.0));
    }
    let mut found = Vec::new();
    for (seed, side) in seeds {
        let report = match setup.method {
            SearchMethod::Rootsearch => {
                let cfg = RootConfig { prefer_side: side, ..RootConfig::for_mode(ObjectiveMode::Experimental) };
                root_search_pq(&probe, seed, &cfg)?
            }
            SearchMethod::Valley => {
                let vcfg = ValleyConfig { prefer_side: Some(side), ..ValleyConfig::default() };
                let v = valley_ascend(&probe, seed, &vcfg)?;
                let cfg = RootConfig { prefer_side: side, ..RootConfig::for_mode(ObjectiveMode::Experimental) };
                let mut r = root_search_pq(&probe, (v.location[0], v.location[1]), &cfg)?;
                let mut steps = v.trace.steps;
                steps.extend(r.trace.steps);
                r.trace.steps = steps;
                r.iterations += v.iterations;
                r
            }
        };
        found.push(report);
    }
    if found.len() == 2 && (found[0].location[0] - found[1].location[0]).abs() < 1e-3 * scale[0] {
        found.pop();
    }
    let mut branches = Vec::new();
    for mut report in found {
        let nu = report.location[0];
        report.branch = if nu < nu_centre { 1 } else { -1 };
        let params = estimate_at_ep3(&report, nu, report.location[1], &report.frequencies)?;
        branches.push(BranchEstimate { report, params });
    }
    if branches.len() == 2 {
        let (a, b) = (branches[0].report.location[0], branches[1].report.location[0]);
        branches[0].report.branch = if a < b { 1 } else { -1 };
        branches[1].report.branch = -branches[0].report.branch;
        for b in branches.iter_mut() {
            b.params = estimate_at_ep3(&b.report, b.report.location[0], b.report.location[1], &b.report.frequencies)?;
        }
    }
    let n = branches.len() as f64;
    let mean = |f: fn(&PhysicalParams) -> f64| branches.iter().map(|b| f(&b.params)).sum::<f64>() / n;
    let first = branches[0].params;
    let estimate = PhysicalParams {
        omega_s: mean(|p| p.omega_s),
        mu: mean(|p| p.mu),
        gamma_rate: mean(|p| p.gamma_rate),
        diagnostics: Diagnostics {
            trace_residue: branches.iter().map(|b| b.params.diagnostics.trace_residue).fold(0.0, f64::max),
            pq_residual: branches.iter().map(|b| b.report.pq_residual).fold(0.0, f64::max),
            branches: branches.len(),
            ..first.diagnostics
        },
        ..first
    };
    let estimate = PhysicalParams {
        diagnostics: Diagnostics {
            detuning: estimate.omega_s - estimate.nu,
            drive: estimate.mu * estimate.field,
            ..estimate.diagnostics
        },
        ..estimate
    };
    Ok(PipelineOutcome {
        relative_errors: estimate.relative_errors(&truth),
        estimate,
        truth,
        branches,
        sweep_points: sweep.len(),
        interior_points: interior.len(),
        evaluations: probe.evaluations(),
    })
}
