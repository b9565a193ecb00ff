//! The subcommands. Each one merges its flags with the config file, runs,
//! and writes its output with the effective configuration echoed in front.

use std::fmt::Write as _;

use clap::Args;
use epbloch::estimator::{estimate_at_ep3, planted_pipeline, PlantedSetup, SearchMethod};
use epbloch::locate::{
    grid_measure, linspace, root_search_pq, scan_ep2 as run_scan, seed_interior, seed_interior_from, valley_ascend,
    ExperimentalConfig, Objective, ObjectiveMode, RootConfig, ScanConfig, SearchStatus, ValleyConfig,
};
use epbloch::propagator::default_sampling;
use epbloch::{
    add_noise, extended_invert, rates_to_controls, simulate as run_simulate, standard_invert, BlochState,
    ControlParams, EpReport, InversionConfig, RateParams, TimeSeries,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{load_section, merge};
use crate::CliError;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn write_out(path: Option<&str>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| usage(format!("cannot write {p}: {e}"))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn config_line<C: Serialize>(cfg: &C) -> String {
    format!("# config {}\n", serde_json::to_string(cfg).expect("config serializes"))
}

fn json_doc<C: Serialize, R: Serialize>(cfg: &C, result: &R) -> String {
    let doc = json!({ "config": cfg, "result": result });
    serde_json::to_string_pretty(&doc).expect("report serializes") + "\n"
}

/// Acquisition settings shared by the experimental-mode commands.
#[derive(Serialize, Deserialize, Debug, Clone, Copy, PartialEq)]
#[serde(default)]
pub struct Acquisition {
    pub samples: usize,
    pub dt: Option<f64>,
    pub noise: f64,
    pub averages: usize,
    pub seed: u64,
    pub pencil_len: Option<usize>,
}

impl Default for Acquisition {
    fn default() -> Self {
        Self { samples: 2000, dt: None, noise: 0.0, averages: 1, seed: 0, pencil_len: None }
    }
}

impl Acquisition {
    fn experimental(&self) -> ExperimentalConfig {
        ExperimentalConfig {
            samples: self.samples,
            dt: self.dt,
            noise: self.noise,
            averages: self.averages,
            seed: self.seed,
            inversion: InversionConfig { pencil_len: self.pencil_len, ..InversionConfig::default() },
        }
    }
}

#[derive(Args, Serialize, Debug, Default)]
pub struct AcquisitionFlags {
    /// Samples per recorded signal (experimental mode).
    #[arg(long)]
    samples: Option<usize>,
    /// Sampling step (default 0.1/Γ).
    #[arg(long)]
    dt: Option<f64>,
    /// Standard deviation of additive Gaussian noise.
    #[arg(long)]
    noise: Option<f64>,
    /// Noisy records averaged per measurement.
    #[arg(long)]
    averages: Option<usize>,
    /// Noise seed; record k is drawn from stream (seed << 32) + k.
    #[arg(long)]
    seed: Option<u64>,
    /// Pencil length of the harmonic inversion.
    #[arg(long)]
    pencil_len: Option<usize>,
}

fn objective(mode: ObjectiveMode, gamma: f64, acq: &Acquisition) -> Result<Objective, CliError> {
    Ok(Objective::new(mode, gamma, acq.experimental())?)
}

// ---------------------------------------------------------------- simulate

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
#[serde(default)]
pub struct SimulateConfig {
    pub gamma: Option<f64>,
    pub delta: f64,
    pub eps: f64,
    pub kappa_down: Option<f64>,
    pub kappa_up: Option<f64>,
    pub dephasing: Option<f64>,
    pub n: Option<usize>,
    pub dt: Option<f64>,
    pub noise: f64,
    pub seed: u64,
    pub out: Option<String>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            gamma: None,
            delta: 0.0,
            eps: 0.0,
            kappa_down: None,
            kappa_up: None,
            dephasing: None,
            n: None,
            dt: None,
            noise: 0.0,
            seed: 0,
            out: None,
        }
    }
}

#[derive(Args, Serialize, Debug)]
pub struct SimulateFlags {
    /// Relaxation coefficient Γ (default 0.1).
    #[arg(long, conflicts_with_all = ["kappa_down", "kappa_up", "dephasing"])]
    gamma: Option<f64>,
    /// Detuning Δ.
    #[arg(long, allow_negative_numbers = true)]
    delta: Option<f64>,
    /// Drive ε.
    #[arg(long, allow_negative_numbers = true)]
    eps: Option<f64>,
    /// Decay rate κ₋; with κ₊ and γ replaces --gamma.
    #[arg(long)]
    kappa_down: Option<f64>,
    #[arg(long)]
    kappa_up: Option<f64>,
    /// Pure dephasing rate γ.
    #[arg(long)]
    dephasing: Option<f64>,
    /// Number of samples (default 2000).
    #[arg(long)]
    n: Option<usize>,
    /// Sampling step (default 0.1/max(Γ, Ω)).
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
    /// Noise seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV (default stdout).
    #[arg(long, short)]
    out: Option<String>,
}

pub fn simulate(flags: &SimulateFlags, file: Option<&str>) -> Result<(), CliError> {
    let cfg: SimulateConfig = merge(load_section(file, "simulate")?, flags)?;
    let uses_rates = cfg.kappa_down.is_some() || cfg.kappa_up.is_some() || cfg.dephasing.is_some();
    if uses_rates && cfg.gamma.is_some() {
        return Err(usage("give either gamma or the rates kappa_down/kappa_up/dephasing, not both"));
    }
    let (p, rates) = if uses_rates {
        let r = RateParams::new(cfg.kappa_down.unwrap_or(0.0), cfg.kappa_up.unwrap_or(0.0), cfg.dephasing.unwrap_or(0.0))?;
        (rates_to_controls(&r, cfg.delta, cfg.eps)?, r)
    } else {
        (ControlParams::new(cfg.gamma.unwrap_or(0.1), cfg.delta, cfg.eps)?, RateParams::default())
    };
    p.validate()?;
    let (dt0, n0) = default_sampling(&p);
    let n = cfg.n.unwrap_or(n0);
    let dt = cfg.dt.unwrap_or(dt0);
    if n == 0 {
        return Err(usage("need n >= 1"));
    }
    let x0 = BlochState::ground_state_with(&rates);
    let mut s = run_simulate(&p, &rates, &x0, n, dt)?;
    if cfg.noise > 0.0 {
        s = add_noise(&s, cfg.noise, cfg.seed)?;
    }
    let text = config_line(&cfg) + &s.to_csv();
    write_out(cfg.out.as_deref(), &text)
}

// ------------------------------------------------------------------ invert

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
#[serde(default)]
pub struct InvertConfig {
    pub input: Option<String>,
    pub order: usize,
    pub extended: bool,
    pub offset: bool,
    pub pencil_len: Option<usize>,
    pub degeneracy_tol: f64,
    pub rank_tol: f64,
    pub confluence_factor: f64,
    pub out: Option<String>,
}

impl Default for InvertConfig {
    fn default() -> Self {
        let d = InversionConfig::default();
        Self {
            input: None,
            order: d.model_order,
            extended: false,
            offset: d.offset,
            pencil_len: d.pencil_len,
            degeneracy_tol: d.degeneracy_tol,
            rank_tol: d.rank_tol,
            confluence_factor: d.confluence_factor,
            out: None,
        }
    }
}

#[derive(Args, Serialize, Debug)]
pub struct InvertFlags {
    /// Input CSV written by `simulate`.
    input: Option<String>,
    /// Model order K.
    #[arg(long)]
    order: Option<usize>,
    /// Merge coalescing frequencies into confluent (polynomial-amplitude) modes.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    extended: Option<bool>,
    /// Fit a constant term as well.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    offset: Option<bool>,
    #[arg(long)]
    pencil_len: Option<usize>,
    #[arg(long)]
    degeneracy_tol: Option<f64>,
    #[arg(long)]
    rank_tol: Option<f64>,
    #[arg(long)]
    confluence_factor: Option<f64>,
    /// Output JSON (default stdout).
    #[arg(long, short)]
    out: Option<String>,
}

pub fn invert(flags: &InvertFlags, file: Option<&str>) -> Result<(), CliError> {
    let cfg: InvertConfig = merge(load_section(file, "invert")?, flags)?;
    let input = cfg.input.as_deref().ok_or_else(|| usage("invert needs an input CSV"))?;
    let text = std::fs::read_to_string(input).map_err(|e| usage(format!("cannot read {input}: {e}")))?;
    let series = TimeSeries::from_csv(&text)?;
    let icfg = InversionConfig {
        model_order: cfg.order,
        degeneracy_tol: cfg.degeneracy_tol,
        rank_tol: cfg.rank_tol,
        confluence_factor: cfg.confluence_factor,
        pencil_len: cfg.pencil_len,
        offset: cfg.offset,
    };
    let report = if cfg.extended { extended_invert(&series, &icfg)? } else { standard_invert(&series, &icfg)? };
    write_out(cfg.out.as_deref(), &json_doc(&cfg, &report))
}

// --------------------------------------------------------------------- map

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
#[serde(default)]
pub struct MapConfig {
    pub gamma: f64,
    pub delta_min: f64,
    pub delta_max: f64,
    pub nx: usize,
    pub eps_min: f64,
    pub eps_max: f64,
    pub ny: usize,
    pub mode: ObjectiveMode,
    #[serde(flatten)]
    pub acquisition: Acquisition,
    pub out: Option<String>,
}

impl Default for MapConfig {
    fn default() -> Self {
        Self {
            gamma: 0.1,
            delta_min: -0.02,
            delta_max: 0.02,
            nx: 81,
            eps_min: 0.0,
            eps_max: 0.04,
            ny: 81,
            mode: ObjectiveMode::Oracle,
            acquisition: Acquisition::default(),
            out: None,
        }
    }
}

#[derive(Args, Serialize, Debug)]
pub struct MapFlags {
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    delta_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    delta_max: Option<f64>,
    /// Grid points along Δ.
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    eps_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    eps_max: Option<f64>,
    /// Grid points along ε.
    #[arg(long)]
    ny: Option<usize>,
    /// oracle or experimental.
    #[arg(long)]
    mode: Option<ObjectiveMode>,
    #[command(flatten)]
    #[serde(flatten)]
    acquisition: AcquisitionFlags,
    /// Output CSV (default stdout).
    #[arg(long, short)]
    out: Option<String>,
}

fn check_axis(name: &str, lo: f64, hi: f64, n: usize) -> Result<(), CliError> {
    if n == 0 || !(hi >= lo) || (n > 1 && hi == lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(usage(format!("empty {name} range [{lo}, {hi}] with {n} points")));
    }
    Ok(())
}

fn fmt(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v > 0.0 {
        "inf".into()
    } else {
        "nan".into()
    }
}

pub fn map(flags: &MapFlags, file: Option<&str>) -> Result<(), CliError> {
    let cfg: MapConfig = merge(load_section(file, "map")?, flags)?;
    check_axis("delta", cfg.delta_min, cfg.delta_max, cfg.nx)?;
    check_axis("eps", cfg.eps_min, cfg.eps_max, cfg.ny)?;
    let obj = objective(cfg.mode, cfg.gamma, &cfg.acquisition)?;
    let xs = linspace(cfg.delta_min, cfg.delta_max, cfg.nx);
    let ys = linspace(cfg.eps_min, cfg.eps_max, cfg.ny);
    let mut text = config_line(&cfg);
    text.push_str("delta,eps,f_value,min_gap,amp_norm,region\n");
    for (x, y, m) in grid_measure(&obj, &xs, &ys) {
        match m {
            Ok(m) => {
                let region = m.region.map(|r| r.as_str()).unwrap_or("unresolved");
                let _ = writeln!(
                    text,
                    "{},{},{},{},{},{region}",
                    fmt(x),
                    fmt(y),
                    fmt(m.f_value),
                    fmt(m.min_gap),
                    fmt(m.amp_norm)
                );
            }
            Err(epbloch::Error::InvalidParameter(msg)) => return Err(usage(msg)),
            Err(_) => {
                let _ = writeln!(text, "{},{},nan,nan,nan,failed", fmt(x), fmt(y));
            }
        }
    }
    write_out(cfg.out.as_deref(), &text)
}

// ---------------------------------------------------------------- scan-ep2

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
#[serde(default)]
pub struct ScanCommandConfig {
    pub gamma: f64,
    pub eps: f64,
    pub delta_min: f64,
    pub delta_max: f64,
    pub steps: usize,
    pub rel_tol: f64,
    pub mode: ObjectiveMode,
    #[serde(flatten)]
    pub acquisition: Acquisition,
    pub out: Option<String>,
    pub trace: Option<String>,
}

impl Default for ScanCommandConfig {
    fn default() -> Self {
        Self {
            gamma: 0.1,
            eps: 0.01,
            delta_min: 0.0,
            delta_max: 5e-3,
            steps: 51,
            rel_tol: ScanConfig::default().rel_tol,
            mode: ObjectiveMode::Oracle,
            acquisition: Acquisition::default(),
            out: None,
            trace: None,
        }
    }
}

#[derive(Args, Serialize, Debug)]
pub struct ScanFlags {
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    eps: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    delta_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    delta_max: Option<f64>,
    /// Grid points before refinement.
    #[arg(long)]
    steps: Option<usize>,
    /// Refinement tolerance in units of Γ.
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    mode: Option<ObjectiveMode>,
    #[command(flatten)]
    #[serde(flatten)]
    acquisition: AcquisitionFlags,
    /// Output JSON report (default stdout).
    #[arg(long, short)]
    out: Option<String>,
    /// Output CSV of the visited points.
    #[arg(long)]
    trace: Option<String>,
}

fn write_report<C: Serialize>(cfg: &C, rep: &EpReport, out: Option<&str>, trace: Option<&str>) -> Result<(), CliError> {
    write_out(out, &json_doc(cfg, rep))?;
    if let Some(path) = trace {
        let axes = [rep.axes[0].as_str(), rep.axes[1].as_str()];
        write_out(Some(path), &(config_line(cfg) + &rep.trace.to_csv(axes)))?;
    }
    Ok(())
}

pub fn scan_ep2(flags: &ScanFlags, file: Option<&str>) -> Result<(), CliError> {
    let cfg: ScanCommandConfig = merge(load_section(file, "scan-ep2")?, flags)?;
    check_axis("delta", cfg.delta_min, cfg.delta_max, cfg.steps)?;
    let obj = objective(cfg.mode, cfg.gamma, &cfg.acquisition)?;
    let scfg = ScanConfig { rel_tol: cfg.rel_tol, ..ScanConfig::default() };
    let rep = run_scan(&obj, cfg.eps, (cfg.delta_min, cfg.delta_max), cfg.steps, &scfg)?;
    write_report(&cfg, &rep, cfg.out.as_deref(), cfg.trace.as_deref())
}

// ---------------------------------------------------------------- find-ep3

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
#[serde(default)]
pub struct FindEp3Config {
    pub gamma: f64,
    pub method: SearchMethod,
    pub mode: ObjectiveMode,
    pub start_delta: Option<f64>,
    pub start_eps: Option<f64>,
    pub max_iter: Option<usize>,
    pub half_angle_deg: f64,
    #[serde(flatten)]
    pub acquisition: Acquisition,
    pub out: Option<String>,
    pub trace: Option<String>,
}

impl Default for FindEp3Config {
    fn default() -> Self {
        Self {
            gamma: 0.1,
            method: SearchMethod::Rootsearch,
            mode: ObjectiveMode::Oracle,
            start_delta: None,
            start_eps: None,
            max_iter: None,
            half_angle_deg: ValleyConfig::default().half_angle_deg,
            acquisition: Acquisition::default(),
            out: None,
            trace: None,
        }
    }
}

#[derive(Args, Serialize, Debug)]
pub struct FindEp3Flags {
    #[arg(long)]
    gamma: Option<f64>,
    /// valley or rootsearch.
    #[arg(long)]
    method: Option<SearchMethod>,
    /// oracle or experimental.
    #[arg(long)]
    mode: Option<ObjectiveMode>,
    /// Start point (default: an interior point found by `seed_interior`).
    #[arg(long, allow_negative_numbers = true, requires = "start_eps")]
    start_delta: Option<f64>,
    #[arg(long, allow_negative_numbers = true, requires = "start_delta")]
    start_eps: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Half-width of the valley-ascend angular range, degrees.
    #[arg(long)]
    half_angle_deg: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    acquisition: AcquisitionFlags,
    /// Output JSON report (default stdout).
    #[arg(long, short)]
    out: Option<String>,
    /// Output CSV of the search path.
    #[arg(long)]
    trace: Option<String>,
}

pub fn find_ep3(flags: &FindEp3Flags, file: Option<&str>) -> Result<(), CliError> {
    let cfg: FindEp3Config = merge(load_section(file, "find-ep3")?, flags)?;
    let obj = objective(cfg.mode, cfg.gamma, &cfg.acquisition)?;
    let start = match (cfg.start_delta, cfg.start_eps) {
        (Some(d), Some(e)) => (d, e),
        (None, None) => seed_interior(&obj)?,
        _ => return Err(usage("give both start_delta and start_eps")),
    };
    let rep = match cfg.method {
        SearchMethod::Valley => {
            let start = seed_interior_from(&obj, start)?;
            let mut vcfg = ValleyConfig { half_angle_deg: cfg.half_angle_deg, ..ValleyConfig::default() };
            if let Some(m) = cfg.max_iter {
                vcfg.max_iter = m;
            }
            valley_ascend(&obj, start, &vcfg)?
        }
        SearchMethod::Rootsearch => {
            let mut rcfg = RootConfig::for_mode(cfg.mode);
            if let Some(m) = cfg.max_iter {
                rcfg.max_iter = m;
            }
            root_search_pq(&obj, start, &rcfg)?
        }
    };
    write_report(&cfg, &rep, cfg.out.as_deref(), cfg.trace.as_deref())?;
    if rep.converged() {
        Ok(())
    } else {
        Err(CliError::Numerical(format!("EP3 search ended with status {:?}", rep.status)))
    }
}

// ---------------------------------------------------------------- estimate

#[derive(Serialize, Deserialize, Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    /// Hidden (ω_s, μ, Γ): sweep, locate both EP3s experimentally, invert.
    Planted,
    /// An EP report written by `find-ep3`, with the lab controls at the EP3.
    Report,
    /// The exact EP3 for given (ω_s, μ, Γ).
    Oracle,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
#[serde(default)]
pub struct EstimateConfig {
    pub source: Source,
    pub omega_s: f64,
    pub mu: f64,
    pub gamma: f64,
    pub nu_min: f64,
    pub nu_max: f64,
    pub field_min: f64,
    pub field_max: f64,
    pub nx: usize,
    pub ny: usize,
    pub method: SearchMethod,
    #[serde(flatten)]
    pub acquisition: Acquisition,
    pub report: Option<String>,
    pub nu: Option<f64>,
    pub field: Option<f64>,
    pub out: Option<String>,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        let p = PlantedSetup::default();
        Self {
            source: Source::Planted,
            omega_s: p.omega_s,
            mu: p.mu,
            gamma: p.gamma,
            nu_min: p.nu_range.0,
            nu_max: p.nu_range.1,
            field_min: p.field_range.0,
            field_max: p.field_range.1,
            nx: p.grid.0,
            ny: p.grid.1,
            method: p.method,
            acquisition: Acquisition { samples: p.experimental.samples, ..Acquisition::default() },
            report: None,
            nu: None,
            field: None,
            out: None,
        }
    }
}

#[derive(Args, Serialize, Debug)]
pub struct EstimateFlags {
    /// planted, report or oracle.
    #[arg(long)]
    source: Option<Source>,
    /// Planted transition frequency ω_s.
    #[arg(long, allow_negative_numbers = true)]
    omega_s: Option<f64>,
    /// Planted dipole strength μ.
    #[arg(long)]
    mu: Option<f64>,
    /// Planted relaxation coefficient Γ.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    nu_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    nu_max: Option<f64>,
    #[arg(long)]
    field_min: Option<f64>,
    #[arg(long)]
    field_max: Option<f64>,
    /// Sweep points along ν.
    #[arg(long)]
    nx: Option<usize>,
    /// Sweep points along 𝓔.
    #[arg(long)]
    ny: Option<usize>,
    /// valley or rootsearch.
    #[arg(long)]
    method: Option<SearchMethod>,
    #[command(flatten)]
    #[serde(flatten)]
    acquisition: AcquisitionFlags,
    /// EP report JSON (source = report).
    #[arg(long)]
    report: Option<String>,
    /// Drive frequency ν at the EP3 (source = report).
    #[arg(long, allow_negative_numbers = true)]
    nu: Option<f64>,
    /// Field amplitude 𝓔 at the EP3 (source = report).
    #[arg(long)]
    field: Option<f64>,
    /// Output JSON (default stdout).
    #[arg(long, short)]
    out: Option<String>,
}

fn read_report(path: &str) -> Result<EpReport, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {path}: {e}")))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| usage(format!("{path} is not valid JSON: {e}")))?;
    let body = v.get("result").cloned().unwrap_or(v);
    serde_json::from_value(body).map_err(|e| usage(format!("{path} is not an EP report: {e}")))
}

pub fn estimate(flags: &EstimateFlags, file: Option<&str>) -> Result<(), CliError> {
    let cfg: EstimateConfig = merge(load_section(file, "estimate")?, flags)?;
    match cfg.source {
        Source::Report => {
            let path = cfg.report.as_deref().ok_or_else(|| usage("source `report` needs --report"))?;
            let rep = read_report(path)?;
            let lab = rep.axes[0] == "nu" && rep.axes[1] == "field";
            let nu = cfg.nu.or(lab.then_some(rep.location[0])).ok_or_else(|| usage("missing nu at the EP3"))?;
            let field =
                cfg.field.or(lab.then_some(rep.location[1])).ok_or_else(|| usage("missing field at the EP3"))?;
            let params = estimate_at_ep3(&rep, nu, field, &rep.frequencies)?;
            write_out(cfg.out.as_deref(), &json_doc(&cfg, &params))
        }
        Source::Oracle => {
            let truth = epbloch::PhysicalParams::new(cfg.omega_s, cfg.mu, cfg.gamma, 0.0, 0.0)?;
            let obj = Objective::oracle(cfg.gamma)?;
            let rep = root_search_pq(&obj, seed_interior(&obj)?, &RootConfig::default())?;
            let at = ControlParams { gamma_rate: cfg.gamma, detuning: rep.location[0], drive: rep.location[1] };
            let (nu, field) = truth.lab_controls(&at)?;
            let params = estimate_at_ep3(&rep, nu, field, &rep.frequencies)?;
            write_out(cfg.out.as_deref(), &json_doc(&cfg, &json!({ "estimate": params, "ep3": rep })))?;
            if rep.status == SearchStatus::Converged {
                Ok(())
            } else {
                Err(CliError::Numerical(format!("EP3 search ended with status {:?}", rep.status)))
            }
        }
        Source::Planted => {
            let setup = PlantedSetup {
                omega_s: cfg.omega_s,
                mu: cfg.mu,
                gamma: cfg.gamma,
                nu_range: (cfg.nu_min, cfg.nu_max),
                field_range: (cfg.field_min, cfg.field_max),
                grid: (cfg.nx, cfg.ny),
                method: cfg.method,
                experimental: cfg.acquisition.experimental(),
            };
            let outcome = planted_pipeline(&setup)?;
            write_out(cfg.out.as_deref(), &json_doc(&cfg, &outcome))?;
            if outcome.converged() {
                Ok(())
            } else {
                Err(CliError::Numerical("EP3 search did not converge on every branch".into()))
            }
        }
    }
}
