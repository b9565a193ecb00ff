//! Harmonic inversion of real, uniformly sampled signals.
//!
//! Frequencies come from a Hankel matrix pencil restricted to the dominant
//! right singular subspace; amplitudes from a linear least-squares fit. The
//! extended variant merges clusters of nearly coinciding frequencies into a
//! single mode with polynomial-in-t amplitudes.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{lstsq, right_svd};
use crate::propagator::{confluent_basis, Mode, ModeSet, TimeSeries};

/// Inversion settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InversionConfig {
    /// Number of exponential modes K.
    pub model_order: usize,
    /// Frequencies closer than this times the dominant |ω| are treated as
    /// exactly degenerate.
    pub degeneracy_tol: f64,
    /// Relative singular-value cutoff for the subspace rank.
    pub rank_tol: f64,
    /// Frequencies closer than this times their smaller decay rate are merged
    /// by the extended method (0 disables the rule).
    pub confluence_factor: f64,
    /// Number of pencil columns; `None` picks `min(N/3, 48)`.
    pub pencil_len: Option<usize>,
    /// Fit an extra ω = 0 term for a steady-state offset.
    pub offset: bool,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self {
            model_order: 3,
            degeneracy_tol: 1e-6,
            rank_tol: 1e-10,
            confluence_factor: 0.25,
            pencil_len: None,
            offset: false,
        }
    }
}

impl InversionConfig {
    pub fn with_order(model_order: usize) -> Self {
        Self { model_order, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.model_order == 0 {
            return Err(Error::InvalidParameter("model order must be >= 1".into()));
        }
        if !(self.degeneracy_tol > 0.0) || !(self.rank_tol > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be > 0".into()));
        }
        if !(self.confluence_factor >= 0.0) {
            return Err(Error::InvalidParameter("confluence factor must be >= 0".into()));
        }
        Ok(())
    }

    fn pencil_order(&self) -> usize {
        self.model_order + usize::from(self.offset)
    }
}

/// Result of an inversion.
#[derive(Debug, Clone, PartialEq)]
pub struct InversionReport {
    pub modes: ModeSet,
    /// Pencil frequencies before any merging, sorted by real then imaginary part.
    pub frequencies: Vec<C64>,
    /// Amplitude of the ω = 0 term when fitted.
    pub offset: Option<C64>,
    pub residual_rms: f64,
    /// Smallest pairwise distance between the pencil frequencies.
    pub min_gap: f64,
    pub amp_norm: f64,
    pub subspace_rank: usize,
}

#[derive(Serialize, Deserialize)]
struct ModeJson {
    omega_re: f64,
    omega_im: f64,
    multiplicity: usize,
    amplitudes: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    nodes: Vec<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
struct ReportJson {
    modes: Vec<ModeJson>,
    residual_rms: f64,
    min_gap: f64,
    amp_norm: f64,
    subspace_rank: usize,
    #[serde(default)]
    frequencies: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    offset: Option<[f64; 2]>,
}

fn pair(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

fn unpair(p: [f64; 2]) -> C64 {
    C64::new(p[0], p[1])
}

impl Serialize for InversionReport {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ReportJson {
            modes: self
                .modes
                .modes
                .iter()
                .map(|m| ModeJson {
                    omega_re: m.omega.re,
                    omega_im: m.omega.im,
                    multiplicity: m.multiplicity(),
                    amplitudes: m.amplitudes.iter().copied().map(pair).collect(),
                    nodes: m.nodes.iter().copied().map(pair).collect(),
                })
                .collect(),
            residual_rms: self.residual_rms,
            min_gap: self.min_gap,
            amp_norm: self.amp_norm,
            subspace_rank: self.subspace_rank,
            frequencies: self.frequencies.iter().copied().map(pair).collect(),
            offset: self.offset.map(pair),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for InversionReport {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = ReportJson::deserialize(d)?;
        let modes = j
            .modes
            .into_iter()
            .map(|m| {
                if m.multiplicity != m.amplitudes.len() {
                    return Err(serde::de::Error::custom("multiplicity does not match amplitudes"));
                }
                Ok(Mode {
                    omega: C64::new(m.omega_re, m.omega_im),
                    amplitudes: m.amplitudes.into_iter().map(unpair).collect(),
                    nodes: m.nodes.into_iter().map(unpair).collect(),
                })
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(InversionReport {
            modes: ModeSet::new(modes),
            frequencies: j.frequencies.into_iter().map(unpair).collect(),
            offset: j.offset.map(unpair),
            residual_rms: j.residual_rms,
            min_gap: j.min_gap,
            amp_norm: j.amp_norm,
            subspace_rank: j.subspace_rank,
        })
    }
}

/// Smallest pairwise distance; 0 for fewer than two values.
pub fn min_pairwise_gap(w: &[C64]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..w.len() {
        for j in i + 1..w.len() {
            best = best.min((w[i] - w[j]).norm());
        }
    }
    if best.is_finite() {
        best
    } else {
        0.0
    }
}

fn sort_frequencies(w: &mut [C64]) {
    w.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

struct Pencil {
    frequencies: Vec<C64>,
    offset_found: bool,
    rank: usize,
}

/// Matrix-pencil frequencies of the `order` dominant components.
fn pencil(s: &TimeSeries, cfg: &InversionConfig) -> Result<Pencil> {
    let n = s.len();
    let k = cfg.pencil_order();
    let need = 2 * k + 1;
    if n < need {
        return Err(Error::SignalTooShort { len: n, need });
    }
    let l = cfg.pencil_len.unwrap_or((n / 3).min(48)).max(k).min(n - k);
    let rows = n - l;
    let x = &s.samples;
    let h = DMatrix::from_fn(rows, l + 1, |i, j| x[i + j]);
    let (sigma, v) = right_svd(&h);
    let smax = sigma[0];
    if smax == 0.0 {
        return Err(Error::Numerical("signal is identically zero".into()));
    }
    let rank = sigma.iter().filter(|s| **s > cfg.rank_tol * smax).count();
    let vs = v.columns(0, k);
    let v1 = vs.rows(0, l).into_owned();
    let v2 = vs.rows(1, l).into_owned();
    let shift = lstsq(&v1, &v2)?;
    let z = shift.complex_eigenvalues();
    let mut omega: Vec<C64> = z.iter().map(|zk| C64::i() * zk.ln() / s.dt).collect();
    let mut offset_found = false;
    if cfg.offset {
        let idx = (0..omega.len())
            .min_by(|&a, &b| omega[a].norm().total_cmp(&omega[b].norm()))
            .expect("nonempty");
        omega.remove(idx);
        offset_found = true;
    }
    sort_frequencies(&mut omega);
    Ok(Pencil { frequencies: omega, offset_found, rank })
}

struct Fit {
    amplitudes: Vec<Vec<C64>>,
    offset: Option<C64>,
    residual_rms: f64,
}

/// Least-squares amplitudes for fixed basis nodes, one cluster per mode.
fn fit(s: &TimeSeries, clusters: &[Vec<C64>], offset: bool) -> Result<Fit> {
    let n = s.len();
    let cols: usize = clusters.iter().map(Vec::len).sum::<usize>() + usize::from(offset);
    let mut a = DMatrix::<C64>::zeros(n, cols);
    let mut c = 0;
    for nodes in clusters {
        for col in confluent_basis(nodes, s.t0, s.dt, n) {
            for (i, v) in col.into_iter().enumerate() {
                a[(i, c)] = v;
            }
            c += 1;
        }
    }
    if offset {
        a.column_mut(c).fill(C64::new(1.0, 0.0));
    }
    let b = DMatrix::from_iterator(n, 1, s.samples.iter().map(|v| C64::new(*v, 0.0)));
    let d = lstsq(&a, &b)?;
    let r = &a * &d - &b;
    let residual_rms = (r.iter().map(|v| v.norm_sqr()).sum::<f64>() / n as f64).sqrt();
    let mut amplitudes = Vec::with_capacity(clusters.len());
    let mut c = 0;
    for nodes in clusters {
        amplitudes.push((0..nodes.len()).map(|k| d[(c + k, 0)]).collect());
        c += nodes.len();
    }
    let offset = offset.then(|| d[(c, 0)]);
    if d.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::Numerical("non-finite amplitudes".into()));
    }
    Ok(Fit { amplitudes, offset, residual_rms })
}

/// Amplitudes and residual for given modes (frequencies, multiplicities and
/// nodes are kept; amplitudes are replaced).
pub fn fit_amplitudes(s: &TimeSeries, modes: &ModeSet, offset: bool) -> Result<(ModeSet, Option<C64>, f64)> {
    s.validate()?;
    let clusters: Vec<Vec<C64>> = modes.modes.iter().map(Mode::basis_nodes).collect();
    let f = fit(s, &clusters, offset)?;
    let out = modes
        .modes
        .iter()
        .zip(f.amplitudes)
        .map(|(m, amplitudes)| Mode { omega: m.omega, amplitudes, nodes: m.nodes.clone() })
        .collect();
    Ok((ModeSet::new(out), f.offset, f.residual_rms))
}

fn report(pencil: &Pencil, modes: Vec<Mode>, f: &Fit) -> InversionReport {
    let modes = ModeSet::new(modes);
    InversionReport {
        amp_norm: modes.amp_norm(),
        modes,
        frequencies: pencil.frequencies.clone(),
        offset: f.offset,
        residual_rms: f.residual_rms,
        min_gap: min_pairwise_gap(&pencil.frequencies),
        subspace_rank: pencil.rank,
    }
}

/// Fits `model_order` simple modes.
pub fn standard_invert(s: &TimeSeries, cfg: &InversionConfig) -> Result<InversionReport> {
    cfg.validate()?;
    s.validate()?;
    let p = pencil(s, cfg)?;
    let clusters: Vec<Vec<C64>> = p.frequencies.iter().map(|w| vec![*w]).collect();
    let f = fit(s, &clusters, p.offset_found)?;
    let modes = p
        .frequencies
        .iter()
        .zip(&f.amplitudes)
        .map(|(w, a)| Mode::simple(*w, a[0]))
        .collect();
    Ok(report(&p, modes, &f))
}

/// Single-linkage clusters of `w` (indices), in order of first member.
fn clusters(w: &[C64], cfg: &InversionConfig) -> Vec<Vec<usize>> {
    let dom = w.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    let linked = |i: usize, j: usize| {
        let gap = (w[i] - w[j]).norm();
        let rate = w[i].im.abs().min(w[j].im.abs());
        gap <= (cfg.degeneracy_tol * dom).max(cfg.confluence_factor * rate)
    };
    let mut label: Vec<usize> = (0..w.len()).collect();
    for i in 0..w.len() {
        for j in i + 1..w.len() {
            if linked(i, j) {
                let (from, to) = (label[j].max(label[i]), label[j].min(label[i]));
                label.iter_mut().filter(|l| **l == from).for_each(|l| *l = to);
            }
        }
    }
    let mut out: Vec<Vec<usize>> = Vec::new();
    for i in 0..w.len() {
        match out.iter_mut().find(|c| label[c[0]] == label[i]) {
            Some(c) => c.push(i),
            None => out.push(vec![i]),
        }
    }
    out
}

/// Fits modes with polynomial amplitudes, merging nearly degenerate
/// frequencies.
///
/// Each cluster becomes one mode at the cluster centroid whose multiplicity
/// is the cluster size. If the exact confluent basis `t^α e^{−iωt}` at the
/// centroid explains the data as well as the divided-difference basis over
/// the individual frequencies, the former is kept; otherwise the individual
/// frequencies are stored as the mode's nodes.
pub fn extended_invert(s: &TimeSeries, cfg: &InversionConfig) -> Result<InversionReport> {
    cfg.validate()?;
    s.validate()?;
    let p = pencil(s, cfg)?;
    let groups = clusters(&p.frequencies, cfg);
    if groups.iter().all(|g| g.len() == 1) {
        return standard_invert(s, cfg);
    }
    let centroids: Vec<C64> = groups
        .iter()
        .map(|g| g.iter().map(|&i| p.frequencies[i]).sum::<C64>() / g.len() as f64)
        .collect();
    let split: Vec<Vec<C64>> = groups
        .iter()
        .map(|g| g.iter().map(|&i| p.frequencies[i]).collect())
        .collect();
    let merged: Vec<Vec<C64>> = groups
        .iter()
        .zip(&centroids)
        .map(|(g, c)| vec![*c; g.len()])
        .collect();
    let f_split = fit(s, &split, p.offset_found)?;
    let f_merged = fit(s, &merged, p.offset_found)?;
    let floor = 1e-13 * s.peak();
    let use_merged = f_merged.residual_rms <= 2.0 * f_split.residual_rms + floor;
    let (f, nodes): (Fit, Vec<Vec<C64>>) = if use_merged {
        (f_merged, vec![Vec::new(); groups.len()])
    } else {
        let nodes = split
            .iter()
            .map(|n| if n.len() > 1 { n.clone() } else { Vec::new() })
            .collect();
        (f_split, nodes)
    };
    let modes = centroids
        .iter()
        .zip(f.amplitudes.iter())
        .zip(nodes)
        .map(|((w, a), nodes)| Mode { omega: *w, amplitudes: a.clone(), nodes })
        .collect();
    Ok(report(&p, modes, &f))
}

/// One row of a degeneracy scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub parameter: f64,
    pub min_gap: f64,
    pub amp_norm: f64,
}

/// Tabulates min_gap and amp_norm against the scanned parameter.
pub fn frequency_gap_scan(entries: &[(f64, InversionReport)]) -> Vec<GapRow> {
    entries
        .iter()
        .map(|(parameter, r)| GapRow { parameter: *parameter, min_gap: r.min_gap, amp_norm: r.amp_norm })
        .collect()
}
