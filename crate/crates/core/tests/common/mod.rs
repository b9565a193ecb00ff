//! Property checks shared by the proptest suite and the acceptance runner.
//! Each check returns `Err` with a description of the first violation.
#![allow(dead_code)]

use epbloch::bloch::{build_matrix, eigenvalues_closed_form, ControlParams};
use epbloch::harminv::{extended_invert, standard_invert, InversionConfig};
use epbloch::propagator::{expm_apply, synthesize, Mode, ModeSet};
use epbloch::C64;
use nalgebra::Vector3;

pub type Check = Result<(), String>;

pub fn params(g: f64, d: f64, e: f64) -> ControlParams {
    ControlParams { gamma_rate: g, detuning: d, drive: e }
}

/// Max distance between two triples under the best of the 6 pairings.
pub fn paired3(a: &[C64; 3], b: &[C64; 3]) -> f64 {
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    PERMS
        .iter()
        .map(|p| (0..3).map(|k| (a[k] - b[p[k]]).norm()).fold(0.0, f64::max))
        .fold(f64::INFINITY, f64::min)
}

fn closed(p: &ControlParams) -> [C64; 3] {
    eigenvalues_closed_form(p).eigenvalues
}

/// Eigenvalues of M from nalgebra's real Schur decomposition.
pub fn dense_eigenvalues(p: &ControlParams) -> [C64; 3] {
    let ev = build_matrix(p).0.complex_eigenvalues();
    [ev[0], ev[1], ev[2]]
}

pub fn closed_vs_dense(p: &ControlParams, tol: f64) -> Check {
    let d = paired3(&closed(p), &dense_eigenvalues(p));
    if d < tol {
        Ok(())
    } else {
        Err(format!("closed form differs from Schur by {d:e} at {p:?}"))
    }
}

pub fn trace_identity(p: &ControlParams) -> Check {
    let s: C64 = closed(p).iter().sum();
    let err = (s - C64::new(-2.0 * p.gamma_rate, 0.0)).norm();
    if err < 1e-12 {
        Ok(())
    } else {
        Err(format!("trace off by {err:e} at {p:?}"))
    }
}

pub fn determinant_identity(p: &ControlParams) -> Check {
    let m = closed(p);
    let prod = m[0] * m[1] * m[2];
    let det = build_matrix(p).cofactor_det();
    let err = (prod - C64::new(det, 0.0)).norm();
    let scale = det.abs().max(p.scale().powi(3));
    if err <= 1e-10 * scale {
        Ok(())
    } else {
        Err(format!("product {prod} vs det {det:e} at {p:?}"))
    }
}

pub fn homogeneity(p: &ControlParams, c: f64) -> Check {
    let a = closed(&p.scaled(c));
    let b = closed(p).map(|m| m * c);
    let err = paired3(&a, &b);
    if err < 1e-10 * c.max(1.0) {
        Ok(())
    } else {
        Err(format!("scaling by {c} moves eigenvalues by {err:e} at {p:?}"))
    }
}

pub fn sign_symmetry(p: &ControlParams) -> Check {
    let base = closed(p);
    for (name, q) in [
        ("Δ", params(p.gamma_rate, -p.detuning, p.drive)),
        ("ε", params(p.gamma_rate, p.detuning, -p.drive)),
    ] {
        let err = paired3(&base, &closed(&q));
        if err >= 1e-12 {
            return Err(format!("{name} → −{name} moves eigenvalues by {err:e} at {p:?}"));
        }
    }
    Ok(())
}

pub fn semigroup(p: &ControlParams, t1: f64, t2: f64, v: Vector3<f64>) -> Check {
    let m = build_matrix(p);
    let once = expm_apply(&m, t1 + t2, &v);
    let twice = expm_apply(&m, t2, &expm_apply(&m, t1, &v));
    let err = (once - twice).norm();
    if err < 1e-11 * v.norm().max(1.0) {
        Ok(())
    } else {
        Err(format!("e^(M(t1+t2)) differs from e^(Mt2)e^(Mt1) by {err:e} at {p:?}, t = {t1}, {t2}"))
    }
}

/// At Γ = 0 the flow is a rotation: the norm is constant over t ∈ [0, 100].
pub fn norm_conservation(delta: f64, eps: f64, v: Vector3<f64>) -> Check {
    let m = build_matrix(&params(0.0, delta, eps));
    let n0 = v.norm();
    for k in 0..=200 {
        let t = 0.5 * k as f64;
        let err = (expm_apply(&m, t, &v).norm() - n0).abs();
        if err >= 1e-10 {
            return Err(format!("norm drifts by {err:e} at t = {t}, Δ = {delta}, ε = {eps}"));
        }
    }
    Ok(())
}

/// Three modes: a conjugate pair `±re + i im1` and a purely decaying one.
pub struct SimpleModes {
    pub re: f64,
    pub im1: f64,
    pub im2: f64,
    pub amp1: C64,
    pub amp2: f64,
}

impl SimpleModes {
    pub fn mode_set(&self) -> ModeSet {
        let w = C64::new(self.re, self.im1);
        ModeSet::new(vec![
            Mode::simple(w, self.amp1),
            Mode::simple(-w.conj(), self.amp1.conj()),
            Mode::simple(C64::new(0.0, self.im2), C64::new(self.amp2, 0.0)),
        ])
    }
}

fn rel(a: C64, b: C64, scale: f64) -> f64 {
    (a - b).norm() / scale
}

/// Recovers every planted mode of a well-separated set.
pub fn simple_round_trip(m: &SimpleModes, dt: f64, n: usize) -> Check {
    let planted = m.mode_set();
    let s = synthesize(&planted, 0.0, dt, n).map_err(|e| e.to_string())?;
    let r = standard_invert(&s, &InversionConfig::with_order(3)).map_err(|e| e.to_string())?;
    let wscale = planted.frequencies().iter().fold(0.0f64, |a, w| a.max(w.norm()));
    let ascale = planted.modes.iter().fold(0.0f64, |a, m| a.max(m.amplitudes[0].norm()));
    for want in &planted.modes {
        let got = r
            .modes
            .modes
            .iter()
            .min_by(|a, b| (a.omega - want.omega).norm().total_cmp(&(b.omega - want.omega).norm()))
            .ok_or("no modes recovered")?;
        let ew = rel(got.omega, want.omega, wscale);
        let ea = rel(got.amplitudes[0], want.amplitudes[0], ascale);
        if ew >= 1e-8 || ea >= 1e-6 {
            return Err(format!("mode {} recovered as {} (freq err {ew:e}, amp err {ea:e})", want.omega, got.omega));
        }
    }
    Ok(())
}

/// One confluent mode of multiplicity 2 or 3 on the imaginary axis next to a
/// simple conjugate pair.
pub struct ConfluentModes {
    pub im: f64,
    pub coeffs: Vec<f64>,
    pub pair_re: f64,
    pub pair_im: f64,
    pub pair_amp: C64,
}

impl ConfluentModes {
    pub fn mode_set(&self) -> ModeSet {
        let w = C64::new(self.pair_re, self.pair_im);
        ModeSet::new(vec![
            Mode::confluent(C64::new(0.0, self.im), self.coeffs.iter().map(|&c| C64::new(c, 0.0)).collect()),
            Mode::simple(w, self.pair_amp),
            Mode::simple(-w.conj(), self.pair_amp.conj()),
        ])
    }
}

pub fn confluent_round_trip(m: &ConfluentModes, dt: f64, n: usize) -> Check {
    let planted = m.mode_set();
    let order = m.coeffs.len() + 2;
    let s = synthesize(&planted, 0.0, dt, n).map_err(|e| e.to_string())?;
    let r = extended_invert(&s, &InversionConfig::with_order(order)).map_err(|e| e.to_string())?;
    let got = r
        .modes
        .modes
        .iter()
        .find(|g| g.multiplicity() == m.coeffs.len())
        .ok_or_else(|| format!("no mode of multiplicity {} in {:?}", m.coeffs.len(), r.modes.frequencies()))?;
    if !got.nodes.is_empty() {
        return Err("confluent mode kept split nodes".into());
    }
    let w = C64::new(0.0, m.im);
    let ew = rel(got.omega, w, w.norm().max(m.pair_re.abs()));
    if ew >= 1e-6 {
        return Err(format!("confluent frequency {} vs {w} (rel {ew:e})", got.omega));
    }
    let cscale = m.coeffs.iter().fold(0.0f64, |a, c| a.max(c.abs()));
    for (k, (g, &c)) in got.amplitudes.iter().zip(&m.coeffs).enumerate() {
        let e = rel(*g, C64::new(c, 0.0), cscale);
        if e >= 1e-6 {
            return Err(format!("coefficient {k}: {g} vs {c} (rel {e:e})"));
        }
    }
    Ok(())
}
