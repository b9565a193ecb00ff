//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so that every criterion is reported even
//! when an earlier one fails. The process exits with status 1 if any criterion
//! outside `KNOWN_UNATTAINED` fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use common::*;
use epbloch::bloch::ep3_locus;
use epbloch::estimator::{branch_probe, planted_pipeline, OffsetAxis, PlantedSetup};
use epbloch::harminv::{extended_invert, standard_invert, InversionConfig};
use epbloch::locate::{
    root_search_pq, scan_ep2, seed_interior, valley_ascend, EpReport, ExperimentalConfig, Objective, RootConfig,
    ScanConfig, SearchStatus, ValleyConfig,
};
use epbloch::propagator::{simulate, BlochState};
use epbloch::{ObjectiveMode, RateParams, C64};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const G: f64 = 0.1;
const EP2_DELTA: f64 = 1.021073946073554e-3;

/// Criteria that fail with the specified method; see the README.
const KNOWN_UNATTAINED: &[u8] = &[8];

type Outcome = Result<String, String>;
type Criterion = (u8, &'static str, f64, fn() -> Outcome);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn lib<T>(r: epbloch::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn ep3_plus(g: f64) -> [f64; 2] {
    let p = ep3_locus(g).unwrap()[0];
    [p.detuning.abs(), p.drive]
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).abs().max((a[1] - b[1]).abs())
}

fn strictly_increasing(rep: &EpReport) -> bool {
    let f: Vec<f64> = rep.trace.accepted().map(|s| s.f_value).collect();
    f.len() >= 2 && f.windows(2).all(|w| w[1] > w[0])
}

fn closed_form_spectrum() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let p = params(rng.random(), rng.random(), rng.random());
        let d = paired3(&epbloch::eigenvalues_closed_form(&p).eigenvalues, &dense_eigenvalues(&p));
        worst = worst.max(d);
    }
    ensure(worst < 1e-9, format!("max |diff| {worst:.2e} over 10^4 points"))?;
    Ok(format!("max |diff| {worst:.2e} over 10^4 points"))
}

fn ep3_analytic_locus() -> Outcome {
    let obj = lib(Objective::oracle(G))?;
    let start = lib(seed_interior(&obj))?;
    let r = lib(root_search_pq(&obj, start, &RootConfig::for_mode(ObjectiveMode::Oracle)))?;
    let d = dist(r.location, ep3_plus(G));
    ensure(r.status == SearchStatus::Converged, format!("status {:?}", r.status))?;
    ensure(d < 1e-10, format!("distance {d:.2e} from the analytic EP3"))?;
    Ok(format!("distance {d:.2e} from the analytic EP3"))
}

fn ep2_scan() -> Outcome {
    let cfg = ScanConfig::default();
    let exp = lib(Objective::experimental(G, ExperimentalConfig::default()))?;
    let oracle = lib(Objective::oracle(G))?;
    let re = lib(scan_ep2(&exp, 0.01, (0.0, 5e-3), 51, &cfg))?;
    let ro = lib(scan_ep2(&oracle, 0.01, (0.0, 5e-3), 51, &cfg))?;
    let de = (re.location[0] - EP2_DELTA).abs();
    let dor = (ro.location[0] - EP2_DELTA).abs();
    let detail = format!(
        "experimental {:.9e} (err {de:.1e}), oracle {:.12e} (err {dor:.1e})",
        re.location[0], ro.location[0]
    );
    ensure(re.status == SearchStatus::Converged && ro.status == SearchStatus::Converged, format!("not converged: {detail}"))?;
    ensure(de < 1e-5 && dor < 1e-9, detail.clone())?;
    ensure((ro.location[0] - 1.021e-3).abs() < 5e-7, format!("does not round to 1.021e-3: {detail}"))?;
    Ok(detail)
}

fn amplitude_divergence() -> Outcome {
    let exp = lib(Objective::experimental(G, ExperimentalConfig::default()))?;
    let located = lib(scan_ep2(&exp, 0.01, (0.0, 5e-3), 51, &ScanConfig::default()))?.location[0];
    let cfg = InversionConfig::default();
    let at = |k: usize| -> Result<(f64, f64), String> {
        let s = lib(exp.record(&exp.controls(located - k as f64 * 1e-4, 0.01)))?;
        Ok((lib(standard_invert(&s, &cfg))?.amp_norm, lib(extended_invert(&s, &cfg))?.amp_norm))
    };
    let (std0, ext0) = at(0)?;
    let (std10, ext10) = at(10)?;
    let ratio = std0 / std10;
    let ext_ratio = ext0 / ext10;
    let detail = format!("standard ratio {ratio:.3e}, extended ratio {ext_ratio:.3}");
    ensure(ratio >= 10.0, detail.clone())?;
    ensure(ext_ratio < 10.0 && ext_ratio > 0.1, detail.clone())?;
    Ok(detail)
}

fn valley_ascend_criterion() -> Outcome {
    let want = ep3_plus(G);
    let mut parts = Vec::new();
    for (name, obj, tol) in [
        ("oracle", lib(Objective::oracle(G))?, 1e-6),
        (
            "experimental",
            lib(Objective::experimental(G, ExperimentalConfig { samples: 4000, ..ExperimentalConfig::default() }))?,
            1e-4,
        ),
    ] {
        let start = lib(seed_interior(&obj))?;
        let r = lib(valley_ascend(&obj, start, &ValleyConfig::default()))?;
        let d = dist(r.location, want);
        let part = format!("{name} err {d:.1e} in {} iterations", r.iterations);
        ensure(r.status == SearchStatus::Converged, format!("{part}, status {:?}", r.status))?;
        ensure(d < tol && r.iterations <= 50, part.clone())?;
        ensure(strictly_increasing(&r), format!("{part}, accepted F not strictly increasing"))?;
        parts.push(part);
    }
    Ok(parts.join("; "))
}

fn triple_mode_signal() -> Outcome {
    let p = ep3_locus(G).unwrap()[0];
    let s = lib(simulate(&p, &RateParams::default(), &BlochState::ground_state(), 2000, 1.0))?;
    let r = lib(extended_invert(&s, &InversionConfig::default()))?;
    let mults: Vec<usize> = r.modes.modes.iter().map(|m| m.multiplicity()).collect();
    ensure(mults == vec![3], format!("multiplicities {mults:?}"))?;
    let err = (r.modes.modes[0].omega - C64::new(0.0, -2.0 * G / 3.0)).norm();
    let detail = format!("one mode of multiplicity 3, ω err {err:.1e}, residual {:.1e}", r.residual_rms);
    ensure(err < 1e-6 && r.residual_rms < 1e-8, detail.clone())?;
    Ok(detail)
}

fn branch_point_exponent() -> Outcome {
    let deltas: Vec<f64> = (0..17).map(|k| G * 10f64.powf(-9.0 + 4.0 * k as f64 / 16.0)).collect();
    let nu = lib(branch_probe(G, &deltas, OffsetAxis::Nu))?.exponent;
    let field = lib(branch_probe(G, &deltas, OffsetAxis::Field))?.exponent;
    let detail = format!("slope {nu:.5} along ν, {field:.5} along 𝓔");
    ensure((nu - 1.0 / 3.0).abs() < 0.02 && (field - 1.0 / 3.0).abs() < 0.02, detail.clone())?;
    Ok(detail)
}

fn end_to_end() -> Outcome {
    let clean = lib(planted_pipeline(&PlantedSetup::default()))?;
    let noisy_setup = PlantedSetup {
        experimental: ExperimentalConfig { samples: 4000, noise: 1e-4, averages: 100, seed: 1, ..ExperimentalConfig::default() },
        ..PlantedSetup::default()
    };
    let noisy = lib(planted_pipeline(&noisy_setup))?;
    let worst = |e: [f64; 3]| e.iter().fold(0.0f64, |a, b| a.max(*b));
    let fmt = |e: [f64; 3]| format!("[{:.1e}, {:.1e}, {:.1e}]", e[0], e[1], e[2]);
    let detail = format!(
        "clean errors (ω_s, μ, Γ) {}, noisy {}",
        fmt(clean.relative_errors),
        fmt(noisy.relative_errors)
    );
    ensure(clean.converged() && worst(clean.relative_errors) < 1e-4, format!("clean: {detail}"))?;
    ensure(noisy.converged() && worst(noisy.relative_errors) < 1e-3, format!("noisy: {detail}"))?;
    Ok(detail)
}

fn property_suites() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut s = |lo: f64, hi: f64| rng.random_range(lo..hi);
    let mut count = 0usize;
    for _ in 0..2000 {
        let p = params(s(0.0, 1.0), s(-1.0, 1.0), s(-1.0, 1.0));
        trace_identity(&p)?;
        determinant_identity(&p)?;
        homogeneity(&p, 10f64.powf(s(-2.0, 2.0)))?;
        sign_symmetry(&p)?;
        let v = Vector3::new(s(-1.0, 1.0), s(-1.0, 1.0), s(-1.0, 1.0));
        semigroup(&p, s(0.0, 10.0), s(0.0, 10.0), v)?;
        count += 5;
    }
    for _ in 0..100 {
        let v = Vector3::new(s(-1.0, 1.0), s(-1.0, 1.0), s(-1.0, 1.0));
        norm_conservation(s(-1.0, 1.0), s(-1.0, 1.0), v)?;
        let simple = SimpleModes {
            re: s(0.05, 1.0),
            im1: s(-1.0, 0.0),
            im2: s(-1.0, 0.0),
            amp1: C64::new(s(0.1, 1.0), s(-1.0, 1.0)),
            amp2: s(0.1, 1.0),
        };
        simple_round_trip(&simple, 0.1, 400)?;
        let mut coeffs = vec![s(0.2, 1.0), s(-0.1, 0.1)];
        if s(0.0, 1.0) < 0.5 {
            coeffs.push(s(-0.01, 0.01));
        }
        let confluent = ConfluentModes {
            im: s(-0.2, -0.02),
            coeffs,
            pair_re: s(0.2, 1.0),
            pair_im: s(-0.2, -0.02),
            pair_amp: C64::new(s(0.1, 1.0), 0.1),
        };
        confluent_round_trip(&confluent, 0.5, 400)?;
        count += 3;
    }
    Ok(format!("{count} checks"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        (1, "closed-form spectrum", 5.0, closed_form_spectrum),
        (2, "EP3 analytic locus", 1.0, ep3_analytic_locus),
        (3, "EP2 scan", 30.0, ep2_scan),
        (4, "amplitude divergence", 60.0, amplitude_divergence),
        (5, "valley ascend", 60.0, valley_ascend_criterion),
        (6, "triple-mode signal", 10.0, triple_mode_signal),
        (7, "branch-point exponent", 5.0, branch_point_exponent),
        (8, "end-to-end estimation", 300.0, end_to_end),
        (9, "property suites", 60.0, property_suites),
    ];
    let mut failed = Vec::new();
    for (n, name, limit, run) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        let outcome = match outcome {
            Ok(d) if secs >= limit => Err(format!("{d}; over the {limit} s limit")),
            other => other,
        };
        match outcome {
            Ok(d) => println!("criterion {n} ({name}): PASS {d} ({secs:.2} s)"),
            Err(d) => {
                failed.push(n);
                println!("criterion {n} ({name}): FAIL {d} ({secs:.2} s)");
            }
        }
    }
    println!("{} of 9 criteria passed", 9 - failed.len());
    let unexpected: Vec<u8> = failed.iter().copied().filter(|n| !KNOWN_UNATTAINED.contains(n)).collect();
    if !failed.is_empty() && unexpected.is_empty() {
        println!("known unattained: {failed:?}");
    }
    if !unexpected.is_empty() {
        println!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
