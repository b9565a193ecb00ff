mod common;

use common::*;
use epbloch::C64;
use nalgebra::Vector3;
use proptest::prelude::*;

fn unit() -> impl Strategy<Value = f64> {
    0.0..=1.0f64
}

fn signed() -> impl Strategy<Value = f64> {
    -1.0..=1.0f64
}

fn vector() -> impl Strategy<Value = Vector3<f64>> {
    (signed(), signed(), signed()).prop_map(|(a, b, c)| Vector3::new(a, b, c))
}

fn check(r: Check) -> Result<(), TestCaseError> {
    r.map_err(TestCaseError::fail)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn closed_form_matches_schur(g in unit(), d in unit(), e in unit()) {
        check(closed_vs_dense(&params(g, d, e), 1e-9))?;
    }

    #[test]
    fn trace(g in unit(), d in signed(), e in signed()) {
        check(trace_identity(&params(g, d, e)))?;
    }

    #[test]
    fn determinant(g in unit(), d in signed(), e in signed()) {
        check(determinant_identity(&params(g, d, e)))?;
    }

    #[test]
    fn homogeneous(g in unit(), d in signed(), e in signed(), lc in -2.0..2.0f64) {
        check(homogeneity(&params(g, d, e), 10f64.powf(lc)))?;
    }

    #[test]
    fn sign_flips(g in unit(), d in signed(), e in signed()) {
        check(sign_symmetry(&params(g, d, e)))?;
    }

    #[test]
    fn expm_semigroup(g in unit(), d in signed(), e in signed(), t1 in 0.0..10.0f64, t2 in 0.0..10.0f64, v in vector()) {
        check(semigroup(&params(g, d, e), t1, t2, v))?;
    }

    #[test]
    fn conjugate_pairs_are_exact(g in unit(), d in signed(), e in signed()) {
        let p = params(g, d, e);
        if epbloch::classify_region(&p) == epbloch::Region::ComplexPair {
            let m = epbloch::eigenvalues_closed_form(&p).eigenvalues;
            let complex: Vec<C64> = m.iter().copied().filter(|z| z.im.abs() > 1e-9 * p.scale()).collect();
            prop_assert_eq!(complex.len(), 2);
            prop_assert!((complex[0].im + complex[1].im).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rotation_preserves_norm(d in signed(), e in signed(), v in vector()) {
        check(norm_conservation(d, e, v))?;
    }

    #[test]
    fn simple_modes_round_trip(
        re in 0.05..1.0f64,
        im1 in -1.0..=0.0f64,
        im2 in -1.0..=0.0f64,
        ar in 0.1..1.0f64,
        ai in -1.0..1.0f64,
        amp2 in 0.1..1.0f64,
    ) {
        let m = SimpleModes { re, im1, im2, amp1: C64::new(ar, ai), amp2 };
        check(simple_round_trip(&m, 0.1, 400))?;
    }

    #[test]
    fn confluent_modes_round_trip(
        im in -0.2..-0.02f64,
        three in any::<bool>(),
        c0 in 0.2..1.0f64,
        c1 in -0.1..0.1f64,
        c2 in -0.01..0.01f64,
        pair_re in 0.2..1.0f64,
        pair_im in -0.2..-0.02f64,
        ar in 0.1..1.0f64,
    ) {
        let mut coeffs = vec![c0, c1];
        if three {
            coeffs.push(c2);
        }
        let m = ConfluentModes { im, coeffs, pair_re, pair_im, pair_amp: C64::new(ar, 0.1) };
        check(confluent_round_trip(&m, 0.5, 400))?;
    }
}
