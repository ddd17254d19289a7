use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qlc_core::singular::{
    check_gamma_window, check_trace_window, finite_singular_points, first_lyapunov_sign, gamma_window, trace_window,
    SingularKind,
};
use qlc_core::vectorfield::CanonicalParamsII;

fn two_points(p: &CanonicalParamsII) -> bool {
    finite_singular_points(p).is_ok_and(|s| s.len() == 2)
}

#[test]
fn gamma_window_iff_two_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut checked = 0;
    while checked < 200 {
        let c = rng.gen_range(1.0..=5.0f64);
        let g = rng.gen_range(0.0..=6.0f64);
        if c <= 1.0 || g <= 0.0 {
            continue;
        }
        let (lo, hi) = gamma_window(c).unwrap();
        if (g - lo).abs() < 1e-6 || (g - hi).abs() < 1e-6 {
            continue;
        }
        let p = CanonicalParamsII::with_unit_a(c, g, 0.0, 0.0);
        assert_eq!(check_gamma_window(c, g).unwrap(), two_points(&p), "c={c} gamma={g}");
        checked += 1;
    }
}

#[test]
fn trace_window_implies_two_points_for_small_shift() {
    // With b = beta + gamma in [0, 2] the trace window is a sufficient
    // condition; outside that band it is not (see the counterexample below).
    let mut rng = ChaCha8Rng::seed_from_u64(36);
    let mut checked = 0;
    let mut inside = 0;
    while checked < 200 {
        let c = rng.gen_range(1.0..=5.0f64);
        let (glo, ghi) = gamma_window(c).unwrap();
        if !(ghi - glo > 1e-3) {
            continue;
        }
        let g = rng.gen_range(glo..ghi);
        let b = rng.gen_range(0.0..=2.0f64);
        let lam = rng.gen_range(-3.0..3.0f64);
        let (tlo, thi) = trace_window(c, g).unwrap();
        let s = b + lam;
        if (s - tlo).abs() < 1e-6 || (s - thi).abs() < 1e-6 {
            continue;
        }
        let p = CanonicalParamsII::with_unit_a(c, g, b - g, lam);
        if check_trace_window(c, g, b - g, lam).unwrap() {
            assert!(two_points(&p), "c={c} gamma={g} b={b} lambda={lam}");
            inside += 1;
        }
        checked += 1;
    }
    assert!(inside > 20, "only {inside} samples inside the trace window");
}

#[test]
fn trace_window_not_sufficient_for_negative_shift() {
    // b = -3, lambda = 1: trace -2 is inside the window for c = 1.5,
    // gamma = 1, yet (1 + b)^2 + 4 lambda = 8 > 4 c gamma = 6, so the lower
    // line carries two more singular points.
    let (c, g) = (1.5, 1.0);
    let (b, lam) = (-3.0, 1.0);
    let p = CanonicalParamsII::with_unit_a(c, g, b - g, lam);
    assert!(check_trace_window(c, g, b - g, lam).unwrap());
    assert_eq!(finite_singular_points(&p).unwrap().len(), 4);
}

#[test]
fn degenerate_c() {
    assert!(gamma_window(0.5).is_err());
    let (lo, hi) = gamma_window(1.0).unwrap();
    assert!((hi - lo).abs() < 1e-12);
    assert!(!check_gamma_window(1.0, 1.0).unwrap());
}

#[test]
fn lyapunov_sign_at_weak_focus() {
    // the stable cycle born at zero trace in the constructive sequence
    let p = CanonicalParamsII::with_unit_a(2.0, 1.0, -1.8, 0.8);
    let est = first_lyapunov_sign(&p).unwrap();
    assert_eq!(est.sign, -1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn census_points_are_singular_and_sorted(c in 1.01f64..5.0, g in 0.0f64..6.0, b in -2.0f64..2.0, l in -1.0f64..1.0) {
        let p = CanonicalParamsII::with_unit_a(c, g, b, l);
        if let Ok(pts) = finite_singular_points(&p) {
            let sys = p.to_general();
            for s in &pts {
                prop_assert!(sys.eval(s.location).norm() <= 1e-10);
            }
            prop_assert!(pts.windows(2).all(|w| (w[0].location.x, w[0].location.y) < (w[1].location.x, w[1].location.y)));
            prop_assert!(pts.iter().any(|s| s.location.norm() == 0.0));
            let saddles = pts.iter().filter(|s| s.kind == SingularKind::Saddle).count();
            prop_assert!(saddles <= pts.len());
        }
    }
}
