use dmdsc_core::etf::{
    build_centers, check_margin_range, margin_upper_bound, pairwise_center_distance, verify_ball_disjointness,
};
use dmdsc_core::{Error, EtfCenters};
use proptest::prelude::*;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Largest violation of the simplex invariants, measured independently of
/// the library's own checker.
fn simplex_error(e: &EtfCenters, c: usize, r: f64) -> f64 {
    let target_dist = r * (2.0 * c as f64 / (c as f64 - 1.0)).sqrt();
    let target_dot = -r * r / (c as f64 - 1.0);
    let mut worst: f64 = 0.0;
    for i in 0..c {
        let s = e.center(i);
        worst = worst.max((dot(s, s).sqrt() - r).abs());
        for j in (i + 1)..c {
            let t = e.center(j);
            let d: Vec<f64> = s.iter().zip(t).map(|(a, b)| a - b).collect();
            worst = worst.max((dot(&d, &d).sqrt() - target_dist).abs());
            worst = worst.max((dot(s, t) - target_dot).abs() / r);
        }
    }
    for k in 0..e.embed_dim() {
        worst = worst.max((0..c).map(|i| e.center(i)[k]).sum::<f64>().abs());
    }
    worst
}

#[test]
fn exhaustive_small_grid() {
    for c in 2..=32 {
        for d in [c - 1, c, 2 * c] {
            for r in [1.0, 100.0] {
                let e = build_centers(c, d, r).unwrap();
                assert_eq!((e.num_classes(), e.embed_dim()), (c, d));
                let err = simplex_error(&e, c, r);
                assert!(err < 1e-9 * r, "C={c} d={d} R={r}: {err}");
                assert!(e.check_geometry() < 1e-9);
            }
        }
    }
}

#[test]
fn too_few_dimensions() {
    assert!(matches!(
        build_centers(5, 3, 1.0),
        Err(Error::DimensionTooSmall { embed_dim: 3, num_classes: 5 })
    ));
    assert!(build_centers(1, 3, 1.0).is_err());
    assert!(build_centers(3, 3, 0.0).is_err());
}

#[test]
fn ball_disjointness_across_class_counts() {
    for c in 2..=64 {
        let e = build_centers(c, c - 1, 100.0).unwrap();
        assert!(verify_ball_disjointness(&e, 70.0), "C={c}");
        let half = pairwise_center_distance(c, 100.0).unwrap() / 2.0;
        assert!(!verify_ball_disjointness(&e, half + 1e-6), "C={c}");
    }
    let e = build_centers(4, 3, 100.0).unwrap();
    assert!(!verify_ball_disjointness(&e, 82.0));
}

#[test]
fn bound_is_below_every_half_distance() {
    // R / sqrt(2) is the C -> infinity limit of the half distance
    let r = 100.0;
    for c in 2..=1000 {
        assert!(margin_upper_bound(r) < pairwise_center_distance(c, r).unwrap() / 2.0);
    }
}

#[test]
fn margin_constraint_message_names_bound() {
    let err = check_margin_range(35.0, 80.0, 100.0).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("R/sqrt(2)") && msg.contains("70.7107"), "{msg}");
    assert!(check_margin_range(35.0, 70.71, 100.0).is_ok());
    assert!(check_margin_range(35.0, 70.72, 100.0).is_err());
    assert!(check_margin_range(55.0, 35.0, 100.0).is_err());
    assert!(check_margin_range(0.0, 35.0, 100.0).is_err());
}

proptest! {
    #[test]
    fn random_shapes_are_simplices(c in 2usize..40, extra in 0usize..20, r in 1e-3f64..1e3) {
        let d = c - 1 + extra;
        let e = build_centers(c, d, r).unwrap();
        prop_assert!(simplex_error(&e, c, r) < 1e-9 * r);
    }

    #[test]
    fn disjointness_matches_closed_form(c in 2usize..64, frac in 0.01f64..2.0) {
        let r = 100.0;
        let e = build_centers(c, c - 1, r).unwrap();
        let d = pairwise_center_distance(c, r).unwrap();
        let m = frac * d / 2.0;
        prop_assume!((frac - 1.0).abs() > 1e-9);
        prop_assert_eq!(verify_ball_disjointness(&e, m), frac < 1.0);
    }
}
