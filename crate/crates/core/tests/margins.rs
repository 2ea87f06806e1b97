use dmdsc_core::etf::{dynamic_margins, margin_at, uniform_margins};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const M_MIN: f64 = 35.0;
const M_MAX: f64 = 55.0;
const R: f64 = 100.0;

/// Least-squares line through `(p, m)` points: returns (intercept, slope).
fn fit_affine(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mp = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mm = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mp) * (p.1 - mm)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mp) * (p.0 - mp)).sum();
    let slope = sxy / sxx;
    (mm - slope * mp, slope)
}

fn random_counts(rng: &mut ChaCha8Rng) -> Vec<u64> {
    let c = rng.random_range(2..=20);
    (0..c).map(|_| rng.random_range(1..=10_000)).collect()
}

#[test]
fn thousand_count_vectors() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let counts = random_counts(&mut rng);
        let total: u64 = counts.iter().sum();
        let s = dynamic_margins(&counts, M_MIN, M_MAX, R).unwrap();

        for (i, &m) in s.margins().iter().enumerate() {
            assert!((M_MIN..M_MAX).contains(&m), "margin {m} outside [m_min, m_max)");
            let p = counts[i] as f64 / total as f64;
            let expected = M_MIN + (M_MAX - M_MIN) * (1.0 - p);
            assert!((m - expected).abs() < 1e-12);
        }

        for a in 0..counts.len() {
            for b in 0..counts.len() {
                if counts[a] > counts[b] {
                    assert!(s.margin(a) < s.margin(b));
                } else if counts[a] == counts[b] {
                    assert_eq!(s.margin(a), s.margin(b));
                }
            }
        }

        // the rule is the unique affine map through its two anchors
        let mut pts: Vec<(f64, f64)> = counts
            .iter()
            .zip(s.margins())
            .map(|(&n, &m)| (n as f64 / total as f64, m))
            .collect();
        pts.push((0.0, margin_at(0.0, M_MIN, M_MAX)));
        pts.push((1.0, margin_at(1.0, M_MIN, M_MAX)));
        let (intercept, slope) = fit_affine(&pts);
        assert!((intercept - M_MAX).abs() < 1e-12, "{intercept}");
        assert!((slope - (M_MIN - M_MAX)).abs() < 1e-12, "{slope}");
    }
}

#[test]
fn extreme_frequencies() {
    assert_eq!(margin_at(0.0, M_MIN, M_MAX), M_MAX);
    assert_eq!(margin_at(1.0, M_MIN, M_MAX), M_MIN);
    for eps in [1e-6, 1e-9, 1e-12] {
        assert!((margin_at(eps, M_MIN, M_MAX) - M_MAX).abs() < 1e-9 + 20.0 * eps);
        assert!((margin_at(1.0 - eps, M_MIN, M_MAX) - M_MIN).abs() < 1e-9 + 20.0 * eps);
    }
    // one class dwarfing the rest
    let s = dynamic_margins(&[1_000_000_000, 1], M_MIN, M_MAX, R).unwrap();
    assert!((s.margin(0) - M_MIN).abs() < 1e-7);
    assert!((s.margin(1) - M_MAX).abs() < 1e-7);
}

#[test]
fn uniform_is_the_midpoint() {
    let s = uniform_margins(&[500, 5, 50], M_MIN, M_MAX, R).unwrap();
    assert!(s.margins().iter().all(|&m| m == 45.0));
}

#[test]
fn balanced_counts_give_one_margin() {
    let s = dynamic_margins(&[100; 6], M_MIN, M_MAX, R).unwrap();
    let expected = M_MIN + (M_MAX - M_MIN) * (5.0 / 6.0);
    assert!(s.margins().iter().all(|&m| (m - expected).abs() < 1e-12));
}

#[test]
fn invalid_inputs() {
    assert!(dynamic_margins(&[10, 0], M_MIN, M_MAX, R).is_err());
    assert!(dynamic_margins(&[], M_MIN, M_MAX, R).is_err());
    assert!(dynamic_margins(&[10, 10], M_MIN, 71.0, R).is_err());
}

proptest! {
    #[test]
    fn margins_shrink_with_counts(mut counts in prop::collection::vec(1u64..100_000, 2..30)) {
        counts.sort_unstable();
        let s = dynamic_margins(&counts, M_MIN, M_MAX, R).unwrap();
        for w in s.margins().windows(2) {
            prop_assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn margin_at_is_monotone(p in 0.0f64..=1.0, q in 0.0f64..=1.0) {
        let (lo, hi) = if p < q { (p, q) } else { (q, p) };
        prop_assert!(margin_at(lo, M_MIN, M_MAX) >= margin_at(hi, M_MIN, M_MAX));
    }
}
