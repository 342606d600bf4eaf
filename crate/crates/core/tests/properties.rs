use std::collections::{HashMap, HashSet};

use amrbench::eval::{auc, roc_curve};
use amrbench::features::{compute_prior_resistance, minmax_scale, one_hot_encode, winsorize, Bounds, ScaleBounds, TimedOutcome};
use amrbench::models::soft_threshold;
use amrbench::splits::{largest_remainder, split_random_by_stay, split_temporal, Fold, SplitSpec};
use proptest::prelude::*;

fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    (2usize..60).prop_flat_map(|n| {
        (prop::collection::vec(0u8..6, n), prop::collection::vec(any::<bool>(), n)).prop_map(|(s, y)| {
            let mut y: Vec<u8> = y.into_iter().map(u8::from).collect();
            y[0] = 1;
            y[1] = 0;
            (s.into_iter().map(|v| f64::from(v) / 5.0).collect(), y)
        })
    })
}

proptest! {
    #[test]
    fn auc_is_invariant_under_increasing_maps((s, y) in scored()) {
        let a = auc(&s, &y).unwrap();
        let mapped: Vec<f64> = s.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
        prop_assert_eq!(auc(&mapped, &y).unwrap(), a);
    }

    #[test]
    fn auc_complement_symmetry((s, y) in scored()) {
        let flipped: Vec<f64> = s.iter().map(|v| 1.0 - v).collect();
        prop_assert!((auc(&flipped, &y).unwrap() - (1.0 - auc(&s, &y).unwrap())).abs() < 1e-12);
    }

    #[test]
    fn roc_area_equals_auc_and_curve_is_monotone((s, y) in scored()) {
        let r = roc_curve(&s, &y).unwrap();
        prop_assert!((r.area() - auc(&s, &y).unwrap()).abs() < 1e-12);
        prop_assert_eq!(r.points[0], (0.0, 0.0));
        prop_assert_eq!(*r.points.last().unwrap(), (1.0, 1.0));
        prop_assert!(r.points.windows(2).all(|w| w[1].0 >= w[0].0 && w[1].1 >= w[0].1));
    }

    #[test]
    fn largest_remainder_sums_and_stays_close(n in 0usize..5000, a in 1u32..100, b in 1u32..100, c in 1u32..100) {
        let total = f64::from(a + b + c);
        let f = [f64::from(a) / total, f64::from(b) / total, f64::from(c) / total];
        let counts = largest_remainder(n, &f);
        prop_assert_eq!(counts.iter().sum::<usize>(), n);
        for (k, &q) in counts.iter().zip(&f) {
            prop_assert!((*k as f64 - q * n as f64).abs() < 1.0);
        }
    }

    #[test]
    fn random_split_keeps_stays_whole(sizes in prop::collection::vec(1usize..6, 3..120), seed in any::<u64>()) {
        let groups: Vec<String> = sizes.iter().enumerate().flat_map(|(g, &k)| std::iter::repeat_n(format!("s{g}"), k)).collect();
        let a = split_random_by_stay(&groups, &SplitSpec::random(seed)).unwrap();
        let mut seen: HashMap<&str, HashSet<Fold>> = HashMap::new();
        for (g, f) in groups.iter().zip(&a.fold_of_row) {
            seen.entry(g).or_default().insert(*f);
        }
        prop_assert!(seen.values().all(|f| f.len() == 1));
        let train = seen.values().filter(|f| f.contains(&Fold::Train)).count() as f64;
        prop_assert!((train - 0.6 * sizes.len() as f64).abs() <= 1.0);
    }

    #[test]
    fn temporal_split_orders_years(years in prop::collection::vec(2005i32..2012, 4..80), seed in any::<u64>()) {
        let groups: Vec<String> = (0..years.len()).map(|g| format!("s{g}")).collect();
        let cutoff = 2009;
        if let Ok(a) = split_temporal(&groups, &years, &SplitSpec::temporal(cutoff, seed)) {
            for (y, f) in years.iter().zip(&a.fold_of_row) {
                prop_assert_eq!(*f == Fold::Test, *y >= cutoff);
            }
        }
    }

    #[test]
    fn scaled_values_lie_in_unit_interval(v in prop::collection::vec(-1e6f64..1e6, 1..50), lo in -100.0f64..100.0, w in 0.0f64..100.0) {
        let b = ScaleBounds { min: lo, max: lo + w };
        prop_assert!(minmax_scale(&v, b).iter().all(|x| (0.0..=1.0).contains(x)));
        let c = winsorize(&v, Bounds { lower: lo, upper: lo + w });
        prop_assert!(c.iter().all(|x| *x >= lo && *x <= lo + w));
    }

    #[test]
    fn one_hot_has_at_most_one_bit(value in "[a-e]", vocab in prop::collection::btree_set("[a-d]", 0..4)) {
        let vocab: Vec<String> = vocab.into_iter().collect();
        let bits = one_hot_encode(&value, &vocab);
        prop_assert_eq!(bits.len(), vocab.len());
        prop_assert_eq!(bits.iter().map(|&b| usize::from(b)).sum::<usize>(), usize::from(vocab.contains(&value)));
    }

    #[test]
    fn soft_threshold_shrinks_toward_zero(x in -10.0f64..10.0, t in 0.0f64..5.0) {
        let s = soft_threshold(x, t);
        prop_assert!(s.abs() <= x.abs());
        prop_assert!(s == 0.0 || s.signum() == x.signum());
        prop_assert!((s - x).abs() <= t + 1e-12);
    }

    #[test]
    fn prior_resistance_ignores_recent_and_other_keys(
        hist in prop::collection::vec((0i64..20_000, any::<bool>(), any::<bool>()), 0..30),
        now in 0i64..20_000,
    ) {
        let h: Vec<TimedOutcome<'_>> = hist
            .iter()
            .map(|&(t, same, r)| TimedOutcome { anti_organism: if same { "k" } else { "other" }, time_min: t, label: u8::from(r) })
            .collect();
        let eligible: Vec<f64> = hist.iter().filter(|(t, same, _)| *same && now - t > 2880).map(|(_, _, r)| f64::from(u8::from(*r))).collect();
        let got = compute_prior_resistance(&h, "k", now);
        if eligible.is_empty() {
            prop_assert_eq!(got, None);
        } else {
            prop_assert!((got.unwrap() - eligible.iter().sum::<f64>() / eligible.len() as f64).abs() < 1e-12);
        }
    }
}
