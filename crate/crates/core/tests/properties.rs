use ndarray::Array1;
use proptest::prelude::*;

use onebit_gcs::embed::unit;
use onebit_gcs::genmodel::{GenerativeModel, GroupSparseModel};
use onebit_gcs::measure::{geodesic_dist, hamming_dist, sign_measure, MeasurementEnsemble};
use onebit_gcs::recover::{hard_threshold, onesided_l1};

fn vector(n: usize) -> impl Strategy<Value = Array1<f64>> {
    prop::collection::vec(-10.0f64..10.0, n).prop_map(Array1::from)
}

fn nonzero(n: usize) -> impl Strategy<Value = Array1<f64>> {
    vector(n).prop_filter("nonzero", |v| v.dot(v) > 1e-6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn geodesic_distance_is_a_bounded_metric_on_the_sphere(
        x in nonzero(6), s in nonzero(6), t in nonzero(6)
    ) {
        let (x, s, t) = (unit(&x).unwrap(), unit(&s).unwrap(), unit(&t).unwrap());
        let d = |a: &Array1<f64>, b: &Array1<f64>| geodesic_dist(a, b).unwrap();
        prop_assert!((0.0..=1.0).contains(&d(&x, &s)));
        prop_assert!((d(&x, &s) - d(&s, &x)).abs() < 1e-12);
        prop_assert!(d(&x, &x) < 1e-7);
        prop_assert!((d(&x, &-&x) - 1.0).abs() < 1e-12);
        prop_assert!(d(&x, &t) <= d(&x, &s) + d(&s, &t) + 1e-12);
    }

    #[test]
    fn sign_patterns_are_scale_invariant(x in nonzero(8), seed in any::<u64>(), c in 0.01f64..100.0) {
        let a = MeasurementEnsemble::gaussian(20, 8, seed).unwrap();
        let b = sign_measure(&a, &x).unwrap();
        prop_assert_eq!(&b, &sign_measure(&a, &(&x * c)).unwrap());
        prop_assert_eq!(hamming_dist(&b, &sign_measure(&a, &-&x).unwrap()).unwrap(), 1.0);
        prop_assert_eq!(onesided_l1(&a, &x, &b).unwrap(), 0.0);
    }

    #[test]
    fn hard_threshold_keeps_the_largest_entries(v in vector(10), s in 1usize..=10) {
        let h = hard_threshold(&v, s);
        let kept: Vec<usize> = (0..10).filter(|&i| h[i] != 0.0).collect();
        prop_assert!(kept.len() <= s);
        let smallest_kept = kept.iter().map(|&i| v[i].abs()).fold(f64::INFINITY, f64::min);
        for i in 0..10 {
            if h[i] == 0.0 && v[i] != 0.0 && kept.len() == s {
                prop_assert!(v[i].abs() <= smallest_kept);
            }
            prop_assert!(h[i] == 0.0 || h[i] == v[i]);
        }
    }

    #[test]
    fn group_sparse_projection_is_idempotent_and_no_worse_than_range_points(
        y in nonzero(12), z in prop::collection::vec(-0.5f64..0.5, 3)
    ) {
        let model = GroupSparseModel::with_default_amplitudes(12, 3).unwrap();
        let (x, zx) = model.exact_project(&y).unwrap();
        prop_assert!(model.contains(&x, 1e-9));
        let again = model.forward(&zx).unwrap();
        prop_assert!((&again - &x).iter().all(|d| d.abs() < 1e-9));
        let (xx, _) = model.exact_project(&x).unwrap();
        prop_assert!((&xx - &x).iter().all(|d| d.abs() < 1e-9));
        let other = model.forward(&Array1::from(z)).unwrap();
        let gap = |p: &Array1<f64>| (&y - p).dot(&(&y - p));
        prop_assert!(gap(&x) <= gap(&other) + 1e-9);
    }
}
