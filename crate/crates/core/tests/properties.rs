//! Invariants checked on randomly generated data.

use std::f64::consts::{FRAC_PI_2, PI};

use lagsol_core::expander::{angle_map, ExpanderProfile};
use lagsol_core::export::{read_mesh_csv, write_mesh_csv, MeshRow};
use lagsol_core::geometry::{frame_at, lagrangian_angle_residual, maslov_values, sample_quadric, Quadric, QuadricPoint, SolitonCurve};
use lagsol_core::params::{normalize, SolitonParams};
use lagsol_core::periodic::{critical_point, PeriodicSpec};
use lagsol_core::rational::{gcd, rational_approx};
use lagsol_core::reduced_ode::{angle_diff, first_integral, integrate_reduced};
use lagsol_core::translator::TranslatorProfile;
use num_complex::Complex64;
use proptest::prelude::*;

fn log_uniform(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.5f64..1.5, n).prop_map(|v| v.into_iter().map(f64::exp).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn angle_diff_is_the_principal_difference(a in -50.0f64..50.0, b in -50.0f64..50.0) {
        let d = angle_diff(a, b);
        prop_assert!(d > -PI - 1e-12 && d <= PI + 1e-12);
        let k = (a - b - d) / (2.0 * PI);
        prop_assert!((k - k.round()).abs() < 1e-9);
    }

    #[test]
    fn rational_detection_recovers_reduced_fractions(p in -200i64..200, q in 1i64..=64, wobble in -1e-12f64..1e-12) {
        let x = p as f64 / q as f64 + wobble;
        let g = gcd(p, q).max(1);
        prop_assert_eq!(rational_approx(x, 64, 1e-10), Some((p / g, q / g)));
    }

    #[test]
    fn mesh_csv_round_trip_is_exact(
        vals in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO, 6..=6),
        t in -1e3f64..1e3,
        theta in -10.0f64..10.0,
    ) {
        let rows = vec![MeshRow {
            z: vals.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect(),
            t,
            theta,
        }];
        let mut buf = Vec::new();
        write_mesh_csv(&rows, &mut buf).unwrap();
        prop_assert_eq!(read_mesh_csv(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn normalization_maps_invert(
        mags in prop::collection::vec(0.2f64..5.0, 1..=4),
        neg in prop::collection::vec(any::<bool>(), 4),
        c in 0.2f64..5.0,
        alpha in -2.0f64..2.0,
        x in prop::collection::vec(-3.0f64..3.0, 4),
    ) {
        let n = mags.len();
        // Keep at least one λ_j positive so the quadric has real points.
        let lambdas: Vec<f64> = (0..n).map(|j| if j > 0 && neg[j] { -mags[j] } else { mags[j] }).collect();
        let params = SolitonParams::new(lambdas, c, alpha).unwrap();
        let (norm, rec) = normalize(&params).unwrap();
        prop_assert!(norm.is_normalized());
        let x = &x[..n];
        for (a, b) in rec.unmap_x(&rec.map_x(x)).iter().zip(x) {
            prop_assert!((a - b).abs() < 1e-12 * b.abs().max(1.0));
        }
        let inv = rec.inverse().inverse();
        prop_assert!(rec.distance(&inv) < 1e-12);
    }

    #[test]
    fn angle_map_obeys_the_sum_law(a in log_uniform(2..=4), alpha in 0.05f64..3.0) {
        let special = angle_map(0.0, &a).unwrap();
        prop_assert!((special.sum() - FRAC_PI_2).abs() < 1e-8);
        let general = angle_map(alpha, &a).unwrap();
        prop_assert!(general.sum() < FRAC_PI_2);
        for p in general.phibar.iter().chain(&special.phibar) {
            prop_assert!(*p > 0.0 && *p < FRAC_PI_2);
        }
    }

    #[test]
    fn sampled_quadric_points_lie_on_the_quadric(
        mags in prop::collection::vec(0.2f64..5.0, 2..=4),
        m in 1usize..4,
        seed in any::<u64>(),
    ) {
        let n = mags.len();
        let lambdas: Vec<f64> = (0..n).map(|j| if j < m.min(n) { mags[j] } else { -mags[j] }).collect();
        let q = Quadric::Centred { lambdas, c: 1.0 };
        for p in sample_quadric(&q, 5, 2.0, seed).unwrap() {
            prop_assert!(QuadricPoint::new(&q, p.x).is_ok());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn expanders_are_lagrangian_with_matching_angle(
        alpha in 0.0f64..2.0,
        a in log_uniform(1..=3),
        psi0 in -1.0f64..1.0,
        y in -3.0f64..3.0,
        seed in any::<u64>(),
    ) {
        let n = a.len();
        let psi: Vec<f64> = (0..n).map(|j| psi0 * (j as f64 + 1.0)).collect();
        let p = ExpanderProfile::new(alpha, a, psi).unwrap();
        for x in sample_quadric(p.quadric(), 3, 1.5, seed).unwrap() {
            prop_assert!(frame_at(&p, &x, y).unwrap().lagrangian_residual() < 1e-10);
            prop_assert!(lagrangian_angle_residual(&p, &x, y).unwrap() < 1e-9);
        }
    }

    #[test]
    fn translators_satisfy_the_angle_identity(
        alpha in 0.3f64..2.0,
        a in log_uniform(1..=2),
        k_re in -1.0f64..1.0,
        k_im in -1.0f64..1.0,
        seed in any::<u64>(),
    ) {
        let n1 = a.len();
        let base = ExpanderProfile::new(alpha, a, vec![0.0; n1]).unwrap();
        let p = TranslatorProfile::from_expander(base, Some(Complex64::new(k_re, k_im))).unwrap();
        let xs = sample_quadric(p.quadric(), 3, 1.0, seed).unwrap();
        let samples: Vec<(QuadricPoint, f64)> = [-2.0, -0.5, 0.0, 1.0, 2.5]
            .iter()
            .flat_map(|&y| xs.iter().map(move |x| (x.clone(), y)))
            .collect();
        for (x, y) in &samples {
            prop_assert!(frame_at(&p, x, *y).unwrap().lagrangian_residual() < 1e-10);
        }
        for v in maslov_values(&p, &samples).unwrap() {
            prop_assert!(angle_diff(v, alpha * k_im).abs() < 1e-8);
        }
    }

    #[test]
    fn first_integral_is_conserved(
        mixed in any::<bool>(),
        raw in prop::collection::vec(0.5f64..2.0, 2..=3),
        alpha in 0.1f64..1.5,
        frac in 0.2f64..0.95,
        psi in prop::collection::vec(-1.0f64..1.0, 3),
    ) {
        let n = raw.len();
        let (lambdas, alpha) = if mixed {
            ((0..n).map(|j| if j == 0 { 1.0 } else { -1.0 }).collect::<Vec<_>>(), alpha - 0.8)
        } else {
            (vec![1.0; n], -alpha)
        };
        let u = critical_point(&lambdas, &raw, alpha).unwrap();
        let alphas: Vec<f64> = raw.iter().zip(&lambdas).map(|(x, l)| x + l * u).collect();
        prop_assume!(alphas.iter().all(|&x| x > 0.2));
        let g0: f64 = alphas.iter().product();
        let spec = PeriodicSpec::new(SolitonParams::normalized(&lambdas, alpha).unwrap(), alphas, frac * g0.sqrt()).unwrap();
        let ts = spec.trajectory_spec(&psi[..n]).unwrap();
        let a = ts.first_integral_constant();
        for end in [3.0, -3.0] {
            for st in &integrate_reduced(&ts, end, 1e-10).unwrap().states {
                prop_assert!((first_integral(&ts, st).unwrap() - a).abs() / a < 1e-8);
            }
        }
    }
}
