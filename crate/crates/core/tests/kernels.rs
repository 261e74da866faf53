mod common;

use common::{read_fixture, rel};
use proptest::prelude::*;
use ringlab::cli::{kernel_table, parse_range};
use ringlab::kernels::{biot_savart_kernel, eval_F, eval_F1, eval_F2, KernelConfig, KernelMethod, KernelPoint};
use ringlab::oracle::{quad_F, quad_F1, quad_F2};

#[test]
fn kernels_match_high_precision_fixture() {
    let cfg = KernelConfig::default();
    let rows = read_fixture("kernel_mpmath.csv");
    assert_eq!(rows.len(), 200);
    let mut worst: f64 = 0.0;
    for r in &rows {
        let s = r[0];
        worst = worst
            .max(rel(eval_F(s, &cfg).unwrap(), r[1]))
            .max(rel(eval_F1(s, &cfg).unwrap(), r[2]))
            .max(rel(eval_F2(s, &cfg).unwrap(), r[3]));
    }
    assert!(worst <= 1e-8, "worst relative deviation {worst:e}");
}

#[test]
fn oracle_matches_high_precision_fixture() {
    let rows = read_fixture("kernel_mpmath.csv");
    for r in &rows {
        let s = r[0];
        for (q, want) in [(quad_F(s).unwrap(), r[1]), (quad_F1(s).unwrap(), r[2]), (quad_F2(s).unwrap(), r[3])] {
            assert!(rel(q.value, want) <= 1e-10, "s={s}: {} vs {want}", q.value);
        }
    }
}

#[test]
fn oracle_table_regenerates_committed_fixture() {
    let committed = read_fixture("oracle_table.csv");
    let fresh = kernel_table(&parse_range("1e-6:1e3:200").unwrap(), true).unwrap();
    let fresh: Vec<Vec<f64>> =
        fresh.lines().skip(1).map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(fresh.len(), committed.len());
    for (a, b) in fresh.iter().zip(&committed) {
        assert_eq!(a[0], b[0]);
        for col in [1, 3, 5] {
            assert!(rel(a[col], b[col]) <= 1e-12, "s={} col {col}: {} vs {}", a[0], a[col], b[col]);
        }
    }
}

#[test]
fn kernel_table_matches_oracle_fixture() {
    let committed = read_fixture("oracle_table.csv");
    let table = kernel_table(&parse_range("1e-6:1e3:200").unwrap(), false).unwrap();
    for (line, o) in table.lines().skip(1).zip(&committed) {
        let v: Vec<f64> = line.split(',').take(4).map(|x| x.parse().unwrap()).collect();
        assert_eq!(v[0], o[0]);
        for (k, col) in [(1, 1), (2, 3), (3, 5)] {
            assert!(rel(v[k], o[col]) <= 1e-8, "s={}: {} vs {}", v[0], v[k], o[col]);
        }
    }
}

#[test]
fn remainders_follow_the_printed_expansions() {
    let cfg = KernelConfig::default();
    for r in read_fixture("asymptotic_remainders.csv") {
        let s = r[0];
        let l = (1.0 / s).ln();
        let rf = (eval_F(s, &cfg).unwrap() - (0.5 * l + 8f64.ln() - 2.0)) / (s * l);
        let rf1 = eval_F1(s, &cfg).unwrap() - (1.0 / (s * s) - 0.375 * l);
        let rf2 = (eval_F2(s, &cfg).unwrap() - (0.5 * l + (3.0 * 2f64.ln() - 1.0) / 2.0)) / (s * s);
        assert!((rf - r[1]).abs() < 1e-6, "F remainder at {s}: {rf} vs {}", r[1]);
        // F1 ~ 1e8 at s = 1e-4, so the remainder carries ~1e-8 absolute roundoff
        assert!((rf1 - r[2]).abs() < 1e-6, "F1 remainder at {s}: {rf1} vs {}", r[2]);
        assert!((rf2 - r[3]).abs() < 1e-4, "F2 remainder at {s}: {rf2} vs {}", r[3]);
    }
}

#[test]
fn branches_agree_with_quadrature_around_the_switch() {
    let branched = KernelConfig::default();
    let quad = KernelConfig { method: KernelMethod::Quadrature, ..branched };
    for lo_hi in [(branched.s_lo / 2.0, 2.0 * branched.s_lo), (branched.s_hi / 2.0, 2.0 * branched.s_hi)] {
        let (a, b) = (lo_hi.0.ln(), lo_hi.1.ln());
        for i in 0..100 {
            let s = (a + (b - a) * i as f64 / 99.0).exp();
            assert!(rel(eval_F(s, &branched).unwrap(), eval_F(s, &quad).unwrap()) < 1e-9, "F at {s}");
            assert!(rel(eval_F1(s, &branched).unwrap(), eval_F1(s, &quad).unwrap()) < 1e-9, "F1 at {s}");
            assert!(rel(eval_F2(s, &branched).unwrap(), eval_F2(s, &quad).unwrap()) < 1e-9, "F2 at {s}");
        }
    }
}

#[test]
fn domain_errors() {
    let cfg = KernelConfig::default();
    for s in [0.0, -1.0, f64::NAN, f64::INFINITY] {
        assert!(eval_F(s, &cfg).is_err());
        assert!(eval_F1(s, &cfg).is_err());
        assert!(eval_F2(s, &cfg).is_err());
        assert!(quad_F(s).is_err());
    }
}

fn point() -> impl Strategy<Value = (f64, f64)> {
    (0.05f64..3.0, -2.0f64..2.0)
}

proptest! {
    #[test]
    fn kernel_mirror_symmetry(x in point(), y in point(), delta in 0.0f64..0.05) {
        prop_assume!((x.0 - y.0).hypot(x.1 - y.1) > 1e-6 || delta > 0.0);
        let cfg = KernelConfig::with_delta(delta);
        let k = biot_savart_kernel(KernelPoint::new(x.0, x.1).unwrap(), KernelPoint::new(y.0, y.1).unwrap(), &cfg).unwrap();
        let m = biot_savart_kernel(KernelPoint::new(x.0, -x.1).unwrap(), KernelPoint::new(y.0, -y.1).unwrap(), &cfg).unwrap();
        prop_assert_eq!(m.k_r, -k.k_r);
        prop_assert_eq!(m.k_z, k.k_z);
    }

    #[test]
    fn kernel_scales_inversely_with_length(x in point(), y in point(), delta in 0.0f64..0.05, lambda in 0.1f64..10.0) {
        prop_assume!((x.0 - y.0).hypot(x.1 - y.1) > 1e-3);
        let k = biot_savart_kernel(KernelPoint::new(x.0, x.1).unwrap(), KernelPoint::new(y.0, y.1).unwrap(), &KernelConfig::with_delta(delta)).unwrap();
        let s = biot_savart_kernel(
            KernelPoint::new(lambda * x.0, lambda * x.1).unwrap(),
            KernelPoint::new(lambda * y.0, lambda * y.1).unwrap(),
            &KernelConfig::with_delta(lambda * delta),
        ).unwrap();
        let scale = k.k_r.hypot(k.k_z);
        prop_assert!((lambda * s.k_r - k.k_r).abs() <= 1e-12 * scale);
        prop_assert!((lambda * s.k_z - k.k_z).abs() <= 1e-12 * scale);
    }

    #[test]
    fn kernel_values_are_positive_and_decreasing(s in 1e-6f64..1e3) {
        let cfg = KernelConfig::default();
        let t = s * 1.01;
        prop_assert!(eval_F(s, &cfg).unwrap() > eval_F(t, &cfg).unwrap());
        prop_assert!(eval_F1(s, &cfg).unwrap() > eval_F1(t, &cfg).unwrap());
        prop_assert!(eval_F2(s, &cfg).unwrap() > eval_F2(t, &cfg).unwrap());
        prop_assert!(eval_F(s, &cfg).unwrap() > 0.0 && eval_F1(s, &cfg).unwrap() > 0.0 && eval_F2(s, &cfg).unwrap() > 0.0);
    }
}
