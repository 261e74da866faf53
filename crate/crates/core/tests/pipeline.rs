//! Reduced-scale end-to-end runs: config, generator, integrator, fits.
//!
//! ε = 0.1 keeps N near 200 and the step count in the low thousands, so the
//! O(1) self-induction term is as large as the `|log ε|` term and the speed
//! bands below are wide on purpose.

use std::f64::consts::PI;

use ringlab::config::SimConfig;
use ringlab::diagnostics::fit_run;
use ringlab::integrator::run;

const THIN: &str = r#"{
  "schema": "ringlab.config/1",
  "scenario": "thin_ring",
  "data": {"epsilon": 0.1, "h_over_eps": 0.125},
  "integrator": {"t_end": 0.75, "diag_every": 10},
  "velocity": {"kind": "direct"}
}"#;

#[test]
fn thin_ring_conserves_and_translates() {
    let cfg = SimConfig::from_json_str(THIN).unwrap();
    let g = cfg.generate().unwrap();
    assert!(g.report.all_pass());
    let seed = g.cloud;
    let s = cfg.run_settings().unwrap();
    let out = run(seed.clone(), &s).unwrap();
    assert_eq!(out.cloud.time, 0.75);
    assert!(out.records.len() > 20, "{} records", out.records.len());

    let m0 = out.records[0].m0.to_bits();
    assert!(out.records.iter().all(|r| r.m0.to_bits() == m0));

    let fits = fit_run(&out.records, 0.1, 1.0, s.diagnostics.pair_r(&seed));
    assert!(fits.m2_drift <= 1e-3, "{fits:?}");
    assert!(fits.energy_drift <= 1e-2, "{fits:?}");
    assert!(fits.radial_lock_constant <= 0.5, "{fits:?}");
    assert!(fits.leakage_constant <= 0.5, "{fits:?}");

    // offset is bounded by twice the thin-core correction log(8)/(4π)
    let speed = fits.speed.expect("enough samples for a speed fit");
    let offset = speed.slope - fits.v_kh;
    assert!(offset > 0.0 && offset < 2.0 * 8f64.ln() / (4.0 * PI), "slope {} V {}", speed.slope, fits.v_kh);
    let a = fits.a_slope.expect("barrier fit");
    assert!(a.slope.abs() < 0.2, "{a:?}");
}

#[test]
fn zero_horizon_gives_one_record() {
    let text = THIN.replace("\"t_end\": 0.75", "\"t_end\": 0.0");
    let cfg = SimConfig::from_json_str(&text).unwrap();
    let out = run(cfg.generate().unwrap().cloud, &cfg.run_settings().unwrap()).unwrap();
    assert_eq!(out.records.len(), 1);
    assert_eq!(out.steps, 0);
}

#[test]
fn rerun_is_bitwise_identical() {
    let text = THIN.replace("\"t_end\": 0.75", "\"t_end\": 0.05");
    let cfg = SimConfig::from_json_str(&text).unwrap();
    let s = cfg.run_settings().unwrap();
    let seed = cfg.generate().unwrap().cloud;
    let a = run(seed.clone(), &s).unwrap();
    let b = run(seed, &s).unwrap();
    let bits = |r: &ringlab::diagnostics::DiagnosticsRecord| r.values().map(f64::to_bits);
    assert_eq!(a.records.iter().map(bits).collect::<Vec<_>>(), b.records.iter().map(bits).collect::<Vec<_>>());
    assert_eq!(a.cloud.particles, b.cloud.particles);
}
