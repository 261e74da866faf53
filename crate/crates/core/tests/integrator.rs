mod common;

use common::{blob, generic_blob};
use ringlab::cloud::{mirror_z, scale, Cloud, Particle, Tag};
use ringlab::compare::{compare_series, CompareMode};
use ringlab::integrator::{
    checkpoint_path, final_checkpoint_path, resume, run, step, Direction, IntegratorConfig, RunSettings, Scheme, StepError,
};
use ringlab::io::load_checkpoint;
use ringlab::kernels::KernelConfig;
use ringlab::velocity::{TreecodeConfig, VelocityPath};

const EPS: f64 = 0.1;

fn settings(t_end: f64, path: VelocityPath) -> RunSettings {
    let cfg = IntegratorConfig { t_end, dt_max: t_end / 4.0, diag_every: 2, ..Default::default() };
    RunSettings::new(cfg, KernelConfig::with_delta(1.5 * EPS / 8.0), path)
}

fn record_bits(r: &ringlab::diagnostics::DiagnosticsRecord) -> Vec<u64> {
    r.values().iter().map(|v| v.to_bits()).collect()
}

fn weights(c: &Cloud) -> Vec<(u64, u64, Tag)> {
    c.particles.iter().map(|p| (p.gamma.to_bits(), p.xi0.to_bits(), p.tag)).collect()
}

#[test]
fn mirrored_seed_forward_is_mirror_of_backward_run_bitwise() {
    let seed = generic_blob(EPS);
    let fwd = settings(0.02, VelocityPath::Direct);
    let mut bwd = fwd.clone();
    bwd.integrator.direction = Direction::Backward;
    let a = run(mirror_z(&seed), &fwd).unwrap();
    let b = run(seed, &bwd).unwrap();
    assert!(a.steps > 5);
    assert_eq!(a.steps, b.steps);
    assert_eq!(a.cloud.particles, mirror_z(&b.cloud).particles);
    assert_eq!(a.cloud.time, -b.cloud.time);
    let rep = compare_series(&b.records, &a.records, CompareMode::Mirror).unwrap();
    for c in rep.columns.iter().filter(|c| c.comparable) {
        assert_eq!(c.max_abs, 0.0, "{}", c.column);
    }
}

#[test]
fn scaled_runs_match_at_equal_steps() {
    let seed = generic_blob(EPS);
    let (l, g) = (2.0, 4.0);
    let base = settings(0.02, VelocityPath::Direct);
    let mut scaled = base.clone();
    scaled.integrator.t_end /= g;
    scaled.integrator.dt_max /= g;
    scaled.kernel.delta /= l;
    let a = run(seed.clone(), &base).unwrap();
    let b = run(scale(&seed, l, g).unwrap(), &scaled).unwrap();
    assert_eq!(a.steps, b.steps);
    let want = scale(&a.cloud, l, g).unwrap();
    let mut worst: f64 = 0.0;
    for (p, q) in b.cloud.particles.iter().zip(&want.particles) {
        worst = worst.max((p.r - q.r).hypot(p.z - q.z) / q.r.hypot(q.z));
    }
    assert!(worst <= 1e-6, "{worst:e}");
    let rep = compare_series(&a.records, &b.records, CompareMode::Scaling { lambda: l, gamma: g }).unwrap();
    assert!(rep.max_rel(&["r_star", "z_star", "m0", "m2", "energy_e", "energy_e1", "a_t"]) <= 1e-6, "{rep:?}");
}

#[test]
fn weights_and_tags_never_change() {
    let seed = blob(EPS);
    let out = run(seed.clone(), &settings(0.01, VelocityPath::default())).unwrap();
    assert_eq!(weights(&out.cloud), weights(&seed));
    let m0: Vec<f64> = out.records.iter().map(|r| r.m0).collect();
    assert!(m0.iter().all(|&m| m.to_bits() == m0[0].to_bits()));
}

#[test]
fn resume_reproduces_the_tail_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = settings(0.02, VelocityPath::default());
    s.integrator.checkpoint_every = 3;
    s.integrator.diag_every = 3;
    s.checkpoint_dir = Some(dir.path().to_path_buf());
    s.config_digest = "run-a".into();
    let full = run(blob(EPS), &s).unwrap();
    assert!(full.steps >= 6, "{} steps", full.steps);
    let ck = load_checkpoint(&checkpoint_path(dir.path(), 3)).unwrap();
    let t3 = ck.cloud.time;
    let tail = resume(ck, &s).unwrap();
    assert_eq!(tail.cloud, full.cloud);
    assert_eq!(tail.steps, full.steps);
    let expected: Vec<_> = full.records.iter().filter(|r| r.t >= t3).map(record_bits).collect();
    assert_eq!(tail.records.iter().map(record_bits).collect::<Vec<_>>(), expected);
    let fin = load_checkpoint(&final_checkpoint_path(dir.path())).unwrap();
    assert_eq!(fin.cloud, full.cloud);
    let mut other = s.clone();
    other.config_digest = "run-b".into();
    assert!(resume(load_checkpoint(&checkpoint_path(dir.path(), 3)).unwrap(), &other).is_err());
}

#[test]
fn rk4_converges_at_fourth_order() {
    // two coaxial rings leapfrog; fixed step through dt_max
    let c = Cloud::new(
        vec![
            Particle { r: 1.0, z: 0.0, gamma: 1.0, xi0: 1.0, tag: Tag::Untagged },
            Particle { r: 0.7, z: 0.1, gamma: 1.0, xi0: 1.0, tag: Tag::Untagged },
        ],
        0.1,
        2.0,
        1.0,
    );
    let k = KernelConfig::with_delta(0.05);
    let final_at = |scheme: Scheme, n: u32| {
        let cfg = IntegratorConfig { scheme, cfl: 1e9, dt_max: 0.4 / n as f64, t_end: 0.4, ..Default::default() };
        let mut x = c.clone();
        for _ in 0..n {
            x = step(&x, 0.4 / n as f64, &cfg, &k, &VelocityPath::Direct).unwrap();
        }
        x
    };
    for (scheme, order) in [(Scheme::Rk4, 4.0), (Scheme::Rk2, 2.0)] {
        let fine = final_at(scheme, 256);
        let err = |n| {
            let x = final_at(scheme, n);
            x.particles.iter().zip(&fine.particles).map(|(a, b)| (a.r - b.r).hypot(a.z - b.z)).fold(0.0, f64::max)
        };
        let rate = (err(16) / err(32)).log2();
        assert!((rate - order).abs() < 0.3, "{scheme:?}: observed order {rate}");
    }
}

#[test]
fn treecode_run_tracks_direct_run() {
    let seed = blob(EPS);
    let a = run(seed.clone(), &settings(0.01, VelocityPath::Direct)).unwrap();
    let b = run(seed, &settings(0.01, VelocityPath::Treecode(TreecodeConfig::default()))).unwrap();
    assert_eq!(a.steps, b.steps);
    for (p, q) in a.cloud.particles.iter().zip(&b.cloud.particles) {
        assert!((p.r - q.r).hypot(p.z - q.z) < 1e-9);
    }
}

#[test]
fn axis_crossing_is_reported() {
    // a strong ring just off the axis throws its weak neighbour inward
    let c = Cloud::new(
        vec![
            Particle { r: 0.02, z: 0.0, gamma: 1e-6, xi0: 1.0, tag: Tag::Untagged },
            Particle { r: 0.021, z: 0.004, gamma: 50.0, xi0: 1.0, tag: Tag::Untagged },
        ],
        0.1,
        50.0,
        1.0,
    );
    let cfg = IntegratorConfig::default();
    let err = step(&c, 0.5, &cfg, &KernelConfig::with_delta(1e-4), &VelocityPath::Direct).unwrap_err();
    assert!(matches!(err, StepError::AxisCrossing { particle: 0, .. }), "{err}");
}

#[test]
fn invalid_settings_fail_before_stepping() {
    let cfg = IntegratorConfig { cfl: 2.0, ..Default::default() };
    let s = RunSettings::new(cfg, KernelConfig::with_delta(0.01), VelocityPath::Direct);
    let err = run(blob(EPS), &s).unwrap_err();
    assert_eq!(err.step, 0);
    assert!(err.records.is_empty());
}
