//! Lagrangian transport `dx/dt = u(x, t)` of the particle cloud by explicit
//! Runge–Kutta with a CFL step, periodic diagnostics and checkpoints.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::Cloud;
use crate::diagnostics::{self, DiagError, DiagnosticsConfig, DiagnosticsRecord};
use crate::io::{self, IoError};
use crate::kernels::KernelConfig;
use crate::velocity::{evaluate, Targets, VelocityError, VelocityPath, VelocitySample, R_MIN_FRACTION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    Rk4,
    Rk2,
}

/// Sign of the time step. A backward run integrates `dx/dt = u` towards
/// negative times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    Forward,
    Backward,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub scheme: Scheme,
    pub cfl: f64,
    pub dt_max: f64,
    /// Horizon as an absolute clock magnitude: the run stops at `±t_end`.
    pub t_end: f64,
    pub diag_every: u64,
    /// 0 disables periodic checkpoints.
    pub checkpoint_every: u64,
    pub direction: Direction,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Rk4,
            cfl: 0.25,
            dt_max: 1e-2,
            t_end: 1.0,
            diag_every: 10,
            checkpoint_every: 0,
            direction: Direction::Forward,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error("invalid integrator configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Velocity(#[from] VelocityError),
    #[error("particle {particle} reached r = {r} (axis guard {r_min}) in stage {stage}")]
    AxisCrossing { particle: usize, r: f64, r_min: f64, stage: usize },
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<(), StepError> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(StepError::Config(format!("cfl must lie in (0, 1], got {}", self.cfl)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(StepError::Config(format!("t_end must be finite and >= 0, got {}", self.t_end)));
        }
        if !(self.dt_max > 0.0 && self.dt_max.is_finite()) {
            return Err(StepError::Config(format!("dt_max must be positive, got {}", self.dt_max)));
        }
        if self.diag_every == 0 {
            return Err(StepError::Config("diag_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// Minimum nearest-neighbour distance among the top decile of particles by
/// weight (ties by index). Infinite when fewer than two are selected.
pub fn core_spacing(c: &Cloud) -> f64 {
    let n = c.len();
    let k = n.div_ceil(10).max(2).min(n);
    if k < 2 {
        return f64::INFINITY;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| c.particles[b].gamma.total_cmp(&c.particles[a].gamma).then(a.cmp(&b)));
    let mut pts: Vec<(f64, f64)> = idx[..k].iter().map(|&i| (c.particles[i].r, c.particles[i].z)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut best = f64::INFINITY;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let dr = pts[j].0 - pts[i].0;
            if dr >= best {
                break;
            }
            best = best.min(dr.hypot(pts[j].1 - pts[i].1));
        }
    }
    best
}

/// `min(dt_max, cfl · h_core / u_max)`, or `dt_max` when nothing moves.
pub fn adaptive_dt(cfg: &IntegratorConfig, u_max: f64, h_core: f64) -> f64 {
    if !(u_max > 0.0) || !h_core.is_finite() {
        return cfg.dt_max;
    }
    cfg.dt_max.min(cfg.cfl * h_core / u_max)
}

fn max_speed(u: &[VelocitySample]) -> f64 {
    u.iter().map(|s| s.norm()).fold(0.0, f64::max)
}

fn stage_cloud(base: &Cloud, k: &[VelocitySample], h: f64, stage: usize, r_min: f64) -> Result<Cloud, StepError> {
    let mut out = base.clone();
    for (i, (p, v)) in out.particles.iter_mut().zip(k).enumerate() {
        p.r += h * v.u_r;
        p.z += h * v.u_z;
        if !(p.r > r_min) {
            return Err(StepError::AxisCrossing { particle: i, r: p.r, r_min, stage });
        }
    }
    Ok(out)
}

/// One step of size `dt > 0` in the configured direction, given the
/// velocity at the current positions.
fn step_with(
    c: &Cloud,
    k1: &[VelocitySample],
    dt: f64,
    cfg: &IntegratorConfig,
    kcfg: &KernelConfig,
    path: &VelocityPath,
) -> Result<Cloud, StepError> {
    let h = cfg.direction.sign() * dt;
    let r_min = R_MIN_FRACTION * c.r0;
    let vel = |x: &Cloud| evaluate(x, &Targets::Particles, kcfg, path);
    let mut out = match cfg.scheme {
        Scheme::Rk2 => {
            let k2 = vel(&stage_cloud(c, k1, 0.5 * h, 1, r_min)?)?;
            stage_cloud(c, &k2, h, 2, r_min)?
        }
        Scheme::Rk4 => {
            let k2 = vel(&stage_cloud(c, k1, 0.5 * h, 1, r_min)?)?;
            let k3 = vel(&stage_cloud(c, &k2, 0.5 * h, 2, r_min)?)?;
            let k4 = vel(&stage_cloud(c, &k3, h, 3, r_min)?)?;
            let h6 = h / 6.0;
            let mut out = c.clone();
            for (i, p) in out.particles.iter_mut().enumerate() {
                let sr = k1[i].u_r + 2.0 * k2[i].u_r + 2.0 * k3[i].u_r + k4[i].u_r;
                let sz = k1[i].u_z + 2.0 * k2[i].u_z + 2.0 * k3[i].u_z + k4[i].u_z;
                p.r += h6 * sr;
                p.z += h6 * sz;
                if !(p.r > r_min) {
                    return Err(StepError::AxisCrossing { particle: i, r: p.r, r_min, stage: 4 });
                }
            }
            out
        }
    };
    out.time = c.time + h;
    Ok(out)
}

/// Advances every particle by one step of size `dt`; weights, labels and tags
/// are carried unchanged.
pub fn step(c: &Cloud, dt: f64, cfg: &IntegratorConfig, kcfg: &KernelConfig, path: &VelocityPath) -> Result<Cloud, StepError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(StepError::Config(format!("dt must be positive, got {dt}")));
    }
    let k1 = evaluate(c, &Targets::Particles, kcfg, path)?;
    step_with(c, &k1, dt, cfg, kcfg, path)
}

/// Everything `run` needs besides the initial cloud.
#[derive(Debug, Clone)]
pub struct RunSettings {
    pub integrator: IntegratorConfig,
    pub kernel: KernelConfig,
    pub path: VelocityPath,
    pub diagnostics: DiagnosticsConfig,
    /// Directory receiving checkpoints; `None` disables them.
    pub checkpoint_dir: Option<PathBuf>,
    pub config_digest: String,
}

impl RunSettings {
    pub fn new(integrator: IntegratorConfig, kernel: KernelConfig, path: VelocityPath) -> Self {
        Self {
            integrator,
            kernel,
            path,
            diagnostics: DiagnosticsConfig::default(),
            checkpoint_dir: None,
            config_digest: String::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub cloud: Cloud,
    pub records: Vec<DiagnosticsRecord>,
    /// Steps taken, counted from the seed.
    pub steps: u64,
}

#[derive(Debug, Error)]
pub enum RunFailure {
    #[error(transparent)]
    Step(#[from] StepError),
    #[error(transparent)]
    Diagnostics(#[from] DiagError),
    #[error(transparent)]
    Io(#[from] IoError),
}

#[derive(Debug, Error)]
#[error("run failed at t = {time} (step {step}): {source}")]
pub struct RunError {
    pub time: f64,
    pub step: u64,
    #[source]
    pub source: RunFailure,
    /// Records emitted before the failure.
    pub records: Vec<DiagnosticsRecord>,
    /// Last good state, also written as `final.ckpt.jsonl` when checkpoints
    /// are enabled.
    pub cloud: Box<Cloud>,
}

pub fn checkpoint_path(dir: &Path, step: u64) -> PathBuf {
    dir.join(format!("step_{step:010}.ckpt.jsonl"))
}

pub fn final_checkpoint_path(dir: &Path) -> PathBuf {
    dir.join("final.ckpt.jsonl")
}

/// Integrates `seed` to the clock `±t_end`.
pub fn run(seed: Cloud, s: &RunSettings) -> Result<RunOutput, RunError> {
    run_from(seed, 0, s)
}

/// Continues from a checkpoint. The records and final cloud coincide bitwise
/// with the tail of the uninterrupted run.
pub fn resume(ck: io::Checkpoint, s: &RunSettings) -> Result<RunOutput, RunError> {
    if ck.state.config_digest != s.config_digest {
        let fail = StepError::Config(format!(
            "checkpoint digest {} does not match configuration digest {}",
            ck.state.config_digest, s.config_digest
        ));
        return Err(RunError {
            time: ck.cloud.time,
            step: ck.state.step,
            source: fail.into(),
            records: Vec::new(),
            cloud: Box::new(ck.cloud),
        });
    }
    run_from(ck.cloud, ck.state.step, s)
}

fn run_from(start: Cloud, start_step: u64, s: &RunSettings) -> Result<RunOutput, RunError> {
    let cfg = &s.integrator;
    let mut cloud = start;
    let mut step_no = start_step;
    let mut records = Vec::new();
    macro_rules! bail {
        ($e:expr) => {{
            let source: RunFailure = $e.into();
            if let Some(dir) = &s.checkpoint_dir {
                // best effort; the original failure is what gets reported
                let _ = io::save_checkpoint(&final_checkpoint_path(dir), step_no, &cloud, &s.config_digest);
            }
            return Err(RunError { time: cloud.time, step: step_no, source, records, cloud: Box::new(cloud) });
        }};
    }
    if let Err(e) = cfg.validate().and(s.kernel.validate().map_err(|e| StepError::Velocity(e.into()))) {
        bail!(e);
    }
    if let Some(dir) = &s.checkpoint_dir {
        if let Err(e) = std::fs::create_dir_all(dir) {
            bail!(IoError::from(e));
        }
    }
    let sign = cfg.direction.sign();
    let target = sign * cfg.t_end;
    if step_no % cfg.diag_every == 0 {
        match diagnostics::record(&cloud, &s.kernel, &s.diagnostics) {
            Ok(r) => records.push(r),
            Err(e) => bail!(e),
        }
    }
    loop {
        let remaining = sign * (target - cloud.time);
        if !(remaining > 0.0) {
            break;
        }
        let k1 = match evaluate(&cloud, &Targets::Particles, &s.kernel, &s.path) {
            Ok(k) => k,
            Err(e) => bail!(StepError::from(e)),
        };
        let mut dt = adaptive_dt(cfg, max_speed(&k1), core_spacing(&cloud));
        let last = dt >= remaining;
        if last {
            dt = remaining;
        }
        let mut next = match step_with(&cloud, &k1, dt, cfg, &s.kernel, &s.path) {
            Ok(n) => n,
            Err(e) => bail!(e),
        };
        if last {
            next.time = target;
        }
        cloud = next;
        step_no += 1;
        if last || step_no % cfg.diag_every == 0 {
            match diagnostics::record(&cloud, &s.kernel, &s.diagnostics) {
                Ok(r) => records.push(r),
                Err(e) => bail!(e),
            }
        }
        if let Some(dir) = &s.checkpoint_dir {
            if cfg.checkpoint_every > 0 && step_no % cfg.checkpoint_every == 0 {
                if let Err(e) = io::save_checkpoint(&checkpoint_path(dir, step_no), step_no, &cloud, &s.config_digest) {
                    bail!(e);
                }
            }
        }
    }
    if let Some(dir) = &s.checkpoint_dir {
        if let Err(e) = io::save_checkpoint(&final_checkpoint_path(dir), step_no, &cloud, &s.config_digest) {
            bail!(e);
        }
    }
    Ok(RunOutput { cloud, records, steps: step_no })
}
