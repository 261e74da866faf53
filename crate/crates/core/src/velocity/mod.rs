//! Induced velocity `u(x) = Σ_j K_δ(x, x_j) Γ_j`, by direct summation and by a
//! treecode. Parallel over targets only; each target sums in a fixed order.

mod tree;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::Cloud;
use crate::kernels::{kernel_raw, KernelConfig, KernelError, KernelPoint};
use crate::summation::NeumaierSum;

pub use tree::{build_tree, velocity_treecode, Tree, TreeNode, TreecodeConfig};

/// Targets closer to the axis than this fraction of `r0` are rejected.
pub const R_MIN_FRACTION: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VelocityError {
    #[error("target {target} coincides with source {particle} and delta = 0")]
    Singular { target: usize, particle: usize },
    #[error("target {index} at r = {r} is inside the axis guard")]
    AxisTarget { index: usize, r: f64 },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("invalid velocity configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy)]
pub enum Targets<'a> {
    /// The cloud's own particles; the self term is excluded by identity.
    Particles,
    Points(&'a [KernelPoint]),
    /// A subset of the cloud's particles, each with its own term excluded.
    Subset(&'a [usize]),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VelocitySample {
    pub u_r: f64,
    pub u_z: f64,
}

impl VelocitySample {
    pub fn norm(&self) -> f64 {
        self.u_r.hypot(self.u_z)
    }
}

/// Which summation path evaluates the velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VelocityPath {
    Direct,
    Treecode(TreecodeConfig),
}

impl Default for VelocityPath {
    fn default() -> Self {
        VelocityPath::Treecode(TreecodeConfig::default())
    }
}

pub(crate) fn target_points(c: &Cloud, targets: &Targets) -> Result<Vec<(KernelPoint, Option<usize>)>, VelocityError> {
    let r_min = R_MIN_FRACTION * c.r0;
    let pts: Vec<(KernelPoint, Option<usize>)> = match targets {
        Targets::Particles => c.particles.iter().enumerate().map(|(i, p)| (p.point(), Some(i))).collect(),
        Targets::Points(p) => p.iter().map(|&x| (x, None)).collect(),
        Targets::Subset(idx) => {
            let mut v = Vec::with_capacity(idx.len());
            for &i in idx.iter() {
                let p = c.particles.get(i).ok_or_else(|| VelocityError::Config(format!("target index {i} out of range")))?;
                v.push((p.point(), Some(i)));
            }
            v
        }
    };
    for (i, (x, _)) in pts.iter().enumerate() {
        if !(x.r >= r_min) || !x.r.is_finite() || !x.z.is_finite() {
            return Err(VelocityError::AxisTarget { index: i, r: x.r });
        }
    }
    Ok(pts)
}

pub fn velocity_direct(c: &Cloud, targets: &Targets, cfg: &KernelConfig) -> Result<Vec<VelocitySample>, VelocityError> {
    cfg.validate()?;
    let pts = target_points(c, targets)?;
    let d2 = cfg.delta * cfg.delta;
    pts.par_iter()
        .enumerate()
        .map(|(ti, &(x, own))| {
            let mut ur = NeumaierSum::new();
            let mut uz = NeumaierSum::new();
            for (j, p) in c.particles.iter().enumerate() {
                if own == Some(j) {
                    continue;
                }
                let (kr, kz) = kernel_raw(x.r, x.z, p.r, p.z, d2, cfg).map_err(|e| match e {
                    KernelError::Singular => VelocityError::Singular { target: ti, particle: j },
                    e => VelocityError::Kernel(e),
                })?;
                ur.add(kr * p.gamma);
                uz.add(kz * p.gamma);
            }
            Ok(VelocitySample { u_r: ur.value(), u_z: uz.value() })
        })
        .collect()
}

/// Dispatches on the configured path.
pub fn evaluate(c: &Cloud, targets: &Targets, cfg: &KernelConfig, path: &VelocityPath) -> Result<Vec<VelocitySample>, VelocityError> {
    match path {
        VelocityPath::Direct => velocity_direct(c, targets, cfg),
        VelocityPath::Treecode(tc) => velocity_treecode(c, targets, tc, cfg),
    }
}

/// Largest relative deviation `|u - u_ref| / |u_ref|` over paired samples.
pub fn max_relative_error(u: &[VelocitySample], reference: &[VelocitySample]) -> f64 {
    u.iter()
        .zip(reference)
        .map(|(a, b)| {
            let d = (a.u_r - b.u_r).hypot(a.u_z - b.u_z);
            let n = b.norm();
            if n > 0.0 {
                d / n
            } else if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max)
}
