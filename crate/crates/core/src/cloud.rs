//! Particle representation of the vorticity field, initial-data generators and
//! the exact symmetries (reflection, scaling) of the equation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics;
use crate::kernels::{KernelConfig, KernelPoint};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CloudError {
    #[error("no admissible particles (all weights below the drop threshold)")]
    EmptyCloud,
    #[error("seeded particle at r = {r} is not in the half-plane r > 0")]
    AxisOverlap { r: f64 },
    #[error("profile integral {integral} deviates from 1 by more than 1e-6")]
    NotNormalized { integral: f64 },
    #[error("grid spacing h = {h} does not resolve the core (need h <= eps/8 = {max})")]
    Resolution { h: f64, max: f64 },
    #[error("{what} out of domain: {value}")]
    Domain { what: &'static str, value: f64 },
    #[error("decomposition inequality violated: sup(w_d/r) = {sup_over_r} vs bound {bound}")]
    DecompositionViolated { sup_over_r: f64, bound: f64 },
    #[error("patch leaves {patch_mass} of {mu}; the core must carry at least half")]
    CoreTooLight { patch_mass: f64, mu: f64 },
    #[error("patch reaches r = {r}, closer to the axis than c5 = {c5}")]
    PatchNearAxis { r: f64, c5: f64 },
    #[error("degenerate moments: M0 = {m0}, M2 = {m2}")]
    DegenerateMoments { m0: f64, m2: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Tag {
    CoreM,
    DiffuseD,
    #[default]
    Untagged,
}

/// One Lagrangian element. `gamma`, `xi0` and `tag` never change after
/// seeding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Particle {
    pub r: f64,
    pub z: f64,
    pub gamma: f64,
    pub xi0: f64,
    #[serde(default)]
    pub tag: Tag,
}

impl Particle {
    pub fn point(&self) -> KernelPoint {
        KernelPoint { r: self.r, z: self.z }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cloud {
    pub particles: Vec<Particle>,
    pub epsilon: f64,
    pub mu: f64,
    pub r0: f64,
    pub time: f64,
}

impl Cloud {
    pub fn new(particles: Vec<Particle>, epsilon: f64, mu: f64, r0: f64) -> Self {
        Self { particles, epsilon, mu, r0, time: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn has_tags(&self) -> bool {
        self.particles.iter().any(|p| p.tag != Tag::Untagged)
    }

    pub fn log_eps(&self) -> f64 {
        self.epsilon.ln().abs()
    }
}

// ---------------------------------------------------------------------------
// Profiles

/// Nonnegative radial profile on the unit ball with unit integral over the
/// plane.
pub trait RadialProfile: Send + Sync {
    fn value(&self, rho: f64) -> f64;
}

fn psi(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

/// Smooth step: 1 for `rho <= a`, 0 for `rho >= b`.
fn smooth_cut(rho: f64, a: f64, b: f64) -> f64 {
    let t = ((rho - a) / (b - a)).clamp(0.0, 1.0);
    let p = psi(1.0 - t);
    p / (p + psi(t))
}

fn radial_integral(g: impl Fn(f64) -> f64) -> f64 {
    // composite Simpson on [0, 1]; the profiles are smooth
    let n = 20_000;
    let h = 1.0 / n as f64;
    let mut s = 0.0;
    for i in 0..=n {
        let x = i as f64 * h;
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        s += w * 2.0 * std::f64::consts::PI * x * g(x);
    }
    s * h / 3.0
}

/// Built-in profile choices as they appear in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    /// Gaussian of width `sigma`, smoothly cut off between `cut_start` and 1.
    Gaussian { sigma: f64, cut_start: f64 },
    /// Constant plateau with a smooth edge from `edge_start` to 1.
    FlatDisc { edge_start: f64 },
}

impl Default for ProfileSpec {
    fn default() -> Self {
        ProfileSpec::Gaussian { sigma: 0.3, cut_start: 0.5 }
    }
}

#[derive(Debug, Clone)]
pub struct BuiltinProfile {
    spec: ProfileSpec,
    norm: f64,
}

impl BuiltinProfile {
    pub fn new(spec: ProfileSpec) -> Result<Self, CloudError> {
        match spec {
            ProfileSpec::Gaussian { sigma, cut_start } => {
                if !(sigma > 0.0) {
                    return Err(CloudError::Domain { what: "gaussian sigma", value: sigma });
                }
                if !(0.0..1.0).contains(&cut_start) {
                    return Err(CloudError::Domain { what: "gaussian cut_start", value: cut_start });
                }
            }
            ProfileSpec::FlatDisc { edge_start } => {
                if !(0.0..1.0).contains(&edge_start) {
                    return Err(CloudError::Domain { what: "disc edge_start", value: edge_start });
                }
            }
        }
        let mut p = Self { spec, norm: 1.0 };
        p.norm = radial_integral(|x| p.raw(x));
        Ok(p)
    }

    fn raw(&self, rho: f64) -> f64 {
        if rho >= 1.0 {
            return 0.0;
        }
        match self.spec {
            ProfileSpec::Gaussian { sigma, cut_start } => {
                (-rho * rho / (2.0 * sigma * sigma)).exp() * smooth_cut(rho, cut_start, 1.0)
            }
            ProfileSpec::FlatDisc { edge_start } => smooth_cut(rho, edge_start, 1.0),
        }
    }
}

impl RadialProfile for BuiltinProfile {
    fn value(&self, rho: f64) -> f64 {
        self.raw(rho) / self.norm
    }
}

/// Midpoint-rule integral of a profile over the unit ball on a 1/64 grid.
pub fn profile_integral(profile: &dyn RadialProfile) -> f64 {
    let n = 64;
    let h = 1.0 / n as f64;
    let mut s = 0.0;
    for i in -n..n {
        for j in -n..n {
            let x = (i as f64 + 0.5) * h;
            let y = (j as f64 + 0.5) * h;
            let rho = (x * x + y * y).sqrt();
            if rho < 1.0 {
                s += profile.value(rho);
            }
        }
    }
    s * h * h
}

// ---------------------------------------------------------------------------
// Generators

/// Seeds `w0(x) = mu/eps² f((x - x0)/eps)` at the cell centres of a uniform
/// grid of spacing `h`, symmetric about `x0`.
pub fn generate_blob(profile: &dyn RadialProfile, eps: f64, x0: KernelPoint, mu: f64, h: f64) -> Result<Cloud, CloudError> {
    seed_blob(profile, eps, x0, mu, h, Tag::Untagged)
}

fn seed_blob(profile: &dyn RadialProfile, eps: f64, x0: KernelPoint, mu: f64, h: f64, tag: Tag) -> Result<Cloud, CloudError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(CloudError::Domain { what: "epsilon", value: eps });
    }
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(CloudError::Domain { what: "mu", value: mu });
    }
    if !(h > 0.0) {
        return Err(CloudError::Domain { what: "grid spacing", value: h });
    }
    if h > eps / 8.0 * (1.0 + 1e-12) {
        return Err(CloudError::Resolution { h, max: eps / 8.0 });
    }
    let integral = profile_integral(profile);
    if (integral - 1.0).abs() > 1e-6 {
        return Err(CloudError::NotNormalized { integral });
    }
    let n = (eps / h).ceil() as i64;
    let count = (2 * n) * (2 * n);
    let drop_below = 1e-14 * mu / count as f64;
    let amp = mu / (eps * eps);
    let mut particles = Vec::new();
    for i in -n..n {
        let r = x0.r + (i as f64 + 0.5) * h;
        for j in -n..n {
            let z = x0.z + (j as f64 + 0.5) * h;
            let rho = ((r - x0.r).powi(2) + (z - x0.z).powi(2)).sqrt() / eps;
            if rho >= 1.0 {
                continue;
            }
            let w = amp * profile.value(rho);
            let gamma = w * h * h;
            if !(gamma > 0.0) || gamma < drop_below {
                continue;
            }
            if r <= 0.0 {
                return Err(CloudError::AxisOverlap { r });
            }
            particles.push(Particle { r, z, gamma, xi0: w / r, tag });
        }
    }
    if particles.is_empty() {
        return Err(CloudError::EmptyCloud);
    }
    Ok(Cloud::new(particles, eps, mu, x0.r))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlobParams {
    pub profile: ProfileSpec,
    pub eps: f64,
    pub x0: KernelPoint,
    pub mu: f64,
    pub h: f64,
}

/// Annulus `inner_radius <= |x - x0| < inner_radius + width` around the core
/// centre, at constant vorticity `level`, seeded with spacing `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchParams {
    pub inner_radius: f64,
    pub width: f64,
    pub level: f64,
    pub h: f64,
    /// Minimum admissible distance of the patch from the axis (c5).
    pub c5: f64,
}

/// Measured sides of `0 < ||w_d/r||_inf <= (|log eps|²/C_d) ||w_d||_1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionCheck {
    pub sup_wd_over_r: f64,
    pub wd_l1: f64,
    pub bound_factor: f64,
    /// `sup(w_d/r) / ||w_d||_1`, to be compared with `bound_factor`.
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct FilamentationData {
    pub cloud: Cloud,
    pub decomposition: DecompositionCheck,
}

/// Core blob (tag `CoreM`) plus an annular diffuse patch (tag `DiffuseD`).
/// The core carries `mu` minus the patch mass so that `M0 = mu`.
pub fn generate_filamentation_data(core: &BlobParams, patch: &PatchParams, c_d: f64) -> Result<FilamentationData, CloudError> {
    if !(c_d > 0.0) {
        return Err(CloudError::Domain { what: "C_d", value: c_d });
    }
    if !(patch.h > 0.0) || !(patch.width > 0.0) {
        return Err(CloudError::Domain { what: "patch geometry", value: patch.h.min(patch.width) });
    }
    if patch.inner_radius < core.eps {
        return Err(CloudError::Domain { what: "patch inner radius (must clear the core)", value: patch.inner_radius });
    }
    let eps = core.eps;
    let x0 = core.x0;
    let outer = patch.inner_radius + patch.width;
    let n = (outer / patch.h).ceil() as i64;
    let mut diffuse = Vec::new();
    if patch.level > 0.0 {
        for i in -n..n {
            let r = x0.r + (i as f64 + 0.5) * patch.h;
            for j in -n..n {
                let z = x0.z + (j as f64 + 0.5) * patch.h;
                let d = ((r - x0.r).powi(2) + (z - x0.z).powi(2)).sqrt();
                if d < patch.inner_radius || d >= outer {
                    continue;
                }
                if r <= 0.0 {
                    return Err(CloudError::AxisOverlap { r });
                }
                if r < patch.c5 {
                    return Err(CloudError::PatchNearAxis { r, c5: patch.c5 });
                }
                let gamma = patch.level * patch.h * patch.h;
                diffuse.push(Particle { r, z, gamma, xi0: patch.level / r, tag: Tag::DiffuseD });
            }
        }
    }
    let wd_l1 = crate::summation::compensated_sum(diffuse.iter().map(|p| p.gamma));
    let sup_wd_over_r = diffuse.iter().map(|p| p.xi0).fold(0.0, f64::max);
    let bound_factor = eps.ln().powi(2) / c_d;
    let bound = bound_factor * wd_l1;
    if !(sup_wd_over_r > 0.0) || sup_wd_over_r > bound {
        return Err(CloudError::DecompositionViolated { sup_over_r: sup_wd_over_r, bound });
    }
    let core_mass = core.mu - wd_l1;
    if core_mass < 0.5 * core.mu {
        return Err(CloudError::CoreTooLight { patch_mass: wd_l1, mu: core.mu });
    }
    let profile = BuiltinProfile::new(core.profile)?;
    let mut cloud = seed_blob(&profile, eps, x0, core_mass, core.h, Tag::CoreM)?;
    cloud.particles.extend(diffuse);
    cloud.mu = core.mu;
    Ok(FilamentationData {
        cloud,
        decomposition: DecompositionCheck { sup_wd_over_r, wd_l1, bound_factor, ratio: sup_wd_over_r / wd_l1 },
    })
}

// ---------------------------------------------------------------------------
// Assumption checks

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssumptionConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

impl Default for AssumptionConstants {
    fn default() -> Self {
        Self { c1: 10.0, c2: 1.0, c3: 1.0, c4: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub max_xi_over_eps2: f64,
    pub m0_gap: f64,
    pub m2_gap: f64,
    pub energy_gap: f64,
    pub a0: f64,
    /// Items (i)–(v).
    pub pass_flags: [bool; 5],
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.pass_flags.iter().all(|&f| f)
    }

    pub fn render(&self, c: &AssumptionConstants) -> String {
        let mark = |b: bool| if b { "pass" } else { "FAIL" };
        format!(
            "(i)   sup(w0/r)*eps^2        = {:.6e}  < c1 = {}  {}\n\
             (ii)  |M0 - mu|*|log eps|    = {:.6e}  < c2 = {}  {}\n\
             (iii) |M2 - r0^2 mu|*|log eps| = {:.6e}  < c3 = {}  {}\n\
             (iv)  |E - r0 mu^2 |log eps|/2pi| = {:.6e}  < c4 = {}  {}\n\
             (v)   A0 = {:.6e} finite  {}\n",
            self.max_xi_over_eps2,
            c.c1,
            mark(self.pass_flags[0]),
            self.m0_gap,
            c.c2,
            mark(self.pass_flags[1]),
            self.m2_gap,
            c.c3,
            mark(self.pass_flags[2]),
            self.energy_gap,
            c.c4,
            mark(self.pass_flags[3]),
            self.a0,
            mark(self.pass_flags[4]),
        )
    }
}

/// Evaluates hypotheses (i)–(v) by discrete summation. Never fails; a
/// quantity that cannot be computed (e.g. energy at zero regularization) is
/// reported as NaN and its flag is false.
pub fn validate_assumptions(c: &Cloud, constants: &AssumptionConstants, kcfg: &KernelConfig) -> AssumptionReport {
    let log_eps = c.log_eps();
    let max_xi = c.particles.iter().map(|p| p.xi0).fold(0.0, f64::max);
    let nonneg = c.particles.iter().all(|p| p.xi0 >= 0.0 && p.gamma >= 0.0);
    let (m0, m2) = diagnostics::moments(c);
    let energy = diagnostics::energy_e(c, kcfg).unwrap_or(f64::NAN);
    let max_xi_over_eps2 = max_xi * c.epsilon * c.epsilon;
    let m0_gap = (m0 - c.mu).abs() * log_eps;
    let m2_gap = (m2 - c.r0 * c.r0 * c.mu).abs() * log_eps;
    let energy_gap = (energy - c.r0 * c.mu * c.mu / (2.0 * std::f64::consts::PI) * log_eps).abs();
    let a0 = diagnostics::weighted_axial_moment_at(c, 0.0, 0.0);
    AssumptionReport {
        max_xi_over_eps2,
        m0_gap,
        m2_gap,
        energy_gap,
        a0,
        pass_flags: [
            nonneg && max_xi_over_eps2 < constants.c1,
            m0_gap < constants.c2,
            m2_gap < constants.c3,
            energy_gap < constants.c4,
            a0.is_finite(),
        ],
    }
}

// ---------------------------------------------------------------------------
// Symmetries

/// `w(r, z) -> w(r, -z)`.
pub fn mirror_z(c: &Cloud) -> Cloud {
    let mut out = c.clone();
    for p in &mut out.particles {
        p.z = -p.z;
    }
    out
}

/// `w^{λ,γ}(r, z, t) = γ w(λr, λz, γt)`: positions divided by `λ`, weights
/// multiplied by `γ/λ²`, clock divided by `γ`.
pub fn scale(c: &Cloud, lambda: f64, gamma: f64) -> Result<Cloud, CloudError> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(CloudError::Domain { what: "lambda", value: lambda });
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(CloudError::Domain { what: "gamma", value: gamma });
    }
    let wf = gamma / (lambda * lambda);
    let mut out = c.clone();
    for p in &mut out.particles {
        p.r /= lambda;
        p.z /= lambda;
        p.gamma *= wf;
        p.xi0 *= gamma * lambda;
    }
    out.mu *= wf;
    out.r0 /= lambda;
    out.time /= gamma;
    Ok(out)
}

/// Rescales to `M0 = M2 = 1` with `γ = M2/M0²`, `λ² = M2/M0`.
pub fn normalize(c: &Cloud) -> Result<(Cloud, f64, f64), CloudError> {
    let (m0, m2) = diagnostics::moments(c);
    if !(m0 > 0.0) || !(m2 > 0.0) {
        return Err(CloudError::DegenerateMoments { m0, m2 });
    }
    let lambda = (m2 / m0).sqrt();
    let gamma = m2 / (m0 * m0);
    Ok((scale(c, lambda, gamma)?, lambda, gamma))
}
