//! Versioned JSON scenario description, presets and the provenance digest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cloud::{
    generate_blob, generate_filamentation_data, validate_assumptions, AssumptionConstants, AssumptionReport, BlobParams,
    BuiltinProfile, Cloud, CloudError, DecompositionCheck, PatchParams, ProfileSpec,
};
use crate::diagnostics::{kelvin_hicks_speed, DiagnosticsConfig};
use crate::integrator::{Direction, IntegratorConfig, RunSettings, Scheme};
use crate::io::{self, IoError};
use crate::kernels::{KernelConfig, KernelMethod, KernelPoint};
use crate::velocity::VelocityPath;

pub const CONFIG_SCHEMA: &str = "ringlab.config/1";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error at line {line}, column {column}: {msg}")]
    Parse { line: usize, column: usize, msg: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Data(#[from] IoError),
    #[error(transparent)]
    Cloud(#[from] CloudError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    ThinRing,
    FatRing,
    Custom,
}

/// Annular diffuse patch around the core centre (lengths absolute).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchSpec {
    pub inner_radius: f64,
    pub width: f64,
    pub level: f64,
    pub h: f64,
}

impl Default for PatchSpec {
    fn default() -> Self {
        Self { inner_radius: 0.25, width: 0.2, level: 0.5, h: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub profile: ProfileSpec,
    pub epsilon: f64,
    pub mu: f64,
    pub r0: f64,
    pub z0: f64,
    /// Seeding grid spacing over ε.
    pub h_over_eps: f64,
    /// Used by `fat_ring` only.
    pub patch: Option<PatchSpec>,
    pub c_d: f64,
    pub c5: f64,
    /// Cloud JSONL for `custom`, relative to the config file.
    pub cloud_path: Option<String>,
    /// Explicit grid spacing for `custom` (sets δ through `delta_over_h`).
    pub h: Option<f64>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            profile: ProfileSpec::default(),
            epsilon: 1e-2,
            mu: 1.0,
            r0: 1.0,
            z0: 0.0,
            h_over_eps: 0.025,
            patch: None,
            c_d: 1.0,
            c5: 0.5,
            cloud_path: None,
            h: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSettings {
    pub s_lo: f64,
    pub s_hi: f64,
    pub quad_tol: f64,
    pub method: KernelMethod,
    /// Explicit blob length; otherwise `delta_over_h · h`.
    pub delta: Option<f64>,
    pub delta_over_h: f64,
}

impl Default for KernelSettings {
    fn default() -> Self {
        let k = KernelConfig::default();
        Self { s_lo: k.s_lo, s_hi: k.s_hi, quad_tol: k.quad_tol, method: k.method, delta: None, delta_over_h: 1.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorSettings {
    pub scheme: Scheme,
    pub cfl: f64,
    /// Defaults to `t_end / 100`.
    pub dt_max: Option<f64>,
    /// Defaults to `4 / V_ε`.
    pub t_end: Option<f64>,
    pub diag_every: u64,
    pub checkpoint_every: u64,
    pub direction: Direction,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self {
            scheme: Scheme::Rk4,
            cfl: 0.25,
            dt_max: None,
            t_end: None,
            diag_every: 10,
            checkpoint_every: 0,
            direction: Direction::Forward,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub schema: String,
    pub scenario: Scenario,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub kernel: KernelSettings,
    #[serde(default)]
    pub integrator: IntegratorSettings,
    #[serde(default)]
    pub velocity: VelocityPath,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub assumptions: AssumptionConstants,
    #[serde(default)]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub rng_seed: Option<u64>,
    /// Directory of the config file; resolves relative paths. Not serialized.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

/// Initial cloud plus what the generator measured.
#[derive(Debug, Clone)]
pub struct Generated {
    pub cloud: Cloud,
    pub report: AssumptionReport,
    pub decomposition: Option<DecompositionCheck>,
}

impl SimConfig {
    pub fn preset(scenario: Scenario) -> Self {
        let mut data = DataConfig::default();
        if scenario == Scenario::FatRing {
            data.patch = Some(PatchSpec::default());
        }
        Self {
            schema: CONFIG_SCHEMA.into(),
            scenario,
            data,
            kernel: KernelSettings::default(),
            integrator: IntegratorSettings::default(),
            velocity: VelocityPath::default(),
            diagnostics: DiagnosticsConfig::default(),
            assumptions: AssumptionConstants::default(),
            output_dir: None,
            rng_seed: None,
            base_dir: None,
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let mut cfg: SimConfig = serde_json::from_str(text)
            .map_err(|e| ConfigError::Parse { line: e.line(), column: e.column(), msg: e.to_string() })?;
        // an omitted patch means the preset patch
        if cfg.scenario == Scenario::FatRing && cfg.data.patch.is_none() {
            cfg.data.patch = Some(PatchSpec::default());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_json_str(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 over the canonical (key-sorted, compact) JSON form.
    pub fn digest(&self) -> String {
        let v = serde_json::to_value(self).expect("config serializes");
        let canon = serde_json::to_string(&v).expect("value serializes");
        hex::encode(Sha256::digest(canon.as_bytes()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.schema != CONFIG_SCHEMA {
            return bad(format!("schema must be \"{CONFIG_SCHEMA}\", found \"{}\"", self.schema));
        }
        let d = &self.data;
        if !(d.epsilon > 0.0 && d.epsilon < 1.0) {
            return bad(format!("epsilon must lie in (0, 1), got {}", d.epsilon));
        }
        if !(d.r0 > 0.0 && d.r0.is_finite()) || !d.mu.is_finite() || !d.z0.is_finite() {
            return bad("r0 must be positive; mu and z0 finite".into());
        }
        if self.scenario != Scenario::Custom && !(d.h_over_eps > 0.0 && d.h_over_eps <= 0.125) {
            return bad(format!("h_over_eps must lie in (0, 1/8], got {}", d.h_over_eps));
        }
        if self.scenario == Scenario::FatRing && d.patch.is_none() {
            return bad("fat_ring needs data.patch".into());
        }
        if self.scenario == Scenario::Custom {
            if d.cloud_path.is_none() {
                return bad("custom scenario needs data.cloud_path".into());
            }
            if self.kernel.delta.is_none() && d.h.is_none() {
                return bad("custom scenario needs kernel.delta or data.h".into());
            }
        }
        if !(self.kernel.delta_over_h > 0.0) {
            return bad(format!("delta_over_h must be positive, got {}", self.kernel.delta_over_h));
        }
        self.kernel_config()?.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.integrator_config()?.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if let VelocityPath::Treecode(tc) = &self.velocity {
            tc.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        Ok(())
    }

    /// Seeding grid spacing.
    pub fn h(&self) -> Option<f64> {
        match self.scenario {
            Scenario::Custom => self.data.h,
            _ => Some(self.data.h_over_eps * self.data.epsilon),
        }
    }

    pub fn delta(&self) -> Result<f64, ConfigError> {
        match (self.kernel.delta, self.h()) {
            (Some(d), _) => Ok(d),
            (None, Some(h)) => Ok(self.kernel.delta_over_h * h),
            (None, None) => Err(ConfigError::Invalid("no blob length: set kernel.delta or data.h".into())),
        }
    }

    pub fn kernel_config(&self) -> Result<KernelConfig, ConfigError> {
        Ok(KernelConfig {
            s_lo: self.kernel.s_lo,
            s_hi: self.kernel.s_hi,
            quad_tol: self.kernel.quad_tol,
            method: self.kernel.method,
            delta: self.delta()?,
        })
    }

    pub fn v_kh(&self) -> f64 {
        kelvin_hicks_speed(self.data.mu, self.data.r0, self.data.epsilon).unwrap_or(f64::NAN)
    }

    pub fn t_end(&self) -> f64 {
        self.integrator.t_end.unwrap_or(4.0 / self.v_kh())
    }

    pub fn integrator_config(&self) -> Result<IntegratorConfig, ConfigError> {
        let t_end = self.t_end();
        let i = &self.integrator;
        let dt_max = i.dt_max.unwrap_or(if t_end > 0.0 { t_end / 100.0 } else { 1.0 });
        Ok(IntegratorConfig {
            scheme: i.scheme,
            cfl: i.cfl,
            dt_max,
            t_end,
            diag_every: i.diag_every,
            checkpoint_every: i.checkpoint_every,
            direction: i.direction,
        })
    }

    pub fn run_settings(&self) -> Result<RunSettings, ConfigError> {
        let mut s = RunSettings::new(self.integrator_config()?, self.kernel_config()?, self.velocity);
        s.diagnostics = self.diagnostics;
        s.config_digest = self.digest();
        Ok(s)
    }

    fn resolve(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        match (&self.base_dir, p.is_absolute()) {
            (Some(b), false) => b.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn output_dir(&self) -> Option<PathBuf> {
        self.output_dir.as_deref().map(|p| self.resolve(p))
    }

    /// Builds the initial cloud and its assumption report.
    pub fn generate(&self) -> Result<Generated, ConfigError> {
        let d = &self.data;
        let x0 = KernelPoint { r: d.r0, z: d.z0 };
        let (cloud, decomposition) = match self.scenario {
            Scenario::ThinRing => {
                let prof = BuiltinProfile::new(d.profile)?;
                let h = self.h().expect("preset spacing");
                (generate_blob(&prof, d.epsilon, x0, d.mu, h)?, None)
            }
            Scenario::FatRing => {
                let ps = d.patch.expect("validated");
                let core = BlobParams { profile: d.profile, eps: d.epsilon, x0, mu: d.mu, h: self.h().expect("preset spacing") };
                let patch = PatchParams { inner_radius: ps.inner_radius, width: ps.width, level: ps.level, h: ps.h, c5: d.c5 };
                let f = generate_filamentation_data(&core, &patch, d.c_d)?;
                (f.cloud, Some(f.decomposition))
            }
            Scenario::Custom => {
                let path = self.resolve(d.cloud_path.as_deref().expect("validated"));
                let (c, _) = io::load_cloud(&path)?;
                (c, None)
            }
        };
        let report = validate_assumptions(&cloud, &self.assumptions, &self.kernel_config()?);
        Ok(Generated { cloud, report, decomposition })
    }
}
