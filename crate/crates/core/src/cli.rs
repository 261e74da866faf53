//! Command-line front end. Exit codes: 0 success, 2 configuration error,
//! 3 assumption failure, 4 runtime failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::compare::{compare_series, CompareError, CompareMode};
use crate::config::{ConfigError, SimConfig};
use crate::diagnostics::{self, fit_run};
use crate::integrator::{self, RunError};
use crate::io::{self, ArtifactMeta};
use crate::kernels::{branch_for, eval_F, eval_F1, eval_F2, KernelConfig};
use crate::oracle;
use crate::velocity::{max_relative_error, velocity_direct, velocity_treecode, Targets, TreecodeConfig, VelocityPath};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Assumption(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Assumption(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Cloud(_) => CliError::Assumption(e.to_string()),
            ConfigError::Io(_) | ConfigError::Data(_) | ConfigError::Parse { .. } | ConfigError::Invalid(_) => {
                CliError::Config(e.to_string())
            }
        }
    }
}

impl From<io::IoError> for CliError {
    fn from(e: io::IoError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<RunError> for CliError {
    fn from(e: RunError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "ringlab", version, about = "Vortex-blob simulator for axisymmetric vortex rings")]
pub struct Cli {
    /// Worker threads for velocity and diagnostics sums.
    #[arg(long, global = true, env = "RINGLAB_WORKERS")]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// JSON config; relative paths inside resolve against its directory.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides `output_dir` in the config).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Use the treecode with this opening angle.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Blob length in units of the seeding grid spacing.
    #[arg(long = "delta-over-h")]
    pub delta_over_h: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Seed the initial cloud and check the hypotheses.
    Generate(ConfigArgs),
    /// Integrate the scenario and write diagnostics, checkpoints and fits.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Continue from this checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Tabulate F, F1, F2 on a log-spaced range.
    KernelTable {
        /// `lo:hi:n`, log-spaced.
        #[arg(long, default_value = "1e-6:1e3:200")]
        range: String,
        /// Tabulate the independent quadrature with error estimates instead.
        #[arg(long)]
        oracle: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute one diagnostics record from a checkpoint.
    Diag {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Compare two diagnostics series under a symmetry.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// plain | mirror | scaling:LAMBDA,GAMMA
        #[arg(long, default_value = "plain")]
        mode: String,
    },
    /// Time direct against treecode summation on the seeded cloud.
    Bench {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Number of targets timed on the direct path (extrapolated).
        #[arg(long, default_value_t = 500)]
        sample: usize,
    },
}

/// Log-spaced range `lo:hi:n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRange {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl LogRange {
    pub fn points(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.lo];
        }
        let (a, b) = (self.lo.ln(), self.hi.ln());
        (0..self.n)
            .map(|i| if i == 0 { self.lo } else if i + 1 == self.n { self.hi } else { (a + (b - a) * i as f64 / (self.n - 1) as f64).exp().clamp(self.lo, self.hi) })
            .collect()
    }
}

pub fn parse_range(s: &str) -> Result<LogRange, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("range '{s}' is not lo:hi:n"));
    }
    let lo: f64 = parts[0].trim().parse().map_err(|e| format!("lo: {e}"))?;
    let hi: f64 = parts[1].trim().parse().map_err(|e| format!("hi: {e}"))?;
    let n: usize = parts[2].trim().parse().map_err(|e| format!("n: {e}"))?;
    if !(lo > 0.0 && lo.is_finite() && hi.is_finite()) {
        return Err(format!("range bounds must be positive and finite: {lo}, {hi}"));
    }
    if hi < lo {
        return Err(format!("descending range {lo} > {hi}"));
    }
    if n == 0 || n > 1_000_000 {
        return Err(format!("point count {n} outside 1..=1000000"));
    }
    if n > 1 && hi == lo {
        return Err("several points on an empty range".into());
    }
    Ok(LogRange { lo, hi, n })
}

fn load_config(a: &ConfigArgs) -> Result<(SimConfig, PathBuf), CliError> {
    let mut cfg = SimConfig::load(&a.config)?;
    if let Some(theta) = a.theta {
        let base = match cfg.velocity {
            VelocityPath::Treecode(tc) => tc,
            VelocityPath::Direct => TreecodeConfig::default(),
        };
        cfg.velocity = VelocityPath::Treecode(TreecodeConfig { theta, ..base });
    }
    if let Some(d) = a.delta_over_h {
        cfg.kernel.delta_over_h = d;
    }
    cfg.validate()?;
    let out = a.out.clone().or_else(|| cfg.output_dir()).unwrap_or_else(|| PathBuf::from("ringlab-out"));
    fs::create_dir_all(&out)?;
    Ok((cfg, out))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(CliError::from)
}

fn cmd_generate(a: &ConfigArgs) -> Result<String, CliError> {
    let (cfg, out) = load_config(a)?;
    let g = cfg.generate()?;
    let meta = ArtifactMeta::new(cfg.digest());
    io::save_cloud(&out.join("seed.cloud.jsonl"), &g.cloud, &meta)?;
    let mut text = format!(
        "ringlab {} config_digest={}\nscenario {:?}, N = {}, epsilon = {}, delta = {}\n",
        io::VERSION,
        cfg.digest(),
        cfg.scenario,
        g.cloud.len(),
        g.cloud.epsilon,
        cfg.delta()?
    );
    text.push_str(&g.report.render(&cfg.assumptions));
    if let Some(d) = g.decomposition {
        text.push_str(&format!(
            "decomposition: sup(w_d/r) / |w_d|_1 = {:.6e} <= |log eps|^2/C_d = {:.6e}  pass\n",
            d.ratio, d.bound_factor
        ));
    }
    write_text(&out.join("assumptions.txt"), &text)?;
    if !g.report.all_pass() {
        return Err(CliError::Assumption(format!("{text}assumption check failed")));
    }
    Ok(text)
}

fn cmd_run(a: &ConfigArgs, resume: Option<&Path>) -> Result<String, CliError> {
    let (cfg, out) = load_config(a)?;
    let mut settings = cfg.run_settings()?;
    settings.checkpoint_dir = Some(out.join("checkpoints"));
    let meta = ArtifactMeta::new(cfg.digest());
    let result = match resume {
        Some(p) => {
            let ck = io::load_checkpoint(p).map_err(|e| CliError::Config(e.to_string()))?;
            if ck.state.config_digest != settings.config_digest {
                return Err(CliError::Config(format!(
                    "checkpoint was written under config digest {}, this configuration has {}",
                    ck.state.config_digest, settings.config_digest
                )));
            }
            integrator::resume(ck, &settings)
        }
        None => {
            let g = cfg.generate()?;
            if !g.report.all_pass() {
                return Err(CliError::Assumption(format!("{}assumption check failed", g.report.render(&cfg.assumptions))));
            }
            io::save_cloud(&out.join("seed.cloud.jsonl"), &g.cloud, &meta)?;
            integrator::run(g.cloud, &settings)
        }
    };
    let output = match result {
        Ok(o) => o,
        Err(e) => {
            // keep what was computed before the failure
            let _ = io::save_diagnostics_csv(&out.join("diagnostics.csv"), &e.records, &meta);
            return Err(e.into());
        }
    };
    io::save_diagnostics_csv(&out.join("diagnostics.csv"), &output.records, &meta)?;
    io::save_cloud(&out.join("final.cloud.jsonl"), &output.cloud, &meta)?;
    let pair_r = cfg.diagnostics.pair_r(&output.cloud);
    let fits = fit_run(&output.records, cfg.data.epsilon, cfg.data.r0, pair_r);
    io::save_fits(&out.join("fits.json"), &fits, cfg.data.epsilon, &meta)?;
    Ok(format!(
        "{} steps to t = {}; {} records written to {}\n",
        output.steps,
        output.cloud.time,
        output.records.len(),
        out.display()
    ))
}

pub fn kernel_table(range: &LogRange, use_oracle: bool) -> Result<String, String> {
    let cfg = KernelConfig::default();
    let mut s = String::new();
    if use_oracle {
        s.push_str("s,F,F_err,F1,F1_err,F2,F2_err\n");
        for x in range.points() {
            let f = oracle::quad_F(x).map_err(|e| e.to_string())?;
            let f1 = oracle::quad_F1(x).map_err(|e| e.to_string())?;
            let f2 = oracle::quad_F2(x).map_err(|e| e.to_string())?;
            s.push_str(&format!(
                "{x:.16e},{:.16e},{:.3e},{:.16e},{:.3e},{:.16e},{:.3e}\n",
                f.value, f.abs_err_estimate, f1.value, f1.abs_err_estimate, f2.value, f2.abs_err_estimate
            ));
        }
    } else {
        s.push_str("s,F,F1,F2,branch\n");
        for x in range.points() {
            let f = eval_F(x, &cfg).map_err(|e| e.to_string())?;
            let f1 = eval_F1(x, &cfg).map_err(|e| e.to_string())?;
            let f2 = eval_F2(x, &cfg).map_err(|e| e.to_string())?;
            s.push_str(&format!("{x:.16e},{f:.16e},{f1:.16e},{f2:.16e},{}\n", branch_for(x, &cfg).name()));
        }
    }
    Ok(s)
}

fn cmd_diag(config: &Path, checkpoint: &Path) -> Result<String, CliError> {
    let cfg = SimConfig::load(config)?;
    let ck = io::load_checkpoint(checkpoint).map_err(|e| CliError::Config(e.to_string()))?;
    let rec = diagnostics::record(&ck.cloud, &cfg.kernel_config()?, &cfg.diagnostics).map_err(|e| CliError::Runtime(e.to_string()))?;
    let mut buf = Vec::new();
    io::write_diagnostics_csv(&mut buf, &[rec], &ArtifactMeta::new(ck.state.config_digest))?;
    Ok(String::from_utf8(buf).expect("ascii csv"))
}

fn cmd_compare(a: &Path, b: &Path, mode: &str) -> Result<String, CliError> {
    let mode: CompareMode = mode.parse().map_err(|e: CompareError| CliError::Config(e.to_string()))?;
    let (ra, ma) = io::load_diagnostics_csv(a).map_err(|e| CliError::Config(e.to_string()))?;
    let (rb, mb) = io::load_diagnostics_csv(b).map_err(|e| CliError::Config(e.to_string()))?;
    if ma.config_digest.is_none() {
        return Err(CliError::Config(CompareError::MissingDigest("A").to_string()));
    }
    if mb.config_digest.is_none() {
        return Err(CliError::Config(CompareError::MissingDigest("B").to_string()));
    }
    let rep = compare_series(&ra, &rb, mode).map_err(|e| CliError::Runtime(e.to_string()))?;
    let mut s = format!("mode {mode:?}, {} samples\ncolumn,max_abs,max_rel\n", rep.samples);
    for c in &rep.columns {
        if c.comparable {
            s.push_str(&format!("{},{:.6e},{:.6e}\n", c.column, c.max_abs, c.max_rel));
        } else {
            s.push_str(&format!("{},n/a,n/a\n", c.column));
        }
    }
    Ok(s)
}

fn cmd_bench(a: &ConfigArgs, sample: usize) -> Result<String, CliError> {
    let (cfg, _) = load_config(a)?;
    let g = cfg.generate()?;
    let c = g.cloud;
    let kcfg = cfg.kernel_config()?;
    let tc = match cfg.velocity {
        VelocityPath::Treecode(tc) => tc,
        VelocityPath::Direct => TreecodeConfig::default(),
    };
    let n = c.len();
    let stride = (n / sample.max(1)).max(1);
    let idx: Vec<usize> = (0..n).step_by(stride).collect();
    let rt = |e: crate::velocity::VelocityError| CliError::Runtime(e.to_string());
    let t0 = Instant::now();
    let direct = velocity_direct(&c, &Targets::Subset(&idx), &kcfg).map_err(rt)?;
    let direct_total = t0.elapsed().as_secs_f64() / idx.len() as f64 * n as f64;
    let t1 = Instant::now();
    let tree_all = velocity_treecode(&c, &Targets::Particles, &tc, &kcfg).map_err(rt)?;
    let tree_time = t1.elapsed().as_secs_f64();
    let tree_sampled: Vec<_> = idx.iter().map(|&i| tree_all[i]).collect();
    let err = max_relative_error(&tree_sampled, &direct);
    Ok(format!(
        "N = {n}, theta = {}, order = {}\ndirect (extrapolated from {} targets): {:.3} s\ntreecode (all targets): {:.3} s\nspeedup: {:.2}x\nmax relative error on sampled targets: {:.3e}\n",
        tc.theta,
        tc.order,
        idx.len(),
        direct_total,
        tree_time,
        direct_total / tree_time,
        err
    ))
}

fn init_workers(n: Option<usize>) {
    if let Some(n) = n.filter(|&n| n > 0) {
        // a second initialization (tests) keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Runs a parsed command line, returning the text for stdout.
pub fn execute(cli: &Cli) -> Result<String, CliError> {
    init_workers(cli.workers);
    match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Run { cfg, resume } => cmd_run(cfg, resume.as_deref()),
        Command::KernelTable { range, oracle, out } => {
            let r = parse_range(range).map_err(CliError::Config)?;
            let table = kernel_table(&r, *oracle).map_err(CliError::Runtime)?;
            match out {
                Some(p) => {
                    write_text(p, &table)?;
                    Ok(format!("{} rows written to {}\n", r.n, p.display()))
                }
                None => Ok(table),
            }
        }
        Command::Diag { config, checkpoint } => cmd_diag(config, checkpoint),
        Command::Compare { a, b, mode } => cmd_compare(a, b, mode),
        Command::Bench { cfg, sample } => cmd_bench(cfg, *sample),
    }
}

/// Entry point shared by the binary: parses `args`, prints, returns the exit
/// code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(text) => {
            let _ = std::io::stdout().write_all(text.as_bytes());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("1e-6:1e3:200").unwrap().points().len(), 200);
        let one = parse_range("0.5:0.5:1").unwrap();
        assert_eq!(one.points(), vec![0.5]);
        assert!(parse_range("10:1:5").is_err());
        assert!(parse_range("0:1:5").is_err());
        assert!(parse_range("1:2").is_err());
        assert!(parse_range("1:2:0").is_err());
        let p = parse_range("1e-6:1e3:200").unwrap().points();
        assert_eq!((p[0], p[199]), (1e-6, 1e3));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config(String::new()).exit_code(), 2);
        assert_eq!(CliError::Assumption(String::new()).exit_code(), 3);
        assert_eq!(CliError::Runtime(String::new()).exit_code(), 4);
    }
}
