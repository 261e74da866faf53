//! On-disk formats: cloud JSONL, checkpoints, diagnostics CSV and the fits
//! sidecar. Field layouts are frozen in SCHEMA.md.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::{Cloud, Particle};
use crate::diagnostics::{DiagnosticsRecord, RunFits, RECORD_COLUMNS};

pub const CLOUD_SCHEMA: &str = "ringlab.cloud/1";
pub const CHECKPOINT_SCHEMA: &str = "ringlab.checkpoint/1";
pub const CSV_SCHEMA_VERSION: u32 = 1;
pub const FITS_SCHEMA: &str = "ringlab.fits/1";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("schema mismatch: {0}")]
    Schema(String),
}

fn parse_err(line: usize, msg: impl ToString) -> IoError {
    IoError::Parse { line, msg: msg.to_string() }
}

/// Provenance stamped into every artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ArtifactMeta {
    pub config_digest: Option<String>,
    pub version: Option<String>,
}

impl ArtifactMeta {
    pub fn new(digest: impl Into<String>) -> Self {
        Self { config_digest: Some(digest.into()), version: Some(VERSION.to_string()) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CloudHeader {
    pub schema: String,
    pub epsilon: f64,
    pub mu: f64,
    pub r0: f64,
    pub time: f64,
    pub count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_digest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<String>,
}

impl CloudHeader {
    pub fn meta(&self) -> ArtifactMeta {
        ArtifactMeta { config_digest: self.config_digest.clone(), version: self.version.clone() }
    }
}

/// Exact decimal form (17 significant digits).
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn finite(x: f64, what: &str) -> Result<f64, IoError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(IoError::Schema(format!("non-finite {what}: {x}")))
    }
}

fn header_in_domain(eps: f64, mu: f64, r0: f64, time: f64) -> bool {
    eps > 0.0 && eps < 1.0 && r0 > 0.0 && r0.is_finite() && mu.is_finite() && time.is_finite()
}

fn particle_in_domain(p: &Particle) -> bool {
    p.r > 0.0 && p.r.is_finite() && p.z.is_finite() && p.gamma >= 0.0 && p.gamma.is_finite() && p.xi0.is_finite()
}

/// Refuses anything [`read_cloud`] would reject.
pub fn write_cloud<W: Write>(mut w: W, c: &Cloud, meta: &ArtifactMeta) -> Result<(), IoError> {
    if !header_in_domain(c.epsilon, c.mu, c.r0, c.time) {
        return Err(IoError::Schema(format!(
            "cloud parameters out of domain: epsilon={} mu={} r0={} time={}",
            c.epsilon, c.mu, c.r0, c.time
        )));
    }
    if let Some((i, p)) = c.particles.iter().enumerate().find(|(_, p)| !particle_in_domain(p)) {
        return Err(IoError::Schema(format!("particle {i} out of domain: {p:?}")));
    }
    let header = CloudHeader {
        schema: CLOUD_SCHEMA.into(),
        epsilon: finite(c.epsilon, "epsilon")?,
        mu: finite(c.mu, "mu")?,
        r0: finite(c.r0, "r0")?,
        time: finite(c.time, "time")?,
        count: c.len(),
        config_digest: meta.config_digest.clone(),
        version: meta.version.clone(),
    };
    writeln!(w, "{}", serde_json::to_string(&header).map_err(|e| IoError::Schema(e.to_string()))?)?;
    for p in &c.particles {
        let tag = serde_json::to_string(&p.tag).map_err(|e| IoError::Schema(e.to_string()))?;
        writeln!(
            w,
            "{{\"r\":{},\"z\":{},\"gamma\":{},\"xi0\":{},\"tag\":{}}}",
            num(finite(p.r, "r")?),
            num(finite(p.z, "z")?),
            num(finite(p.gamma, "gamma")?),
            num(finite(p.xi0, "xi0")?),
            tag
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a cloud whose header sits on line `first_line` of the enclosing file.
fn read_cloud_lines<I: Iterator<Item = std::io::Result<String>>>(
    mut lines: I,
    first_line: usize,
) -> Result<(Cloud, CloudHeader), IoError> {
    let head = lines.next().ok_or_else(|| parse_err(first_line, "missing cloud header"))??;
    let header: CloudHeader = serde_json::from_str(&head).map_err(|e| parse_err(first_line, e))?;
    if header.schema != CLOUD_SCHEMA {
        return Err(IoError::Schema(format!("expected {CLOUD_SCHEMA}, found {}", header.schema)));
    }
    if !header_in_domain(header.epsilon, header.mu, header.r0, header.time) {
        return Err(parse_err(first_line, "header parameters out of domain"));
    }
    let mut particles = Vec::with_capacity(header.count.min(1 << 24));
    for (k, line) in lines.enumerate() {
        let line = line?;
        let ln = first_line + 1 + k;
        if line.trim().is_empty() {
            continue;
        }
        let p: Particle = serde_json::from_str(&line).map_err(|e| parse_err(ln, e))?;
        if !particle_in_domain(&p) {
            return Err(parse_err(ln, "particle out of domain"));
        }
        particles.push(p);
    }
    if particles.len() != header.count {
        return Err(IoError::Schema(format!("header count {} but {} particles", header.count, particles.len())));
    }
    let cloud = Cloud { particles, epsilon: header.epsilon, mu: header.mu, r0: header.r0, time: header.time };
    Ok((cloud, header))
}

pub fn read_cloud<R: BufRead>(r: R) -> Result<(Cloud, CloudHeader), IoError> {
    read_cloud_lines(r.lines(), 1)
}

pub fn save_cloud(path: &Path, c: &Cloud, meta: &ArtifactMeta) -> Result<(), IoError> {
    write_cloud(BufWriter::new(File::create(path)?), c, meta)
}

pub fn load_cloud(path: &Path) -> Result<(Cloud, CloudHeader), IoError> {
    read_cloud(BufReader::new(File::open(path)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunState {
    pub schema: String,
    pub step: u64,
    pub clock: f64,
    pub config_digest: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub state: RunState,
    pub cloud: Cloud,
}

pub fn write_checkpoint<W: Write>(mut w: W, step: u64, c: &Cloud, digest: &str) -> Result<(), IoError> {
    let state = RunState {
        schema: CHECKPOINT_SCHEMA.into(),
        step,
        clock: finite(c.time, "clock")?,
        config_digest: digest.into(),
        version: VERSION.into(),
    };
    writeln!(w, "{}", serde_json::to_string(&state).map_err(|e| IoError::Schema(e.to_string()))?)?;
    write_cloud(w, c, &ArtifactMeta::new(digest))
}

pub fn read_checkpoint<R: BufRead>(r: R) -> Result<Checkpoint, IoError> {
    let mut lines = r.lines();
    let head = lines.next().ok_or_else(|| parse_err(1, "missing run-state header"))??;
    let state: RunState = serde_json::from_str(&head).map_err(|e| parse_err(1, e))?;
    if state.schema != CHECKPOINT_SCHEMA {
        return Err(IoError::Schema(format!("expected {CHECKPOINT_SCHEMA}, found {}", state.schema)));
    }
    let (cloud, _) = read_cloud_lines(lines, 2)?;
    if cloud.time.to_bits() != state.clock.to_bits() {
        return Err(IoError::Schema(format!("run-state clock {} differs from cloud time {}", state.clock, cloud.time)));
    }
    Ok(Checkpoint { state, cloud })
}

pub fn save_checkpoint(path: &Path, step: u64, c: &Cloud, digest: &str) -> Result<(), IoError> {
    write_checkpoint(BufWriter::new(File::create(path)?), step, c, digest)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, IoError> {
    read_checkpoint(BufReader::new(File::open(path)?))
}

fn csv_num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        num(x)
    }
}

pub fn write_diagnostics_csv<W: Write>(mut w: W, recs: &[DiagnosticsRecord], meta: &ArtifactMeta) -> Result<(), IoError> {
    writeln!(
        w,
        "# ringlab {} config_digest={} schema={}",
        meta.version.as_deref().unwrap_or(VERSION),
        meta.config_digest.as_deref().unwrap_or("none"),
        CSV_SCHEMA_VERSION
    )?;
    let mut cw = csv::Writer::from_writer(&mut w);
    cw.write_record(RECORD_COLUMNS).map_err(|e| IoError::Schema(e.to_string()))?;
    for r in recs {
        cw.write_record(r.values().iter().map(|&v| csv_num(v))).map_err(|e| IoError::Schema(e.to_string()))?;
    }
    cw.flush()?;
    Ok(())
}

/// Parses `# ringlab <version> config_digest=<hex|none> schema=<n>`.
fn parse_csv_banner(line: &str) -> Result<ArtifactMeta, IoError> {
    let mut it = line.split_whitespace();
    if it.next() != Some("#") || it.next() != Some("ringlab") {
        return Err(parse_err(1, "missing '# ringlab' banner"));
    }
    let version = it.next().ok_or_else(|| parse_err(1, "missing version"))?.to_string();
    let mut digest = None;
    let mut schema = None;
    for kv in it {
        match kv.split_once('=') {
            Some(("config_digest", v)) => digest = (v != "none").then(|| v.to_string()),
            Some(("schema", v)) => schema = Some(v.parse::<u32>().map_err(|e| parse_err(1, e))?),
            _ => return Err(parse_err(1, format!("unexpected banner field '{kv}'"))),
        }
    }
    match schema {
        Some(CSV_SCHEMA_VERSION) => Ok(ArtifactMeta { config_digest: digest, version: Some(version) }),
        Some(s) => Err(IoError::Schema(format!("CSV schema {s}, expected {CSV_SCHEMA_VERSION}"))),
        None => Err(parse_err(1, "missing schema field")),
    }
}

pub fn read_diagnostics_csv<R: BufRead>(mut r: R) -> Result<(Vec<DiagnosticsRecord>, ArtifactMeta), IoError> {
    let mut banner = String::new();
    r.read_line(&mut banner)?;
    let meta = parse_csv_banner(banner.trim_end())?;
    let mut cr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let headers = cr.headers().map_err(|e| parse_err(2, e))?.clone();
    if headers.iter().ne(RECORD_COLUMNS.iter().copied()) {
        return Err(IoError::Schema(format!("unexpected columns: {}", headers.iter().collect::<Vec<_>>().join(","))));
    }
    let mut recs = Vec::new();
    for (k, row) in cr.records().enumerate() {
        let ln = k + 3;
        let row = row.map_err(|e| parse_err(ln, e))?;
        if row.len() != RECORD_COLUMNS.len() {
            return Err(parse_err(ln, "wrong field count"));
        }
        let mut v = [0.0; 16];
        for (slot, field) in v.iter_mut().zip(row.iter()) {
            *slot = field.trim().parse::<f64>().map_err(|e| parse_err(ln, format!("'{field}': {e}")))?;
        }
        recs.push(DiagnosticsRecord::from_values(v));
    }
    Ok((recs, meta))
}

pub fn save_diagnostics_csv(path: &Path, recs: &[DiagnosticsRecord], meta: &ArtifactMeta) -> Result<(), IoError> {
    write_diagnostics_csv(BufWriter::new(File::create(path)?), recs, meta)
}

pub fn load_diagnostics_csv(path: &Path) -> Result<(Vec<DiagnosticsRecord>, ArtifactMeta), IoError> {
    read_diagnostics_csv(BufReader::new(File::open(path)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitsFile {
    pub schema: String,
    pub config_digest: Option<String>,
    pub version: Option<String>,
    pub epsilon: f64,
    pub fits: RunFits,
}

pub fn save_fits(path: &Path, fits: &RunFits, eps: f64, meta: &ArtifactMeta) -> Result<(), IoError> {
    let doc = FitsFile {
        schema: FITS_SCHEMA.into(),
        config_digest: meta.config_digest.clone(),
        version: meta.version.clone(),
        epsilon: eps,
        fits: fits.clone(),
    };
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &doc).map_err(|e| IoError::Schema(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}
