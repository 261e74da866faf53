//! Functionals of a frozen cloud: moments, energies, concentration centre and
//! leakage, the moving-frame barrier A, tagged barycentre and support
//! diameters, filament thickness, and least-squares fits of their series.
//!
//! Length scales are measured in units of `r0`, so every diagnostic commutes
//! with the scaling symmetry.

use std::collections::HashMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::{Cloud, Particle, Tag};
use crate::kernels::{eval_F, KernelConfig, KernelError, KernelPoint};
use crate::summation::{compensated_sum, NeumaierSum};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagError {
    #[error("energy needs a positive regularization length (delta = {0})")]
    ZeroDelta(f64),
    #[error("no particles selected by {0:?}")]
    EmptySelection(TagFilter),
    #[error("no selected particles inside the band [{0}, {1}]")]
    EmptyBand(f64, f64),
    #[error("need at least {need} samples after trimming, have {have}")]
    InsufficientSamples { need: usize, have: usize },
    #[error("{what} out of domain: {value}")]
    Domain { what: &'static str, value: f64 },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagFilter {
    All,
    Core,
    Diffuse,
    /// Core and diffuse together.
    Tagged,
}

impl TagFilter {
    pub fn accepts(self, t: Tag) -> bool {
        match self {
            TagFilter::All => true,
            TagFilter::Core => t == Tag::CoreM,
            TagFilter::Diffuse => t == Tag::DiffuseD,
            TagFilter::Tagged => t != Tag::Untagged,
        }
    }
}

fn selected(c: &Cloud, f: TagFilter) -> impl Iterator<Item = &Particle> {
    c.particles.iter().filter(move |p| f.accepts(p.tag))
}

/// `(M0, M2) = (Σ Γ_j, Σ r_j² Γ_j)`.
pub fn moments(c: &Cloud) -> (f64, f64) {
    let m0 = compensated_sum(c.particles.iter().map(|p| p.gamma));
    let m2 = compensated_sum(c.particles.iter().map(|p| p.r * p.r * p.gamma));
    (m0, m2)
}

/// Row sums `Σ_{k>j} term(j, k)` in parallel, combined in index order.
fn upper_pair_sum<F>(n: usize, term: F) -> Result<f64, DiagError>
where
    F: Fn(usize, usize) -> Result<f64, DiagError> + Sync,
{
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut acc = NeumaierSum::new();
            for k in j + 1..n {
                acc.add(term(j, k)?);
            }
            Ok(acc.value())
        })
        .collect::<Result<_, DiagError>>()?;
    Ok(compensated_sum(rows))
}

/// `E = Σ_{j≠k} sqrt(r_j r_k)/2π F(s²_jk) Γ_j Γ_k + Σ_j r_j/2π F(δ²/r_j²) Γ_j²`
/// with `s²_jk = (|x_j - x_k|² + δ²)/(r_j r_k)`.
pub fn energy_e(c: &Cloud, kcfg: &KernelConfig) -> Result<f64, DiagError> {
    let d = kcfg.delta;
    if !(d > 0.0) {
        return Err(DiagError::ZeroDelta(d));
    }
    let d2 = d * d;
    let ps = &c.particles;
    let pairs = upper_pair_sum(ps.len(), |j, k| {
        let (a, b) = (&ps[j], &ps[k]);
        let rr = a.r * b.r;
        let s2 = ((a.r - b.r).powi(2) + (a.z - b.z).powi(2) + d2) / rr;
        Ok(rr.sqrt() * eval_F(s2, kcfg)? * a.gamma * b.gamma)
    })?;
    let mut selfs = NeumaierSum::new();
    for p in ps {
        selfs.add(p.r * eval_F(d2 / (p.r * p.r), kcfg)? * p.gamma * p.gamma);
    }
    Ok((2.0 * pairs + selfs.value()) / (2.0 * PI))
}

/// `E1 = (1/2π) Σ_{j,k: |x_j - x_k| <= r0} log(r0/d_δ) sqrt(r_j r_k) Γ_j Γ_k`
/// over ordered pairs including `j = k`, with `d_δ = sqrt(|x_j - x_k|² + δ²)`.
pub fn energy_e1(c: &Cloud, kcfg: &KernelConfig) -> Result<f64, DiagError> {
    let d = kcfg.delta;
    if !(d > 0.0) {
        return Err(DiagError::ZeroDelta(d));
    }
    let d2 = d * d;
    let r0 = c.r0;
    let ps = &c.particles;
    let pairs = upper_pair_sum(ps.len(), |j, k| {
        let (a, b) = (&ps[j], &ps[k]);
        let dist2 = (a.r - b.r).powi(2) + (a.z - b.z).powi(2);
        if dist2 > r0 * r0 {
            return Ok(0.0);
        }
        Ok(0.5 * (r0 * r0 / (dist2 + d2)).ln() * (a.r * b.r).sqrt() * a.gamma * b.gamma)
    })?;
    let selfs = compensated_sum(ps.iter().map(|p| (r0 / d).ln() * p.r * p.gamma * p.gamma));
    Ok((2.0 * pairs + selfs) / (2.0 * PI))
}

/// `Σ_{j≠k, |x_j - x_k| >= R ε r0} (1 + r_j²) Γ_j Γ_k`.
pub fn pair_concentration(c: &Cloud, big_r: f64) -> Result<f64, DiagError> {
    if !(big_r >= 1.0) {
        return Err(DiagError::Domain { what: "R", value: big_r });
    }
    let thr = big_r * c.epsilon * c.r0;
    let thr2 = thr * thr;
    let ps = &c.particles;
    upper_pair_sum(ps.len(), |j, k| {
        let (a, b) = (&ps[j], &ps[k]);
        let dist2 = (a.r - b.r).powi(2) + (a.z - b.z).powi(2);
        Ok(if dist2 >= thr2 { (2.0 + a.r * a.r + b.r * b.r) * a.gamma * b.gamma } else { 0.0 })
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Center {
    pub x: KernelPoint,
    pub leak_plain: f64,
    pub leak_weighted: f64,
}

/// Plain and `(1 + r²)`-weighted mass outside `B(x, ρ)`.
pub fn leakage(c: &Cloud, x: KernelPoint, rho: f64) -> (f64, f64) {
    let mut plain = NeumaierSum::new();
    let mut weighted = NeumaierSum::new();
    for p in &c.particles {
        if (p.r - x.r).hypot(p.z - x.z) > rho {
            plain.add(p.gamma);
            weighted.add((1.0 + p.r * p.r) * p.gamma);
        }
    }
    (plain.value(), weighted.value())
}

/// Candidates are the heaviest particle of each of the 64 heaviest bins of
/// side `ρ/2` on a grid anchored at the barycentre; the winner maximizes the mass in `B(x*, ρ)`, ties going to
/// smaller `|r - r0|`, then smaller `z`, then smaller particle index.
pub fn find_center(c: &Cloud, rho: f64) -> Result<Center, DiagError> {
    if c.is_empty() {
        return Err(DiagError::EmptySelection(TagFilter::All));
    }
    if !(rho > 0.0) {
        return Err(DiagError::Domain { what: "rho", value: rho });
    }
    let side = 0.5 * rho;
    // grid anchored at the barycentre so the candidates move with the cloud
    let (m0, _) = moments(c);
    let (ra, za) = if m0 != 0.0 {
        (
            compensated_sum(c.particles.iter().map(|p| p.gamma * p.r)) / m0,
            compensated_sum(c.particles.iter().map(|p| p.gamma * p.z)) / m0,
        )
    } else {
        (c.particles[0].r, c.particles[0].z)
    };
    let mut bins: HashMap<(i64, i64), (NeumaierSum, usize)> = HashMap::new();
    for (i, p) in c.particles.iter().enumerate() {
        let key = (((p.r - ra) / side).floor() as i64, ((p.z - za) / side).floor() as i64);
        let e = bins.entry(key).or_insert((NeumaierSum::new(), i));
        e.0.add(p.gamma);
        let best = &c.particles[e.1];
        if p.gamma > best.gamma {
            e.1 = i;
        }
    }
    let mut ranked: Vec<(f64, usize)> = bins.into_values().map(|(m, i)| (m.value(), i)).collect();
    // equal bins rank by their particle index, which mirroring preserves
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    ranked.truncate(64);
    let rho2 = rho * rho;
    let scored: Vec<(f64, usize)> = ranked
        .par_iter()
        .map(|&(_, i)| {
            let x = &c.particles[i];
            let m = compensated_sum(
                c.particles.iter().filter(|p| (p.r - x.r).powi(2) + (p.z - x.z).powi(2) <= rho2).map(|p| p.gamma),
            );
            (m, i)
        })
        .collect();
    let r0 = c.r0;
    let best = scored
        .iter()
        .copied()
        .max_by(|a, b| {
            let (pa, pb) = (&c.particles[a.1], &c.particles[b.1]);
            a.0.total_cmp(&b.0)
                .then((pb.r - r0).abs().total_cmp(&(pa.r - r0).abs()))
                .then(pb.z.total_cmp(&pa.z))
                .then(b.1.cmp(&a.1))
        })
        .expect("at least one candidate");
    let p = &c.particles[best.1];
    let x = KernelPoint { r: p.r, z: p.z };
    let (leak_plain, leak_weighted) = leakage(c, x, rho);
    Ok(Center { x, leak_plain, leak_weighted })
}

/// `A = Σ sqrt(1 + ((z_j - V t)/r0)²) r_j² Γ_j` at the cloud clock.
pub fn weighted_axial_moment(c: &Cloud, v: f64) -> f64 {
    weighted_axial_moment_at(c, v, c.time)
}

pub fn weighted_axial_moment_at(c: &Cloud, v: f64, t: f64) -> f64 {
    let shift = v * t;
    compensated_sum(c.particles.iter().map(|p| {
        let y = (p.z - shift) / c.r0;
        (1.0 + y * y).sqrt() * p.r * p.r * p.gamma
    }))
}

/// Γ-weighted mean `z` over the selected particles.
pub fn barycenter_z(c: &Cloud, f: TagFilter) -> Result<f64, DiagError> {
    let m = compensated_sum(selected(c, f).map(|p| p.gamma));
    if !(m > 0.0) {
        return Err(DiagError::EmptySelection(f));
    }
    Ok(compensated_sum(selected(c, f).map(|p| p.gamma * p.z)) / m)
}

pub fn diam_z(c: &Cloud, f: TagFilter) -> Result<f64, DiagError> {
    let mut it = selected(c, f).map(|p| p.z);
    let first = it.next().ok_or(DiagError::EmptySelection(f))?;
    let (lo, hi) = it.fold((first, first), |(lo, hi), z| (lo.min(z), hi.max(z)));
    Ok(hi - lo)
}

/// Minimum over populated equal z-slices of the band of the radial extent of
/// the selected particles.
pub fn filament_thickness(c: &Cloud, f: TagFilter, band: (f64, f64), slices: usize) -> Result<f64, DiagError> {
    let (lo, hi) = band;
    if !(hi >= lo) || slices == 0 {
        return Err(DiagError::Domain { what: "thickness band", value: hi - lo });
    }
    let width = (hi - lo) / slices as f64;
    let mut ext = vec![(f64::INFINITY, f64::NEG_INFINITY); slices];
    for p in selected(c, f) {
        if p.z < lo || p.z > hi {
            continue;
        }
        let k = if width > 0.0 { (((p.z - lo) / width) as usize).min(slices - 1) } else { 0 };
        ext[k].0 = ext[k].0.min(p.r);
        ext[k].1 = ext[k].1.max(p.r);
    }
    ext.iter()
        .filter(|e| e.1 >= e.0)
        .map(|e| e.1 - e.0)
        .min_by(f64::total_cmp)
        .ok_or(DiagError::EmptyBand(lo, hi))
}

/// Leading-order ring speed `μ |log ε| / (4π r0)`.
pub fn kelvin_hicks_speed(mu: f64, r0: f64, eps: f64) -> Result<f64, DiagError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(DiagError::Domain { what: "epsilon", value: eps });
    }
    if !(r0 > 0.0 && r0.is_finite()) {
        return Err(DiagError::Domain { what: "r0", value: r0 });
    }
    if !mu.is_finite() {
        return Err(DiagError::Domain { what: "mu", value: mu });
    }
    Ok(mu * eps.ln().abs() / (4.0 * PI * r0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Largest absolute residual over the fitted samples.
    pub residual: f64,
    pub samples: usize,
}

pub const MIN_FIT_SAMPLES: usize = 8;

/// Least-squares line through `(t, y)` after dropping the first 10% of the
/// time horizon.
pub fn fit_speed(series: &[(f64, f64)]) -> Result<LinearFit, DiagError> {
    let kept = trim_transient(series);
    fit_line(&kept)
}

pub fn trim_transient(series: &[(f64, f64)]) -> Vec<(f64, f64)> {
    if series.is_empty() {
        return Vec::new();
    }
    let t0 = series.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let t1 = series.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    let cut = t0 + 0.1 * (t1 - t0);
    series.iter().copied().filter(|s| s.0 >= cut && s.0.is_finite() && s.1.is_finite()).collect()
}

/// Plain least-squares line (no trimming).
pub fn fit_line(pts: &[(f64, f64)]) -> Result<LinearFit, DiagError> {
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(DiagError::InsufficientSamples { need: MIN_FIT_SAMPLES, have: pts.len() });
    }
    let n = pts.len() as f64;
    let tm = compensated_sum(pts.iter().map(|p| p.0)) / n;
    let ym = compensated_sum(pts.iter().map(|p| p.1)) / n;
    let stt = compensated_sum(pts.iter().map(|p| (p.0 - tm).powi(2)));
    let sty = compensated_sum(pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)));
    if !(stt > 0.0) {
        return Err(DiagError::Domain { what: "time spread", value: stt });
    }
    let slope = sty / stt;
    let intercept = ym - slope * tm;
    let residual = pts.iter().map(|p| (p.1 - intercept - slope * p.0).abs()).fold(0.0, f64::max);
    Ok(LinearFit { slope, intercept, residual, samples: pts.len() })
}

/// Run-level settings for the per-record diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Leakage radius in units of `sqrt(ε) r0`.
    pub rho_factor: f64,
    /// Pair-concentration `R`; `None` means `ε^{-1/2}`.
    pub pair_r: Option<f64>,
    pub thickness_slices: usize,
    /// Skip the O(N²) energies (they are then written as NaN).
    pub skip_energies: bool,
    /// Skip the O(N²) pair-concentration sum (written as NaN).
    pub skip_pair_concentration: bool,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self { rho_factor: 1.0, pair_r: None, thickness_slices: 8, skip_energies: false, skip_pair_concentration: false }
    }
}

impl DiagnosticsConfig {
    pub fn rho(&self, c: &Cloud) -> f64 {
        self.rho_factor * c.epsilon.sqrt() * c.r0
    }

    pub fn pair_r(&self, c: &Cloud) -> f64 {
        self.pair_r.unwrap_or(1.0 / c.epsilon.sqrt())
    }
}

/// One sample of every monitored functional. Tag-dependent fields are NaN
/// when the cloud carries no such tag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub m0: f64,
    pub m2: f64,
    pub energy_e: f64,
    pub energy_e1: f64,
    pub r_star: f64,
    pub z_star: f64,
    pub leak_plain: f64,
    pub leak_weighted: f64,
    pub a_t: f64,
    pub zbar_d: f64,
    pub diam_z_all: f64,
    pub diam_z_tagged: f64,
    pub pair_conc: f64,
    pub v_kh: f64,
    pub thickness_proxy: f64,
}

pub const RECORD_COLUMNS: [&str; 16] = [
    "t",
    "m0",
    "m2",
    "energy_e",
    "energy_e1",
    "r_star",
    "z_star",
    "leak_plain",
    "leak_weighted",
    "a_t",
    "zbar_d",
    "diam_z_all",
    "diam_z_tagged",
    "pair_conc",
    "v_kh",
    "thickness_proxy",
];

impl DiagnosticsRecord {
    pub fn values(&self) -> [f64; 16] {
        [
            self.t,
            self.m0,
            self.m2,
            self.energy_e,
            self.energy_e1,
            self.r_star,
            self.z_star,
            self.leak_plain,
            self.leak_weighted,
            self.a_t,
            self.zbar_d,
            self.diam_z_all,
            self.diam_z_tagged,
            self.pair_conc,
            self.v_kh,
            self.thickness_proxy,
        ]
    }

    pub fn from_values(v: [f64; 16]) -> Self {
        Self {
            t: v[0],
            m0: v[1],
            m2: v[2],
            energy_e: v[3],
            energy_e1: v[4],
            r_star: v[5],
            z_star: v[6],
            leak_plain: v[7],
            leak_weighted: v[8],
            a_t: v[9],
            zbar_d: v[10],
            diam_z_all: v[11],
            diam_z_tagged: v[12],
            pair_conc: v[13],
            v_kh: v[14],
            thickness_proxy: v[15],
        }
    }
}

pub fn record(c: &Cloud, kcfg: &KernelConfig, dcfg: &DiagnosticsConfig) -> Result<DiagnosticsRecord, DiagError> {
    let (m0, m2) = moments(c);
    let (energy_e, energy_e1) = if dcfg.skip_energies { (f64::NAN, f64::NAN) } else { (energy_e(c, kcfg)?, energy_e1(c, kcfg)?) };
    let v_kh = kelvin_hicks_speed(c.mu, c.r0, c.epsilon)?;
    let center = if c.is_empty() {
        Center { x: KernelPoint { r: f64::NAN, z: f64::NAN }, leak_plain: 0.0, leak_weighted: 0.0 }
    } else {
        find_center(c, dcfg.rho(c))?
    };
    let pair_conc = if dcfg.skip_pair_concentration { f64::NAN } else { pair_concentration(c, dcfg.pair_r(c))? };
    let zbar_d = barycenter_z(c, TagFilter::Diffuse).unwrap_or(f64::NAN);
    let diam_z_tagged = diam_z(c, TagFilter::Tagged).unwrap_or(f64::NAN);
    let thickness_proxy = selected(c, TagFilter::Diffuse)
        .map(|p| p.z)
        .fold(None, |acc: Option<(f64, f64)>, z| Some(acc.map_or((z, z), |(lo, hi)| (lo.min(z), hi.max(z)))))
        .map_or(f64::NAN, |band| filament_thickness(c, TagFilter::Diffuse, band, dcfg.thickness_slices).unwrap_or(f64::NAN));
    Ok(DiagnosticsRecord {
        t: c.time,
        m0,
        m2,
        energy_e,
        energy_e1,
        r_star: center.x.r,
        z_star: center.x.z,
        leak_plain: center.leak_plain,
        leak_weighted: center.leak_weighted,
        a_t: weighted_axial_moment(c, v_kh),
        zbar_d,
        diam_z_all: diam_z(c, TagFilter::All).unwrap_or(f64::NAN),
        diam_z_tagged,
        pair_conc,
        v_kh,
        thickness_proxy,
    })
}

/// Empirical constants of one run, written to the JSON sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFits {
    pub v_kh: f64,
    pub speed: Option<LinearFit>,
    /// `slope - V_ε`.
    pub speed_offset: Option<f64>,
    pub a_slope: Option<LinearFit>,
    pub zbar_d_slope: Option<LinearFit>,
    pub diam_z_tagged_slope: Option<LinearFit>,
    /// `max_t |r*(t) - r0| · |log ε|`.
    pub radial_lock_constant: f64,
    /// `max_t leak_weighted(t) · |log ε|`.
    pub leakage_constant: f64,
    /// `max_t pair_conc(t) · log R`.
    pub pair_constant: f64,
    pub m2_drift: f64,
    pub energy_drift: f64,
    /// `max/min` of `thickness_proxy · diam_z_tagged` over the kept window.
    pub thickness_area_ratio: Option<f64>,
}

fn series(recs: &[DiagnosticsRecord], f: impl Fn(&DiagnosticsRecord) -> f64) -> Vec<(f64, f64)> {
    recs.iter().map(|r| (r.t, f(r))).filter(|p| p.1.is_finite()).collect()
}

fn max_finite(it: impl Iterator<Item = f64>) -> f64 {
    it.filter(|v| v.is_finite()).fold(0.0, f64::max)
}

pub fn fit_run(recs: &[DiagnosticsRecord], eps: f64, r0: f64, pair_r: f64) -> RunFits {
    let log_eps = eps.ln().abs();
    let v_kh = recs.first().map_or(f64::NAN, |r| r.v_kh);
    let speed = fit_speed(&series(recs, |r| r.z_star)).ok();
    let first = recs.first();
    let rel = |a: f64, b: f64| if b != 0.0 { ((a - b) / b).abs() } else { (a - b).abs() };
    let m2_drift = first.map_or(0.0, |f| max_finite(recs.iter().map(|r| rel(r.m2, f.m2))));
    let energy_drift = first.map_or(0.0, |f| max_finite(recs.iter().map(|r| rel(r.energy_e, f.energy_e))));
    let kept = trim_transient(&series(recs, |r| r.thickness_proxy * r.diam_z_tagged));
    let thickness_area_ratio = if kept.is_empty() {
        None
    } else {
        let hi = kept.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let lo = kept.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        (lo > 0.0).then_some(hi / lo)
    };
    RunFits {
        v_kh,
        speed,
        speed_offset: speed.map(|s| s.slope - v_kh),
        a_slope: fit_speed(&series(recs, |r| r.a_t)).ok(),
        zbar_d_slope: fit_speed(&series(recs, |r| r.zbar_d)).ok(),
        diam_z_tagged_slope: fit_speed(&series(recs, |r| r.diam_z_tagged)).ok(),
        radial_lock_constant: max_finite(recs.iter().map(|r| (r.r_star - r0).abs() * log_eps)),
        leakage_constant: max_finite(recs.iter().map(|r| r.leak_weighted * log_eps)),
        pair_constant: max_finite(recs.iter().map(|r| r.pair_conc * pair_r.ln())),
        m2_drift,
        energy_drift,
        thickness_area_ratio,
    }
}
