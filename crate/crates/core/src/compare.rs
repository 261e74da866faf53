//! Comparison of two diagnostics series under an exact symmetry of the
//! equation: plain identity, mirror with time reversal, or scaling.

use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::diagnostics::{DiagnosticsRecord, RECORD_COLUMNS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompareError {
    #[error("series lengths differ: {0} vs {1}")]
    Length(usize, usize),
    #[error("sample {index}: transformed time {a} does not match {b}")]
    Cadence { index: usize, a: f64, b: f64 },
    #[error("input {0} carries no config digest")]
    MissingDigest(&'static str),
    #[error("bad compare mode '{0}' (plain | mirror | scaling:LAMBDA,GAMMA)")]
    Mode(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CompareMode {
    Plain,
    /// `(r, z, t) -> (r, -z, -t)`.
    Mirror,
    /// `w -> γ w(λ x, γ t)`.
    Scaling { lambda: f64, gamma: f64 },
}

impl FromStr for CompareMode {
    type Err = CompareError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "plain" => Ok(CompareMode::Plain),
            "mirror" => Ok(CompareMode::Mirror),
            _ => {
                let bad = || CompareError::Mode(s.to_string());
                let rest = s.strip_prefix("scaling:").ok_or_else(bad)?;
                let (l, g) = rest.split_once(',').ok_or_else(bad)?;
                let lambda: f64 = l.trim().parse().map_err(|_| bad())?;
                let gamma: f64 = g.trim().parse().map_err(|_| bad())?;
                if !(lambda > 0.0 && lambda.is_finite() && gamma > 0.0 && gamma.is_finite()) {
                    return Err(bad());
                }
                Ok(CompareMode::Scaling { lambda, gamma })
            }
        }
    }
}

/// Per-column factor mapping run A's value to the transformed run; `None`
/// marks a column with no exact transformation law (e.g. the inhomogeneous
/// `(1 + r²)` weight under scaling).
fn column_maps(mode: CompareMode) -> [Option<f64>; 16] {
    match mode {
        CompareMode::Plain => [Some(1.0); 16],
        CompareMode::Mirror => {
            let mut m = [Some(1.0); 16];
            m[0] = Some(-1.0); // t
            m[6] = Some(-1.0); // z_star
            m[10] = Some(-1.0); // zbar_d
            m
        }
        CompareMode::Scaling { lambda: l, gamma: g } => [
            Some(1.0 / g),                  // t
            Some(g / (l * l)),              // m0
            Some(g / l.powi(4)),            // m2
            Some(g * g / l.powi(5)),        // energy_e
            Some(g * g / l.powi(5)),        // energy_e1
            Some(1.0 / l),                  // r_star
            Some(1.0 / l),                  // z_star
            Some(g / (l * l)),              // leak_plain
            None,                           // leak_weighted
            Some(g / l.powi(4)),            // a_t
            Some(1.0 / l),                  // zbar_d
            Some(1.0 / l),                  // diam_z_all
            Some(1.0 / l),                  // diam_z_tagged
            None,                           // pair_conc
            Some(g / l),                    // v_kh
            Some(1.0 / l),                  // thickness_proxy
        ],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColumnDeviation {
    pub column: &'static str,
    pub comparable: bool,
    pub max_abs: f64,
    /// `max |a' - b| / max |b|` over the series.
    pub max_rel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub samples: usize,
    pub columns: Vec<ColumnDeviation>,
}

impl CompareReport {
    pub fn column(&self, name: &str) -> Option<&ColumnDeviation> {
        self.columns.iter().find(|c| c.column == name)
    }

    pub fn max_rel(&self, names: &[&str]) -> f64 {
        names.iter().filter_map(|n| self.column(n)).map(|c| c.max_rel).fold(0.0, f64::max)
    }
}

pub fn compare_series(a: &[DiagnosticsRecord], b: &[DiagnosticsRecord], mode: CompareMode) -> Result<CompareReport, CompareError> {
    if a.len() != b.len() {
        return Err(CompareError::Length(a.len(), b.len()));
    }
    let maps = column_maps(mode);
    let t_scale = maps[0].expect("time always maps");
    for (i, (ra, rb)) in a.iter().zip(b).enumerate() {
        let ta = ra.t * t_scale;
        if (ta - rb.t).abs() > 1e-9 * rb.t.abs().max(ta.abs()).max(1e-300) {
            return Err(CompareError::Cadence { index: i, a: ta, b: rb.t });
        }
    }
    let mut columns = Vec::with_capacity(16);
    for (k, name) in RECORD_COLUMNS.iter().enumerate() {
        let Some(f) = maps[k] else {
            columns.push(ColumnDeviation { column: name, comparable: false, max_abs: f64::NAN, max_rel: f64::NAN });
            continue;
        };
        let mut max_abs: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for (ra, rb) in a.iter().zip(b) {
            let (va, vb) = (ra.values()[k] * f, rb.values()[k]);
            if va.is_nan() && vb.is_nan() {
                continue;
            }
            max_abs = max_abs.max((va - vb).abs());
            scale = scale.max(vb.abs());
        }
        let max_rel = if scale > 0.0 { max_abs / scale } else { max_abs };
        columns.push(ColumnDeviation { column: name, comparable: true, max_abs, max_rel });
    }
    Ok(CompareReport { samples: a.len(), columns })
}
