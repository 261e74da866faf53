//! Independent reference computations for cross-checking.
//!
//! Nothing here calls into [`crate::kernels`]: the kernel integrals are
//! integrated by adaptive Simpson under a `sinh` substitution, and the
//! reference velocity sum rebuilds the kernel from Carlson's symmetric
//! elliptic integrals (near field) and the periodic trapezoid rule (far
//! field), accumulated in double-double arithmetic.

use std::f64::consts::PI;

use thiserror::Error;

use crate::cloud::Cloud;
use crate::kernels::KernelPoint;
use crate::velocity::{Targets, VelocitySample};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("argument out of domain: {0}")]
    Domain(f64),
    #[error("quadrature budget of {0} subdivisions exceeded")]
    Budget(usize),
    #[error("coincident target and source {source_index} with zero regularization")]
    Singular { source_index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub abs_err_estimate: f64,
    pub subdivisions: usize,
}

const SIMPSON_BUDGET: usize = 2_000_000;

/// Adaptive Simpson on `a = β sinh(v)`, `v ∈ [0, asinh(π/β)]`, where `β` is
/// the width of the peak at `a = 0`. Tolerance `1e-12 · ∫|g|`, so tiny
/// integrals keep their relative accuracy.
fn quad_peaked(f: impl Fn(f64) -> f64, beta: f64) -> Result<QuadResult, OracleError> {
    let vmax = (PI / beta).asinh();
    let g = |v: f64| {
        let a = (beta * v.sinh()).min(PI);
        f(a) * beta * v.cosh()
    };
    // coarse pass fixes the absolute target
    let n0 = 64;
    let h0 = vmax / n0 as f64;
    let mut coarse = 0.0;
    for i in 0..n0 {
        let a = i as f64 * h0;
        let b = a + h0;
        coarse += h0 / 6.0 * (g(a).abs() + 4.0 * g(0.5 * (a + b)).abs() + g(b).abs());
    }
    let tol = 1e-12 * coarse.max(f64::MIN_POSITIVE);
    let mut subdivisions = 0usize;
    let mut total = 0.0;
    let mut err = 0.0;
    // fixed left-to-right order: explicit stack
    let mut stack: Vec<(f64, f64, f64, f64, f64, f64, f64, u32)> = Vec::new();
    for i in (0..n0).rev() {
        let a = i as f64 * h0;
        let b = if i + 1 == n0 { vmax } else { a + h0 };
        let (fa, fm, fb) = (g(a), g(0.5 * (a + b)), g(b));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        stack.push((a, b, fa, fm, fb, whole, tol / n0 as f64, 0));
    }
    while let Some((a, b, fa, fm, fb, whole, eps, depth)) = stack.pop() {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = g(lm);
        let frm = g(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        subdivisions += 1;
        if subdivisions > SIMPSON_BUDGET {
            return Err(OracleError::Budget(SIMPSON_BUDGET));
        }
        if delta.abs() <= 15.0 * eps || depth >= 60 {
            total += left + right + delta / 15.0;
            err += delta.abs() / 15.0;
        } else {
            stack.push((m, b, fm, frm, fb, right, 0.5 * eps, depth + 1));
            stack.push((a, m, fa, flm, fm, left, 0.5 * eps, depth + 1));
        }
    }
    Ok(QuadResult { value: total, abs_err_estimate: err, subdivisions })
}

fn check(s: f64) -> Result<(), OracleError> {
    if s > 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(OracleError::Domain(s))
    }
}

#[allow(non_snake_case)]
pub fn quad_F(s: f64) -> Result<QuadResult, OracleError> {
    check(s)?;
    quad_peaked(
        |a| {
            let h = (0.5 * a).sin();
            let d = s + 4.0 * h * h;
            if s >= 1.0 {
                // ∫cos = 0: subtract 1/√s, written without cancellation
                let (rd, rs) = (d.sqrt(), s.sqrt());
                -a.cos() * 4.0 * h * h / (rd * rs * (rd + rs))
            } else {
                a.cos() / d.sqrt()
            }
        },
        s.sqrt().min(1.0),
    )
}

#[allow(non_snake_case)]
pub fn quad_F1(s: f64) -> Result<QuadResult, OracleError> {
    check(s)?;
    let sig = s * s;
    quad_peaked(
        |a| {
            let h = (0.5 * a).sin();
            let d = sig + 4.0 * h * h;
            if sig >= 1.0 {
                // ∫cos = 0: subtract σ^{-3/2}; σ³ - d³ = -4h²(σ² + σd + d²)
                let (d32, s32) = (d * d.sqrt(), sig * sig.sqrt());
                -a.cos() * 4.0 * h * h * (sig * sig + sig * d + d * d) / (d32 * s32 * (d32 + s32))
            } else {
                a.cos() / (d * d.sqrt())
            }
        },
        s.min(1.0),
    )
}

#[allow(non_snake_case)]
pub fn quad_F2(s: f64) -> Result<QuadResult, OracleError> {
    check(s)?;
    let sig = s * s;
    quad_peaked(
        |a| {
            let h = (0.5 * a).sin();
            let d = sig + 4.0 * h * h;
            2.0 * h * h / (d * d.sqrt())
        },
        s.min(1.0),
    )
}

fn check_small(s: f64) -> Result<(), OracleError> {
    if s > 0.0 && s <= 1.0 {
        Ok(())
    } else {
        Err(OracleError::Domain(s))
    }
}

/// `(1/2) log(1/s) + log 8 - 2`
#[allow(non_snake_case)]
pub fn asymptotic_F(s: f64) -> Result<f64, OracleError> {
    check_small(s)?;
    Ok(0.5 * (1.0 / s).ln() + 8f64.ln() - 2.0)
}

/// `1/s² - (3/8) log(1/s)`
#[allow(non_snake_case)]
pub fn asymptotic_F1(s: f64) -> Result<f64, OracleError> {
    check_small(s)?;
    Ok(1.0 / (s * s) - 0.375 * (1.0 / s).ln())
}

/// `(1/2) log(1/s) + (3 log 2 - 1)/2`
#[allow(non_snake_case)]
pub fn asymptotic_F2(s: f64) -> Result<f64, OracleError> {
    check_small(s)?;
    Ok(0.5 * (1.0 / s).ln() + (3.0 * 2f64.ln() - 1.0) / 2.0)
}

// ---------------------------------------------------------------------------
// Carlson symmetric integrals (duplication algorithm).

fn carlson_rf(x: f64, y: f64, z: f64) -> f64 {
    let (mut x, mut y, mut z) = (x, y, z);
    for _ in 0..100 {
        let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
        let lam = sx * sy + sx * sz + sy * sz;
        x = 0.25 * (x + lam);
        y = 0.25 * (y + lam);
        z = 0.25 * (z + lam);
        let a = (x + y + z) / 3.0;
        let dx = 1.0 - x / a;
        let dy = 1.0 - y / a;
        let dz = 1.0 - z / a;
        if dx.abs().max(dy.abs()).max(dz.abs()) < 1e-4 {
            let e2 = dx * dy - dz * dz;
            let e3 = dx * dy * dz;
            return (1.0 - e2 / 10.0 + e3 / 14.0 + e2 * e2 / 24.0 - 3.0 * e2 * e3 / 44.0) / a.sqrt();
        }
    }
    f64::NAN
}

fn carlson_rd(x: f64, y: f64, z: f64) -> f64 {
    let (mut x, mut y, mut z) = (x, y, z);
    let mut sum = 0.0;
    let mut fac = 1.0;
    for _ in 0..100 {
        let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
        let lam = sx * sy + sx * sz + sy * sz;
        sum += fac / (sz * (z + lam));
        fac *= 0.25;
        x = 0.25 * (x + lam);
        y = 0.25 * (y + lam);
        z = 0.25 * (z + lam);
        let a = (x + y + 3.0 * z) / 5.0;
        let dx = 1.0 - x / a;
        let dy = 1.0 - y / a;
        let dz = 1.0 - z / a;
        if dx.abs().max(dy.abs()).max(dz.abs()) < 1e-4 {
            let ea = dx * dy;
            let eb = dz * dz;
            let ec = ea - eb;
            let ed = ea - 6.0 * eb;
            let ee = ed + ec + ec;
            let (c1, c2, c3, c4) = (3.0 / 14.0, 1.0 / 6.0, 9.0 / 22.0, 3.0 / 26.0);
            let (c5, c6) = (0.25 * c3, 1.5 * c4);
            let s = ed * (-c1 + c5 * ed - c6 * dz * ee) + dz * (c2 * ee + dz * (-c3 * ec + dz * c4 * ea));
            return 3.0 * sum + fac * (1.0 + s) / (a * a.sqrt());
        }
    }
    f64::NAN
}

/// Reference `(F1, F2)` at `σ = s²`.
pub fn reference_f1_f2(sigma: f64) -> (f64, f64) {
    if sigma < 1.0 {
        let m1 = sigma / (sigma + 4.0);
        let m = 4.0 / (sigma + 4.0);
        let k = carlson_rf(0.0, m1, 1.0);
        let k_minus_e = m / 3.0 * carlson_rd(0.0, m1, 1.0);
        let e = k - k_minus_e;
        let root = (sigma + 4.0).sqrt();
        (((sigma + 2.0) * e / sigma - k) / root, k_minus_e / root)
    } else {
        // even, 2π-periodic, analytic integrand: trapezoid converges geometrically
        let n = 48;
        let h = PI / n as f64;
        let mut f1 = 0.0;
        let mut f2 = 0.0;
        for i in 0..=n {
            let a = i as f64 * h;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            let hs = (0.5 * a).sin();
            let d = sigma + 4.0 * hs * hs;
            let d32 = d * d.sqrt();
            f1 += w * a.cos() / d32;
            f2 += w * 2.0 * hs * hs / d32;
        }
        (f1 * h, f2 * h)
    }
}

/// Double-double accumulator (TwoSum with a running low word).
#[derive(Clone, Copy, Default)]
struct DoubleDouble {
    hi: f64,
    lo: f64,
}

impl DoubleDouble {
    fn add(&mut self, x: f64) {
        let s = self.hi + x;
        let bp = s - self.hi;
        let e = (self.hi - (s - bp)) + (x - bp);
        self.hi = s;
        self.lo += e;
        let t = self.hi + self.lo;
        self.lo -= t - self.hi;
        self.hi = t;
    }
    fn value(self) -> f64 {
        self.hi + self.lo
    }
}

/// Direct velocity sum with the oracle kernel and double-double accumulation.
/// Same target semantics as [`crate::velocity::velocity_direct`].
pub fn direct_velocity_reference(cloud: &Cloud, targets: &Targets, delta: f64) -> Result<Vec<VelocitySample>, OracleError> {
    let pts: Vec<(KernelPoint, Option<usize>)> = match targets {
        Targets::Particles => cloud.particles.iter().enumerate().map(|(i, p)| (KernelPoint { r: p.r, z: p.z }, Some(i))).collect(),
        Targets::Points(p) => p.iter().map(|&x| (x, None)).collect(),
        Targets::Subset(idx) => idx.iter().map(|&i| (cloud.particles[i].point(), Some(i))).collect(),
    };
    let d2 = delta * delta;
    let mut out = Vec::with_capacity(pts.len());
    for (x, own) in pts {
        let mut ur = DoubleDouble::default();
        let mut uz = DoubleDouble::default();
        for (j, p) in cloud.particles.iter().enumerate() {
            if own == Some(j) {
                continue;
            }
            let dr = x.r - p.r;
            let dz = x.z - p.z;
            let dist2 = dr * dr + dz * dz + d2;
            if dist2 == 0.0 {
                return Err(OracleError::Singular { source_index: j });
            }
            let sigma = dist2 / (x.r * p.r);
            let (f1, f2) = reference_f1_f2(sigma);
            let rr = (x.r * p.r).sqrt();
            let c = p.gamma / (2.0 * PI * x.r * rr);
            ur.add(f1 * dz * c);
            uz.add(-f1 * dr * c);
            // (1/2π) F2 (1/r) sqrt(r'/r), spelled as printed
            uz.add(f2 * p.gamma / (2.0 * PI * x.r) * (p.r / x.r).sqrt());
        }
        out.push(VelocitySample { u_r: ur.value(), u_z: uz.value() });
    }
    Ok(out)
}
