//! Scalar kernels `F`, `F1`, `F2` of the axisymmetric Biot–Savart law and the
//! assembled half-plane kernel `K(x, x')`.
//!
//! All three kernels are complete elliptic integrals in disguise. With
//! `σ` the squared similarity variable, `m = 4/(σ+4)` and `m1 = 1 - m`:
//!
//! ```text
//! F(σ)  = [(σ+2) K(m) - (σ+4) E(m)] / sqrt(σ+4)
//! F1(s) = [(σ+2) E(m)/σ - K(m)]     / sqrt(σ+4),   σ = s²
//! F2(s) = [K(m) - E(m)]             / sqrt(σ+4),   σ = s²
//! ```
//!
//! Evaluation is split into three branches by the argument:
//! a logarithmic series around `m1 = 0` below `s_lo`, the arithmetic–geometric
//! mean in between, and a binomial series in `2/(σ+2)` above `s_hi` (where the
//! elliptic combinations cancel catastrophically). A fourth, slower path
//! integrates the defining integrals directly by adaptive Gauss–Kronrod.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("{what} out of domain: {value}")]
    Domain { what: &'static str, value: f64 },
    #[error("kernel singular: coincident points with zero regularization")]
    Singular,
    #[error("adaptive quadrature did not converge after {subdivisions} subdivisions")]
    NonConvergence { subdivisions: usize },
    #[error("invalid kernel configuration: {0}")]
    Config(String),
}

/// A point of the meridian half-plane `r > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelPoint {
    pub r: f64,
    pub z: f64,
}

impl KernelPoint {
    pub fn new(r: f64, z: f64) -> Result<Self, KernelError> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(KernelError::Domain { what: "radial coordinate", value: r });
        }
        if !z.is_finite() {
            return Err(KernelError::Domain { what: "axial coordinate", value: z });
        }
        Ok(Self { r, z })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KernelMethod {
    /// Series / AGM / far-field series, selected by `s_lo` and `s_hi`.
    #[default]
    Branched,
    /// Adaptive quadrature of the defining integrals at every argument.
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    pub s_lo: f64,
    pub s_hi: f64,
    pub quad_tol: f64,
    /// Blob regularization length.
    pub delta: f64,
    pub method: KernelMethod,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self { s_lo: 1e-3, s_hi: 1e2, quad_tol: 1e-10, delta: 0.0, method: KernelMethod::Branched }
    }
}

impl KernelConfig {
    pub fn with_delta(delta: f64) -> Self {
        Self { delta, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        if !(self.s_lo > 0.0 && self.s_lo < self.s_hi && self.s_hi.is_finite()) {
            return Err(KernelError::Config(format!(
                "need 0 < s_lo < s_hi, got s_lo={} s_hi={}",
                self.s_lo, self.s_hi
            )));
        }
        if !(self.quad_tol > 0.0 && self.quad_tol <= 1e-6) {
            return Err(KernelError::Config(format!("quad_tol must lie in (0, 1e-6], got {}", self.quad_tol)));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(KernelError::Config(format!("delta must be finite and >= 0, got {}", self.delta)));
        }
        Ok(())
    }
}

/// Which evaluation path produced a kernel value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    SmallArgument,
    Elliptic,
    FarField,
    Quadrature,
}

impl Branch {
    pub fn name(self) -> &'static str {
        match self {
            Branch::SmallArgument => "small",
            Branch::Elliptic => "elliptic",
            Branch::FarField => "far",
            Branch::Quadrature => "quadrature",
        }
    }
}

pub fn branch_for(s: f64, cfg: &KernelConfig) -> Branch {
    match cfg.method {
        KernelMethod::Quadrature => Branch::Quadrature,
        KernelMethod::Branched if s < cfg.s_lo => Branch::SmallArgument,
        KernelMethod::Branched if s > cfg.s_hi => Branch::FarField,
        KernelMethod::Branched => Branch::Elliptic,
    }
}

/// Kernel value `K = (K^r, K^z)`, units of 1/length.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KernelValue {
    pub k_r: f64,
    pub k_z: f64,
}

fn check_arg(s: f64, what: &'static str) -> Result<(), KernelError> {
    if s > 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(KernelError::Domain { what, value: s })
    }
}

/// `F(s) = ∫₀^π cos a / (s + 2 - 2 cos a)^{1/2} da`. Note the argument enters
/// linearly; energies call this with the squared similarity variable.
#[allow(non_snake_case)]
pub fn eval_F(s: f64, cfg: &KernelConfig) -> Result<f64, KernelError> {
    check_arg(s, "F argument")?;
    let sigma = s;
    Ok(match branch_for(s, cfg) {
        Branch::SmallArgument => {
            let (k, e) = ke_log_series(sigma);
            f_from_ke(sigma, k, e)
        }
        Branch::Elliptic if sigma >= SERIES_SIGMA => far_series(sigma).0,
        Branch::Elliptic => {
            let (k, ks) = ke_agm(sigma);
            k * ((sigma + 4.0) * ks - 2.0) / (sigma + 4.0).sqrt()
        }
        Branch::FarField => far_series(sigma).0,
        Branch::Quadrature => gk_integrate(|a| integrand_f(a, sigma), cfg.quad_tol)?,
    })
}

/// `F1(s) = ∫₀^π cos a / (s² + 2 - 2 cos a)^{3/2} da`.
#[allow(non_snake_case)]
pub fn eval_F1(s: f64, cfg: &KernelConfig) -> Result<f64, KernelError> {
    check_arg(s, "F1 argument")?;
    match branch_for(s, cfg) {
        Branch::Quadrature => gk_integrate(|a| integrand_f1(a, s * s), cfg.quad_tol),
        b => Ok(f1_f2_branch(s * s, b).0),
    }
}

/// `F2(s) = ∫₀^π (1 - cos a) / (s² + 2 - 2 cos a)^{3/2} da`, strictly positive.
#[allow(non_snake_case)]
pub fn eval_F2(s: f64, cfg: &KernelConfig) -> Result<f64, KernelError> {
    check_arg(s, "F2 argument")?;
    match branch_for(s, cfg) {
        Branch::Quadrature => gk_integrate(|a| integrand_f2(a, s * s), cfg.quad_tol),
        b => Ok(f1_f2_branch(s * s, b).1),
    }
}

/// `(F1(s), F2(s))` from `σ = s²`, sharing the elliptic work.
pub fn f1_f2(sigma: f64, cfg: &KernelConfig) -> Result<(f64, f64), KernelError> {
    if !(sigma > 0.0) {
        return Err(KernelError::Domain { what: "squared similarity variable", value: sigma });
    }
    let s = sigma.sqrt();
    match branch_for(s, cfg) {
        Branch::Quadrature => Ok((
            gk_integrate(|a| integrand_f1(a, sigma), cfg.quad_tol)?,
            gk_integrate(|a| integrand_f2(a, sigma), cfg.quad_tol)?,
        )),
        b => Ok(f1_f2_branch(sigma, b)),
    }
}

fn f1_f2_branch(sigma: f64, branch: Branch) -> (f64, f64) {
    match branch {
        Branch::SmallArgument => {
            let (k, e) = ke_log_series(sigma);
            let root = (sigma + 4.0).sqrt();
            (((sigma + 2.0) * e / sigma - k) / root, (k - e) / root)
        }
        Branch::Elliptic if sigma >= SERIES_SIGMA => {
            let (_, f1, f2) = far_series(sigma);
            (f1, f2)
        }
        Branch::Elliptic => {
            let (k, ks) = ke_agm(sigma);
            let root = (sigma + 4.0).sqrt();
            (k * (2.0 - (sigma + 2.0) * ks) / (sigma * root), k * ks / root)
        }
        Branch::FarField => {
            let (_, f1, f2) = far_series(sigma);
            (f1, f2)
        }
        Branch::Quadrature => unreachable!("quadrature handled by caller"),
    }
}

fn f_from_ke(sigma: f64, k: f64, e: f64) -> f64 {
    ((sigma + 2.0) * k - (sigma + 4.0) * e) / (sigma + 4.0).sqrt()
}

/// `K(m)` and `E(m)` near `m = 1`, expanded in `m1 = σ/(σ+4)` with
/// `L = ln(4/sqrt(m1))`, through third order.
fn ke_log_series(sigma: f64) -> (f64, f64) {
    let m1 = sigma / (sigma + 4.0);
    let l = 0.5 * (16.0 / m1).ln();
    let m2 = m1 * m1;
    let m3 = m2 * m1;
    let k = l + 0.25 * m1 * (l - 1.0) + 9.0 / 64.0 * m2 * (l - 7.0 / 6.0) + 25.0 / 256.0 * m3 * (l - 37.0 / 30.0);
    let e = 1.0 + 0.5 * m1 * (l - 0.5) + 3.0 / 16.0 * m2 * (l - 13.0 / 12.0) + 15.0 / 128.0 * m3 * (l - 6.0 / 5.0);
    (k, e)
}

/// Above this σ the elliptic combinations lose digits to `K - E` style
/// cancellation (m = 4/(σ+4) ≤ 1/2), while the binomial series in
/// q = 2/(σ+2) ≤ 1/3 needs about 35 terms and cancels nothing.
const SERIES_SIGMA: f64 = 4.0;

/// Returns `(K(m), S)` with `E(m) = K(m) (1 - S)`, so `K - E = K S` without
/// cancellation.
fn ke_agm(sigma: f64) -> (f64, f64) {
    let m = 4.0 / (sigma + 4.0);
    let mut a = 1.0_f64;
    let mut b = (sigma / (sigma + 4.0)).sqrt();
    let mut sum = 0.5 * m;
    let mut pow = 0.5;
    for _ in 0..40 {
        let c = 0.5 * (a - b);
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
        pow *= 2.0;
        let term = pow * c * c;
        sum += term;
        if term <= 1e-18 * sum {
            break;
        }
    }
    (PI / (2.0 * a), sum)
}

/// Binomial series of `(c - 2cos a)^{-p}` with `c = σ + 2`; returns
/// `(F(σ), F1, F2)` where F1, F2 are taken at `s² = σ`.
fn far_series(sigma: f64) -> (f64, f64, f64) {
    let c = sigma + 2.0;
    let q = 2.0 / c;
    // t_n(p) = (p)_n / n! q^n ; I_n = ∫₀^π cos^n a da
    let mut t_half = 1.0; // p = 1/2
    let mut t_3h = 1.0; // p = 3/2
    let mut i_n = PI; // I_0
    let mut f = 0.0;
    let mut f1 = 0.0;
    let mut p_even = PI; // n = 0 term of Σ_even t_n I_n for p = 3/2
    let mut n = 1usize;
    loop {
        // odd n: pairs with I_{n+1}
        t_half *= (0.5 + (n - 1) as f64) / n as f64 * q;
        t_3h *= (1.5 + (n - 1) as f64) / n as f64 * q;
        i_n *= n as f64 / (n + 1) as f64; // I_{n+1} from I_{n-1}
        let df = t_half * i_n;
        let df1 = t_3h * i_n;
        f += df;
        f1 += df1;
        // even n + 1
        let n1 = n + 1;
        t_half *= (0.5 + (n1 - 1) as f64) / n1 as f64 * q;
        t_3h *= (1.5 + (n1 - 1) as f64) / n1 as f64 * q;
        let dp = t_3h * i_n;
        p_even += dp;
        if df1.abs() <= 1e-17 * f1.abs() && df.abs() <= 1e-17 * f.abs() && dp <= 1e-17 * p_even {
            break;
        }
        n += 2;
        if n > 4000 {
            break;
        }
    }
    let c12 = c.sqrt();
    let c32 = c * c12;
    (f / c12, f1 / c32, (p_even - f1) / c32)
}

fn integrand_f(a: f64, sigma: f64) -> f64 {
    let h = (0.5 * a).sin();
    a.cos() / (sigma + 4.0 * h * h).sqrt()
}

fn integrand_f1(a: f64, sigma: f64) -> f64 {
    let h = (0.5 * a).sin();
    let d = sigma + 4.0 * h * h;
    a.cos() / (d * d.sqrt())
}

fn integrand_f2(a: f64, sigma: f64) -> f64 {
    let h = (0.5 * a).sin();
    let d = sigma + 4.0 * h * h;
    2.0 * h * h / (d * d.sqrt())
}

const GK_BUDGET: usize = 4000;

// Gauss–Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Globally adaptive Gauss–Kronrod on `[0, π]`, bisecting the interval with
/// the largest error estimate until the total falls below `rel_tol · |I|`.
fn gk_integrate(f: impl Fn(f64) -> f64, rel_tol: f64) -> Result<f64, KernelError> {
    let mut parts: Vec<(f64, f64, f64, f64)> = Vec::with_capacity(64);
    // Pre-split geometrically towards a = 0 where the integrand peaks.
    let mut edges = vec![0.0];
    let mut x = 1e-8;
    while x < 1.0 {
        edges.push(x);
        x *= 8.0;
    }
    edges.push(1.0);
    edges.push(PI);
    for w in edges.windows(2) {
        let (v, e) = gk15(&f, w[0], w[1]);
        parts.push((w[0], w[1], v, e));
    }
    for it in 0..GK_BUDGET {
        let total: f64 = parts.iter().map(|p| p.2).sum();
        let err: f64 = parts.iter().map(|p| p.3).sum();
        if err <= rel_tol * total.abs() || err < 1e-300 {
            return Ok(total);
        }
        let (idx, _) = parts
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, p)| if p.3 > acc.1 { (i, p.3) } else { acc });
        let (a, b, _, _) = parts.swap_remove(idx);
        let m = 0.5 * (a + b);
        if !(m > a && m < b) {
            return Err(KernelError::NonConvergence { subdivisions: it });
        }
        let (v1, e1) = gk15(&f, a, m);
        let (v2, e2) = gk15(&f, m, b);
        parts.push((a, m, v1, e1));
        parts.push((m, b, v2, e2));
    }
    Err(KernelError::NonConvergence { subdivisions: GK_BUDGET })
}

const INV_2PI: f64 = 0.5 / PI;

/// Kernel from raw coordinates with the squared regularization length.
/// Hot path of every velocity sum.
#[inline]
pub(crate) fn kernel_raw(
    r: f64,
    z: f64,
    rs: f64,
    zs: f64,
    delta2: f64,
    cfg: &KernelConfig,
) -> Result<(f64, f64), KernelError> {
    let dr = r - rs;
    let dz = z - zs;
    let d2 = dr * dr + dz * dz + delta2;
    if d2 == 0.0 {
        return Err(KernelError::Singular);
    }
    let rr = r * rs;
    let (f1, f2) = f1_f2(d2 / rr, cfg)?;
    let root = rr.sqrt();
    let inv = INV_2PI / (r * root);
    let k_r = f1 * dz * inv;
    let k_z = (f2 * rs - f1 * dr) * inv;
    Ok((k_r, k_z))
}

/// `K(x, x') = F1(s) (x-x')^⊥ / (2π r sqrt(rr')) + F2(s) sqrt(r'/r) / (2π r) e_z`
/// with `(x-x')^⊥ = (z-z', -(r-r'))` and `s² = (|x-x'|² + δ²)/(rr')`.
pub fn biot_savart_kernel(x: KernelPoint, xs: KernelPoint, cfg: &KernelConfig) -> Result<KernelValue, KernelError> {
    if !(x.r > 0.0) {
        return Err(KernelError::Domain { what: "target radius", value: x.r });
    }
    if !(xs.r > 0.0) {
        return Err(KernelError::Domain { what: "source radius", value: xs.r });
    }
    let (k_r, k_z) = kernel_raw(x.r, x.z, xs.r, xs.z, cfg.delta * cfg.delta, cfg)?;
    Ok(KernelValue { k_r, k_z })
}
