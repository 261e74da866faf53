#![allow(dead_code)]

use std::path::PathBuf;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures").join(name)
}

/// Numeric CSV rows of a fixture, skipping `#` comments and the header.
pub fn read_fixture(name: &str) -> Vec<Vec<f64>> {
    let text = std::fs::read_to_string(fixture_path(name)).expect("fixture readable");
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .skip(1)
        .map(|l| l.split(',').map(|x| x.trim().parse::<f64>().expect("numeric fixture cell")).collect())
        .collect()
}

pub fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs()
    }
}

use ringlab::cloud::{generate_blob, BuiltinProfile, Cloud, ProfileSpec};
use ringlab::kernels::KernelPoint;

/// Standard blob at `(1, 0)` with `h = eps/8`.
pub fn blob(eps: f64) -> Cloud {
    let prof = BuiltinProfile::new(ProfileSpec::default()).unwrap();
    generate_blob(&prof, eps, KernelPoint::new(1.0, 0.0).unwrap(), 1.0, eps / 8.0).unwrap()
}

/// Blob with a deterministic sub-cell jitter, so no two particles share a
/// radius or mirror each other.
pub fn generic_blob(eps: f64) -> Cloud {
    let mut c = blob(eps);
    let h = eps / 8.0;
    let mut x: u64 = 0x2545_f491_4f6c_dd1d;
    for p in &mut c.particles {
        for v in [&mut p.r, &mut p.z] {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            *v += 0.25 * h * ((x >> 11) as f64 / (1u64 << 53) as f64 - 0.5);
        }
    }
    c
}
