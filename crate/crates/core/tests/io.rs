use std::io::Cursor;

use proptest::prelude::*;
use ringlab::cloud::{Cloud, Particle, Tag};
use ringlab::diagnostics::DiagnosticsRecord;
use ringlab::io::{
    read_checkpoint, read_cloud, read_diagnostics_csv, write_checkpoint, write_cloud, write_diagnostics_csv, ArtifactMeta,
};

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO,
        -1e3f64..1e3,
    ]
}

fn tag() -> impl Strategy<Value = Tag> {
    prop_oneof![Just(Tag::CoreM), Just(Tag::DiffuseD), Just(Tag::Untagged)]
}

fn positive() -> impl Strategy<Value = f64> {
    prop_oneof![prop::num::f64::POSITIVE | prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL, 1e-3f64..1e3]
}

fn unit() -> impl Strategy<Value = f64> {
    prop_oneof![prop::num::f64::POSITIVE.prop_filter("below one", |x| *x < 1.0), 1e-6f64..0.999]
}

fn cloud() -> impl Strategy<Value = Cloud> {
    (prop::collection::vec((positive(), finite(), positive(), finite(), tag()), 0..20), unit(), finite(), positive(), finite())
        .prop_map(|(v, eps, mu, r0, t)| {
            let ps = v.into_iter().map(|(r, z, gamma, xi0, tag)| Particle { r, z, gamma, xi0, tag }).collect();
            let mut c = Cloud::new(ps, eps, mu, r0);
            c.time = t;
            c
        })
}

fn bits(c: &Cloud) -> Vec<u64> {
    let mut v = vec![c.epsilon.to_bits(), c.mu.to_bits(), c.r0.to_bits(), c.time.to_bits()];
    for p in &c.particles {
        v.extend([p.r.to_bits(), p.z.to_bits(), p.gamma.to_bits(), p.xi0.to_bits()]);
    }
    v
}

proptest! {
    #[test]
    fn cloud_roundtrips_bitwise(c in cloud()) {
        let mut buf = Vec::new();
        write_cloud(&mut buf, &c, &ArtifactMeta::new("abc")).unwrap();
        let (back, head) = read_cloud(Cursor::new(buf)).unwrap();
        prop_assert_eq!(bits(&back), bits(&c));
        prop_assert_eq!(back.particles.iter().map(|p| p.tag).collect::<Vec<_>>(), c.particles.iter().map(|p| p.tag).collect::<Vec<_>>());
        prop_assert_eq!(head.config_digest.as_deref(), Some("abc"));
    }

    #[test]
    fn checkpoint_roundtrips_bitwise(c in cloud(), step in any::<u64>()) {
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, step, &c, "d1").unwrap();
        let ck = read_checkpoint(Cursor::new(buf)).unwrap();
        prop_assert_eq!(ck.state.step, step);
        prop_assert_eq!(ck.state.clock.to_bits(), c.time.to_bits());
        prop_assert_eq!(bits(&ck.cloud), bits(&c));
    }

    #[test]
    fn diagnostics_csv_roundtrips_bitwise(rows in prop::collection::vec(prop::array::uniform16(prop_oneof![finite(), Just(f64::NAN), Just(f64::INFINITY)]), 0..12)) {
        let recs: Vec<DiagnosticsRecord> = rows.iter().map(|v| DiagnosticsRecord::from_values(*v)).collect();
        let mut buf = Vec::new();
        write_diagnostics_csv(&mut buf, &recs, &ArtifactMeta::new("feed")).unwrap();
        let (back, meta) = read_diagnostics_csv(Cursor::new(buf)).unwrap();
        prop_assert_eq!(meta.config_digest.as_deref(), Some("feed"));
        prop_assert_eq!(back.len(), recs.len());
        for (a, b) in back.iter().zip(&recs) {
            for (x, y) in a.values().iter().zip(b.values().iter()) {
                prop_assert!(x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan()));
            }
        }
    }

    #[test]
    fn readers_reject_garbage_without_panicking(text in ".{0,400}") {
        let _ = read_cloud(Cursor::new(text.as_bytes()));
        let _ = read_checkpoint(Cursor::new(text.as_bytes()));
        let _ = read_diagnostics_csv(Cursor::new(text.as_bytes()));
    }

    #[test]
    fn truncated_cloud_is_an_error(c in cloud(), cut in 0.0f64..1.0) {
        prop_assume!(!c.particles.is_empty());
        let mut buf = Vec::new();
        write_cloud(&mut buf, &c, &ArtifactMeta::default()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        let keep = ((lines.len() - 1) as f64 * cut) as usize;
        let truncated = lines[..keep.max(1)].join("\n");
        prop_assert!(read_cloud(Cursor::new(truncated.as_bytes())).is_err());
    }
}

#[test]
fn writer_refuses_what_the_reader_rejects() {
    let bad = Cloud::new(vec![Particle { r: -1.0, z: 0.0, gamma: 1.0, xi0: 1.0, tag: Tag::Untagged }], 0.1, 1.0, 1.0);
    assert!(write_cloud(Vec::new(), &bad, &ArtifactMeta::default()).is_err());
    let bad = Cloud::new(vec![], 1.5, 1.0, 1.0);
    assert!(write_cloud(Vec::new(), &bad, &ArtifactMeta::default()).is_err());
}

#[test]
fn digestless_csv_reads_back_without_digest() {
    let mut buf = Vec::new();
    write_diagnostics_csv(&mut buf, &[], &ArtifactMeta::default()).unwrap();
    let (_, meta) = read_diagnostics_csv(Cursor::new(buf)).unwrap();
    assert_eq!(meta.config_digest, None);
}
