#![no_main]
use libfuzzer_sys::fuzz_target;
use ringlab::io::{read_diagnostics_csv, write_diagnostics_csv};

fuzz_target!(|data: &[u8]| {
    let Ok((recs, meta)) = read_diagnostics_csv(data) else { return };
    let mut buf = Vec::new();
    write_diagnostics_csv(&mut buf, &recs, &meta).expect("reader output is writable");
    let (again, _) = read_diagnostics_csv(buf.as_slice()).expect("writer output is readable");
    let bits = |r: &ringlab::diagnostics::DiagnosticsRecord| r.values().map(f64::to_bits);
    assert!(again.iter().map(bits).eq(recs.iter().map(bits)));
});
