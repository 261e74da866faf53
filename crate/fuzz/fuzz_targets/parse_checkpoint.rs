#![no_main]
use libfuzzer_sys::fuzz_target;
use ringlab::io::{read_checkpoint, write_checkpoint};

fuzz_target!(|data: &[u8]| {
    let Ok(ck) = read_checkpoint(data) else { return };
    let mut buf = Vec::new();
    write_checkpoint(&mut buf, ck.state.step, &ck.cloud, &ck.state.config_digest).expect("reader output is writable");
    let again = read_checkpoint(buf.as_slice()).expect("writer output is readable");
    assert_eq!(again.state.step, ck.state.step);
    assert_eq!(again.cloud.particles, ck.cloud.particles);
});
