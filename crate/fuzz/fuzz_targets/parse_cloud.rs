#![no_main]
use libfuzzer_sys::fuzz_target;
use ringlab::io::{read_cloud, write_cloud};

fuzz_target!(|data: &[u8]| {
    let Ok((cloud, header)) = read_cloud(data) else { return };
    let mut buf = Vec::new();
    write_cloud(&mut buf, &cloud, &header.meta()).expect("reader output is writable");
    let (again, _) = read_cloud(buf.as_slice()).expect("writer output is readable");
    assert_eq!(again.particles, cloud.particles);
    assert_eq!(again.time.to_bits(), cloud.time.to_bits());
});
