#![no_main]
use libfuzzer_sys::fuzz_target;
use ringlab::config::SimConfig;

// Any accepted config must survive a serialize/parse cycle with its digest.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(cfg) = SimConfig::from_json_str(text) else { return };
    let back = SimConfig::from_json_str(&cfg.to_json_pretty()).expect("re-parse of emitted config");
    assert_eq!(back.digest(), cfg.digest());
});
