#![no_main]
use libfuzzer_sys::fuzz_target;
use ringlab::cli::parse_range;
use ringlab::compare::CompareMode;

// The two free-form flag values: `--range lo:hi:n` and `--mode`.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(r) = parse_range(text) {
        let pts = r.points();
        assert_eq!(pts.len(), r.n);
        assert!(pts.windows(2).all(|w| w[0] <= w[1]));
        assert!(pts.iter().all(|&x| r.lo <= x && x <= r.hi));
    }
    let _ = text.parse::<CompareMode>();
});
