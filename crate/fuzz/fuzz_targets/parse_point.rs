#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok((x, y)) = kkt_spectra::io::parse_point(data) {
        assert!(x.iter().all(|v| v.is_finite()));
        assert!(y.is_finite());
    }
});
