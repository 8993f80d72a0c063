#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(s) = kkt_spectra::io::parse_geo_schedule(data) {
        assert!(!s.is_empty());
        assert!(s.iter().all(|v| v.is_finite() && *v > 0.0));
    }
});
