#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(m) = kkt_spectra::io::parse_symmat(data) {
        assert!(m.dim() >= 1);
        let _ = kkt_spectra::symmat::spectral_decompose_default(&m);
    }
});
