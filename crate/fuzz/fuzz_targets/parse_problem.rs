#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(pd) = kkt_spectra::io::parse_problem(text) {
        // Accepted problems must survive a write/read cycle.
        let again = kkt_spectra::io::parse_problem(&kkt_spectra::io::problem_to_json(&pd)).expect("round trip");
        assert_eq!(again.n(), pd.n());
        assert_eq!(again.p(), pd.p());
    }
});
