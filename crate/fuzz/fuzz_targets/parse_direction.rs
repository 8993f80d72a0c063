#![no_main]

use kkt_spectra::families::Family;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    let pd = Family::Example3.base();
    let _ = kkt_spectra::io::parse_direction_for(data, &pd);
});
