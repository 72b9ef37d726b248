#![no_main]

use ceg::generate::example1_ceg;
use ceg::io::ObservationFile;
use ceg::propagation::propagate;
use ceg::Compatibility;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(file) = ObservationFile::parse(text) else { return };
    let g = example1_ceg();
    if let Ok(Compatibility::Compatible(obs)) = file.resolve(&g) {
        if let Ok(r) = propagate(&g, &obs) {
            assert!(r.event_probability() > 0.0 && r.event_probability() <= 1.0 + 1e-12);
        }
    }
});
