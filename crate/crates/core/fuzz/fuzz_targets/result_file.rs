#![no_main]

use ceg::generate::example1_ceg;
use ceg::io::ResultFile;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(file) = ResultFile::parse(text) else { return };
    let once = file.to_json();
    if let Ok(back) = ResultFile::parse(&once) {
        // NaN fields cannot survive JSON; everything else must round trip
        assert_eq!(back.to_json(), once);
    }
    let _ = file.to_result(&example1_ceg());
});
