#![no_main]

use fringefree::io::parse_calib;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let text = std::str::from_utf8(data).unwrap_or("");
    if let Ok(calib) = parse_calib(text) {
        let _ = calib.rig_without_grids();
    }
});
