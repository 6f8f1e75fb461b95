#![no_main]

use fringefree::io::parse_sidecar;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let text = std::str::from_utf8(data).unwrap_or("");
    if let Ok(s) = parse_sidecar(text) {
        let _ = s.fringe_config();
    }
});
