#![no_main]

use fringefree::unwrap::{parse_thr_list, MatchParams, MatchMode};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let s = std::str::from_utf8(data).unwrap_or("");
    if let Ok(list) = parse_thr_list(s) {
        for thr in list {
            assert!(MatchParams::new(thr, MatchMode::M2).is_ok());
        }
    }
});
