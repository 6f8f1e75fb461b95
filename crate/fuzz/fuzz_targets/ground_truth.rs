#![no_main]

use fringefree::io::{decode_ground_truth, encode_ground_truth};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(gt) = decode_ground_truth(data) {
        assert_eq!(decode_ground_truth(&encode_ground_truth(&gt)).ok(), Some(gt));
    }
});
