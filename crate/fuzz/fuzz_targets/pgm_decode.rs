#![no_main]

use fringefree::io::{decode_pgm, encode_pgm, BitDepth};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = decode_pgm(data) {
        // Whatever decodes must survive a 16-bit round trip.
        let back = decode_pgm(&encode_pgm(&img, BitDepth::Sixteen)).expect("re-encoded image decodes");
        assert_eq!(back.dims(), img.dims());
    }
});
