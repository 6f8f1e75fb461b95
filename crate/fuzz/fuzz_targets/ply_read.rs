#![no_main]

use fringefree::io::{decode_ply, encode_ply, PlyFormat};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(vertices) = decode_ply(data) {
        let again = decode_ply(&encode_ply(&vertices, PlyFormat::BinaryLittleEndian)).expect("own output decodes");
        assert_eq!(again.len(), vertices.len());
    }
});
