#![no_main]

use fringefree::io::grid_from_json;
use libfuzzer_sys::fuzz_target;
use nalgebra::Point2;

fuzz_target!(|data: &[u8]| {
    let text = std::str::from_utf8(data).unwrap_or("");
    if let Ok(grid) = grid_from_json(text) {
        let _ = grid.sample(&Point2::new(-1.0, 1e9));
        let _ = grid.sample(&Point2::new(0.0, 0.0));
    }
});
