#![no_main]

use libfuzzer_sys::fuzz_target;
use ontrack_core::forest::{predict_cate, Forest};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(forest) = Forest::from_json(text) {
        // a checked forest must route any row without panicking
        for x in [0.0, 1.0, -1.0, 100.0] {
            let row = vec![x; forest.schema.len()];
            let _ = predict_cate(&forest, &row);
        }
    }
});
