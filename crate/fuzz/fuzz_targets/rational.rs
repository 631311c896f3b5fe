#![no_main]

use libfuzzer_sys::fuzz_target;
use ontrack_core::game::{spe, GameParams, Rational};

fuzz_target!(|data: &[u8]| {
    if data.len() > 256 {
        return;
    }
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let (a, b) = text.split_once(';').unwrap_or((text, "1/2"));
    if let (Ok(delta), Ok(y)) = (a.parse::<Rational>(), b.parse::<Rational>()) {
        if let Ok(params) = GameParams::new(delta, y) {
            let _ = spe(&params);
        }
    }
});
