#![no_main]

use libfuzzer_sys::fuzz_target;
use ontrack_core::io::{parse_roster_str, roster_to_csv, LoadOptions};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let opts = LoadOptions { max_row_errors: usize::MAX };
    if let Ok((roster, _)) = parse_roster_str(text, &opts) {
        // whatever we accept must survive a write and re-read
        let (again, report) = parse_roster_str(&roster_to_csv(&roster), &opts).expect("re-read");
        assert_eq!(again.len(), roster.len());
        assert!(report.rejected.is_empty());
    }
});
