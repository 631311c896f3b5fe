#![no_main]

use libfuzzer_sys::fuzz_target;
use ontrack_service::api::{parse_json, AnalyzeOptions, ProjectionRequest, RequiredRateRequest};

fuzz_target!(|data: &[u8]| {
    let _ = parse_json::<AnalyzeOptions>(data);
    let _ = parse_json::<ProjectionRequest>(data);
    let _ = parse_json::<RequiredRateRequest>(data);
});
