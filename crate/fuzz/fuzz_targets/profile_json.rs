#![no_main]

use libfuzzer_sys::fuzz_target;
use ontrack_core::projection::{project_retirement_income, Assumptions, EmployeeProfile};

fuzz_target!(|data: &[u8]| {
    let Ok(profile) = serde_json::from_slice::<EmployeeProfile>(data) else {
        return;
    };
    if profile.validate().is_ok() {
        let _ = project_retirement_income(&profile, &Assumptions::default());
    }
});
