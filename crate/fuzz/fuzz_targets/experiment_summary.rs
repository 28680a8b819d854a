#![no_main]

use isometry_pursuit::experiment::ExperimentSummary;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(summary) = serde_json::from_slice::<ExperimentSummary>(data) {
        let text = serde_json::to_string(&summary).unwrap();
        let _ = serde_json::from_str::<ExperimentSummary>(&text);
    }
});
