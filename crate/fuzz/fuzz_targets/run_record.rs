#![no_main]

use isometry_pursuit::record::parse_run_record;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(record) = parse_run_record(text) {
        assert!(record.support.windows(2).all(|w| w[0] < w[1]));
        let again = parse_run_record(&record.to_json().unwrap()).unwrap();
        assert_eq!(again.support, record.support);
        let _ = record.to_csv();
    }
});
