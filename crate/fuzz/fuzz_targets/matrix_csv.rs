#![no_main]

use isometry_pursuit::data::{parse_matrix_csv, Orientation};
use libfuzzer_sys::fuzz_target;

// First byte picks orientation and header handling; the rest is the file.
fuzz_target!(|data: &[u8]| {
    let Some((&flags, text)) = data.split_first() else {
        return;
    };
    let orientation = if flags & 1 == 0 {
        Orientation::FeaturesAsRows
    } else {
        Orientation::FeaturesAsCols
    };
    if let Ok(table) = parse_matrix_csv(text, orientation, flags & 2 != 0) {
        assert!(table.values.iter().all(|v| v.is_finite()));
        assert!(table.dim() > 0 && table.candidates() > 0);
        let _ = table.design();
    }
});
