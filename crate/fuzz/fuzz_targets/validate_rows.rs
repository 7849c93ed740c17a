#![no_main]

use ivcheck::{build_contingency, validate_dataset, Levels, MissingPolicy};
use libfuzzer_sys::fuzz_target;

// First three bytes pick the levels, then each 3-byte group is a row;
// 0xFF marks a missing value.
fuzz_target!(|data: &[u8]| {
    if data.len() < 3 {
        return;
    }
    let Ok(levels) = Levels::new(data[0] as usize % 6, data[1] as usize % 6, data[2] as usize % 6) else {
        return;
    };
    let rows: Vec<[Option<i64>; 3]> = data[3..]
        .chunks_exact(3)
        .map(|c| [0, 1, 2].map(|k| (c[k] != 0xFF).then_some(c[k] as i64 - 2)))
        .collect();
    for policy in [MissingPolicy::Strict, MissingPolicy::Lenient] {
        if let Ok(ds) = validate_dataset(&rows, levels, policy) {
            let t = build_contingency(&ds);
            assert_eq!(t.total() as usize, ds.len());
        }
    }
});
