#![no_main]

use ivcheck::respvar::ResponseSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(spec) = serde_json::from_slice::<ResponseSpec>(data) {
        let text = serde_json::to_string(&spec).unwrap();
        let back: ResponseSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
    }
});
