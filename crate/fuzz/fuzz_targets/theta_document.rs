#![no_main]

use ivcheck::respvar::{forward_distribution, ThetaDocument};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(doc) = serde_json::from_slice::<ThetaDocument>(data) {
        let joint = forward_distribution(&doc.theta, &doc.spec).expect("validated document");
        assert!((joint.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }
});
