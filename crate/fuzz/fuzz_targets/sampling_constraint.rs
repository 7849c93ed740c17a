#![no_main]

use ivcheck::numeric::stream_rng;
use ivcheck::respvar::{build_spec, sample_model, SampleOptions, SamplingConstraint, ViolationClass};
use ivcheck::Levels;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(c) = serde_json::from_slice::<SamplingConstraint>(data) else {
        return;
    };
    let spec = build_spec(ViolationClass::Excl, Levels::binary()).unwrap();
    let opts = SampleOptions {
        redraw_budget: 20,
        ..Default::default()
    };
    if let Ok(theta) = sample_model(&spec, c, &opts, &mut stream_rng(0, 0)) {
        theta.check(&spec).unwrap();
    }
});
