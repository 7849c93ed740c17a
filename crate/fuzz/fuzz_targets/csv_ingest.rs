#![no_main]

use ivcheck::pipeline::{ingest_reader, prepare, BinarizeRule, CsvOptions, PipelineConfig};
use ivcheck::MissingPolicy;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let cols = ["z".to_string(), "x".to_string(), "y".to_string()];
    for policy in [MissingPolicy::Strict, MissingPolicy::Lenient] {
        let opts = CsvOptions {
            policy,
            ..Default::default()
        };
        if let Ok(raw) = ingest_reader(data, &cols, &opts) {
            let mut cfg = PipelineConfig::new(10.0);
            cfg.binarize = [BinarizeRule::Median, BinarizeRule::Mean, BinarizeRule::None];
            let _ = prepare(&raw, &cfg);
        }
    }
});
