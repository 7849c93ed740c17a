//! Kept in its own binary so the global evidence counter sees no other test.

use ivcheck::data::{Dataset, Levels};
use ivcheck::mlik::evidence_computations;
use ivcheck::pipeline::{run_nps, NpsVerdict, PipelineConfig};

fn dataset(counts: [usize; 8]) -> Dataset {
    let lv = Levels::binary();
    let rows = counts
        .iter()
        .enumerate()
        .flat_map(|(c, &k)| {
            let (z, x, y) = lv.cell_coords(c);
            std::iter::repeat_n([z, x, y], k)
        })
        .collect();
    Dataset::from_rows(rows, lv).unwrap()
}

#[test]
fn failing_necessary_test_computes_no_evidence() {
    let cfg = PipelineConfig::new(10.0);
    let before = evidence_computations();
    let d = run_nps(&dataset([50, 0, 0, 0, 0, 50, 0, 0]), &cfg).unwrap();
    assert_eq!(d.decision, NpsVerdict::RejectIv);
    assert!(d.evidences.is_none());
    assert_eq!(evidence_computations(), before);

    // A passing dataset does reach the evidences.
    let mut cfg = cfg;
    cfg.evidence.ais.rungs = 10;
    cfg.evidence.ais.chains = 16;
    let d = run_nps(&dataset([20, 5, 5, 20, 20, 5, 5, 20]), &cfg).unwrap();
    assert!(d.necessary_test.passed);
    assert!(evidence_computations() > before);
}
