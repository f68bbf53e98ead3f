use fuzzcard::data::Shape;
use fuzzcard::pipeline::SessionParams;
use fuzzcard::study::{run_study, DEFAULT_N, STUDY_CASES};

#[test]
fn qualitative_checks_hold_across_seeds() {
    for (shape, k) in STUDY_CASES {
        for seed in 0..8 {
            let run = run_study(shape, k, DEFAULT_N, seed, &SessionParams::default()).unwrap();
            assert!(run.passed(), "{} seed {seed}: {:?}", shape.name(), run.checks);
            run.partition.validate().unwrap();
        }
    }
}

#[test]
fn skewed_low_core_is_the_narrowest() {
    let run = run_study(Shape::Skewed, 3, DEFAULT_N, 7, &SessionParams::default()).unwrap();
    let widths: Vec<f64> = run.cores.iter().map(|c| c.width()).collect();
    assert!(widths[0] < widths[2], "{widths:?}");
}

#[test]
fn study_is_deterministic() {
    let a = run_study(Shape::Multimodal, 3, 300, 5, &SessionParams::default()).unwrap();
    let b = run_study(Shape::Multimodal, 3, 300, 5, &SessionParams::default()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.crossovers.len(), 2);
}
