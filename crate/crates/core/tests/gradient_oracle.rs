use proptest::prelude::*;

use noisysgd::gradcheck::{check_case, random_case, run_suite, tolerance};
use noisysgd::rng::RngStream;

#[test]
fn two_hundred_random_configurations() {
    let results = run_suite(200, 2024).unwrap();
    assert_eq!(results.len(), 200);
    assert!(results.iter().any(|r| r.smoothed));
    for r in &results {
        assert!(r.relative_error <= tolerance(r), "{r:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn backprop_matches_central_differences(seed in any::<u64>()) {
        let mut rng = RngStream::new(seed, 7);
        let case = random_case(&mut rng, 1e-3).unwrap();
        let r = check_case(&case, 1e-6).unwrap();
        prop_assert!(r.relative_error <= tolerance(&r), "{:?}", r);
    }
}
