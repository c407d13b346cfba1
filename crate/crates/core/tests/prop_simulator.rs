mod common;

use common::properties as props;
use proptest::prelude::*;

proptest! {
    #![proptest_config(common::config(0x51A))]

    #[test]
    fn time_invariant_matches_convolution(seed in any::<u64>()) {
        if let Err(msg) = props::time_invariant_matches_convolution(seed) {
            return Err(TestCaseError::fail(msg));
        }
    }

    #[test]
    fn time_varying_matches_path_sums(seed in any::<u64>()) {
        if let Err(msg) = props::time_varying_matches_path_sums(seed) {
            return Err(TestCaseError::fail(msg));
        }
    }
}
