mod common;

use common::properties as props;
use proptest::prelude::*;

proptest! {
    #![proptest_config(common::config(0xD0F7))]

    #[test]
    fn q_round_trip(seed in any::<u64>()) {
        if let Err(msg) = props::q_round_trip(seed) {
            return Err(TestCaseError::fail(msg));
        }
    }

    #[test]
    fn block_circulant_factorizes(seed in any::<u64>()) {
        if let Err(msg) = props::block_circulant_factorizes(seed) {
            return Err(TestCaseError::fail(msg));
        }
    }
}
