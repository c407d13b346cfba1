mod common;

use common::properties as props;
use proptest::prelude::*;

proptest! {
    #![proptest_config(common::config(0x1257))]

    #[test]
    fn every_bin_is_memoryless(seed in any::<u64>()) {
        if let Err(msg) = props::every_bin_is_memoryless(seed) {
            return Err(TestCaseError::fail(msg));
        }
    }
}
