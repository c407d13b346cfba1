mod common;

use common::properties as props;
use proptest::prelude::*;

proptest! {
    #![proptest_config(common::config(0x5CA1E))]

    #[test]
    fn delay_point_moves_into_the_gains(seed in any::<u64>()) {
        if let Err(msg) = props::delay_point_moves_into_the_gains(seed) {
            return Err(TestCaseError::fail(msg));
        }
    }
}
