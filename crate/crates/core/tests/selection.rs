mod common;

use proptest::prelude::*;

use common::selection_props::{check_closed, check_open, closed_set, config, edges, open_set};
use edgecurve::selection::{iou, overlap, SelectionConfig};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn open_selection_invariants(props in open_set(), cfg in config()) {
        check_open(&props, &cfg).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn closed_selection_invariants(props in closed_set(), cfg in config()) {
        check_closed(&props, &edges(), &cfg).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn overlap_and_iou_are_symmetric_and_bounded(
        a in proptest::collection::vec(0..40usize, 1..20),
        b in proptest::collection::vec(0..40usize, 1..20),
    ) {
        let o = overlap(&a, &b).unwrap();
        prop_assert_eq!(o, overlap(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&o));
        prop_assert!(iou(&a, &b) <= o);
        prop_assert_eq!(iou(&a, &b), iou(&b, &a));
    }
}

#[test]
fn default_thresholds() {
    let d = SelectionConfig::default();
    assert_eq!((d.tau_o, d.tau_gamma, d.tau_iou), (0.8, 0.6, 0.6));
}
