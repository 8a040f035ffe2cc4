//! Every kernel against a widened-integer brute-force reference.

mod common;

#[test]
fn conv1d_matches_reference() {
    assert_eq!(common::conv_cases(1500, 1), 0);
}

#[test]
fn dense_matches_reference() {
    assert_eq!(common::dense_cases(1500, 2), 0);
}

#[test]
fn pooling_matches_reference() {
    assert_eq!(common::pool_cases(1500, 3), 0);
}

#[test]
fn gru_step_matches_reference() {
    assert_eq!(common::gru_cases(1500, 4), 0);
}
