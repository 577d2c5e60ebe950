mod common;

use common::*;

#[test]
fn generated_files_match_their_golden_copies() {
    for (name, text) in golden_files() {
        check_golden(name, &text).unwrap();
    }
}

#[test]
fn generation_is_deterministic() {
    assert_eq!(golden_files(), golden_files());
}
