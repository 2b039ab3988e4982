mod common;

use common::{check_etl_properties, fixture_copy, seeded_copy};

#[test]
fn fixture_properties() {
    let dir = fixture_copy();
    check_etl_properties(dir.path()).unwrap();
}

#[test]
fn generated_properties_over_seeds() {
    for seed in 1..=5 {
        let dir = seeded_copy(seed);
        check_etl_properties(dir.path()).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
    }
}
