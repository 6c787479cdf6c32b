use std::time::Instant;

use rateless_core::oracle::{oracle_capacity, oracle_mmi, oracle_types};

#[test]
fn oracles_agree() {
    let start = Instant::now();
    for r in [oracle_mmi(1), oracle_capacity(1), oracle_types(1)] {
        println!("{r}");
        assert!(r.passed(), "{r}");
    }
    assert!(start.elapsed().as_secs() < 120);
}

#[test]
fn oracles_agree_on_other_seeds() {
    for seed in [7, 1234] {
        for r in [oracle_mmi(seed), oracle_capacity(seed), oracle_types(seed)] {
            assert!(r.passed(), "{r}");
        }
    }
}
