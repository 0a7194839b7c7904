//! Frozen regression fixtures for the seeded generators.

use cpce_core::format::{matrix_to_csv, read_symmetric};
use cpce_core::linalg::random_psd;

const RANDOM_PSD_N4_SEED7: &str = include_str!("fixtures/random_psd_n4_seed7.csv");

#[test]
fn random_psd_matches_fixture() {
    let m = random_psd(4, 7).unwrap();
    assert_eq!(matrix_to_csv(&m), RANDOM_PSD_N4_SEED7);
    let (back, asym) = read_symmetric(RANDOM_PSD_N4_SEED7, 0.0).unwrap();
    assert_eq!(asym, 0.0);
    assert_eq!(back, m);
}
