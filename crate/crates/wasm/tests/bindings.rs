use idm_odds_wasm::{odds_curve, reference_table, simulate_table};

#[test]
fn curve_layout() {
    let flat = odds_curve(0.04, 5.0, 1.0, 3000.0, 100.0, 30.0, 100.0, 0.5).unwrap();
    assert_eq!(flat.len(), 2 * 141);
    assert_eq!(flat[0], 30.0);
    assert_eq!(flat[141], 0.0);
    assert!((flat[141 + 60] - 0.150_014_5).abs() < 1e-6);
}

#[test]
fn small_study_is_a_table() {
    let csv = simulate_table(0.04, 5.0, 1.0, 3000.0, 20.0, 7).unwrap();
    assert!(csv.starts_with("k,age_lo,age_hi,n,c\n"));
    assert_eq!(csv, simulate_table(0.04, 5.0, 1.0, 3000.0, 20.0, 7).unwrap());
    assert!(reference_table().contains("total,,,74388,8735"));
}
