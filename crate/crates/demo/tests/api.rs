use rsmcast_demo::{dof_table, power_split, rate_curve, DofRow};

#[test]
fn dof_table_for_two_groups_of_two() {
    let rows = dof_table(2, 2, 4).unwrap();
    let expect = |n_tx, classic, rs| DofRow { n_tx, classic, rs };
    assert_eq!(rows, vec![expect(1, 0, 0.5), expect(2, 0, 0.5), expect(3, 1, 1.0), expect(4, 1, 1.0)]);
    assert!(dof_table(0, 2, 4).is_err());
}

#[test]
fn rate_curve_dominates_classic() {
    let c = rate_curve("1-2-2-2", 3, 0.0, 20.0, 10.0).unwrap();
    assert_eq!(c.snr_db, vec![0.0, 10.0, 20.0]);
    for (rs, no_rs) in c.rs.iter().zip(&c.no_rs) {
        assert!(rs >= &(no_rs - 1e-4));
    }
    assert!(c.rs.windows(2).all(|w| w[1] > w[0]));
    assert_eq!((c.dof_classic, c.dof_rs), (0, 0.5));
    let json = serde_json::to_string(&c).unwrap();
    assert!(json.contains("\"no_rs\""));
}

#[test]
fn power_split_respects_budget() {
    let s = power_split("2-2-2-2", 5, 15.0).unwrap();
    let used: f64 = s.subcarriers.iter().map(|c| c.broadcast_power + c.group_power.iter().sum::<f64>()).sum();
    assert!(used <= s.total_power * (1.0 + 1e-6));
    let total: f64 = s.subcarriers.iter().map(|c| c.mmf_rate).sum();
    assert!((total - s.sum_mmf).abs() < 1e-9);
    assert!(s.subcarriers.iter().all(|c| c.common_share.iter().all(|&x| x >= 0.0)));
}

#[test]
fn rejects_bad_input() {
    assert!(rate_curve("2-2-2", 0, 0.0, 10.0, 5.0).is_err());
    assert!(rate_curve("1-2-2-2", 0, 10.0, 0.0, 5.0).is_err());
    assert!(rate_curve("1-40-2-2", 0, 0.0, 10.0, 5.0).is_err());
    assert!(power_split("1-2-2-2", 0, 80.0).is_err());
}
