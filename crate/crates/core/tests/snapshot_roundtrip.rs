use euler_lab::snapshot::Snapshot;
use proptest::prelude::*;

proptest! {
    #[test]
    fn snapshots_round_trip(nx in 1usize..6, ny in 1usize..6, k in 1usize..4, t in -1e3f64..1e3, seed in any::<u64>()) {
        let comps: Vec<Vec<f64>> = (0..k)
            .map(|c| (0..nx * ny).map(|i| ((seed ^ (c * 31 + i) as u64) as f64).sin()).collect())
            .collect();
        let s = Snapshot::new(nx, ny, t, comps).unwrap();
        let back = Snapshot::read_from(&s.to_bytes()[..]).unwrap();
        prop_assert_eq!(back, s);
    }
}

#[test]
fn truncated_input_is_rejected() {
    let s = Snapshot::new(2, 2, 0.5, vec![vec![1.0; 4]]).unwrap();
    let bytes = s.to_bytes();
    assert!(Snapshot::read_from(&bytes[..bytes.len() - 3]).is_err());
}
