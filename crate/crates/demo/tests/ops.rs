use aircomp_demo::ops;

#[test]
fn good_channel_constellation_has_four_clusters() {
    let iq = ops::constellation("good", 40.0, 1).unwrap();
    assert_eq!(iq.len() % 2, 0);
    for c in iq.chunks(2) {
        assert!((c[0].abs() - 1.0).abs() < 0.2 && (c[1].abs() - 1.0).abs() < 0.2, "{c:?}");
    }
}

#[test]
fn sum_ber_is_zero_when_clean() {
    let r = ops::sum_ber("good", 40.0, "rsjd64", 2, 3).unwrap();
    assert_eq!(r, vec![0.0, 2600.0, 0.0]);
    assert!(ops::sum_ber("good", 40.0, "viterbi", 1, 3).is_err());
    assert!(ops::sum_ber("nowhere", 40.0, "psud", 1, 3).is_err());
}

#[test]
fn aligned_analog_beats_misaligned() {
    let m = ops::aggregation_mse("near-realistic", 30.0, 170, 5).unwrap();
    assert_eq!(m.len(), 3);
    assert!(m[1] < m[0], "{m:?}");
    assert!(m[2] < 1e-6, "{m:?}");
}
