use stefan_spde::heat_kernel::{compact_space_modulus, verify_kernel_bounds, KernelBoundConfig};

#[test]
fn estimate_battery_is_bounded() {
    let cfg = KernelBoundConfig::new(1e-3, 0.1, 5, 2.0, 9, 0.5).unwrap();
    let reports = verify_kernel_bounds(&cfg).unwrap();
    assert!(reports.len() >= 4);
    for r in &reports {
        assert!(r.bounded, "{} not bounded: {:?}", r.estimate_name, r.scaled_values);
        assert!(r.values.iter().all(|v| v.is_finite() && *v >= 0.0));
        assert_eq!(r.schema, 1);
    }
}

#[test]
fn space_modulus_is_linear_in_separation() {
    let r = compact_space_modulus(0.1, &[0.01, 0.02, 0.04], &[0.2, 0.5, 0.7]).unwrap();
    assert!(r.bounded);
    assert!(r.values.windows(2).all(|w| w[1] > w[0]));
}
