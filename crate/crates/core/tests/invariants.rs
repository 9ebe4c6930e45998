//! Property tests for the model's monotonicity and identity invariants.

use cpopt_core::allocator::{dinkelbach_allocate, AllocatorOptions};
use cpopt_core::channel::{
    collision_prob, energy, sensing_error, throughput, CommConfig, LinkState,
};
use cpopt_core::objective::{
    assemble_qcqp, composite_g_d, f1_location, f2_visual_range, f3_motion_blur, BlurMode,
    SelectionMask, TimeAggregates, Weights,
};
use cpopt_core::scenario::CameraConstants;
use proptest::prelude::*;

fn comm_config(gamma: f64, sigma: f64) -> CommConfig {
    CommConfig {
        gamma,
        sigma_sh: sigma,
        ..Default::default()
    }
}

proptest! {
    #[test]
    fn sensing_error_monotone_in_power(
        d in 20.0..800.0f64,
        p in -10.0..30.0f64,
        bump in 0.1..20.0f64,
        gamma in 2.0..4.0f64,
        sigma in 0.5..8.0f64,
    ) {
        let cfg = comm_config(gamma, sigma);
        let low = sensing_error(&cfg, &LinkState { d, p_tx_dbm: p, w: 1.0 });
        let high = sensing_error(&cfg, &LinkState { d, p_tx_dbm: p + bump, w: 1.0 });
        prop_assert!(high <= low);
        // Strictly inside (0, 1) mathematically; f64 saturates in deep tails.
        prop_assert!((0.0..=1.0).contains(&low));
    }

    #[test]
    fn sensing_error_monotone_in_distance(
        d in 20.0..400.0f64,
        factor in 1.01..4.0f64,
        p in -10.0..30.0f64,
        gamma in 2.0..4.0f64,
    ) {
        let cfg = comm_config(gamma, 3.0);
        let near = sensing_error(&cfg, &LinkState { d, p_tx_dbm: p, w: 1.0 });
        let far = sensing_error(&cfg, &LinkState { d: d * factor, p_tx_dbm: p, w: 1.0 });
        prop_assert!(far >= near);
    }

    #[test]
    fn sensing_error_monotone_in_exponent(
        d in 20.0..800.0f64,
        p in -10.0..30.0f64,
        g1 in 2.0..3.0f64,
        dg in 0.01..1.0f64,
    ) {
        // d >= 1 m, so a larger exponent only raises the loss.
        let low = sensing_error(&comm_config(g1, 3.0), &LinkState { d, p_tx_dbm: p, w: 1.0 });
        let high = sensing_error(&comm_config(g1 + dg, 3.0), &LinkState { d, p_tx_dbm: p, w: 1.0 });
        prop_assert!(high >= low);
    }

    #[test]
    fn collision_monotone(w_t in 1.0..200.0f64, m in 1usize..30, extra in 1usize..10) {
        let base = collision_prob(w_t, m).unwrap();
        prop_assert!((0.0..=1.0).contains(&base));
        prop_assert!(collision_prob(w_t, m + extra).unwrap() >= base);
        prop_assert!(collision_prob(w_t + 10.0, m).unwrap() <= base);
    }

    #[test]
    fn throughput_and_energy_monotone(
        w in 0.0..50.0f64,
        dw in 0.1..10.0f64,
        delta in 0.0..0.9f64,
        dd in 0.001..0.09f64,
        p in -5.0..25.0f64,
    ) {
        let cfg = CommConfig::default();
        let link = LinkState { d: 100.0, p_tx_dbm: p, w };
        let more_rb = LinkState { w: w + dw, ..link };
        prop_assert!(throughput(&cfg, &more_rb, delta) >= throughput(&cfg, &link, delta));
        let e = energy(&cfg, &link, delta).unwrap();
        let e_worse = energy(&cfg, &link, delta + dd).unwrap();
        prop_assert!(e_worse >= e);
    }

    #[test]
    fn composite_identity_random_aggregates(
        xbar in prop::collection::vec(0.1..2000.0f64, 2..8),
        seedling in 0.1..500.0f64,
    ) {
        let n = xbar.len();
        let rbar: Vec<f64> = (0..n).map(|i| seedling + 30.0 * i as f64).collect();
        let vterm: Vec<f64> = (0..n).map(|i| 200.0 + 13.0 * i as f64).collect();
        let agg = TimeAggregates { xbar, rbar, vterm, steps: 1 };
        let camera = CameraConstants::default();
        let weights = Weights::default();
        let mask = SelectionMask::from_indices(&[0, n - 1], n, n).unwrap();
        let (g, d) = composite_g_d(&agg, &camera, &weights, &mask).unwrap();
        let direct = f1_location(&agg, &mask)
            + f2_visual_range(&agg, &mask).unwrap()
            + f3_motion_blur(&agg, &camera, &mask, BlurMode::Parallel).unwrap();
        prop_assert!((g / d - direct).abs() <= 1e-9 * direct.abs().max(1e-300));
    }

    #[test]
    fn quadratic_form_fidelity_exhaustive(
        xbar in prop::collection::vec(0.1..2000.0f64, 2..7),
        eta in -10.0..10.0f64,
    ) {
        let n = xbar.len();
        let rbar: Vec<f64> = (0..n).map(|i| 40.0 + 25.0 * i as f64).collect();
        let vterm: Vec<f64> = (0..n).map(|i| 180.0 + 17.0 * i as f64).collect();
        let agg = TimeAggregates { xbar, rbar, vterm, steps: 1 };
        let camera = CameraConstants::default();
        let weights = Weights::default();
        let m = n;
        let form = assemble_qcqp(&agg, &camera, &weights, eta, m).unwrap();
        for mask_int in 1u64..(1 << n) {
            let bits: Vec<bool> = (0..n).map(|i| mask_int >> i & 1 == 1).collect();
            let mask = SelectionMask::new(bits.clone(), m).unwrap();
            let (g, d) = composite_g_d(&agg, &camera, &weights, &mask).unwrap();
            let want = g - eta * d;
            prop_assert!((form.eval(&bits) - want).abs() <= 1e-9 * want.abs().max(1.0));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn optimizer_allocation_always_feasible(
        seed in 0u64..5000,
        m in 2usize..7,
    ) {
        let cfg = CommConfig::default();
        let mut rng = cpopt_core::rng::substream(seed, cpopt_core::rng::Stream::RandomAllocation);
        use rand::Rng;
        let distances: Vec<f64> = (0..m).map(|_| rng.random_range(50.0..450.0)).collect();
        let out = dinkelbach_allocate(&cfg, &distances, &AllocatorOptions::default()).unwrap();
        out.alloc
            .validate(cfg.power_floor(m), cfg.p_total_w, cfg.effective_pool())
            .unwrap();
        for w in out.trace.outer.windows(2) {
            prop_assert!(w[1].eta >= w[0].eta - 1e-9 * w[0].eta.abs().max(1.0));
        }
    }
}
