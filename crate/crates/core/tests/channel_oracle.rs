//! Channel model against quadrature and Monte-Carlo oracles.

use cpopt_core::channel::{
    self, collision_prob, path_loss_db, sensing_error, sensing_error_taylor, CommConfig, LinkState,
};
use cpopt_core::erf;
use cpopt_core::scenario::{sample_positions, sample_velocity, ArrivalModel, VelocityModel};
use cpopt_testkit as oracle;

#[test]
fn erf_matches_quadrature_to_1e10() {
    let mut worst = 0.0f64;
    for i in 0..=800 {
        let q = -4.0 + 8.0 * i as f64 / 800.0;
        let diff = (erf::erf(q) - oracle::quadrature_erf(q)).abs();
        worst = worst.max(diff);
    }
    assert!(worst < 1e-10, "worst erf error {worst}");
}

#[test]
fn taylor_truncation_within_remainder_bound() {
    // |erf_taylor - erf| <= first omitted term, for |Q| <= 1.
    for order in 0..=6 {
        for i in 0..=40 {
            let q = -1.0 + 2.0 * i as f64 / 40.0;
            let bound = erf::erf_taylor_remainder_bound(q, order);
            let err = (erf::erf_taylor(q, order) - oracle::quadrature_erf(q)).abs();
            assert!(
                err <= bound + 1e-14,
                "order {order}, q {q}: err {err} > bound {bound}"
            );
        }
    }
}

#[test]
fn taylor_order0_worked_example() {
    // Q = 0.5: approx 0.2179, exact 0.2398, difference inside the bound.
    let cfg = CommConfig::default();
    let d = 100.0;
    let p = path_loss_db(&cfg, d) + cfg.p_sen + 0.5 * cfg.sigma_sh * std::f64::consts::SQRT_2;
    let link = LinkState {
        d,
        p_tx_dbm: p,
        w: 1.0,
    };
    let approx = sensing_error_taylor(&cfg, &link, 0);
    let exact = sensing_error(&cfg, &link);
    assert!((approx - 0.2179).abs() < 5e-4);
    assert!((exact - 0.2398).abs() < 5e-4);
    assert!((approx - exact).abs() <= 0.5 * erf::erf_taylor_remainder_bound(0.5, 0));
}

#[test]
fn collision_closed_form_and_monte_carlo() {
    let closed = collision_prob(50.0, 5).unwrap();
    assert!((closed - (1.0 - 0.98f64.powi(4))).abs() < 1e-12);
    assert!((closed - 0.077_631_84).abs() < 1e-8);

    let trials = 1_000_000;
    let mc = oracle::monte_carlo_collision(50, 5, trials, 1234);
    let sigma = (closed * (1.0 - closed) / trials as f64).sqrt();
    assert!(
        (mc - closed).abs() <= 3.0 * sigma,
        "mc {mc}, closed {closed}, sigma {sigma}"
    );
}

#[test]
fn ppp_count_matches_analytic_mean() {
    let model = ArrivalModel {
        rho: 0.01,
        a: 0.0,
        b: 1000.0,
    };
    let reps = 10_000u64;
    let mut total = 0usize;
    let mut total_sq = 0.0f64;
    for seed in 0..reps {
        let n = sample_positions(&model, seed).unwrap().len();
        total += n;
        total_sq += (n * n) as f64;
    }
    let mean = total as f64 / reps as f64;
    let var = total_sq / reps as f64 - mean * mean;
    let se = (var / reps as f64).sqrt();
    assert!(
        (mean - 10.0).abs() <= 3.0 * se.max(1e-9),
        "mean {mean}, se {se}"
    );
    // The coarse band from the worked example.
    assert!((mean - 10.0).abs() < 0.5);
}

#[test]
fn truncated_velocity_mean_matches_quadrature() {
    let symmetric = VelocityModel {
        mu: 30.0,
        sigma: 5.0,
        v_min: 20.0,
        v_max: 40.0,
    };
    let skewed = VelocityModel {
        mu: 30.0,
        sigma: 6.0,
        v_min: 26.0,
        v_max: 45.0,
    };
    for model in [symmetric, skewed] {
        let n = 100_000u64;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for seed in 0..n {
            let v = sample_velocity(&model, seed).unwrap();
            assert!(v >= model.v_min && v <= model.v_max);
            sum += v;
            sum_sq += v * v;
        }
        let mean = sum / n as f64;
        let sd = (sum_sq / n as f64 - mean * mean).sqrt();
        let se = sd / (n as f64).sqrt();
        let analytic =
            oracle::truncated_normal_mean(model.mu, model.sigma, model.v_min, model.v_max);
        assert!(
            (mean - analytic).abs() <= 3.0 * se,
            "mean {mean} vs analytic {analytic} (se {se})"
        );
    }
    // Symmetric truncation pins the mean at mu.
    let n = 100_000u64;
    let mean: f64 = (0..n)
        .map(|seed| sample_velocity(&symmetric, seed).unwrap())
        .sum::<f64>()
        / n as f64;
    assert!((mean - 30.0).abs() < 0.05);
}

#[test]
fn monte_carlo_shadowing_cross_validates_closed_form() {
    let cfg = CommConfig::default();
    for (d, p_dbm) in [(120.0, 18.0), (250.0, 21.0), (400.0, 26.0)] {
        let link = LinkState {
            d,
            p_tx_dbm: p_dbm,
            w: 1.0,
        };
        let exact = sensing_error(&cfg, &link);
        let trials = 300_000;
        let mc = channel::sensing_error_monte_carlo(&cfg, &link, trials, 77);
        let sigma = (exact * (1.0 - exact) / trials as f64).sqrt().max(1e-5);
        assert!(
            (mc - exact).abs() <= 4.0 * sigma,
            "d {d}: mc {mc} vs exact {exact}"
        );
    }
}
