//! Self-check suite behind `cpopt verify`: re-runs the independent oracle
//! comparisons at reduced scale and reports one line per check.

use cpopt_core::allocator::{
    allocate_baseline, analytic_gradient, dinkelbach_allocate, objective_value, AllocObjective,
    Allocation, AllocationStrategy, AllocatorOptions,
};
use cpopt_core::channel::collision_prob;
use cpopt_core::erf;
use cpopt_core::objective::{
    assemble_qcqp, composite_g_d, f1_location, f2_visual_range, f3_motion_blur, BlurMode,
    SelectionMask, TimeAggregates, Weights,
};
use cpopt_core::rng::{self, Stream};
use cpopt_core::scenario::{self, ScenarioConfig};
use cpopt_core::selector::{dinkelbach_select, dual_bound, SelectorOptions};
use cpopt_testkit as oracle;
use rand::Rng;

type Check = (&'static str, fn(u64) -> Result<(), String>);

fn check_erf_quadrature(_seed: u64) -> Result<(), String> {
    for i in 0..=400 {
        let q = -4.0 + 8.0 * i as f64 / 400.0;
        let diff = (erf::erf(q) - oracle::quadrature_erf(q)).abs();
        if diff > 1e-10 {
            return Err(format!("erf({q}) off by {diff}"));
        }
    }
    Ok(())
}

fn check_taylor_remainder(_seed: u64) -> Result<(), String> {
    for order in 0..=4 {
        for i in 0..=20 {
            let q = -1.0 + 2.0 * i as f64 / 20.0;
            let err = (erf::erf_taylor(q, order) - oracle::quadrature_erf(q)).abs();
            let bound = erf::erf_taylor_remainder_bound(q, order) + 1e-14;
            if err > bound {
                return Err(format!("order {order}, q {q}: error {err} > bound {bound}"));
            }
        }
    }
    Ok(())
}

fn small_config() -> ScenarioConfig {
    ScenarioConfig {
        n_helpers: 8,
        ..Default::default()
    }
}

fn check_composite_identity(seed: u64) -> Result<(), String> {
    for s in seed..seed + 10 {
        let scn = scenario::generate(&small_config(), s).map_err(|e| e.to_string())?;
        let agg = TimeAggregates::from_scenario(&scn).map_err(|e| e.to_string())?;
        let weights = Weights::default();
        for mask_int in 1u64..(1 << 8) {
            let bits: Vec<bool> = (0..8).map(|i| mask_int >> i & 1 == 1).collect();
            let mask = SelectionMask::new(bits, 8).map_err(|e| e.to_string())?;
            let (g, d) = composite_g_d(&agg, &scn.camera, &weights, &mask)
                .map_err(|e| e.to_string())?;
            let direct = f1_location(&agg, &mask)
                + f2_visual_range(&agg, &mask).map_err(|e| e.to_string())?
                + f3_motion_blur(&agg, &scn.camera, &mask, BlurMode::Parallel)
                    .map_err(|e| e.to_string())?;
            if (g / d - direct).abs() > 1e-9 * direct.abs() {
                return Err(format!("seed {s}: G/D {} vs f1+f2+f3 {direct}", g / d));
            }
            let form = assemble_qcqp(&agg, &scn.camera, &weights, 1.5, 8)
                .map_err(|e| e.to_string())?;
            let want = g - 1.5 * d;
            let got = form.eval(&mask.bits);
            if (got - want).abs() > 1e-9 * want.abs().max(1.0) {
                return Err(format!("seed {s}: quadratic form {got} vs {want}"));
            }
        }
    }
    Ok(())
}

fn check_selection_oracle(seed: u64) -> Result<(), String> {
    let cfg = small_config();
    for s in seed..seed + 20 {
        let scn = scenario::generate(&cfg, s).map_err(|e| e.to_string())?;
        let agg = TimeAggregates::from_scenario(&scn).map_err(|e| e.to_string())?;
        for weights in [
            Weights::default(),
            Weights::equalized(&agg, &scn.camera).map_err(|e| e.to_string())?,
        ] {
            for m in 1..=4 {
                let out =
                    dinkelbach_select(&agg, &scn.camera, &weights, m, &SelectorOptions::default())
                        .map_err(|e| e.to_string())?;
                let helper_x0: Vec<f64> = scn.helpers.iter().map(|h| h.x0).collect();
                let helper_v: Vec<f64> = scn.helpers.iter().map(|h| h.v).collect();
                let (bits, ratio) = oracle::brute_force_ratio_argmin(
                    scn.ego.x0,
                    scn.ego.v,
                    &helper_x0,
                    &helper_v,
                    &scn.time_grid(),
                    scn.lead_range,
                    scn.camera.e,
                    scn.camera.r,
                    scn.camera.z,
                    scn.camera.u,
                    (weights.w1, weights.w2, weights.w3),
                    m,
                );
                if out.mask.bits != bits {
                    return Err(format!("seed {s}, m {m}: mask differs from brute force"));
                }
                if (out.ratio - ratio).abs() > 1e-9 * ratio.abs() {
                    return Err(format!("seed {s}, m {m}: ratio {} vs {ratio}", out.ratio));
                }
            }
        }
    }
    Ok(())
}

fn check_dual_soundness(seed: u64) -> Result<(), String> {
    let cfg = small_config();
    for s in seed..seed + 10 {
        let scn = scenario::generate(&cfg, s).map_err(|e| e.to_string())?;
        let agg = TimeAggregates::from_scenario(&scn).map_err(|e| e.to_string())?;
        let weights = Weights::equalized(&agg, &scn.camera).map_err(|e| e.to_string())?;
        let form =
            assemble_qcqp(&agg, &scn.camera, &weights, 1.0, 3).map_err(|e| e.to_string())?;
        let n = form.n();
        let p: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| form.p0[(i, j)]).collect())
            .collect();
        let q: Vec<f64> = (0..n).map(|i| form.q0[i]).collect();
        let primal = oracle::brute_force_quadratic_min(&p, &q, form.h0, 3);
        let cert = dual_bound(&form, &vec![0.0; form.constraints.len()], 120)
            .map_err(|e| e.to_string())?;
        if cert.bound > primal + 1e-6 * primal.abs().max(1.0) {
            return Err(format!("seed {s}: bound {} above primal {primal}", cert.bound));
        }
    }
    Ok(())
}

fn check_collision_monte_carlo(seed: u64) -> Result<(), String> {
    let closed = collision_prob(50.0, 5).map_err(|e| e.to_string())?;
    let trials = 200_000;
    let mc = oracle::monte_carlo_collision(50, 5, trials, seed);
    let sigma = (closed * (1.0 - closed) / trials as f64).sqrt();
    if (mc - closed).abs() > 4.0 * sigma {
        return Err(format!("monte-carlo {mc} vs closed form {closed}"));
    }
    Ok(())
}

fn check_gradients(seed: u64) -> Result<(), String> {
    let comm = cpopt_core::channel::CommConfig::default();
    for s in seed..seed + 20 {
        let m = 2 + (s as usize % 3);
        let mut rng = rng::substream(s, Stream::RandomAllocation);
        let distances: Vec<f64> = (0..m).map(|_| rng.random_range(60.0..420.0)).collect();
        let alloc = allocate_baseline(&comm, m, AllocationStrategy::Random, s)
            .map_err(|e| e.to_string())?;
        for (objective, eta) in [(AllocObjective::Ratio, 1e5), (AllocObjective::Sum, 0.0)] {
            let (gp, gw) = analytic_gradient(&comm, &distances, &alloc, objective, eta)
                .map_err(|e| e.to_string())?;
            let analytic: Vec<f64> = gp.iter().chain(&gw).copied().collect();
            let point: Vec<f64> = alloc.p_w.iter().chain(&alloc.w).copied().collect();
            let fd = oracle::central_difference(
                |x: &[f64]| {
                    let candidate = Allocation {
                        p_w: x[..m].to_vec(),
                        w: x[m..].to_vec(),
                    };
                    objective_value(&comm, &distances, &candidate, objective, eta).unwrap()
                },
                &point,
                1e-5,
            );
            let scale = analytic
                .iter()
                .chain(&fd)
                .fold(0.0f64, |acc, &g| acc.max(g.abs()));
            for i in 0..analytic.len() {
                if (analytic[i] - fd[i]).abs() > 1e-5 * scale {
                    return Err(format!(
                        "seed {s}, comp {i}: analytic {} vs fd {}",
                        analytic[i], fd[i]
                    ));
                }
            }
        }
    }
    Ok(())
}

fn check_allocation_traces(seed: u64) -> Result<(), String> {
    let comm = cpopt_core::channel::CommConfig::default();
    for s in seed..seed + 10 {
        let m = 2 + (s as usize % 4);
        let mut rng = rng::substream(s, Stream::RandomAllocation);
        let distances: Vec<f64> = (0..m).map(|_| rng.random_range(50.0..450.0)).collect();
        let out = dinkelbach_allocate(&comm, &distances, &AllocatorOptions::default())
            .map_err(|e| e.to_string())?;
        for w in out.trace.outer.windows(2) {
            if w[1].eta < w[0].eta - 1e-9 * w[0].eta.abs().max(1.0) {
                return Err(format!("seed {s}: eta not monotone"));
            }
        }
        for step in &out.trace.inner {
            if step.step != 2.0 / (step.j as f64 + 2.0) {
                return Err(format!("seed {s}: step schedule broken at j {}", step.j));
            }
            if step.fw_gap < 0.0 {
                return Err(format!("seed {s}: negative FW gap"));
            }
        }
        out.alloc
            .validate(comm.power_floor(m), comm.p_total_w, comm.effective_pool())
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn check_fusion_statistics(seed: u64) -> Result<(), String> {
    let n = 50_000;
    let delta = 0.3;
    let frames =
        cpopt_core::fusion::simulate_drops(&[delta], n, seed).map_err(|e| e.to_string())?;
    let rate = frames.iter().filter(|f| f[0]).count() as f64 / n as f64;
    let sigma = (delta * (1.0 - delta) / n as f64).sqrt();
    if (rate - 0.7).abs() > 4.0 * sigma {
        return Err(format!("survival rate {rate} vs 0.7"));
    }
    let low = cpopt_core::fusion::simulate_drops(&[0.2], 2_000, seed).map_err(|e| e.to_string())?;
    let high =
        cpopt_core::fusion::simulate_drops(&[0.6], 2_000, seed).map_err(|e| e.to_string())?;
    for f in 0..2_000 {
        if high[f][0] && !low[f][0] {
            return Err("drop coupling not monotone".into());
        }
    }
    Ok(())
}

fn check_ppp_mean(seed: u64) -> Result<(), String> {
    let model = cpopt_core::scenario::ArrivalModel {
        rho: 0.01,
        a: 0.0,
        b: 1000.0,
    };
    let reps = 4_000u64;
    let mut total = 0usize;
    for s in 0..reps {
        total += cpopt_core::scenario::sample_positions(&model, seed ^ s)
            .map_err(|e| e.to_string())?
            .len();
    }
    let mean = total as f64 / reps as f64;
    // Poisson(10): sigma of the mean over reps draws.
    let sigma = (10.0f64 / reps as f64).sqrt();
    if (mean - 10.0).abs() > 4.0 * sigma {
        return Err(format!("PPP mean {mean} vs 10"));
    }
    Ok(())
}

const CHECKS: &[Check] = &[
    ("erf vs quadrature", check_erf_quadrature),
    ("erf series remainder bound", check_taylor_remainder),
    ("composite and quadratic-form identities", check_composite_identity),
    ("selection vs exhaustive enumeration", check_selection_oracle),
    ("dual bound soundness", check_dual_soundness),
    ("collision model vs monte-carlo", check_collision_monte_carlo),
    ("analytic gradients vs central differences", check_gradients),
    ("allocation traces and feasibility", check_allocation_traces),
    ("packet-drop statistics and coupling", check_fusion_statistics),
    ("arrival process mean count", check_ppp_mean),
];

/// Run every oracle check, printing one line per check. Returns the number
/// of failures.
pub fn run_all(seed: u64, out: &mut impl std::io::Write) -> std::io::Result<usize> {
    let mut failures = 0;
    for (name, check) in CHECKS {
        match check(seed) {
            Ok(()) => writeln!(out, "ok   {name}")?,
            Err(msg) => {
                failures += 1;
                writeln!(out, "FAIL {name}: {msg}")?;
            }
        }
    }
    Ok(failures)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verify_suite_passes() {
        let mut sink = Vec::new();
        let failures = run_all(2024, &mut sink).unwrap();
        let text = String::from_utf8(sink).unwrap();
        assert_eq!(failures, 0, "{text}");
        assert_eq!(text.lines().count(), CHECKS.len());
    }
}
