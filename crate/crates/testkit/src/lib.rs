//! Independent reference oracles for validating the cpopt solvers.
//!
//! Everything here re-derives expected values from first principles over
//! plain slices and closures, deliberately avoiding the library's own code
//! paths: quadrature for the error function, double loops for the selection
//! criteria, exhaustive enumeration for binary optima, grid and
//! golden-section search for the continuous allocation, Monte-Carlo for the
//! collision model, and central differences for gradients.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// erf by composite Simpson quadrature of `(2/sqrt(pi)) int_0^q e^{-t^2} dt`.
///
/// With 4000 panels the rule error is far below 1e-12 on `|q| <= 6`.
pub fn quadrature_erf(q: f64) -> f64 {
    let n = 4000usize;
    let a = 0.0;
    let b = q.abs();
    if b == 0.0 {
        return 0.0;
    }
    let h = (b - a) / n as f64;
    let f = |t: f64| (-t * t).exp();
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let t = a + h * i as f64;
        sum += if i % 2 == 1 { 4.0 } else { 2.0 } * f(t);
    }
    let integral = sum * h / 3.0;
    (2.0 / std::f64::consts::PI.sqrt() * integral).copysign(q)
}

/// Fast series/cap erf used inside heavy grid oracles: Maclaurin series for
/// |q| <= 4 (checked against quadrature in this crate's tests), saturated
/// to +-1 beyond 5 where erfc < 2e-12.
pub fn series_erf(q: f64) -> f64 {
    let a = q.abs();
    if a >= 5.0 {
        return 1.0f64.copysign(q);
    }
    // Non-alternating form avoids cancellation.
    let q2 = a * a;
    let mut term = a;
    let mut sum = a;
    for n in 1..400 {
        term *= 2.0 * q2 / (2.0 * n as f64 + 1.0);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    (2.0 / std::f64::consts::PI.sqrt() * (-q2).exp() * sum).copysign(q)
}

/// Mean of a normal truncated to `[a, b]`, by Simpson quadrature of the
/// renormalized density.
pub fn truncated_normal_mean(mu: f64, sigma: f64, a: f64, b: f64) -> f64 {
    let n = 20_000usize;
    let h = (b - a) / n as f64;
    let density = |v: f64| {
        let z = (v - mu) / sigma;
        (-0.5 * z * z).exp()
    };
    let mut mass = density(a) + density(b);
    let mut first = a * density(a) + b * density(b);
    for i in 1..n {
        let v = a + h * i as f64;
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        mass += w * density(v);
        first += w * v * density(v);
    }
    first / mass
}

/// The three selection criteria evaluated by direct double loops over the
/// raw scenario data (positions, velocities, time grid). `lead_range` is
/// the visual range assigned to the last helper.
pub struct LoopCriteria {
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn loop_criteria(
    ego_x0: f64,
    ego_v: f64,
    helper_x0: &[f64],
    helper_v: &[f64],
    grid: &[f64],
    lead_range: f64,
    camera_e: f64,
    camera_r: f64,
    camera_z: f64,
    camera_u: f64,
    mask: &[bool],
) -> LoopCriteria {
    let n = helper_x0.len();
    let mut f1 = 0.0;
    let mut range_sum = 0.0;
    let mut f3 = 0.0;
    for i in 0..n {
        if !mask[i] {
            continue;
        }
        for &t in grid {
            let xi = helper_x0[i] + helper_v[i] * t;
            let x0 = ego_x0 + ego_v * t;
            f1 += xi - x0;
            range_sum += if i + 1 < n {
                (helper_x0[i + 1] + helper_v[i + 1] * t) - xi
            } else {
                lead_range
            };
            f3 += helper_v[i] * camera_e * camera_r / (camera_z * camera_u);
        }
    }
    LoopCriteria {
        f1,
        f2: 1.0 / range_sum,
        f3,
    }
}

/// Exhaustive argmin of the weighted composite ratio over masks of size
/// `1..=m`, ties to the lexicographically smallest bit vector. Returns
/// `(bits, ratio)`.
#[allow(clippy::too_many_arguments)]
pub fn brute_force_ratio_argmin(
    ego_x0: f64,
    ego_v: f64,
    helper_x0: &[f64],
    helper_v: &[f64],
    grid: &[f64],
    lead_range: f64,
    camera_e: f64,
    camera_r: f64,
    camera_z: f64,
    camera_u: f64,
    weights: (f64, f64, f64),
    m: usize,
) -> (Vec<bool>, f64) {
    let n = helper_x0.len();
    let mut best: Option<(Vec<bool>, f64)> = None;
    for mask_int in 1u64..(1u64 << n) {
        if mask_int.count_ones() as usize > m {
            continue;
        }
        let bits: Vec<bool> = (0..n).map(|i| mask_int >> i & 1 == 1).collect();
        let c = loop_criteria(
            ego_x0, ego_v, helper_x0, helper_v, grid, lead_range, camera_e, camera_r, camera_z,
            camera_u, &bits,
        );
        let ratio = weights.0 * c.f1 + weights.1 * c.f2 + weights.2 * c.f3;
        let better = match &best {
            None => true,
            Some((bbits, bratio)) => ratio < *bratio || (ratio == *bratio && bits < *bbits),
        };
        if better {
            best = Some((bits, ratio));
        }
    }
    best.expect("n >= 1")
}

/// Exhaustive minimum of a quadratic form `s'P s + q's + h` over binary
/// masks of size `1..=m`, via plain nested loops.
pub fn brute_force_quadratic_min(p: &[Vec<f64>], q: &[f64], h: f64, m: usize) -> f64 {
    let n = q.len();
    let mut best = f64::INFINITY;
    for mask_int in 1u64..(1u64 << n) {
        if mask_int.count_ones() as usize > m {
            continue;
        }
        let mut value = h;
        for i in 0..n {
            if mask_int >> i & 1 == 0 {
                continue;
            }
            value += q[i];
            for j in 0..n {
                if mask_int >> j & 1 == 1 {
                    value += p[i][j];
                }
            }
        }
        best = best.min(value);
    }
    best
}

/// Monte-Carlo collision probability: `m` vehicles draw uniformly from
/// `w_t` resource blocks; count trials where vehicle 0 shares its block.
pub fn monte_carlo_collision(w_t: u64, m: usize, trials: usize, seed: u64) -> f64 {
    use rand::Rng;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut collided = 0usize;
    for _ in 0..trials {
        let mine = rng.random_range(0..w_t);
        if (1..m).any(|_| rng.random_range(0..w_t) == mine) {
            collided += 1;
        }
    }
    collided as f64 / trials as f64
}

/// Central-difference gradient of `f` at `x` with per-component step
/// `h_rel * max(|x_i|, 3e-4)`. A relative step keeps truncation error
/// comparable across variables living on very different scales (watts near
/// 1e-4 next to resource-block counts near 40).
pub fn central_difference<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h_rel: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let h = h_rel * x[i].abs().max(3e-4);
            let mut hi = x.to_vec();
            let mut lo = x.to_vec();
            hi[i] += h;
            lo[i] -= h;
            (f(&hi) - f(&lo)) / (2.0 * h)
        })
        .collect()
}

/// Golden-section maximization of a unimodal-ish `f` on `[a, b]`, seeded by
/// a coarse scan so a mildly multimodal profile still lands in the right
/// basin.
pub fn scan_golden_max<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, scan: usize, iters: usize) -> f64 {
    let mut best_x = a;
    let mut best_v = f(a);
    for i in 0..=scan {
        let x = a + (b - a) * i as f64 / scan as f64;
        let v = f(x);
        if v > best_v {
            best_v = v;
            best_x = x;
        }
    }
    let width = (b - a) / scan as f64;
    let (mut lo, mut hi) = ((best_x - width).max(a), (best_x + width).min(b));
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = f(x1);
        }
    }
    let mid = 0.5 * (lo + hi);
    f(mid).max(best_v)
}

/// Channel parameters for the self-contained allocation oracles.
#[derive(Debug, Clone, Copy)]
pub struct OracleChannel {
    pub gamma: f64,
    pub l0: f64,
    pub sh_mean: f64,
    pub sigma_sh: f64,
    pub p_sen: f64,
    pub r_ch: f64,
    pub t_tx: f64,
    pub delta_col: f64,
}

impl OracleChannel {
    fn delta_er(&self, d: f64, p_w: f64) -> f64 {
        let p_dbm = 10.0 * (p_w * 1000.0).log10();
        let q = (p_dbm - 10.0 * self.gamma * d.log10() - self.l0 - self.sh_mean - self.p_sen)
            / (self.sigma_sh * std::f64::consts::SQRT_2);
        self.delta_col * 0.5 * (1.0 - series_erf(q))
    }

    /// Throughput / energy of an allocation, re-derived from the formulas.
    pub fn ratio(&self, distances: &[f64], p_w: &[f64], w: &[f64]) -> f64 {
        let mut zeta = 0.0;
        let mut energy = 0.0;
        for i in 0..distances.len() {
            let delta = self.delta_er(distances[i], p_w[i]);
            zeta += self.r_ch * w[i] * (1.0 - delta);
            energy += p_w[i] * self.t_tx / (1.0 - delta);
        }
        zeta / energy
    }
}

/// Best ratio over a grid for two vehicles: `grid_n` power points for
/// vehicle 0 (vehicle 1 takes the budget remainder) crossed with `grid_n`
/// RB splits, plus the all-floors and uniform probes. A feasible-point
/// maximum, hence a sound lower bound on the true optimum.
pub fn grid_ratio_oracle_m2(
    channel: &OracleChannel,
    distances: &[f64],
    p_min: f64,
    p_total: f64,
    w_total: f64,
    grid_n: usize,
) -> f64 {
    assert_eq!(distances.len(), 2);
    let mut best = f64::NEG_INFINITY;
    let mut consider = |p: [f64; 2], w: [f64; 2]| {
        let value = channel.ratio(distances, &p, &w);
        if value > best {
            best = value;
        }
    };
    for i in 0..grid_n {
        let p1 = p_min + (p_total - 2.0 * p_min) * i as f64 / (grid_n - 1) as f64;
        let p2 = p_total - p1;
        for j in 0..grid_n {
            let w1 = w_total * j as f64 / (grid_n - 1) as f64;
            consider([p1, p2], [w1, w_total - w1]);
        }
    }
    for j in 0..grid_n {
        let w1 = w_total * j as f64 / (grid_n - 1) as f64;
        // Floor and uniform power probes cover budget-slack optima the
        // saturated grid misses.
        consider([p_min, p_min], [w1, w_total - w1]);
        consider([0.5 * p_total, 0.5 * p_total], [w1, w_total - w1]);
    }
    best
}
