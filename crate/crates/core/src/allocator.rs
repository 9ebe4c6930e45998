//! Transmit-power and resource-block allocation across selected vehicles.
//!
//! The driver maximizes the global throughput-to-energy ratio
//! `N(x)/D(x) = sum_i zeta_i / sum_i E_i` with Dinkelbach's algorithm: each
//! outer iteration maximizes the parametric objective `N - eta*D` with the
//! Frank-Wolfe conditional gradient method over the product feasible set
//! `{P : P_i >= P_min, sum P <= P_T} x {w : w >= 0, sum w = w_T}`, whose
//! linear subproblems have closed-form vertex solutions. Inner runs are
//! warm-started from the previous outer solution and return their best
//! iterate, which keeps the eta sequence monotone non-decreasing.
//!
//! The per-vehicle sum `sum_i R_ch w_i (1 - delta_i)^2 / P_i` is available
//! as an alternative direct Frank-Wolfe objective; both are reported by the
//! harness. Powers are optimized in watts (the objective is singular at
//! zero, hence the floor) and converted to dBm inside the sensing margin.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{self, CommConfig, LinkState};
use crate::rng::{self, Stream};
use crate::{Error, Result};

/// Which error function the objective evaluation uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErfMode {
    Exact,
    /// Truncated power series with the given order (0 = linear truncation).
    Taylor(usize),
}

/// Which objective the optimizer drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocObjective {
    /// Global ratio total-throughput / total-energy via Dinkelbach.
    Ratio,
    /// Per-vehicle sum maximized directly with Frank-Wolfe.
    Sum,
}

/// Baseline allocation strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocationStrategy {
    Uniform,
    Random,
}

/// Per-vehicle transmit powers (W) and resource-block shares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub p_w: Vec<f64>,
    pub w: Vec<f64>,
}

impl Allocation {
    pub fn m(&self) -> usize {
        self.p_w.len()
    }

    pub fn validate(&self, p_min: f64, p_total: f64, w_total: f64) -> Result<()> {
        let slack = 1e-9 * p_total.max(1.0);
        if self.p_w.len() != self.w.len() {
            return Err(Error::InvalidConfig(format!(
                "allocation length mismatch: {} powers, {} RB shares",
                self.p_w.len(),
                self.w.len()
            )));
        }
        for &p in &self.p_w {
            if p < p_min - slack {
                return Err(Error::InvalidConfig(format!(
                    "power {p} below floor {p_min}"
                )));
            }
        }
        if self.p_w.iter().sum::<f64>() > p_total + slack {
            return Err(Error::InvalidConfig("power budget exceeded".into()));
        }
        let w_slack = 1e-9 * w_total.max(1.0);
        for &w in &self.w {
            if w < -w_slack {
                return Err(Error::InvalidConfig(format!("negative RB share {w}")));
            }
        }
        if (self.w.iter().sum::<f64>() - w_total).abs() > w_slack {
            return Err(Error::InvalidConfig(format!(
                "RB shares sum to {}, pool is {w_total}",
                self.w.iter().sum::<f64>()
            )));
        }
        Ok(())
    }
}

/// One Frank-Wolfe iteration record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FwStep {
    pub outer_k: usize,
    pub j: usize,
    pub objective: f64,
    pub fw_gap: f64,
    /// Step size `2 / (j + 2)`.
    pub step: f64,
}

/// One Dinkelbach outer iteration record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuterStep {
    pub k: usize,
    pub eta: f64,
    /// Best parametric value `F(eta_k)` the inner solver reached.
    pub f_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct FwTrace {
    pub inner: Vec<FwStep>,
    pub outer: Vec<OuterStep>,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllocatorOptions {
    /// Relative tolerance on the outer Dinkelbach residual.
    pub epsilon: f64,
    pub k_max: usize,
    pub j_max: usize,
    /// Relative tolerance on the Frank-Wolfe gap.
    pub gap_tol: f64,
}

impl Default for AllocatorOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            k_max: 30,
            j_max: 500,
            gap_tol: 1e-6,
        }
    }
}

/// Result of the optimizing allocator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocOutcome {
    pub alloc: Allocation,
    /// Achieved throughput-per-energy ratio.
    pub ratio: f64,
    pub trace: FwTrace,
}

fn validate_inputs(config: &CommConfig, distances: &[f64]) -> Result<()> {
    config.validate()?;
    if distances.is_empty() {
        return Err(Error::EmptySelection);
    }
    for &d in distances {
        if !(d > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "link distance must be positive, got {d}"
            )));
        }
    }
    let m = distances.len();
    let p_min = config.power_floor(m);
    if m as f64 * p_min > config.p_total_w {
        return Err(Error::InfeasiblePowerBox {
            m,
            p_min_w: p_min,
            p_total_w: config.p_total_w,
        });
    }
    Ok(())
}

/// Per-link combined error rates `delta_Er,i` for powers in watts.
pub fn link_error_rates(
    config: &CommConfig,
    distances: &[f64],
    p_w: &[f64],
    erf_mode: ErfMode,
) -> Result<Vec<f64>> {
    let m = distances.len();
    let delta_col = channel::collision_prob(config.effective_pool(), m)?;
    distances
        .iter()
        .zip(p_w)
        .map(|(&d, &p)| {
            let link = LinkState {
                d,
                p_tx_dbm: channel::watts_to_dbm(p),
                w: 0.0,
            };
            let delta_sen = match erf_mode {
                ErfMode::Exact => channel::sensing_error(config, &link),
                ErfMode::Taylor(order) => channel::sensing_error_taylor(config, &link, order),
            };
            Ok(channel::total_error(delta_col, delta_sen))
        })
        .collect()
}

/// Total throughput and total energy at fixed error rates.
pub fn throughput_energy_with_errors(
    config: &CommConfig,
    alloc: &Allocation,
    deltas: &[f64],
) -> Result<(f64, f64)> {
    let mut zeta = 0.0;
    let mut energy = 0.0;
    for i in 0..alloc.m() {
        let delta = deltas[i];
        if delta >= 1.0 {
            return Err(Error::LinkDead);
        }
        zeta += config.r_ch * alloc.w[i] * (1.0 - delta);
        energy += alloc.p_w[i] * config.t_tx / (1.0 - delta);
    }
    Ok((zeta, energy))
}

/// Per-vehicle sum objective at fixed error rates:
/// `sum_i R_ch w_i (1 - delta_i)^2 / P_i`.
pub fn sum_objective_with_errors(
    config: &CommConfig,
    alloc: &Allocation,
    deltas: &[f64],
) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..alloc.m() {
        if deltas[i] >= 1.0 {
            return Err(Error::LinkDead);
        }
        let kept = 1.0 - deltas[i];
        total += config.r_ch * alloc.w[i] * kept * kept / alloc.p_w[i];
    }
    Ok(total)
}

/// Total throughput and energy `(sum zeta_i, sum E_i)` of an allocation.
pub fn throughput_energy(
    config: &CommConfig,
    distances: &[f64],
    alloc: &Allocation,
    erf_mode: ErfMode,
) -> Result<(f64, f64)> {
    validate_inputs(config, distances)?;
    let deltas = link_error_rates(config, distances, &alloc.p_w, erf_mode)?;
    throughput_energy_with_errors(config, alloc, &deltas)
}

/// Global ratio objective `sum zeta_i / sum E_i`.
pub fn ratio_objective(
    config: &CommConfig,
    distances: &[f64],
    alloc: &Allocation,
    erf_mode: ErfMode,
) -> Result<f64> {
    let (zeta, energy) = throughput_energy(config, distances, alloc, erf_mode)?;
    if energy <= 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok(zeta / energy)
}

/// Per-vehicle sum objective of an allocation.
pub fn sum_objective(
    config: &CommConfig,
    distances: &[f64],
    alloc: &Allocation,
    erf_mode: ErfMode,
) -> Result<f64> {
    validate_inputs(config, distances)?;
    let deltas = link_error_rates(config, distances, &alloc.p_w, erf_mode)?;
    sum_objective_with_errors(config, alloc, &deltas)
}

/// d(delta_Er)/dP for one link, exact erf: the margin is affine in dBm and
/// logarithmic in watts, and d(erf)/dQ is the Gaussian kernel, so
/// d(delta_SEN)/dP = -(1/sqrt(pi)) e^{-Q^2} * 10 / (ln10 * P * sigma * sqrt2).
fn delta_derivative(config: &CommConfig, delta_col: f64, d: f64, p_w: f64) -> f64 {
    let link = LinkState {
        d,
        p_tx_dbm: channel::watts_to_dbm(p_w),
        w: 0.0,
    };
    let q = channel::sensing_margin(config, &link);
    let dq_dp =
        10.0 / (std::f64::consts::LN_10 * p_w * config.sigma_sh * std::f64::consts::SQRT_2);
    let dsen_dq = -(1.0 / std::f64::consts::PI.sqrt()) * (-q * q).exp();
    delta_col * dsen_dq * dq_dp
}

/// Parametric objective `N - eta*D` and its gradient, exact erf.
fn subproblem_value(
    config: &CommConfig,
    distances: &[f64],
    alloc: &Allocation,
    eta: f64,
) -> Result<f64> {
    let deltas = link_error_rates(config, distances, &alloc.p_w, ErfMode::Exact)?;
    let (zeta, energy) = throughput_energy_with_errors(config, alloc, &deltas)?;
    Ok(zeta - eta * energy)
}

fn subproblem_gradient(
    config: &CommConfig,
    distances: &[f64],
    alloc: &Allocation,
    eta: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = distances.len();
    let delta_col = channel::collision_prob(config.effective_pool(), m)?;
    let deltas = link_error_rates(config, distances, &alloc.p_w, ErfMode::Exact)?;
    let mut grad_p = vec![0.0; m];
    let mut grad_w = vec![0.0; m];
    for i in 0..m {
        let kept = 1.0 - deltas[i];
        if kept <= 0.0 {
            return Err(Error::LinkDead);
        }
        let dd = delta_derivative(config, delta_col, distances[i], alloc.p_w[i]);
        grad_w[i] = config.r_ch * kept;
        grad_p[i] = -config.r_ch * alloc.w[i] * dd
            - eta * config.t_tx * (1.0 / kept + alloc.p_w[i] * dd / (kept * kept));
    }
    Ok((grad_p, grad_w))
}

/// Per-vehicle sum objective gradient, exact erf.
fn sum_gradient(
    config: &CommConfig,
    distances: &[f64],
    alloc: &Allocation,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = distances.len();
    let delta_col = channel::collision_prob(config.effective_pool(), m)?;
    let deltas = link_error_rates(config, distances, &alloc.p_w, ErfMode::Exact)?;
    let mut grad_p = vec![0.0; m];
    let mut grad_w = vec![0.0; m];
    for i in 0..m {
        let kept = 1.0 - deltas[i];
        if kept <= 0.0 {
            return Err(Error::LinkDead);
        }
        let p = alloc.p_w[i];
        let dd = delta_derivative(config, delta_col, distances[i], p);
        grad_w[i] = config.r_ch * kept * kept / p;
        grad_p[i] = config.r_ch * alloc.w[i] * kept * (-2.0 * dd * p - kept) / (p * p);
    }
    Ok((grad_p, grad_w))
}

/// Exact-erf gradients of the optimizer objectives, exposed for validation
/// against finite differences.
pub fn analytic_gradient(
    config: &CommConfig,
    distances: &[f64],
    alloc: &Allocation,
    objective: AllocObjective,
    eta: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    validate_inputs(config, distances)?;
    match objective {
        AllocObjective::Ratio => subproblem_gradient(config, distances, alloc, eta),
        AllocObjective::Sum => sum_gradient(config, distances, alloc),
    }
}

/// Value of the optimizer objective at an allocation (ratio mode evaluates
/// the parametric `N - eta*D`).
pub fn objective_value(
    config: &CommConfig,
    distances: &[f64],
    alloc: &Allocation,
    objective: AllocObjective,
    eta: f64,
) -> Result<f64> {
    validate_inputs(config, distances)?;
    match objective {
        AllocObjective::Ratio => subproblem_value(config, distances, alloc, eta),
        AllocObjective::Sum => sum_objective(config, distances, alloc, ErfMode::Exact),
    }
}

/// Linear minimization oracle over the product feasible set.
///
/// Returns the vertex minimizing `psi . gradient`: the RB budget rides on
/// the coordinate with the smallest `gradient_w` entry, and the power slack
/// `P_T - M*P_min` lands on the smallest `gradient_p` entry when that entry
/// is negative (otherwise every power stays at its floor). Ties break to
/// the lowest index. Callers maximizing an objective pass negated
/// gradients.
pub fn fw_linear_oracle(
    gradient_p: &[f64],
    gradient_w: &[f64],
    p_min: f64,
    p_total: f64,
    w_total: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = gradient_p.len();
    if m == 0 || gradient_w.len() != m {
        return Err(Error::InvalidConfig(
            "gradient vectors must be nonempty and equally long".into(),
        ));
    }
    if m as f64 * p_min > p_total {
        return Err(Error::InfeasiblePowerBox {
            m,
            p_min_w: p_min,
            p_total_w: p_total,
        });
    }
    for g in gradient_p.iter().chain(gradient_w) {
        if !g.is_finite() {
            return Err(Error::InvalidConfig("gradient entries must be finite".into()));
        }
    }

    let argmin = |xs: &[f64]| {
        let mut best = 0;
        for (i, &x) in xs.iter().enumerate().skip(1) {
            if x < xs[best] {
                best = i;
            }
        }
        best
    };

    let mut w = vec![0.0; m];
    w[argmin(gradient_w)] = w_total;

    let mut p = vec![p_min; m];
    let j = argmin(gradient_p);
    if gradient_p[j] < 0.0 {
        p[j] += p_total - m as f64 * p_min;
    }
    Ok((p, w))
}

struct InnerResult {
    alloc: Allocation,
    best_value: f64,
}

/// Frank-Wolfe ascent on one parametric subproblem, recording iterations
/// into `trace`. Returns the best iterate seen.
fn fw_maximize(
    config: &CommConfig,
    distances: &[f64],
    x0: Allocation,
    objective: AllocObjective,
    eta: f64,
    options: &AllocatorOptions,
    trace: &mut FwTrace,
    outer_k: usize,
) -> Result<InnerResult> {
    let m = distances.len();
    let p_min = config.power_floor(m);
    let (p_total, w_total) = (config.p_total_w, config.effective_pool());

    let value = |x: &Allocation| objective_value(config, distances, x, objective, eta);

    let mut x = x0;
    let mut best_value = value(&x)?;
    let mut best = x.clone();

    for j in 1..=options.j_max {
        let (grad_p, grad_w) = analytic_gradient(config, distances, &x, objective, eta)?;
        // Maximization: hand the minimizing oracle the negated gradient.
        let neg_p: Vec<f64> = grad_p.iter().map(|g| -g).collect();
        let neg_w: Vec<f64> = grad_w.iter().map(|g| -g).collect();
        let (vp, vw) = fw_linear_oracle(&neg_p, &neg_w, p_min, p_total, w_total)?;

        let mut gap = 0.0;
        for i in 0..m {
            gap += grad_p[i] * (vp[i] - x.p_w[i]) + grad_w[i] * (vw[i] - x.w[i]);
        }
        let current = value(&x)?;
        let step = 2.0 / (j as f64 + 2.0);
        trace.inner.push(FwStep {
            outer_k,
            j,
            objective: current,
            fw_gap: gap.max(0.0),
            step,
        });
        if current > best_value {
            best_value = current;
            best = x.clone();
        }
        if gap <= options.gap_tol * current.abs().max(1.0) {
            break;
        }
        for i in 0..m {
            x.p_w[i] += step * (vp[i] - x.p_w[i]);
            x.w[i] += step * (vw[i] - x.w[i]);
        }
    }
    let final_value = value(&x)?;
    if final_value > best_value {
        best_value = final_value;
        best = x;
    }
    Ok(InnerResult {
        alloc: best,
        best_value,
    })
}

/// Frank-Wolfe ascent of the exact-erf parametric objective `N - eta*D`
/// from a feasible start.
pub fn frank_wolfe(
    config: &CommConfig,
    distances: &[f64],
    eta: f64,
    x0: Allocation,
    options: &AllocatorOptions,
) -> Result<(Allocation, FwTrace)> {
    validate_inputs(config, distances)?;
    let m = distances.len();
    x0.validate(
        config.power_floor(m),
        config.p_total_w,
        config.effective_pool(),
    )?;
    let mut trace = FwTrace::default();
    let result = fw_maximize(
        config,
        distances,
        x0,
        AllocObjective::Ratio,
        eta,
        options,
        &mut trace,
        1,
    )?;
    trace.converged = true;
    Ok((result.alloc, trace))
}

/// Maximize throughput-per-energy with the combined Dinkelbach/Frank-Wolfe
/// scheme. Starts from the uniform allocation, warm-starts each inner run,
/// and returns the best feasible allocation with its full trace.
pub fn dinkelbach_allocate(
    config: &CommConfig,
    distances: &[f64],
    options: &AllocatorOptions,
) -> Result<AllocOutcome> {
    validate_inputs(config, distances)?;
    let m = distances.len();
    let mut x = uniform_allocation(config, m)?;
    let (zeta0, energy0) =
        throughput_energy(config, distances, &x, ErfMode::Exact)?;
    if energy0 <= 0.0 {
        return Err(Error::ZeroDenominator);
    }
    let mut eta = zeta0 / energy0;

    let mut trace = FwTrace::default();
    for k in 1..=options.k_max {
        let inner = fw_maximize(
            config,
            distances,
            x.clone(),
            AllocObjective::Ratio,
            eta,
            options,
            &mut trace,
            k,
        )?;
        x = inner.alloc;
        let f_value = inner.best_value;
        trace.outer.push(OuterStep { k, eta, f_value });

        let (zeta, energy) = throughput_energy(config, distances, &x, ErfMode::Exact)?;
        let ratio = zeta / energy;
        if f_value <= options.epsilon * zeta.abs().max(1.0) {
            trace.converged = true;
            return Ok(AllocOutcome {
                alloc: x,
                ratio,
                trace,
            });
        }
        eta = ratio;
    }
    Err(Error::AllocationNoConvergence {
        k_max: options.k_max,
        trace: Box::new(trace),
    })
}

/// Maximize the per-vehicle sum objective by direct Frank-Wolfe (no outer
/// fractional loop), from the uniform start.
pub fn direct_fw_sum(
    config: &CommConfig,
    distances: &[f64],
    options: &AllocatorOptions,
) -> Result<AllocOutcome> {
    validate_inputs(config, distances)?;
    let m = distances.len();
    let x0 = uniform_allocation(config, m)?;
    let mut trace = FwTrace::default();
    let inner = fw_maximize(
        config,
        distances,
        x0,
        AllocObjective::Sum,
        0.0,
        options,
        &mut trace,
        1,
    )?;
    trace.converged = true;
    let (zeta, energy) = throughput_energy(config, distances, &inner.alloc, ErfMode::Exact)?;
    Ok(AllocOutcome {
        alloc: inner.alloc,
        ratio: zeta / energy,
        trace,
    })
}

fn uniform_allocation(config: &CommConfig, m: usize) -> Result<Allocation> {
    let alloc = Allocation {
        p_w: vec![config.p_total_w / m as f64; m],
        w: vec![config.effective_pool() / m as f64; m],
    };
    alloc.validate(
        config.power_floor(m),
        config.p_total_w,
        config.effective_pool(),
    )?;
    Ok(alloc)
}

/// Baseline allocations: `uniform` splits both budgets evenly; `random`
/// draws a uniform simplex split of the RB pool and of the power slack
/// above the floors (seeded, always feasible).
pub fn allocate_baseline(
    config: &CommConfig,
    m: usize,
    strategy: AllocationStrategy,
    seed: u64,
) -> Result<Allocation> {
    config.validate()?;
    if m == 0 {
        return Err(Error::EmptySelection);
    }
    let p_min = config.power_floor(m);
    if m as f64 * p_min > config.p_total_w {
        return Err(Error::InfeasiblePowerBox {
            m,
            p_min_w: p_min,
            p_total_w: config.p_total_w,
        });
    }
    match strategy {
        AllocationStrategy::Uniform => uniform_allocation(config, m),
        AllocationStrategy::Random => {
            let mut rng = rng::substream(seed, Stream::RandomAllocation);
            // Normalized Exp(1) draws are a flat Dirichlet.
            let simplex = |rng: &mut rand_chacha::ChaCha12Rng, k: usize| -> Vec<f64> {
                let draws: Vec<f64> = (0..k)
                    .map(|_| -(1.0 - rng.random::<f64>()).ln())
                    .collect();
                let total: f64 = draws.iter().sum();
                draws.into_iter().map(|x| x / total).collect()
            };
            let w_split = simplex(&mut rng, m);
            let p_split = simplex(&mut rng, m);
            let w_total = config.effective_pool();
            let slack = config.p_total_w - m as f64 * p_min;
            let alloc = Allocation {
                p_w: p_split.iter().map(|f| p_min + slack * f).collect(),
                w: w_split.iter().map(|f| w_total * f).collect(),
            };
            alloc.validate(p_min, config.p_total_w, w_total)?;
            Ok(alloc)
        }
    }
}

/// Round real RB shares to integers summing to `target` by largest
/// remainder. Used at reporting time; the optimizer itself stays real.
pub fn round_largest_remainder(w: &[f64], target: u64) -> Vec<u64> {
    let floors: Vec<u64> = w.iter().map(|&x| x.max(0.0).floor() as u64).collect();
    let assigned: u64 = floors.iter().sum();
    let mut out = floors;
    let mut leftover = target.saturating_sub(assigned);
    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = w[a] - w[a].floor();
        let fb = w[b] - w[b].floor();
        fb.partial_cmp(&fa).expect("finite shares").then(a.cmp(&b))
    });
    for i in order {
        if leftover == 0 {
            break;
        }
        out[i] += 1;
        leftover -= 1;
    }
    out
}
