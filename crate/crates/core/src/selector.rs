//! Helper-vehicle selection: Dinkelbach over exact subset enumeration,
//! a Lagrangian-dual lower bound, and baseline strategies.
//!
//! At fleet scale (N around 10) the parametric subproblem
//! `min G(s) - eta*D(s)` is solved exactly by enumerating subsets of size
//! `1..=M`, which gives Dinkelbach a clean finite-convergence guarantee: the
//! iteration stops at a fixed point of the mask, which is then the exact
//! argmin of `G/D`. The dual of the QCQP is kept as an independent
//! lower-bound verifier, evaluated through an eigendecomposition
//! pseudo-inverse and ascended by projected supergradient steps.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::objective::{
    assemble_qcqp, composite_g_d, QcqpForm, SelectionMask, TimeAggregates, Weights,
};
use crate::rng::{self, Stream};
use crate::scenario::{CameraConstants, Scenario};
use crate::{Error, Result};

/// Largest candidate count the exact enumerator accepts.
pub const N_CAP: usize = 25;

/// Baseline selection strategies from the comparison studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineStrategy {
    /// Uniform over size-M subsets.
    Random,
    /// The M helpers closest to the ego at t = 0.
    Proximity,
    /// The M helpers with lowest velocity at t = 0.
    MinVelocity,
}

/// One Dinkelbach iteration record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DinkelbachStep {
    pub k: usize,
    pub eta: f64,
    /// Subproblem optimum `F(eta_k)`; nonpositive once eta comes from a
    /// feasible ratio, shrinking to zero at convergence.
    pub f_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct DinkelbachTrace {
    pub steps: Vec<DinkelbachStep>,
    pub converged: bool,
}

/// Result of the optimizing selector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionOutcome {
    pub mask: SelectionMask,
    /// Achieved composite ratio `G/D`.
    pub ratio: f64,
    pub trace: DinkelbachTrace,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectorOptions {
    /// Relative optimality tolerance on `|F(eta_k)|`.
    pub epsilon: f64,
    pub k_max: usize,
}

impl Default for SelectorOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-8,
            k_max: 50,
        }
    }
}

fn bits_from_int(mask: u64, n: usize) -> Vec<bool> {
    (0..n).map(|i| mask >> i & 1 == 1).collect()
}

/// Exact minimizer of the quadratic form over binary masks of size `1..=m`.
///
/// Ties break to the lexicographically smallest bit vector.
pub fn solve_subproblem_exact(form: &QcqpForm, m: usize) -> Result<(SelectionMask, f64)> {
    let n = form.n();
    if n > N_CAP {
        return Err(Error::EnumerationCapExceeded { n, cap: N_CAP });
    }
    if n == 0 || m == 0 {
        return Err(Error::EmptySelection);
    }
    let mut best: Option<(Vec<bool>, f64)> = None;
    for mask_int in 1u64..(1u64 << n) {
        if mask_int.count_ones() as usize > m {
            continue;
        }
        let bits = bits_from_int(mask_int, n);
        let value = form.eval(&bits);
        let better = match &best {
            None => true,
            Some((best_bits, best_value)) => {
                value < *best_value || (value == *best_value && bits < *best_bits)
            }
        };
        if better {
            best = Some((bits, value));
        }
    }
    let (bits, value) = best.expect("at least one feasible mask");
    Ok((SelectionMask::new(bits, m)?, value))
}

/// Proximity pick: the `m` helpers nearest the ego (the first `m`, since
/// helpers are ordered by position).
fn proximity_mask(n: usize, m: usize) -> Result<SelectionMask> {
    let m_eff = m.min(n);
    SelectionMask::from_indices(&(0..m_eff).collect::<Vec<_>>(), n, m)
}

/// Minimize `G/D` over masks of size `1..=m` by Dinkelbach iteration with an
/// exact inner solver.
///
/// `eta` starts at the ratio of the proximity mask (a feasible point; zero
/// as a fallback) and decreases monotonically to the optimum. The loop stops
/// at a mask fixed point or when `|F(eta_k)|` falls below `epsilon` relative
/// to the objective scale.
pub fn dinkelbach_select(
    agg: &TimeAggregates,
    camera: &CameraConstants,
    weights: &Weights,
    m: usize,
    options: &SelectorOptions,
) -> Result<SelectionOutcome> {
    let n = agg.len();
    if n == 0 {
        return Err(Error::EmptySelection);
    }
    let mut eta = match proximity_mask(n, m) {
        Ok(mask) => {
            let (g, d) = composite_g_d(agg, camera, weights, &mask)?;
            g / d
        }
        Err(_) => 0.0,
    };

    let mut trace = DinkelbachTrace::default();
    let mut prev_mask: Option<SelectionMask> = None;
    for k in 1..=options.k_max {
        let form = assemble_qcqp(agg, camera, weights, eta, m)?;
        let (mask, f_value) = solve_subproblem_exact(&form, m)?;
        trace.steps.push(DinkelbachStep { k, eta, f_value });

        let (g, d) = composite_g_d(agg, camera, weights, &mask)?;
        let ratio = g / d;
        let scale = g.abs().max(1.0);
        if f_value.abs() <= options.epsilon * scale || prev_mask.as_ref() == Some(&mask) {
            trace.converged = true;
            return Ok(SelectionOutcome { mask, ratio, trace });
        }
        prev_mask = Some(mask);
        eta = ratio;
    }
    Err(Error::SelectionNoConvergence {
        k_max: options.k_max,
        trace,
    })
}

/// Baseline mask for the given strategy; selects exactly `min(m, N)`.
pub fn select_baseline(
    scenario: &Scenario,
    m: usize,
    strategy: BaselineStrategy,
    seed: u64,
) -> Result<SelectionMask> {
    let n = scenario.n_helpers();
    let m_eff = m.min(n).max(1);
    match strategy {
        BaselineStrategy::Proximity => proximity_mask(n, m),
        BaselineStrategy::MinVelocity => {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| {
                scenario.helpers[a]
                    .v
                    .partial_cmp(&scenario.helpers[b].v)
                    .expect("finite velocities")
                    .then(a.cmp(&b))
            });
            SelectionMask::from_indices(&order[..m_eff], n, m)
        }
        BaselineStrategy::Random => {
            let mut rng = rng::substream(seed, Stream::BaselineSelection);
            let picked = rand::seq::index::sample(&mut rng, n, m_eff).into_vec();
            SelectionMask::from_indices(&picked, n, m)
        }
    }
}

/// Lagrangian-dual lower bound on the QCQP optimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualCertificate {
    /// Multipliers: index 0 for the cardinality constraint, then one per
    /// binarity constraint.
    pub lambda: Vec<f64>,
    /// Best dual value found; `-inf` when no multiplier made the quadratic
    /// term positive semidefinite.
    pub bound: f64,
    /// `primal - bound`, once a primal value is attached.
    pub feasible_gap: Option<f64>,
}

impl DualCertificate {
    pub fn attach_primal(&mut self, primal: f64) {
        self.feasible_gap = Some(primal - self.bound);
    }
}

/// Dual function pieces at a multiplier vector.
struct DualEval {
    value: f64,
    /// Supergradient (constraint values at the inner minimizer), when the
    /// dual value is finite.
    supergradient: Option<Vec<f64>>,
    min_eig: f64,
}

fn eval_dual(form: &QcqpForm, lambda: &[f64]) -> DualEval {
    let n = form.n();
    let mut p = form.p0.clone();
    let mut q = form.q0.clone();
    let mut r = form.h0;
    for (c, &l) in form.constraints.iter().zip(lambda) {
        if let Some(cp) = &c.p {
            p += cp * l;
        }
        q += &c.q * l;
        r += c.h * l;
    }

    let eigen = p.clone().symmetric_eigen();
    let sigma_max = eigen.eigenvalues.amax().max(1e-300);
    let min_eig = eigen.eigenvalues.min();
    let psd_tol = 1e-10 * sigma_max;
    if min_eig < -psd_tol {
        return DualEval {
            value: f64::NEG_INFINITY,
            supergradient: None,
            min_eig,
        };
    }

    // Pseudo-inverse through the eigendecomposition; eigenvalues below
    // 1e-10 * sigma_max are treated as zero.
    let cut = 1e-10 * sigma_max;
    let inv_eigs = DVector::from_fn(n, |i, _| {
        let e = eigen.eigenvalues[i];
        if e > cut {
            1.0 / e
        } else {
            0.0
        }
    });
    let pinv = &eigen.eigenvectors * DMatrix::from_diagonal(&inv_eigs) * eigen.eigenvectors.transpose();

    // q must lie in the range of P, otherwise the infimum is -inf.
    let pq = &pinv * &q;
    let residual = (&p * &pq - &q).norm();
    if residual > 1e-8 * q.norm().max(1e-300) {
        return DualEval {
            value: f64::NEG_INFINITY,
            supergradient: None,
            min_eig,
        };
    }

    let value = r - 0.25 * q.dot(&pq);
    let s_star = -0.5 * pq;
    let supergradient = form
        .constraints
        .iter()
        .map(|c| {
            let mut v = c.q.dot(&s_star) + c.h;
            if let Some(cp) = &c.p {
                v += (cp * &s_star).dot(&s_star);
            }
            v
        })
        .collect();
    DualEval {
        value,
        supergradient: Some(supergradient),
        min_eig,
    }
}

/// Maximize the dual function by projected supergradient ascent with
/// diminishing steps `1/sqrt(k)`, starting from `lambda0` (padded with
/// zeros). Whenever the current multiplier leaves the PSD cone, the binarity
/// multipliers are lifted just enough to re-enter it.
///
/// The returned bound is sound for any nonnegative multiplier, so ascent
/// quality affects tightness only.
pub fn dual_bound(form: &QcqpForm, lambda0: &[f64], steps: usize) -> Result<DualCertificate> {
    let n_constraints = form.constraints.len();
    let mut lambda = vec![0.0; n_constraints];
    for (dst, &src) in lambda.iter_mut().zip(lambda0) {
        if src < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "dual multipliers must be nonnegative, got {src}"
            )));
        }
        *dst = src;
    }

    let mut best_lambda = lambda.clone();
    let mut best_value = eval_dual(form, &lambda).value;

    for k in 1..=steps {
        let eval = eval_dual(form, &lambda);
        match eval.supergradient {
            None => {
                // Lift binarity multipliers to shift the spectrum into the
                // PSD cone (each adds exactly 1 to one diagonal entry).
                let lift = (-eval.min_eig).max(0.0) + 1e-6;
                for (c, l) in form.constraints.iter().zip(lambda.iter_mut()) {
                    if c.p.is_some() {
                        *l += lift;
                    }
                }
            }
            Some(grad) => {
                if eval.value > best_value {
                    best_value = eval.value;
                    best_lambda = lambda.clone();
                }
                let step = 1.0 / (k as f64).sqrt();
                for (l, g) in lambda.iter_mut().zip(&grad) {
                    *l = (*l + step * g).max(0.0);
                }
            }
        }
    }
    let final_value = eval_dual(form, &lambda).value;
    if final_value > best_value {
        best_value = final_value;
        best_lambda = lambda;
    }

    Ok(DualCertificate {
        lambda: best_lambda,
        bound: best_value,
        feasible_gap: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::ConstraintKind;
    use crate::scenario::{self, ScenarioConfig, Vehicle};

    fn toy_aggregates() -> TimeAggregates {
        TimeAggregates {
            xbar: vec![60.0, 150.0, 300.0],
            rbar: vec![90.0, 150.0, 150.0],
            vterm: vec![28.0, 22.0, 35.0],
            steps: 1,
        }
    }

    #[test]
    fn single_candidate_selected() {
        let agg = TimeAggregates {
            xbar: vec![100.0],
            rbar: vec![150.0],
            vterm: vec![30.0],
            steps: 1,
        };
        let camera = CameraConstants::default();
        let form = assemble_qcqp(&agg, &camera, &Weights::default(), 1.0, 1).unwrap();
        let (mask, value) = solve_subproblem_exact(&form, 1).unwrap();
        assert_eq!(mask.selected_indices(), vec![0]);
        let expected = form.eval(&[true]);
        assert_eq!(value, expected);
    }

    #[test]
    fn huge_eta_selects_largest_rbar() {
        // For eta -> +inf the subproblem is dominated by -eta*zu*rbar's, so
        // the minimizer takes the M largest rbar entries.
        let agg = TimeAggregates {
            xbar: vec![1.0, 1.0, 1.0, 1.0],
            rbar: vec![10.0, 400.0, 50.0, 300.0],
            vterm: vec![30.0, 30.0, 30.0, 30.0],
            steps: 1,
        };
        let camera = CameraConstants::default();
        let form = assemble_qcqp(&agg, &camera, &Weights::default(), 1e9, 2).unwrap();
        let (mask, _) = solve_subproblem_exact(&form, 2).unwrap();
        assert_eq!(mask.selected_indices(), vec![1, 3]);
    }

    #[test]
    fn enumeration_cap_enforced() {
        let n = N_CAP + 1;
        let agg = TimeAggregates {
            xbar: vec![1.0; n],
            rbar: vec![1.0; n],
            vterm: vec![1.0; n],
            steps: 1,
        };
        let form =
            assemble_qcqp(&agg, &CameraConstants::default(), &Weights::default(), 0.0, 2).unwrap();
        assert!(matches!(
            solve_subproblem_exact(&form, 2),
            Err(Error::EnumerationCapExceeded { .. })
        ));
    }

    #[test]
    fn dinkelbach_single_helper_converges_fast() {
        let agg = TimeAggregates {
            xbar: vec![100.0],
            rbar: vec![150.0],
            vterm: vec![30.0],
            steps: 1,
        };
        let camera = CameraConstants::default();
        let out = dinkelbach_select(&agg, &camera, &Weights::default(), 1, &Default::default())
            .unwrap();
        assert!(out.trace.steps.len() <= 2);
        assert!(out.trace.converged);
        assert_eq!(out.mask.selected_indices(), vec![0]);
    }

    #[test]
    fn dinkelbach_trace_monotone() {
        let camera = CameraConstants::default();
        let agg = toy_aggregates();
        let out = dinkelbach_select(&agg, &camera, &Weights::default(), 2, &Default::default())
            .unwrap();
        let steps = &out.trace.steps;
        for w in steps.windows(2) {
            assert!(w[1].eta <= w[0].eta + 1e-12);
            assert!(w[1].f_value.abs() <= w[0].f_value.abs() + 1e-9);
        }
        // After the feasible initialization every subproblem optimum is <= 0.
        for s in steps {
            assert!(s.f_value <= 1e-9);
        }
    }

    #[test]
    fn baselines_behave() {
        let mk = |id, x0, v| Vehicle {
            id,
            x0,
            y0: 0.0,
            v,
        };
        let scenario = crate::scenario::Scenario {
            ego: mk(0, 0.0, 30.0),
            helpers: vec![mk(1, 10.0, 20.0), mk(2, 50.0, 35.0), mk(3, 90.0, 25.0)],
            horizon_t: 1.0,
            dt: 0.5,
            camera: CameraConstants::default(),
            seed: 0,
            lead_range: 150.0,
        };
        let prox = select_baseline(&scenario, 2, BaselineStrategy::Proximity, 0).unwrap();
        assert_eq!(prox.selected_indices(), vec![0, 1]);

        let slow = select_baseline(&scenario, 1, BaselineStrategy::MinVelocity, 0).unwrap();
        assert_eq!(slow.selected_indices(), vec![0]); // v = 20 is smallest

        let r1 = select_baseline(&scenario, 2, BaselineStrategy::Random, 7).unwrap();
        let r2 = select_baseline(&scenario, 2, BaselineStrategy::Random, 7).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(r1.popcount(), 2);
    }

    #[test]
    fn random_baseline_uniform_over_subsets() {
        let scenario = scenario::generate(&ScenarioConfig::default(), 3).unwrap();
        let mut counts = std::collections::BTreeMap::new();
        let trials = 30_000u64;
        for seed in 0..trials {
            let mask = select_baseline(&scenario, 2, BaselineStrategy::Random, seed).unwrap();
            *counts.entry(mask.selected_indices()).or_insert(0u64) += 1;
        }
        let n_subsets = 45; // C(10, 2)
        assert_eq!(counts.len(), n_subsets);
        let expected = trials as f64 / n_subsets as f64;
        for (_, c) in counts {
            // 5-sigma binomial band.
            let sigma = (expected * (1.0 - 1.0 / n_subsets as f64)).sqrt();
            assert!((c as f64 - expected).abs() < 5.0 * sigma);
        }
    }

    #[test]
    fn dual_bound_indefinite_at_zero() {
        let agg = toy_aggregates();
        let form =
            assemble_qcqp(&agg, &CameraConstants::default(), &Weights::default(), 1.0, 2).unwrap();
        let cert = dual_bound(&form, &[0.0; 4], 0).unwrap();
        assert_eq!(cert.bound, f64::NEG_INFINITY);
    }

    #[test]
    fn dual_bound_positive_definite_identity() {
        // P0 = I, q0 = 0, h0 = 1, lambda = 0 gives g = h0 = 1.
        let n = 3;
        let form = QcqpForm {
            p0: DMatrix::identity(n, n),
            q0: DVector::zeros(n),
            h0: 1.0,
            constraints: vec![crate::objective::QcqpConstraint {
                p: None,
                q: DVector::from_element(n, 1.0),
                h: -2.0,
                kind: ConstraintKind::Cardinality,
            }],
            m: 2,
        };
        let cert = dual_bound(&form, &[0.0], 0).unwrap();
        assert!((cert.bound - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dual_bound_sound_on_small_instances() {
        let camera = CameraConstants::default();
        let weights = Weights::default();
        for seed in 0..10 {
            let scenario = scenario::generate(
                &ScenarioConfig {
                    n_helpers: 6,
                    ..Default::default()
                },
                seed,
            )
            .unwrap();
            let agg = TimeAggregates::from_scenario(&scenario).unwrap();
            let m = 3;
            let eta = 1.0;
            let form = assemble_qcqp(&agg, &camera, &weights, eta, m).unwrap();
            let cert = dual_bound(&form, &vec![0.0; form.constraints.len()], 150).unwrap();

            // Exhaustive primal minimum over feasible binary masks.
            let mut primal = f64::INFINITY;
            for mask_int in 1u64..(1 << 6) {
                if mask_int.count_ones() as usize > m {
                    continue;
                }
                let bits = bits_from_int(mask_int, 6);
                primal = primal.min(form.eval(&bits));
            }
            assert!(
                cert.bound <= primal + 1e-6 * primal.abs().max(1.0),
                "seed {seed}: bound {} exceeds primal {primal}",
                cert.bound
            );
        }
    }
}
