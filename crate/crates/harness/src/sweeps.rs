//! Seeded experiment campaigns: selection, allocation, and fusion sweeps.
//!
//! Each replication derives its own seed from the master seed, generates a
//! scenario, runs every strategy on it, and records both per-replication
//! audit rows (JSON) and aggregated long-format tables (CSV / plot data).
//! The same replication seed is reused across sweep points, so strategies
//! and budgets are compared on identical worlds.

use cpopt_core::allocator::{
    self, allocate_baseline, dinkelbach_allocate, direct_fw_sum, round_largest_remainder,
    AllocObjective, Allocation, AllocationStrategy, ErfMode,
};
use cpopt_core::channel::CommConfig;
use cpopt_core::fusion::{fuse_max_iou, simulate_drops, synthetic_detections};
use cpopt_core::objective::{
    assemble_qcqp, composite_ratio, f1_location, f2_visual_range, f3_motion_blur, BlurMode,
    SelectionMask, TimeAggregates, Weights,
};
use cpopt_core::rng::replication_seed;
use cpopt_core::scenario::{self, Scenario};
use cpopt_core::selector::{
    dinkelbach_select, dual_bound, select_baseline, BaselineStrategy, SelectorOptions,
};
use serde::{Deserialize, Serialize};

use crate::config::{AllocationMethod, HarnessConfig, SelectionMethod, WeightsPreset};
use crate::report::ResultTable;
use crate::Result;

pub const SELECTION_METRICS: [&str; 5] = [
    "objective",
    "avg_location",
    "total_location",
    "avg_visual_range",
    "total_visual_range",
];

pub const ALLOCATION_METRICS: [&str; 4] = ["throughput", "energy", "ratio", "sum_objective"];

pub const FUSION_METRICS: [&str; 3] = ["mean_iou", "recall", "f1"];

/// One selection replication for one strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionAudit {
    pub m: usize,
    pub strategy: String,
    pub replication: usize,
    pub seed: u64,
    pub mask: Vec<u8>,
    pub popcount: usize,
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
    pub objective: f64,
    pub avg_location: f64,
    pub total_location: f64,
    pub avg_visual_range: f64,
    pub total_visual_range: f64,
    /// Lagrangian lower bound on the optimizer's final subproblem; only
    /// attached to the proposed strategy.
    pub dual_bound: Option<f64>,
    pub iterations: usize,
    pub overtakes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSweep {
    pub table: ResultTable,
    pub audit: Vec<SelectionAudit>,
}

/// One allocation replication for one strategy at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationAudit {
    pub sweep: String,
    pub sweep_value: f64,
    pub strategy: String,
    pub replication: usize,
    pub seed: u64,
    pub m: usize,
    pub w_t: f64,
    pub p_t: f64,
    pub distances: Vec<f64>,
    pub throughput: f64,
    pub energy: f64,
    pub ratio: f64,
    pub sum_objective: f64,
    pub iterations_outer: usize,
    pub iterations_inner: usize,
    /// Integer resource blocks by largest remainder, and the throughput
    /// delivered at those counts: the price of discreteness.
    pub w_rounded: Vec<u64>,
    pub throughput_rounded: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationSweep {
    pub rb_table: ResultTable,
    pub power_table: ResultTable,
    pub m_table: ResultTable,
    pub audit: Vec<AllocationAudit>,
}

/// One fusion replication for one selection strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionAudit {
    pub strategy: String,
    pub replication: usize,
    pub seed: u64,
    pub mask: Vec<u8>,
    pub deltas: Vec<f64>,
    pub mean_iou: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionSweep {
    pub table: ResultTable,
    pub audit: Vec<FusionAudit>,
}

/// Scenarios for replications `0..count` of a campaign.
pub fn generate_scenarios(config: &HarnessConfig, seed: u64, count: usize) -> Result<Vec<Scenario>> {
    (0..count)
        .map(|rep| Ok(scenario::generate(&config.scenario, replication_seed(seed, rep as u64))?))
        .collect()
}

struct PreparedScenario {
    scenario: Scenario,
    agg: TimeAggregates,
    weights: Weights,
    seed: u64,
}

fn prepare(config: &HarnessConfig, preset: WeightsPreset, seed: u64) -> Result<PreparedScenario> {
    let scenario = scenario::generate(&config.scenario, seed)?;
    let agg = TimeAggregates::from_scenario(&scenario)?;
    let weights = preset.resolve(&agg, &scenario.camera)?;
    Ok(PreparedScenario {
        scenario,
        agg,
        weights,
        seed,
    })
}

struct SelectedMask {
    mask: SelectionMask,
    iterations: usize,
    dual_bound: Option<f64>,
}

fn run_selection_method(
    method: SelectionMethod,
    prep: &PreparedScenario,
    m: usize,
    options: &SelectorOptions,
) -> Result<SelectedMask> {
    match method {
        SelectionMethod::Proposed => {
            let out = dinkelbach_select(
                &prep.agg,
                &prep.scenario.camera,
                &prep.weights,
                m,
                options,
            )?;
            let form = assemble_qcqp(
                &prep.agg,
                &prep.scenario.camera,
                &prep.weights,
                out.ratio,
                m,
            )?;
            let cert = dual_bound(&form, &vec![0.0; form.constraints.len()], 60)?;
            Ok(SelectedMask {
                mask: out.mask,
                iterations: out.trace.steps.len(),
                dual_bound: Some(cert.bound),
            })
        }
        SelectionMethod::Random => Ok(SelectedMask {
            mask: select_baseline(&prep.scenario, m, BaselineStrategy::Random, prep.seed)?,
            iterations: 0,
            dual_bound: None,
        }),
        SelectionMethod::Proximity => Ok(SelectedMask {
            mask: select_baseline(&prep.scenario, m, BaselineStrategy::Proximity, prep.seed)?,
            iterations: 0,
            dual_bound: None,
        }),
        SelectionMethod::MinVelocity => Ok(SelectedMask {
            mask: select_baseline(&prep.scenario, m, BaselineStrategy::MinVelocity, prep.seed)?,
            iterations: 0,
            dual_bound: None,
        }),
    }
}

fn selection_audit_row(
    prep: &PreparedScenario,
    m: usize,
    strategy: &str,
    replication: usize,
    picked: &SelectedMask,
) -> Result<SelectionAudit> {
    let camera = &prep.scenario.camera;
    let mask = &picked.mask;
    let steps = prep.agg.steps as f64;
    let k = mask.popcount() as f64;
    let f1 = f1_location(&prep.agg, mask);
    let f2 = f2_visual_range(&prep.agg, mask)?;
    let f3 = f3_motion_blur(&prep.agg, camera, mask, BlurMode::Parallel)?;
    let objective = composite_ratio(&prep.agg, camera, &prep.weights, mask)?;
    let range_sum: f64 = mask
        .selected_indices()
        .iter()
        .map(|&i| prep.agg.rbar[i])
        .sum();
    Ok(SelectionAudit {
        m,
        strategy: strategy.to_string(),
        replication,
        seed: prep.seed,
        mask: mask.bits.iter().map(|&b| u8::from(b)).collect(),
        popcount: mask.popcount(),
        f1,
        f2,
        f3,
        objective,
        avg_location: f1 / (k * steps),
        total_location: f1 / steps,
        avg_visual_range: range_sum / (k * steps),
        total_visual_range: range_sum / steps,
        dual_bound: picked.dual_bound,
        iterations: picked.iterations,
        overtakes: prep.scenario.count_overtakes(),
    })
}

fn metric_value(row: &SelectionAudit, metric: &str) -> f64 {
    match metric {
        "objective" => row.objective,
        "avg_location" => row.avg_location,
        "total_location" => row.total_location,
        "avg_visual_range" => row.avg_visual_range,
        "total_visual_range" => row.total_visual_range,
        _ => f64::NAN,
    }
}

/// Selection comparison across cardinality bounds and strategies.
pub fn run_selection_sweep(config: &HarnessConfig, seed: u64) -> Result<SelectionSweep> {
    config.validate()?;
    let options = config.selector.options();
    let mut table = ResultTable::default();
    let mut audit = Vec::new();

    for &m in &config.experiment.selection_m_values {
        let mut rows_by_strategy: Vec<Vec<SelectionAudit>> =
            vec![Vec::new(); config.experiment.selection_strategies.len()];
        for rep in 0..config.experiment.replications {
            let prep = prepare(
                config,
                config.objective.weights,
                replication_seed(seed, rep as u64),
            )?;
            for (si, &method) in config.experiment.selection_strategies.iter().enumerate() {
                let picked = run_selection_method(method, &prep, m, &options)?;
                let row = selection_audit_row(&prep, m, method.name(), rep, &picked)?;
                rows_by_strategy[si].push(row);
            }
        }
        for (si, &method) in config.experiment.selection_strategies.iter().enumerate() {
            for metric in SELECTION_METRICS {
                let values: Vec<f64> = rows_by_strategy[si]
                    .iter()
                    .map(|r| metric_value(r, metric))
                    .collect();
                table.push_aggregate(m as f64, method.name(), metric, &values);
            }
        }
        for rows in rows_by_strategy {
            audit.extend(rows);
        }
    }
    Ok(SelectionSweep { table, audit })
}

/// Proposed mask topped up to exactly `target` helpers: remaining slots go
/// to the unselected candidates with the best singleton objective. The
/// resource studies compare allocators over a fixed vehicle count, so the
/// recruiting step must deliver exactly that many links.
fn fill_mask_to(
    mask: &SelectionMask,
    agg: &TimeAggregates,
    camera: &cpopt_core::scenario::CameraConstants,
    weights: &Weights,
    target: usize,
) -> Result<SelectionMask> {
    let n = agg.len();
    let target = target.min(n);
    let mut bits = mask.bits.clone();
    let mut singles: Vec<(f64, usize)> = Vec::new();
    for i in 0..n {
        if !bits[i] {
            let single = SelectionMask::from_indices(&[i], n, n)?;
            singles.push((composite_ratio(agg, camera, weights, &single)?, i));
        }
    }
    singles.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite ratios").then(a.1.cmp(&b.1)));
    let mut have = bits.iter().filter(|&&b| b).count();
    for (_, i) in singles {
        if have >= target {
            break;
        }
        bits[i] = true;
        have += 1;
    }
    SelectionMask::new(bits, target.max(mask.m))
}

/// Recruit exactly `m` helpers for the resource studies and return their
/// start-of-interval distances to the ego.
pub fn recruited_distances(
    config: &HarnessConfig,
    prep_seed: u64,
    m: usize,
    preset: WeightsPreset,
    options: &SelectorOptions,
) -> Result<(Scenario, Vec<usize>, Vec<f64>)> {
    let prep = prepare(config, preset, prep_seed)?;
    let out = dinkelbach_select(&prep.agg, &prep.scenario.camera, &prep.weights, m, options)?;
    let filled = fill_mask_to(
        &out.mask,
        &prep.agg,
        &prep.scenario.camera,
        &prep.weights,
        m,
    )?;
    let indices = filled.selected_indices();
    let distances = prep.scenario.distances_at_start(&indices)?;
    Ok((prep.scenario, indices, distances))
}

struct AllocationRun {
    alloc: Allocation,
    iterations_outer: usize,
    iterations_inner: usize,
}

fn run_allocation_method(
    method: AllocationMethod,
    comm: &CommConfig,
    distances: &[f64],
    objective: AllocObjective,
    options: &cpopt_core::allocator::AllocatorOptions,
    seed: u64,
) -> Result<AllocationRun> {
    match method {
        AllocationMethod::Proposed => {
            let out = match objective {
                AllocObjective::Ratio => dinkelbach_allocate(comm, distances, options)?,
                AllocObjective::Sum => direct_fw_sum(comm, distances, options)?,
            };
            Ok(AllocationRun {
                alloc: out.alloc,
                iterations_outer: out.trace.outer.len(),
                iterations_inner: out.trace.inner.len(),
            })
        }
        AllocationMethod::Uniform => Ok(AllocationRun {
            alloc: allocate_baseline(comm, distances.len(), AllocationStrategy::Uniform, seed)?,
            iterations_outer: 0,
            iterations_inner: 0,
        }),
        AllocationMethod::Random => Ok(AllocationRun {
            alloc: allocate_baseline(comm, distances.len(), AllocationStrategy::Random, seed)?,
            iterations_outer: 0,
            iterations_inner: 0,
        }),
    }
}

#[allow(clippy::too_many_arguments)]
fn allocation_audit_row(
    sweep: &str,
    sweep_value: f64,
    strategy: &str,
    replication: usize,
    seed: u64,
    comm: &CommConfig,
    distances: &[f64],
    run: &AllocationRun,
) -> Result<AllocationAudit> {
    let (zeta, energy) =
        allocator::throughput_energy(comm, distances, &run.alloc, ErfMode::Exact)?;
    let sum = allocator::sum_objective(comm, distances, &run.alloc, ErfMode::Exact)?;
    let w_t = comm.effective_pool();
    let w_rounded = round_largest_remainder(&run.alloc.w, w_t.floor() as u64);
    let rounded_alloc = Allocation {
        p_w: run.alloc.p_w.clone(),
        w: w_rounded.iter().map(|&x| x as f64).collect(),
    };
    let deltas =
        allocator::link_error_rates(comm, distances, &rounded_alloc.p_w, ErfMode::Exact)?;
    let (zeta_rounded, _) =
        allocator::throughput_energy_with_errors(comm, &rounded_alloc, &deltas)?;
    Ok(AllocationAudit {
        sweep: sweep.to_string(),
        sweep_value,
        strategy: strategy.to_string(),
        replication,
        seed,
        m: distances.len(),
        w_t,
        p_t: comm.p_total_w,
        distances: distances.to_vec(),
        throughput: zeta,
        energy,
        ratio: zeta / energy,
        sum_objective: sum,
        iterations_outer: run.iterations_outer,
        iterations_inner: run.iterations_inner,
        w_rounded,
        throughput_rounded: zeta_rounded,
    })
}

fn allocation_metric(row: &AllocationAudit, metric: &str) -> f64 {
    match metric {
        "throughput" => row.throughput,
        "energy" => row.energy,
        "ratio" => row.ratio,
        "sum_objective" => row.sum_objective,
        _ => f64::NAN,
    }
}

/// Resource-allocation comparison over the RB-pool, power-budget, and
/// vehicle-count ladders.
pub fn run_allocation_sweep(config: &HarnessConfig, seed: u64) -> Result<AllocationSweep> {
    config.validate()?;
    let options = config.allocator.options();
    let sel_options = config.selector.options();
    let objective = config.allocator.objective;
    let mut audit = Vec::new();

    // The power ladder holds the per-vehicle floor fixed at its base-config
    // value so the feasible sets are nested along the ladder.
    let base_floor = config.comm.power_floor(config.experiment.allocation_m);

    let mut run_ladder = |sweep: &str,
                          values: &[f64],
                          audit: &mut Vec<AllocationAudit>|
     -> Result<ResultTable> {
        let mut table = ResultTable::default();
        for &value in values {
            let mut comm = config.comm;
            let m = match sweep {
                "rb_pool" => {
                    comm.w_t_override = Some(value);
                    config.experiment.allocation_m
                }
                "power_budget" => {
                    comm.p_total_w = value;
                    comm.p_min_w = Some(base_floor);
                    config.experiment.allocation_m
                }
                _ => value as usize,
            };
            let mut rows_by_strategy: Vec<Vec<AllocationAudit>> =
                vec![Vec::new(); config.experiment.allocation_strategies.len()];
            for rep in 0..config.experiment.replications {
                let rep_seed = replication_seed(seed, rep as u64);
                let (_, _, distances) = recruited_distances(
                    config,
                    rep_seed,
                    m,
                    WeightsPreset::Equalized,
                    &sel_options,
                )?;
                for (si, &method) in config.experiment.allocation_strategies.iter().enumerate() {
                    let run =
                        run_allocation_method(method, &comm, &distances, objective, &options, rep_seed)?;
                    rows_by_strategy[si].push(allocation_audit_row(
                        sweep,
                        value,
                        method.name(),
                        rep,
                        rep_seed,
                        &comm,
                        &distances,
                        &run,
                    )?);
                }
            }
            for (si, &method) in config.experiment.allocation_strategies.iter().enumerate() {
                for metric in ALLOCATION_METRICS {
                    let vals: Vec<f64> = rows_by_strategy[si]
                        .iter()
                        .map(|r| allocation_metric(r, metric))
                        .collect();
                    table.push_aggregate(value, method.name(), metric, &vals);
                }
            }
            for rows in rows_by_strategy {
                audit.extend(rows);
            }
        }
        Ok(table)
    };

    let rb_table = run_ladder("rb_pool", &config.experiment.wt_ladder, &mut audit)?;
    let power_table = run_ladder("power_budget", &config.experiment.pt_ladder, &mut audit)?;
    let m_values: Vec<f64> = config.experiment.m_ladder.iter().map(|&m| m as f64).collect();
    let m_table = run_ladder("m", &m_values, &mut audit)?;

    Ok(AllocationSweep {
        rb_table,
        power_table,
        m_table,
        audit,
    })
}

/// Late-fusion comparison of selection strategies under channel-driven
/// packet drops. Links use the uniform power/RB split so the comparison
/// isolates the selection.
pub fn run_fusion_experiment(config: &HarnessConfig, seed: u64) -> Result<FusionSweep> {
    config.validate()?;
    let m = config.fusion.m;
    let sel_options = config.selector.options();
    let strategies = [
        SelectionMethod::Proposed,
        SelectionMethod::Random,
        SelectionMethod::Proximity,
    ];
    let mut table = ResultTable::default();
    let mut rows_by_strategy: Vec<Vec<FusionAudit>> = vec![Vec::new(); strategies.len()];

    for rep in 0..config.experiment.replications {
        let rep_seed = replication_seed(seed, rep as u64);
        let prep = prepare(config, config.fusion.weights, rep_seed)?;
        let (ego_records, helper_records) =
            synthetic_detections(&prep.scenario, &config.fusion.fixture)?;

        for (si, &method) in strategies.iter().enumerate() {
            let picked = run_selection_method(method, &prep, m, &sel_options)?;
            let filled = fill_mask_to(
                &picked.mask,
                &prep.agg,
                &prep.scenario.camera,
                &prep.weights,
                m,
            )?;
            let indices = filled.selected_indices();
            let distances = prep.scenario.distances_at_start(&indices)?;

            let k = indices.len();
            let uniform_p = vec![config.comm.p_total_w / k as f64; k];
            let deltas = allocator::link_error_rates(
                &config.comm,
                &distances,
                &uniform_p,
                ErfMode::Exact,
            )?;

            let selected_records: Vec<Vec<cpopt_core::fusion::DetectionRecord>> = indices
                .iter()
                .map(|&i| helper_records[i].clone())
                .collect();
            let frames = simulate_drops(&deltas, config.fusion.n_frames, rep_seed)?;
            let mut mean_iou = 0.0;
            let mut recall = 0.0;
            let mut f1 = 0.0;
            for survivors in &frames {
                let outcome = fuse_max_iou(
                    &ego_records,
                    &selected_records,
                    survivors,
                    config.fusion.fixture.match_threshold,
                )?;
                mean_iou += outcome.mean_iou;
                recall += outcome.recall;
                f1 += outcome.f1;
            }
            let n_frames = frames.len() as f64;
            rows_by_strategy[si].push(FusionAudit {
                strategy: method.name().to_string(),
                replication: rep,
                seed: rep_seed,
                mask: filled.bits.iter().map(|&b| u8::from(b)).collect(),
                deltas,
                mean_iou: mean_iou / n_frames,
                recall: recall / n_frames,
                f1: f1 / n_frames,
            });
        }
    }

    for (si, &method) in strategies.iter().enumerate() {
        for metric in FUSION_METRICS {
            let values: Vec<f64> = rows_by_strategy[si]
                .iter()
                .map(|r| match metric {
                    "mean_iou" => r.mean_iou,
                    "recall" => r.recall,
                    _ => r.f1,
                })
                .collect();
            table.push_aggregate(m as f64, method.name(), metric, &values);
        }
    }
    let audit = rows_by_strategy.into_iter().flatten().collect();
    Ok(FusionSweep { table, audit })
}
