//! Campaign configuration: one TOML file drives every experiment.

use std::path::Path;

use cpopt_core::allocator::{AllocObjective, AllocatorOptions, ErfMode};
use cpopt_core::channel::CommConfig;
use cpopt_core::fusion::FixtureConfig;
use cpopt_core::objective::{TimeAggregates, Weights};
use cpopt_core::scenario::{CameraConstants, ScenarioConfig};
use cpopt_core::selector::SelectorOptions;
use serde::{Deserialize, Serialize};

use crate::HarnessError;

/// How the three selection criteria are weighted.
///
/// `unit` adds the raw terms exactly as formulated, which leaves the
/// velocity term dominant under physical units (it is measured in pixels,
/// the others in meters). `equalized` rescales the terms to match at a
/// reference mask so each criterion genuinely trades against the others;
/// the trend and fusion studies use it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WeightsPreset {
    #[default]
    Unit,
    Equalized,
}

impl WeightsPreset {
    pub fn resolve(
        self,
        agg: &TimeAggregates,
        camera: &CameraConstants,
    ) -> cpopt_core::Result<Weights> {
        match self {
            WeightsPreset::Unit => Ok(Weights::default()),
            WeightsPreset::Equalized => Weights::equalized(agg, camera),
        }
    }
}

/// Selection strategies compared by the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMethod {
    Proposed,
    Random,
    Proximity,
    MinVelocity,
}

impl SelectionMethod {
    pub fn name(self) -> &'static str {
        match self {
            SelectionMethod::Proposed => "proposed",
            SelectionMethod::Random => "random",
            SelectionMethod::Proximity => "proximity",
            SelectionMethod::MinVelocity => "min_velocity",
        }
    }
}

/// Allocation strategies compared by the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocationMethod {
    Proposed,
    Uniform,
    Random,
}

impl AllocationMethod {
    pub fn name(self) -> &'static str {
        match self {
            AllocationMethod::Proposed => "proposed",
            AllocationMethod::Uniform => "uniform",
            AllocationMethod::Random => "random",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObjectiveConfig {
    pub weights: WeightsPreset,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        Self {
            weights: WeightsPreset::Unit,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AllocatorConfig {
    pub epsilon: f64,
    pub k_max: usize,
    pub j_max: usize,
    pub gap_tol: f64,
    pub objective: AllocObjective,
    pub erf_mode: ErfMode,
}

impl Default for AllocatorConfig {
    fn default() -> Self {
        let opts = AllocatorOptions::default();
        Self {
            epsilon: opts.epsilon,
            k_max: opts.k_max,
            j_max: opts.j_max,
            gap_tol: opts.gap_tol,
            objective: AllocObjective::Ratio,
            erf_mode: ErfMode::Exact,
        }
    }
}

impl AllocatorConfig {
    pub fn options(&self) -> AllocatorOptions {
        AllocatorOptions {
            epsilon: self.epsilon,
            k_max: self.k_max,
            j_max: self.j_max,
            gap_tol: self.gap_tol,
        }
    }
}

/// Fusion-experiment settings beyond the fixture shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    #[serde(flatten)]
    pub fixture: FixtureConfig,
    /// Helpers recruited per strategy.
    pub m: usize,
    /// Frames simulated per replication.
    pub n_frames: usize,
    /// Weights used by the proposed selection inside this experiment.
    pub weights: WeightsPreset,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            fixture: FixtureConfig::default(),
            m: 3,
            n_frames: 200,
            weights: WeightsPreset::Equalized,
        }
    }
}

/// Sweep axes and replication counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub replications: usize,
    /// Cardinality bounds swept by the selection study.
    pub selection_m_values: Vec<usize>,
    /// Helpers carried into the resource studies.
    pub allocation_m: usize,
    /// Resource-block pool ladder.
    pub wt_ladder: Vec<f64>,
    /// Power budget ladder (W).
    pub pt_ladder: Vec<f64>,
    /// Vehicle-count ladder for the resource studies.
    pub m_ladder: Vec<usize>,
    pub selection_strategies: Vec<SelectionMethod>,
    pub allocation_strategies: Vec<AllocationMethod>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            replications: 100,
            selection_m_values: vec![1, 2, 3, 4, 5],
            allocation_m: 5,
            wt_ladder: vec![10.0, 20.0, 30.0, 40.0, 50.0, 60.0],
            pt_ladder: vec![0.0125, 0.025, 0.05, 0.1, 0.2],
            m_ladder: vec![2, 3, 4, 5, 6, 7, 8, 9, 10],
            selection_strategies: vec![
                SelectionMethod::Proposed,
                SelectionMethod::Random,
                SelectionMethod::Proximity,
                SelectionMethod::MinVelocity,
            ],
            allocation_strategies: vec![
                AllocationMethod::Proposed,
                AllocationMethod::Uniform,
                AllocationMethod::Random,
            ],
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.replications == 0 {
            return Err(HarnessError::Config("replications must be >= 1".into()));
        }
        if self.selection_m_values.is_empty()
            || self.wt_ladder.is_empty()
            || self.pt_ladder.is_empty()
            || self.m_ladder.is_empty()
        {
            return Err(HarnessError::Config("sweep axes must be non-empty".into()));
        }
        if self.selection_strategies.is_empty() || self.allocation_strategies.is_empty() {
            return Err(HarnessError::Config("strategy lists must be non-empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectorConfig {
    pub epsilon: f64,
    pub k_max: usize,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        let opts = SelectorOptions::default();
        Self {
            epsilon: opts.epsilon,
            k_max: opts.k_max,
        }
    }
}

impl SelectorConfig {
    pub fn options(&self) -> SelectorOptions {
        SelectorOptions {
            epsilon: self.epsilon,
            k_max: self.k_max,
        }
    }
}

/// The whole campaign configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct HarnessConfig {
    pub seed: u64,
    pub scenario: ScenarioConfig,
    pub objective: ObjectiveConfig,
    pub selector: SelectorConfig,
    pub comm: CommConfig,
    pub allocator: AllocatorConfig,
    pub fusion: FusionConfig,
    pub experiment: ExperimentConfig,
}

impl HarnessConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let config: HarnessConfig =
            toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.scenario.validate()?;
        self.comm.validate()?;
        self.fusion.fixture.validate()?;
        self.experiment.validate()?;
        if self.fusion.m == 0 || self.fusion.n_frames == 0 {
            return Err(HarnessError::Config(
                "fusion m and n_frames must be >= 1".into(),
            ));
        }
        Ok(())
    }
}
