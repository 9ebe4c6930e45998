//! Crate-wide error type.

use crate::allocator::FwTrace;
use crate::selector::DinkelbachTrace;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A configuration or model failed validation.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Helper index outside the scenario.
    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    /// An operation that needs at least one selected helper got none.
    #[error("selection mask is empty")]
    EmptySelection,

    /// A fractional objective denominator came out zero.
    #[error("objective denominator is zero")]
    ZeroDenominator,

    /// Motion-blur general form has a non-positive denominator.
    #[error("motion blur denominator {value} is not positive")]
    BlurDenominator { value: f64 },

    /// A helper's time-summed visual range is not positive.
    #[error("helper {helper} has non-positive time-summed visual range {value}")]
    ZeroTimeSummedRange { helper: usize, value: f64 },

    /// Subset enumeration refused: too many candidates.
    #[error(
        "exact enumeration supports at most {cap} candidates, got {n}; \
         reduce N or use a baseline strategy"
    )]
    EnumerationCapExceeded { n: usize, cap: usize },

    /// Dinkelbach selection loop hit its iteration cap.
    #[error("helper selection did not converge within {k_max} Dinkelbach iterations")]
    SelectionNoConvergence {
        k_max: usize,
        trace: DinkelbachTrace,
    },

    /// Dinkelbach allocation loop hit its iteration cap.
    #[error("resource allocation did not converge within {k_max} Dinkelbach iterations")]
    AllocationNoConvergence { k_max: usize, trace: Box<FwTrace> },

    /// The resource-block pool is too small to model contention.
    #[error("resource-block pool w_T = {w_t} is below 1")]
    PoolExhausted { w_t: f64 },

    /// Per-link error rate reached one; throughput and energy are undefined.
    #[error("link error rate is 1; link is dead")]
    LinkDead,

    /// Power floors alone exceed the total power budget.
    #[error("infeasible power box: {m} vehicles at floor {p_min_w} W exceed budget {p_total_w} W")]
    InfeasiblePowerBox {
        m: usize,
        p_min_w: f64,
        p_total_w: f64,
    },
}
