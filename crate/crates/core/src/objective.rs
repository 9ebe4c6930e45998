//! Selection criteria, their fractional composite, and the QCQP form.
//!
//! Three per-mask criteria are summed and minimized:
//!   f1 — time-summed distance of selected helpers to the ego,
//!   f2 — reciprocal of the time-summed collective visual range,
//!   f3 — motion blur, proportional to velocity through camera constants.
//!
//! With `zu = z*u`, `er = e*r`, and the per-helper time aggregates below,
//! the composite has the common-denominator form
//!   G(s) = w1*zu*(s'xbar)(rbar's) + w2*zu + w3*er*(s'vterm)(rbar's)
//!   D(s) = zu*(rbar's)
//! so that G/D = w1*f1 + w2*f2 + w3*f3 identically — the identity the tests
//! pin down. Dinkelbach's parametric subproblem G - eta*D then becomes a
//! binary quadratic form, assembled here as an explicit QCQP.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::scenario::{CameraConstants, Scenario};
use crate::{Error, Result};

/// Binary helper-selection vector with cardinality bound `m`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionMask {
    pub bits: Vec<bool>,
    pub m: usize,
}

impl SelectionMask {
    pub fn new(bits: Vec<bool>, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidConfig("cardinality bound M must be >= 1".into()));
        }
        let mask = Self { bits, m };
        if mask.popcount() > m {
            return Err(Error::InvalidConfig(format!(
                "mask selects {} helpers, bound is {m}",
                mask.popcount()
            )));
        }
        Ok(mask)
    }

    pub fn from_indices(indices: &[usize], n: usize, m: usize) -> Result<Self> {
        let mut bits = vec![false; n];
        for &i in indices {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, len: n });
            }
            bits[i] = true;
        }
        Self::new(bits, m)
    }

    pub fn popcount(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.popcount() == 0
    }

    pub fn selected_indices(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }

    /// Lexicographic order on the bit vector; the deterministic tie rule.
    pub fn lex_less(&self, other: &Self) -> bool {
        self.bits < other.bits
    }
}

/// Relative weights of the three criteria. The composite formulas above use
/// unit weights; presets exist because the raw terms live on very different
/// scales (meters, reciprocal meters, pixels).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self {
            w1: 1.0,
            w2: 1.0,
            w3: 1.0,
        }
    }
}

impl Weights {
    /// Weights that equalize the three terms at a reference mask (the
    /// proximity pick of size `min(2, n)`), so no single criterion dominates
    /// purely through units. Used by trend and fusion studies.
    pub fn equalized(agg: &TimeAggregates, camera: &CameraConstants) -> Result<Self> {
        let n = agg.len();
        let m_ref = 2.min(n);
        let reference = SelectionMask::from_indices(
            &(0..m_ref).collect::<Vec<_>>(),
            n,
            m_ref,
        )?;
        let f1 = f1_location(agg, &reference);
        let f2 = f2_visual_range(agg, &reference)?;
        let f3 = f3_motion_blur(agg, camera, &reference, BlurMode::Parallel)?;
        let inv = |x: f64| if x.abs() > 1e-300 { 1.0 / x.abs() } else { 1.0 };
        Ok(Self {
            w1: inv(f1),
            w2: inv(f2),
            w3: inv(f3),
        })
    }
}

/// Motion-blur evaluation mode: the general oblique-angle expression or its
/// parallel-plane (`phi = 0`) simplification, which is linear in velocity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlurMode {
    General,
    Parallel,
}

/// Per-helper sums over the time grid, precomputed once per scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeAggregates {
    /// `xbar[i] = sum_t (x_i(t) - x_ego(t))`.
    pub xbar: Vec<f64>,
    /// `rbar[i] = sum_t R_i(t)`; strictly positive by construction.
    pub rbar: Vec<f64>,
    /// `vterm[i] = sum_t v_i` (velocity times step count).
    pub vterm: Vec<f64>,
    /// Number of grid points summed.
    pub steps: usize,
}

impl TimeAggregates {
    pub fn from_scenario(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        let grid = scenario.time_grid();
        let n = scenario.n_helpers();
        let mut xbar = vec![0.0; n];
        let mut rbar = vec![0.0; n];
        let mut vterm = vec![0.0; n];
        for i in 0..n {
            for &t in &grid {
                xbar[i] += scenario.gap_to_ego(i, t)?;
                rbar[i] += scenario.visual_range_at(i, t)?;
            }
            vterm[i] = scenario.helpers[i].v * grid.len() as f64;
        }
        for (i, &r) in rbar.iter().enumerate() {
            if !(r > 0.0) {
                return Err(Error::ZeroTimeSummedRange {
                    helper: i,
                    value: r,
                });
            }
        }
        Ok(Self {
            xbar,
            rbar,
            vterm,
            steps: grid.len(),
        })
    }

    pub fn len(&self) -> usize {
        self.xbar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xbar.is_empty()
    }

    fn masked_sum(values: &[f64], mask: &SelectionMask) -> f64 {
        values
            .iter()
            .zip(&mask.bits)
            .filter(|(_, &b)| b)
            .map(|(v, _)| v)
            .sum()
    }
}

/// f1: time-summed distance of the selected helpers to the ego.
pub fn f1_location(agg: &TimeAggregates, mask: &SelectionMask) -> f64 {
    TimeAggregates::masked_sum(&agg.xbar, mask)
}

/// f2: reciprocal of the selected helpers' time-summed visual range.
pub fn f2_visual_range(agg: &TimeAggregates, mask: &SelectionMask) -> Result<f64> {
    if mask.is_empty() {
        return Err(Error::EmptySelection);
    }
    let total = TimeAggregates::masked_sum(&agg.rbar, mask);
    if total <= 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok(1.0 / total)
}

/// f3: summed motion blur of the selected helpers.
pub fn f3_motion_blur(
    agg: &TimeAggregates,
    camera: &CameraConstants,
    mask: &SelectionMask,
    mode: BlurMode,
) -> Result<f64> {
    let zu = camera.z * camera.u;
    match mode {
        // vterm already carries the time sum, so sum_t v*e*r/(z*u)
        // = e*r/(z*u) * vterm.
        BlurMode::Parallel => Ok(camera.e * camera.r / zu
            * TimeAggregates::masked_sum(&agg.vterm, mask)),
        BlurMode::General => {
            let (sin_phi, cos_phi) = (camera.phi.sin(), camera.phi.cos());
            let steps = agg.steps as f64;
            let mut total = 0.0;
            for (i, &selected) in mask.bits.iter().enumerate() {
                if !selected {
                    continue;
                }
                let v = agg.vterm[i] / steps;
                let numerator = v * camera.e * (camera.r * cos_phi - camera.u * camera.q * sin_phi);
                let denominator = v * camera.e * camera.u * sin_phi + zu;
                if denominator <= 0.0 {
                    return Err(Error::BlurDenominator { value: denominator });
                }
                total += steps * numerator / denominator;
            }
            Ok(total)
        }
    }
}

/// Numerator and denominator of the common-denominator composite.
///
/// `G/D` equals `w1*f1 + w2*f2 + w3*f3(parallel)` for every nonempty mask.
pub fn composite_g_d(
    agg: &TimeAggregates,
    camera: &CameraConstants,
    weights: &Weights,
    mask: &SelectionMask,
) -> Result<(f64, f64)> {
    if mask.is_empty() {
        return Err(Error::EmptySelection);
    }
    let zu = camera.z * camera.u;
    let er = camera.e * camera.r;
    let sx = TimeAggregates::masked_sum(&agg.xbar, mask);
    let sr = TimeAggregates::masked_sum(&agg.rbar, mask);
    let sv = TimeAggregates::masked_sum(&agg.vterm, mask);
    let g = weights.w1 * zu * sx * sr + weights.w2 * zu + weights.w3 * er * sv * sr;
    let d = zu * sr;
    if d == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok((g, d))
}

/// Composite ratio `G/D` for a mask.
pub fn composite_ratio(
    agg: &TimeAggregates,
    camera: &CameraConstants,
    weights: &Weights,
    mask: &SelectionMask,
) -> Result<f64> {
    let (g, d) = composite_g_d(agg, camera, weights, mask)?;
    Ok(g / d)
}

/// One quadratic constraint `s'Ps + q's + h <= 0` (or `= 0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QcqpConstraint {
    /// `None` means the zero matrix.
    pub p: Option<DMatrix<f64>>,
    pub q: DVector<f64>,
    pub h: f64,
    pub kind: ConstraintKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    /// `1's - M <= 0`.
    Cardinality,
    /// `s_i^2 - s_i = 0` for one component.
    Binarity(usize),
}

/// Dinkelbach subproblem `G(s) - eta*D(s)` as an explicit quadratic form,
/// with the cardinality and binarity constraint data alongside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QcqpForm {
    pub p0: DMatrix<f64>,
    pub q0: DVector<f64>,
    pub h0: f64,
    pub constraints: Vec<QcqpConstraint>,
    /// Cardinality bound carried for the enumerating solver.
    pub m: usize,
}

impl QcqpForm {
    pub fn n(&self) -> usize {
        self.q0.len()
    }

    /// Quadratic-form value `s'P0 s + q0's + h0` at a binary mask.
    pub fn eval(&self, bits: &[bool]) -> f64 {
        let idx: Vec<usize> = bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect();
        let mut value = self.h0;
        for &i in &idx {
            value += self.q0[i];
            for &j in &idx {
                value += self.p0[(i, j)];
            }
        }
        value
    }
}

/// Assemble the parametric subproblem for Dinkelbach parameter `eta`:
/// `P0 = sym(w1*zu*xbar*rbar' + w3*er*vterm*rbar')`, `q0 = -eta*zu*rbar`,
/// `h0 = w2*zu`, plus the cardinality (`sum s_i <= m`) and per-component
/// binarity (`s_i^2 - s_i = 0`) constraints in standard form.
pub fn assemble_qcqp(
    agg: &TimeAggregates,
    camera: &CameraConstants,
    weights: &Weights,
    eta: f64,
    m: usize,
) -> Result<QcqpForm> {
    if !eta.is_finite() {
        return Err(Error::InvalidConfig(format!("eta must be finite, got {eta}")));
    }
    if m == 0 {
        return Err(Error::InvalidConfig("cardinality bound M must be >= 1".into()));
    }
    let n = agg.len();
    let zu = camera.z * camera.u;
    let er = camera.e * camera.r;

    let left = DVector::from_fn(n, |i, _| {
        weights.w1 * zu * agg.xbar[i] + weights.w3 * er * agg.vterm[i]
    });
    let rbar = DVector::from_fn(n, |i, _| agg.rbar[i]);
    let outer = &left * rbar.transpose();
    let p0 = (&outer + outer.transpose()) * 0.5;
    let q0 = -eta * zu * &rbar;

    let mut constraints = Vec::with_capacity(n + 1);
    constraints.push(QcqpConstraint {
        p: None,
        q: DVector::from_element(n, 1.0),
        h: -(m as f64),
        kind: ConstraintKind::Cardinality,
    });
    for i in 0..n {
        let mut p = DMatrix::zeros(n, n);
        p[(i, i)] = 1.0;
        let mut q = DVector::zeros(n);
        q[i] = -1.0;
        constraints.push(QcqpConstraint {
            p: Some(p),
            q,
            h: 0.0,
            kind: ConstraintKind::Binarity(i),
        });
    }

    Ok(QcqpForm {
        p0,
        q0,
        h0: weights.w2 * zu,
        constraints,
        m,
    })
}
