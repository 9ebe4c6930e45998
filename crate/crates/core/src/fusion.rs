//! Late-fusion metric layer.
//!
//! Detections are fused per object with the max-IoU rule over the ego and
//! the helpers that survived the channel for a frame. Packet drops are
//! i.i.d. Bernoulli per helper per frame with probability `delta_Er`,
//! sampled from per-helper substreams so that raising one helper's error
//! rate can only shrink its survivor set (a monotone coupling the tests
//! rely on).
//!
//! Detection records are synthetic fixtures, not detector outputs: per
//! vehicle quality decays with distance to the object and with motion blur
//! (velocity), which is what makes nearby-but-slow helpers valuable.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{self, Stream};
use crate::scenario::Scenario;
use crate::{Error, Result};

/// One per-object detection by one vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub vehicle_id: usize,
    pub object_id: usize,
    pub iou: f64,
    pub confidence: f64,
}

impl DetectionRecord {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.iou) || !(0.0..=1.0).contains(&self.confidence) {
            return Err(Error::InvalidConfig(format!(
                "iou {} and confidence {} must lie in [0, 1]",
                self.iou, self.confidence
            )));
        }
        Ok(())
    }
}

/// Result of fusing one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionOutcome {
    /// Per-object fused IoU (max over ego and surviving helpers).
    pub fused: BTreeMap<usize, f64>,
    pub mean_iou: f64,
    pub recall: f64,
    pub f1: f64,
    /// Helper indices that survived this frame.
    pub surviving_helpers: Vec<usize>,
}

fn iou_map(records: &[DetectionRecord]) -> BTreeMap<usize, f64> {
    let mut map = BTreeMap::new();
    for r in records {
        let entry = map.entry(r.object_id).or_insert(0.0f64);
        *entry = entry.max(r.iou);
    }
    map
}

/// Fuse ego and surviving-helper detections with the max-IoU rule.
///
/// Object ids are aligned across vehicles; a missing detection counts as
/// IoU 0. Recall counts objects whose fused IoU clears `match_threshold`;
/// F1 pairs that recall with precision over objects detected at all
/// (fused IoU > 0).
pub fn fuse_max_iou(
    ego: &[DetectionRecord],
    helpers: &[Vec<DetectionRecord>],
    survivors: &[bool],
    match_threshold: f64,
) -> Result<FusionOutcome> {
    if survivors.len() != helpers.len() {
        return Err(Error::InvalidConfig(format!(
            "{} survivor flags for {} helpers",
            survivors.len(),
            helpers.len()
        )));
    }
    for r in ego.iter().chain(helpers.iter().flatten()) {
        r.validate()?;
    }

    let mut fused = iou_map(ego);
    // Make sure every object any vehicle saw is represented.
    for records in helpers {
        for r in records {
            fused.entry(r.object_id).or_insert(0.0);
        }
    }
    for (h, records) in helpers.iter().enumerate() {
        if !survivors[h] {
            continue;
        }
        for (object, iou) in iou_map(records) {
            let entry = fused.entry(object).or_insert(0.0);
            *entry = entry.max(iou);
        }
    }

    let n_objects = fused.len();
    let mean_iou = if n_objects == 0 {
        0.0
    } else {
        fused.values().sum::<f64>() / n_objects as f64
    };
    let true_positives = fused.values().filter(|&&x| x >= match_threshold).count();
    let predicted = fused.values().filter(|&&x| x > 0.0).count();
    let recall = if n_objects == 0 {
        0.0
    } else {
        true_positives as f64 / n_objects as f64
    };
    let precision = if predicted == 0 {
        0.0
    } else {
        true_positives as f64 / predicted as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };

    Ok(FusionOutcome {
        fused,
        mean_iou,
        recall,
        f1,
        surviving_helpers: survivors
            .iter()
            .enumerate()
            .filter_map(|(i, &s)| s.then_some(i))
            .collect(),
    })
}

/// Simulate per-frame helper survival under error rates `deltas`.
///
/// Returns `n_frames` rows of survivor flags. Helper `h` survives a frame
/// when its uniform draw is at least `deltas[h]`; draws come from a
/// per-helper substream, so the same seed couples runs at different error
/// rates monotonically.
pub fn simulate_drops(deltas: &[f64], n_frames: usize, seed: u64) -> Result<Vec<Vec<bool>>> {
    for &d in deltas {
        if !(0.0..=1.0).contains(&d) {
            return Err(Error::InvalidConfig(format!(
                "drop probability {d} outside [0, 1]"
            )));
        }
    }
    let mut columns: Vec<Vec<bool>> = Vec::with_capacity(deltas.len());
    for (h, &delta) in deltas.iter().enumerate() {
        let mut rng = rng::substream_indexed(seed, Stream::PacketDrops, h as u64);
        columns.push((0..n_frames).map(|_| rng.random::<f64>() >= delta).collect());
    }
    Ok((0..n_frames)
        .map(|f| columns.iter().map(|col| col[f]).collect())
        .collect())
}

/// Synthetic-detection fixture parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixtureConfig {
    pub n_objects: usize,
    /// Objects sit between these fractions of the far end of the scenario
    /// (last helper position plus its lead range).
    pub near_fraction: f64,
    pub far_fraction: f64,
    /// Peak IoU of a zero-distance, zero-velocity observer.
    pub iou_max: f64,
    /// Exponential decay scale of IoU with observer-object distance (m).
    pub decay_scale: f64,
    /// Exponential decay scale of IoU with observer velocity (m/s).
    pub blur_scale: f64,
    /// Fused-IoU threshold for recall and F1.
    pub match_threshold: f64,
}

impl Default for FixtureConfig {
    fn default() -> Self {
        Self {
            n_objects: 5,
            near_fraction: 0.7,
            far_fraction: 0.95,
            iou_max: 0.9,
            decay_scale: 300.0,
            blur_scale: 25.0,
            match_threshold: 0.5,
        }
    }
}

impl FixtureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_objects == 0 {
            return Err(Error::InvalidConfig("fixture needs at least one object".into()));
        }
        if !(0.0 < self.near_fraction && self.near_fraction <= self.far_fraction) {
            return Err(Error::InvalidConfig(format!(
                "object fractions must satisfy 0 < near <= far, got {} and {}",
                self.near_fraction, self.far_fraction
            )));
        }
        if !(0.0..=1.0).contains(&self.iou_max) {
            return Err(Error::InvalidConfig(format!(
                "iou_max must lie in [0, 1], got {}",
                self.iou_max
            )));
        }
        if !(self.decay_scale > 0.0) || !(self.blur_scale > 0.0) {
            return Err(Error::InvalidConfig(
                "decay and blur scales must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Object positions for a scenario.
    pub fn object_positions(&self, scenario: &Scenario) -> Vec<f64> {
        let far = scenario.helpers.last().map(|h| h.x0).unwrap_or(0.0) + scenario.lead_range;
        let lo = self.near_fraction * far;
        let hi = self.far_fraction * far;
        if self.n_objects == 1 {
            return vec![0.5 * (lo + hi)];
        }
        (0..self.n_objects)
            .map(|i| lo + (hi - lo) * i as f64 / (self.n_objects - 1) as f64)
            .collect()
    }
}

fn observer_records(
    vehicle_id: usize,
    x0: f64,
    v: f64,
    objects: &[f64],
    fixture: &FixtureConfig,
) -> Vec<DetectionRecord> {
    objects
        .iter()
        .enumerate()
        .map(|(object_id, &obj_x)| {
            let iou = fixture.iou_max
                * (-(obj_x - x0).abs() / fixture.decay_scale).exp()
                * (-v.abs() / fixture.blur_scale).exp();
            DetectionRecord {
                vehicle_id,
                object_id,
                iou: iou.clamp(0.0, 1.0),
                confidence: iou.clamp(0.0, 1.0),
            }
        })
        .collect()
}

/// Deterministic synthetic detections for the ego and every helper:
/// quality decays with distance to the object and with velocity.
pub fn synthetic_detections(
    scenario: &Scenario,
    fixture: &FixtureConfig,
) -> Result<(Vec<DetectionRecord>, Vec<Vec<DetectionRecord>>)> {
    fixture.validate()?;
    let objects = fixture.object_positions(scenario);
    let ego = observer_records(
        scenario.ego.id,
        scenario.ego.x0,
        scenario.ego.v,
        &objects,
        fixture,
    );
    let helpers = scenario
        .helpers
        .iter()
        .map(|h| observer_records(h.id, h.x0, h.v, &objects, fixture))
        .collect();
    Ok((ego, helpers))
}
