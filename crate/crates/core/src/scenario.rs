//! Seeded random highway scenarios and constant-velocity kinematics.
//!
//! A scenario is an ego vehicle plus `N` helper candidates ahead of it on a
//! single-lane longitudinal axis, each with a velocity held constant over
//! the cooperation interval `[0, horizon_T]`. Positions follow a Poisson
//! point process (exponential inter-vehicle gaps), velocities a truncated
//! Gaussian. Scenarios are immutable after construction and fully determined
//! by `(config, seed)`.

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::erf;
use crate::rng::{self, Stream};
use crate::{Error, Result};

/// One vehicle: index, longitudinal/lateral position at `t = 0`, velocity.
///
/// `y0` is carried for completeness but never enters the objective; the
/// model is single-lane longitudinal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    pub id: usize,
    pub x0: f64,
    pub y0: f64,
    pub v: f64,
}

impl Vehicle {
    /// Position under constant velocity: `x0 + v * t`.
    pub fn position_at(&self, t: f64) -> f64 {
        self.x0 + self.v * t
    }
}

/// Camera constants shared by every vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraConstants {
    /// Exposure time (s).
    pub e: f64,
    /// Focal length (pixel units consistent with `z`, `u`).
    pub r: f64,
    /// CCD pixel size (m).
    pub u: f64,
    /// Perpendicular distance from the moving object to the pinhole (m).
    pub z: f64,
    /// Object start position in the image (pixels).
    #[serde(rename = "Q")]
    pub q: f64,
    /// Angle between motion direction and image plane (rad).
    pub phi: f64,
}

impl Default for CameraConstants {
    fn default() -> Self {
        Self {
            e: 0.01,
            r: 800.0,
            u: 1e-5,
            z: 20.0,
            q: 0.0,
            phi: 0.0,
        }
    }
}

impl CameraConstants {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("e", self.e), ("r", self.r), ("u", self.u), ("z", self.z)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "camera constant {name} must be strictly positive, got {v}"
                )));
            }
        }
        if !(self.q >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "camera Q must be nonnegative, got {}",
                self.q
            )));
        }
        if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&self.phi) {
            return Err(Error::InvalidConfig(format!(
                "camera phi must lie in [0, pi/2], got {}",
                self.phi
            )));
        }
        Ok(())
    }
}

/// Poisson-point-process arrivals with density `rho` over `[a, b]`.
///
/// The implied mean count is `rho * (b - a)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrivalModel {
    pub rho: f64,
    pub a: f64,
    pub b: f64,
}

impl ArrivalModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "arrival density rho must be positive, got {}",
                self.rho
            )));
        }
        if !(self.b >= self.a) {
            return Err(Error::InvalidConfig(format!(
                "arrival span must satisfy b >= a, got [{}, {}]",
                self.a, self.b
            )));
        }
        Ok(())
    }

    /// Mean vehicle count over the span.
    pub fn mean_count(&self) -> f64 {
        self.rho * (self.b - self.a)
    }
}

/// Gaussian velocity truncated to `[v_min, v_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityModel {
    pub mu: f64,
    pub sigma: f64,
    pub v_min: f64,
    pub v_max: f64,
}

impl VelocityModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "velocity sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !(self.v_min < self.v_max) {
            return Err(Error::InvalidConfig(format!(
                "velocity bounds must satisfy v_min < v_max, got [{}, {}]",
                self.v_min, self.v_max
            )));
        }
        // Rejection sampling needs non-negligible mass inside the bounds.
        if self.truncation_mass() < 1e-6 {
            return Err(Error::InvalidConfig(format!(
                "truncated-normal mass within [{}, {}] is below 1e-6",
                self.v_min, self.v_max
            )));
        }
        Ok(())
    }

    /// Probability mass of `N(mu, sigma^2)` inside `[v_min, v_max]`.
    pub fn truncation_mass(&self) -> f64 {
        let alpha = (self.v_min - self.mu) / self.sigma;
        let beta = (self.v_max - self.mu) / self.sigma;
        0.5 * (erf::erf(beta / std::f64::consts::SQRT_2) - erf::erf(alpha / std::f64::consts::SQRT_2))
    }
}

/// An ego vehicle plus `N` ordered helper candidates ahead of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub ego: Vehicle,
    pub helpers: Vec<Vehicle>,
    /// Cooperation interval length (s).
    #[serde(rename = "horizon_T")]
    pub horizon_t: f64,
    /// Time-grid step (s); `horizon_T / dt` must be a whole number.
    pub dt: f64,
    pub camera: CameraConstants,
    pub seed: u64,
    /// Visual range assigned to the lead helper, which has no vehicle ahead.
    pub lead_range: f64,
}

impl Scenario {
    /// Number of helper candidates.
    pub fn n_helpers(&self) -> usize {
        self.helpers.len()
    }

    /// Grid instants `0, dt, 2dt, ..., horizon_T` (inclusive).
    pub fn time_grid(&self) -> Vec<f64> {
        let steps = (self.horizon_t / self.dt).round() as usize;
        (0..=steps).map(|k| k as f64 * self.dt).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon_t > 0.0) || !(self.dt > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "horizon_T and dt must be positive, got {} and {}",
                self.horizon_t, self.dt
            )));
        }
        let ratio = self.horizon_t / self.dt;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "horizon_T/dt must be a whole number of steps, got {ratio}"
            )));
        }
        if self.helpers.is_empty() {
            return Err(Error::InvalidConfig("scenario has no helpers".into()));
        }
        if !(self.lead_range > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "lead visual range must be positive, got {}",
                self.lead_range
            )));
        }
        let mut prev = self.ego.x0;
        for h in &self.helpers {
            if !(h.x0 > prev) {
                return Err(Error::InvalidConfig(format!(
                    "helper {} at x0 = {} is not strictly ahead of its predecessor at {}",
                    h.id, h.x0, prev
                )));
            }
            prev = h.x0;
        }
        self.camera.validate()
    }

    /// Gap from helper `i` to the next helper ahead at time `t`.
    ///
    /// Defined for `i < N - 1`; the lead helper has no successor (its visual
    /// range is the configured [`Scenario::lead_range`] instead).
    pub fn relative_gap(&self, i: usize, t: f64) -> Result<f64> {
        if i + 1 >= self.helpers.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.helpers.len().saturating_sub(1),
            });
        }
        Ok(self.helpers[i + 1].position_at(t) - self.helpers[i].position_at(t))
    }

    /// Visual range of helper `i` at time `t`: gap to the next helper, or
    /// the capped lead range for the last one.
    pub fn visual_range_at(&self, i: usize, t: f64) -> Result<f64> {
        if i >= self.helpers.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.helpers.len(),
            });
        }
        if i + 1 == self.helpers.len() {
            Ok(self.lead_range)
        } else {
            self.relative_gap(i, t)
        }
    }

    /// Distance from the ego to helper `i` at time `t`.
    pub fn gap_to_ego(&self, i: usize, t: f64) -> Result<f64> {
        let h = self
            .helpers
            .get(i)
            .ok_or(Error::IndexOutOfRange {
                index: i,
                len: self.helpers.len(),
            })?;
        Ok(h.position_at(t) - self.ego.position_at(t))
    }

    /// Ego-to-helper distances at the start of the interval.
    pub fn distances_at_start(&self, mask_indices: &[usize]) -> Result<Vec<f64>> {
        mask_indices.iter().map(|&i| self.gap_to_ego(i, 0.0)).collect()
    }

    /// Number of adjacent pairs (ego included) whose order inverts at some
    /// grid instant. Overtakes are recorded, not forbidden.
    pub fn count_overtakes(&self) -> usize {
        let grid = self.time_grid();
        let mut all: Vec<&Vehicle> = Vec::with_capacity(self.helpers.len() + 1);
        all.push(&self.ego);
        all.extend(self.helpers.iter());
        all.windows(2)
            .filter(|w| {
                grid.iter()
                    .any(|&t| w[1].position_at(t) <= w[0].position_at(t))
            })
            .count()
    }
}

/// Everything needed to generate a [`Scenario`] from a seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    /// Number of helper candidates ahead of the ego.
    pub n_helpers: usize,
    pub arrival: ArrivalModel,
    pub velocity: VelocityModel,
    #[serde(rename = "horizon_T")]
    pub horizon_t: f64,
    pub dt: f64,
    /// Max sensing range for the lead helper (m); clipped to the span length.
    pub r_max: f64,
    pub camera: CameraConstants,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_helpers: 10,
            arrival: ArrivalModel {
                rho: 0.01,
                a: 0.0,
                b: 1000.0,
            },
            velocity: VelocityModel {
                mu: 30.0,
                sigma: 5.0,
                v_min: 20.0,
                v_max: 40.0,
            },
            horizon_t: 1.0,
            dt: 0.1,
            r_max: 150.0,
            camera: CameraConstants::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_helpers == 0 {
            return Err(Error::InvalidConfig("n_helpers must be at least 1".into()));
        }
        if !(self.r_max > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "r_max must be positive, got {}",
                self.r_max
            )));
        }
        self.arrival.validate()?;
        if !(self.arrival.b > self.arrival.a) {
            return Err(Error::InvalidConfig(
                "arrival span must be non-degenerate to place helpers".into(),
            ));
        }
        self.velocity.validate()?;
        self.camera.validate()?;
        let ratio = self.horizon_t / self.dt;
        if !(self.horizon_t > 0.0) || !(self.dt > 0.0) || (ratio - ratio.round()).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "horizon_T = {} and dt = {} must be positive with a whole step count",
                self.horizon_t, self.dt
            )));
        }
        Ok(())
    }
}

/// Sample PPP arrival positions over `[a, b]`: cumulative sums of
/// exponential inter-arrival gaps, truncated at the first point beyond `b`.
pub fn sample_positions(model: &ArrivalModel, seed: u64) -> Result<Vec<f64>> {
    model.validate()?;
    let mut rng = rng::substream(seed, Stream::Positions);
    let exp = Exp::new(model.rho).expect("validated rho > 0");
    let mut out = Vec::new();
    let mut x = model.a;
    loop {
        x += exp.sample(&mut rng);
        if x > model.b {
            break;
        }
        out.push(x);
    }
    Ok(out)
}

/// Draw one truncated-Gaussian velocity by rejection from `N(mu, sigma^2)`.
///
/// Rejection keeps the exact conditional law; the model validator bounds the
/// expected number of proposals by requiring non-negligible mass in-range.
pub fn sample_velocity(model: &VelocityModel, seed: u64) -> Result<f64> {
    model.validate()?;
    let mut rng = rng::substream(seed, Stream::Velocities);
    Ok(draw_velocity(model, &mut rng))
}

fn draw_velocity<R: Rng>(model: &VelocityModel, rng: &mut R) -> f64 {
    let normal = Normal::new(model.mu, model.sigma).expect("validated sigma > 0");
    loop {
        let v = normal.sample(rng);
        if v >= model.v_min && v <= model.v_max {
            return v;
        }
    }
}

/// Generate a scenario with exactly `n_helpers` candidates.
///
/// Conditional on its count, a PPP over `[a, b]` is a sorted sample of
/// i.i.d. uniforms, so fixed-size scenarios draw positions that way; the
/// unconditional process is available through [`sample_positions`]. The ego
/// sits at the start of the span.
///
/// Draws where some helper's time-summed visual range degenerates to zero
/// or below (tight gap plus adverse closing speed) are redrawn from the
/// next derived seed, so every returned scenario supports the objective.
/// Redraws are deterministic in `seed`.
pub fn generate(config: &ScenarioConfig, seed: u64) -> Result<Scenario> {
    config.validate()?;
    for attempt in 0..64 {
        let scenario = generate_once(config, seed, attempt)?;
        if time_summed_ranges_positive(&scenario) {
            return Ok(scenario);
        }
    }
    Err(Error::InvalidConfig(format!(
        "could not draw a scenario with positive time-summed visual ranges \
         after 64 attempts (seed {seed}); widen the span or shorten the horizon"
    )))
}

fn time_summed_ranges_positive(scenario: &Scenario) -> bool {
    let grid = scenario.time_grid();
    for i in 0..scenario.n_helpers() {
        let total: f64 = grid
            .iter()
            .map(|&t| scenario.visual_range_at(i, t).unwrap_or(f64::NEG_INFINITY))
            .sum();
        if !(total > 0.0) {
            return false;
        }
    }
    true
}

fn generate_once(config: &ScenarioConfig, seed: u64, attempt: u64) -> Result<Scenario> {
    let draw_seed = if attempt == 0 {
        seed
    } else {
        rng::replication_seed(seed, u64::MAX - attempt)
    };
    let mut pos_rng = rng::substream(draw_seed, Stream::Positions);
    let mut vel_rng = rng::substream(draw_seed, Stream::Velocities);

    let (a, b) = (config.arrival.a, config.arrival.b);
    let mut xs: Vec<f64> = (0..config.n_helpers)
        .map(|_| pos_rng.random_range(a..b))
        .collect();
    xs.sort_by(|p, q| p.partial_cmp(q).expect("finite positions"));
    // Coincident draws have probability zero; nudge defensively so the
    // strict-ordering invariant holds bit-for-bit.
    for i in 1..xs.len() {
        if xs[i] <= xs[i - 1] {
            xs[i] = f64::from_bits(xs[i - 1].to_bits() + 1);
        }
    }

    let ego = Vehicle {
        id: 0,
        x0: a,
        y0: 0.0,
        v: draw_velocity(&config.velocity, &mut vel_rng),
    };
    let helpers: Vec<Vehicle> = xs
        .iter()
        .enumerate()
        .map(|(i, &x0)| Vehicle {
            id: i + 1,
            x0,
            y0: 0.0,
            v: draw_velocity(&config.velocity, &mut vel_rng),
        })
        .collect();

    let scenario = Scenario {
        ego,
        helpers,
        horizon_t: config.horizon_t,
        dt: config.dt,
        camera: config.camera,
        seed,
        lead_range: config.r_max.min(b - a),
    };
    scenario.validate()?;
    Ok(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arrival() -> ArrivalModel {
        ArrivalModel {
            rho: 0.01,
            a: 0.0,
            b: 1000.0,
        }
    }

    #[test]
    fn positions_increasing_within_span() {
        let xs = sample_positions(&arrival(), 3).unwrap();
        for w in xs.windows(2) {
            assert!(w[0] < w[1]);
        }
        assert!(xs.iter().all(|&x| x >= 0.0 && x <= 1000.0));
    }

    #[test]
    fn positions_empty_span_gives_empty_list() {
        let model = ArrivalModel {
            rho: 0.01,
            a: 0.0,
            b: 0.0,
        };
        assert!(sample_positions(&model, 1).unwrap().is_empty());
    }

    #[test]
    fn positions_deterministic() {
        assert_eq!(
            sample_positions(&arrival(), 42).unwrap(),
            sample_positions(&arrival(), 42).unwrap()
        );
    }

    #[test]
    fn velocity_within_bounds() {
        let model = VelocityModel {
            mu: 30.0,
            sigma: 5.0,
            v_min: 20.0,
            v_max: 40.0,
        };
        for seed in 0..200 {
            let v = sample_velocity(&model, seed).unwrap();
            assert!((20.0..=40.0).contains(&v));
        }
    }

    #[test]
    fn velocity_degenerate_sigma_concentrates() {
        let model = VelocityModel {
            mu: 30.0,
            sigma: 1e-9,
            v_min: 20.0,
            v_max: 40.0,
        };
        let v = sample_velocity(&model, 5).unwrap();
        assert!((v - 30.0).abs() < 1e-6);
    }

    #[test]
    fn position_at_examples() {
        let v = Vehicle {
            id: 1,
            x0: 100.0,
            y0: 0.0,
            v: 30.0,
        };
        assert_eq!(v.position_at(0.0), 100.0);
        assert_eq!(v.position_at(2.0), 160.0);
        let still = Vehicle {
            id: 2,
            x0: 0.0,
            y0: 0.0,
            v: 0.0,
        };
        assert_eq!(still.position_at(123.0), 0.0);
    }

    #[test]
    fn relative_gap_closed_form() {
        let scenario = generate(&ScenarioConfig::default(), 11).unwrap();
        for i in 0..scenario.n_helpers() - 1 {
            for &t in &scenario.time_grid() {
                let gap = scenario.relative_gap(i, t).unwrap();
                let closed = t * (scenario.helpers[i + 1].v - scenario.helpers[i].v)
                    + (scenario.helpers[i + 1].x0 - scenario.helpers[i].x0);
                assert!((gap - closed).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn relative_gap_equal_velocities_constant() {
        let mk = |id, x0| Vehicle {
            id,
            x0,
            y0: 0.0,
            v: 25.0,
        };
        let scenario = Scenario {
            ego: mk(0, 0.0),
            helpers: vec![mk(1, 50.0), mk(2, 100.0)],
            horizon_t: 1.0,
            dt: 0.5,
            camera: CameraConstants::default(),
            seed: 0,
            lead_range: 150.0,
        };
        let g0 = scenario.relative_gap(0, 0.0).unwrap();
        let g1 = scenario.relative_gap(0, 10.0).unwrap();
        assert_eq!(g0, g1);
    }

    #[test]
    fn relative_gap_out_of_range() {
        let scenario = generate(&ScenarioConfig::default(), 1).unwrap();
        let last = scenario.n_helpers() - 1;
        assert!(matches!(
            scenario.relative_gap(last, 0.0),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert_eq!(scenario.visual_range_at(last, 0.0).unwrap(), scenario.lead_range);
    }

    #[test]
    fn generation_deterministic_and_ordered() {
        let cfg = ScenarioConfig::default();
        let s1 = generate(&cfg, 99).unwrap();
        let s2 = generate(&cfg, 99).unwrap();
        assert_eq!(s1, s2);
        assert_eq!(s1.n_helpers(), 10);
        for w in s1.helpers.windows(2) {
            assert!(w[0].x0 < w[1].x0);
        }
        assert!(s1.helpers[0].x0 > s1.ego.x0);
    }

    #[test]
    fn lead_range_clipped_to_span() {
        let mut cfg = ScenarioConfig::default();
        cfg.r_max = 5000.0;
        let s = generate(&cfg, 4).unwrap();
        assert_eq!(s.lead_range, 1000.0);
    }
}
