//! Closed-form C-V2X sidelink model.
//!
//! Resource-block pool sizing, random-access collision probability, log-
//! distance path loss with log-normal shadowing, sensing-threshold outage,
//! and the per-link throughput/energy pair built from them.
//!
//! Domain conventions: link-budget arithmetic (transmit power minus path
//! loss against the sensing threshold) is done in dB, while energy
//! accounting converts transmit power to linear watts. The deterministic
//! outage formula uses the shadowing mean (default 0 dB) in the margin and
//! folds the randomness into the Gaussian tail; a Monte-Carlo mode samples
//! shadowing per packet for cross-validation.

use serde::{Deserialize, Serialize};

use crate::erf;
use crate::rng::{self, Stream};
use crate::{Error, Result};

/// Sidelink channel constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CommConfig {
    /// Transmission-interval count factor in the pool size.
    pub theta: f64,
    /// Number of subchannels on the sidelink band.
    pub w_subch: f64,
    /// Channel busy ratio in `[0, 1)`.
    pub cbr: f64,
    /// Path-loss exponent, between 2 and 4.
    pub gamma: f64,
    /// Reference path loss at 1 m (dB).
    pub l0: f64,
    /// Shadowing standard deviation (dB).
    pub sigma_sh: f64,
    /// Shadowing mean used in the deterministic margin (dB).
    pub sh_mean: f64,
    /// Sensing power threshold (dBm).
    pub p_sen: f64,
    /// Rate delivered per resource block (bits/s per RB).
    pub r_ch: f64,
    /// Transmission interval (s).
    pub t_tx: f64,
    /// Total transmit-power budget across selected vehicles (W).
    pub p_total_w: f64,
    /// Per-vehicle power floor (W); derived from the budget when absent.
    pub p_min_w: Option<f64>,
    /// Direct override of the pool size, used by budget-ladder sweeps.
    pub w_t_override: Option<f64>,
}

impl Default for CommConfig {
    fn default() -> Self {
        Self {
            theta: 10.0,
            w_subch: 5.0,
            cbr: 0.2,
            gamma: 2.75,
            l0: 47.86,
            sigma_sh: 3.0,
            sh_mean: 0.0,
            p_sen: -90.5,
            r_ch: 1000.0,
            t_tx: 0.1,
            p_total_w: 0.05,
            p_min_w: None,
            w_t_override: None,
        }
    }
}

impl CommConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.cbr) {
            return Err(Error::InvalidConfig(format!(
                "CBR must lie in [0, 1), got {}",
                self.cbr
            )));
        }
        if !(2.0..=4.0).contains(&self.gamma) {
            return Err(Error::InvalidConfig(format!(
                "path-loss exponent must lie in [2, 4], got {}",
                self.gamma
            )));
        }
        if !(self.sigma_sh > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "shadowing sigma must be positive, got {}",
                self.sigma_sh
            )));
        }
        if !(self.theta >= 1.0) || !(self.w_subch >= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "theta and W_subCh must be at least 1, got {} and {}",
                self.theta, self.w_subch
            )));
        }
        if !(self.r_ch > 0.0) || !(self.t_tx > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "R_ch and T must be positive, got {} and {}",
                self.r_ch, self.t_tx
            )));
        }
        if !(self.p_total_w > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "power budget must be positive, got {}",
                self.p_total_w
            )));
        }
        if let Some(p_min) = self.p_min_w {
            if !(p_min > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "power floor must be positive, got {p_min}"
                )));
            }
        }
        Ok(())
    }

    /// Usable pool size `w_T = theta * W_subCh * (1 - CBR)`, kept real.
    pub fn rb_pool(&self) -> f64 {
        self.theta * self.w_subch * (1.0 - self.cbr)
    }

    /// Pool size honoring a sweep override.
    pub fn effective_pool(&self) -> f64 {
        self.w_t_override.unwrap_or_else(|| self.rb_pool())
    }

    /// Per-vehicle power floor for `m` vehicles: the configured value, or
    /// `max(1e-3 * P_T, P_T / (100 m))` so `1/P` stays bounded.
    pub fn power_floor(&self, m: usize) -> f64 {
        self.p_min_w
            .unwrap_or_else(|| (1e-3 * self.p_total_w).max(self.p_total_w / (100.0 * m as f64)))
    }
}

/// One ego-to-helper link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkState {
    /// Ego-helper distance (m).
    pub d: f64,
    /// Transmit power (dBm).
    pub p_tx_dbm: f64,
    /// Allocated resource blocks (may be fractional during optimization).
    pub w: f64,
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * (watts * 1000.0).log10()
}

/// Deterministic path loss `10*gamma*log10(d) + L0 + SH_mean` (dB).
pub fn path_loss_db(config: &CommConfig, d: f64) -> f64 {
    10.0 * config.gamma * d.log10() + config.l0 + config.sh_mean
}

/// Standardized sensing margin `Q` fed to the erf.
pub fn sensing_margin(config: &CommConfig, link: &LinkState) -> f64 {
    (link.p_tx_dbm - path_loss_db(config, link.d) - config.p_sen)
        / (config.sigma_sh * std::f64::consts::SQRT_2)
}

/// Collision probability among `m` vehicles drawing uniformly from a pool
/// of `w_t` resource blocks: `1 - (1 - 1/w_t)^(m-1)`.
pub fn collision_prob(w_t: f64, m: usize) -> Result<f64> {
    if w_t < 1.0 {
        return Err(Error::PoolExhausted { w_t });
    }
    if m == 0 {
        return Err(Error::InvalidConfig("collision model needs m >= 1".into()));
    }
    Ok(1.0 - (1.0 - 1.0 / w_t).powi(m as i32 - 1))
}

/// Probability the received power falls below the sensing threshold:
/// `0.5 * (1 - erf(Q))`.
pub fn sensing_error(config: &CommConfig, link: &LinkState) -> f64 {
    0.5 * (1.0 - erf::erf(sensing_margin(config, link)))
}

/// Sensing error with the error function truncated at `order` series terms,
/// clamped into `[0, 1]`. Order 0 is the linear truncation the simplified
/// allocation objective uses.
pub fn sensing_error_taylor(config: &CommConfig, link: &LinkState, order: usize) -> f64 {
    let q = sensing_margin(config, link);
    (0.5 * (1.0 - erf::erf_taylor(q, order))).clamp(0.0, 1.0)
}

/// Monte-Carlo cross-check of [`sensing_error`]: sample shadowing per packet
/// and count threshold violations.
pub fn sensing_error_monte_carlo(
    config: &CommConfig,
    link: &LinkState,
    trials: usize,
    seed: u64,
) -> f64 {
    let mut rng = rng::substream(seed, Stream::Shadowing);
    let normal = rand_distr::Normal::new(config.sh_mean, config.sigma_sh).expect("sigma > 0");
    let mut below = 0usize;
    for _ in 0..trials {
        let sh: f64 = rand_distr::Distribution::sample(&normal, &mut rng);
        let p_rx = link.p_tx_dbm - 10.0 * config.gamma * link.d.log10() - config.l0 - sh;
        if p_rx < config.p_sen {
            below += 1;
        }
    }
    below as f64 / trials as f64
}

/// Combined per-link error `delta_COL * delta_SEN`.
pub fn total_error(delta_col: f64, delta_sen: f64) -> f64 {
    delta_col * delta_sen
}

/// Throughput `R_ch * w * (1 - delta_Er)`.
pub fn throughput(config: &CommConfig, link: &LinkState, delta_er: f64) -> f64 {
    config.r_ch * link.w * (1.0 - delta_er)
}

/// Energy `P_tx[W] * T / (1 - delta_Er)`; the error term pays for resending
/// lost bits.
pub fn energy(config: &CommConfig, link: &LinkState, delta_er: f64) -> Result<f64> {
    if delta_er >= 1.0 {
        return Err(Error::LinkDead);
    }
    Ok(dbm_to_watts(link.p_tx_dbm) * config.t_tx / (1.0 - delta_er))
}

/// Full per-link evaluation, one CSV row in the harness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkReport {
    pub d: f64,
    pub p_tx_dbm: f64,
    pub w: f64,
    pub delta_col: f64,
    pub delta_sen: f64,
    pub delta_er: f64,
    pub throughput: f64,
    pub energy: f64,
}

/// Evaluate a link end to end for a given vehicle count `m`.
pub fn link_report(config: &CommConfig, link: &LinkState, m: usize) -> Result<LinkReport> {
    config.validate()?;
    if !(link.d > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "link distance must be positive, got {}",
            link.d
        )));
    }
    let delta_col = collision_prob(config.effective_pool(), m)?;
    let delta_sen = sensing_error(config, link);
    let delta_er = total_error(delta_col, delta_sen);
    Ok(LinkReport {
        d: link.d,
        p_tx_dbm: link.p_tx_dbm,
        w: link.w,
        delta_col,
        delta_sen,
        delta_er,
        throughput: throughput(config, link, delta_er),
        energy: energy(config, link, delta_er)?,
    })
}
