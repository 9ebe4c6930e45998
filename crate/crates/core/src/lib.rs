//! Two-stage cooperative-perception optimization for vehicle platoons.
//!
//! Stage one picks which front vehicles should share their camera feeds with
//! an ego vehicle: a binary selection problem whose objective blends distance
//! to the ego, collective visual range, and motion blur, averaged over the
//! cooperation interval. The fractional objective is minimized exactly with
//! Dinkelbach's algorithm wrapped around subset enumeration, and a Lagrangian
//! dual of the equivalent QCQP provides an independent lower-bound
//! certificate.
//!
//! Stage two splits a transmit-power budget and a sidelink resource-block
//! pool across the selected vehicles to maximize throughput per unit energy
//! under a C-V2X error model (random-access collisions plus a log-normal
//! sensing-threshold outage). That fractional program is driven by Dinkelbach
//! iterations whose inner subproblems are solved with the Frank-Wolfe
//! conditional gradient method.
//!
//! A late-fusion layer models how per-vehicle detection quality combines
//! under packet drops, and [`scenario`] generates the seeded random highway
//! instances everything runs on.
//!
//! All randomness flows through named counter-based substreams
//! ([`rng::Stream`]), so every result is reproducible from a single `u64`
//! seed. All public types are immutable after construction and safe to share
//! across threads.

pub mod allocator;
pub mod channel;
pub mod erf;
pub mod error;
pub mod fusion;
pub mod objective;
pub mod rng;
pub mod scenario;
pub mod selector;

pub use error::{Error, Result};
