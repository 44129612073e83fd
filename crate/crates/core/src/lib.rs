//! chronowatt: a discrete-event energy simulator for high-performance
//! network elements.
//!
//! The simulator models a chassis (linecards, fabric planes, power supplies)
//! whose components move between power states under three cooperating
//! management regimes: peak (always-on baseline), delay-variable (802.3az-style
//! low-power idle gated by application jitter budgets), and idle management
//! (scheduled chassis-scale activation/deactivation). Traffic is either
//! replayed from traces or produced by a self-similar ON/OFF source
//! superposition, and results are reduced to efficiency metrics such as
//! watts per delivered Gbps.

pub mod batch;
pub mod engine;
pub mod lpi;
pub mod metrics;
pub mod models;
pub mod policy;
pub mod power;
pub mod scenario;
pub mod sla;
pub mod traffic;

/// Simulation clock: integer nanoseconds since run start.
///
/// A u64 nanosecond clock spans centuries, which comfortably covers the full
/// range of modeled timescales (90 ns NPU context switches up to 100 s
/// chassis bringups) in one timeline.
pub type Nanos = u64;

pub const NANOS_PER_SEC: u64 = 1_000_000_000;

/// Convert a nanosecond count to seconds as f64 (for energy/power math).
pub fn ns_to_secs(ns: Nanos) -> f64 {
    ns as f64 / NANOS_PER_SEC as f64
}
