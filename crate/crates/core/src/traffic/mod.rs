//! Workload generation and analysis.
//!
//! Streams are produced three ways: superposed heavy-tailed ON/OFF sources
//! (self-similar aggregate), a Poisson control generator, or trace replay.
//! The module also bins streams into utilization series and estimates their
//! Hurst parameter with the variance-time method.

mod gen;
mod hurst;
mod trace;

pub use gen::{generate_aggregate, generate_poisson, OnOffSourceParams, PoissonParams};
pub use hurst::{estimate_hurst, HurstEstimate};
pub use trace::{load_trace, write_trace};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Nanos;

/// Smallest legal packet, in bytes.
pub const MIN_PACKET_BYTES: u32 = 64;
/// Default MTU ceiling, in bytes (jumbo frame).
pub const DEFAULT_MAX_PACKET_BYTES: u32 = 9216;

#[derive(Debug, Error)]
pub enum TrafficError {
    #[error("invalid source parameter: {0}")]
    Parameter(String),
    #[error("64-bit nanosecond clock overflow (duration too long)")]
    DurationOverflow,
    #[error("trace parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("trace ordering error at line {line}: timestamp {ts} precedes {prev}")]
    Ordering { line: usize, ts: Nanos, prev: Nanos },
    #[error("degenerate series: zero variance at aggregation level {level}")]
    DegenerateSeries { level: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Traffic class carried by a packet; drives SLA gating downstream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AppClass {
    #[serde(rename = "MC")]
    Mc,
    #[serde(rename = "BFD")]
    Bfd,
    Video,
    Voice,
    BestEffort,
}

impl AppClass {
    pub const ALL: [AppClass; 5] = [
        AppClass::Mc,
        AppClass::Bfd,
        AppClass::Video,
        AppClass::Voice,
        AppClass::BestEffort,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            AppClass::Mc => "MC",
            AppClass::Bfd => "BFD",
            AppClass::Video => "Video",
            AppClass::Voice => "Voice",
            AppClass::BestEffort => "BestEffort",
        }
    }

    /// Position in `ALL`, for dense per-class arrays.
    pub fn index(&self) -> usize {
        match self {
            AppClass::Mc => 0,
            AppClass::Bfd => 1,
            AppClass::Video => 2,
            AppClass::Voice => 3,
            AppClass::BestEffort => 4,
        }
    }

    pub fn parse(s: &str) -> Option<AppClass> {
        match s {
            "MC" | "mc" => Some(AppClass::Mc),
            "BFD" | "bfd" => Some(AppClass::Bfd),
            "Video" | "video" => Some(AppClass::Video),
            "Voice" | "voice" => Some(AppClass::Voice),
            "BestEffort" | "best_effort" | "besteffort" => Some(AppClass::BestEffort),
        _ => None,
        }
    }
}

impl std::fmt::Display for AppClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One packet arrival at the device edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketArrival {
    pub timestamp_ns: Nanos,
    pub size_bytes: u32,
    pub app_class: AppClass,
}

/// A time-ordered packet arrival stream over a known horizon.
///
/// Invariants: timestamps non-decreasing, sizes within [64, mtu], every
/// timestamp within the horizon.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ArrivalStream {
    arrivals: Vec<PacketArrival>,
    duration_ns: Nanos,
}

impl ArrivalStream {
    /// Build a stream, checking ordering and size invariants.
    pub fn new(
        arrivals: Vec<PacketArrival>,
        duration_ns: Nanos,
        max_packet_bytes: u32,
    ) -> Result<Self, TrafficError> {
        let mut prev = 0u64;
        for (i, a) in arrivals.iter().enumerate() {
            if a.timestamp_ns < prev {
                return Err(TrafficError::Ordering {
                    line: i + 1,
                    ts: a.timestamp_ns,
                    prev,
                });
            }
            if a.size_bytes < MIN_PACKET_BYTES || a.size_bytes > max_packet_bytes {
                return Err(TrafficError::Parameter(format!(
                    "packet size {} outside [{}, {}]",
                    a.size_bytes, MIN_PACKET_BYTES, max_packet_bytes
                )));
            }
            prev = a.timestamp_ns;
        }
        Ok(ArrivalStream {
            arrivals,
            duration_ns,
        })
    }

    /// Build without re-validating; callers must uphold the invariants.
    pub(crate) fn from_sorted_unchecked(arrivals: Vec<PacketArrival>, duration_ns: Nanos) -> Self {
        debug_assert!(arrivals.windows(2).all(|w| w[0].timestamp_ns <= w[1].timestamp_ns));
        ArrivalStream {
            arrivals,
            duration_ns,
        }
    }

    pub fn arrivals(&self) -> &[PacketArrival] {
        &self.arrivals
    }

    pub fn len(&self) -> usize {
        self.arrivals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arrivals.is_empty()
    }

    /// Generation or replay horizon in nanoseconds.
    pub fn duration_ns(&self) -> Nanos {
        self.duration_ns
    }

    pub fn total_bytes(&self) -> u64 {
        self.arrivals.iter().map(|a| a.size_bytes as u64).sum()
    }
}

/// Link utilization per fixed-width time bin, each value in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct UtilizationSeries {
    pub bin_width_ns: Nanos,
    pub capacity_bps: u64,
    pub values: Vec<f64>,
    /// Set when any raw bin exceeded line rate before clamping.
    pub overloaded: bool,
}

impl UtilizationSeries {
    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }
}

/// Bin a stream into link utilization fractions.
///
/// `values[i]` is the share of `capacity_bps` consumed by bits arriving in
/// bin `i`; raw values above 1.0 clamp to 1.0 and set the `overloaded` flag
/// (generators may transiently exceed line rate before shaping).
pub fn utilization_series(
    stream: &ArrivalStream,
    bin_width_ns: Nanos,
    capacity_bps: u64,
) -> Result<UtilizationSeries, TrafficError> {
    if bin_width_ns == 0 {
        return Err(TrafficError::Parameter("bin_width must be > 0".into()));
    }
    if capacity_bps == 0 {
        return Err(TrafficError::Parameter("capacity must be > 0".into()));
    }
    let n_bins = stream.duration_ns().div_ceil(bin_width_ns) as usize;
    let mut bits = vec![0u64; n_bins];
    for a in stream.arrivals() {
        let idx = (a.timestamp_ns / bin_width_ns) as usize;
        if idx < n_bins {
            bits[idx] += a.size_bytes as u64 * 8;
        }
    }
    // capacity per bin in bits
    let bin_capacity = capacity_bps as f64 * bin_width_ns as f64 / crate::NANOS_PER_SEC as f64;
    let mut overloaded = false;
    let values = bits
        .iter()
        .map(|&b| {
            let raw = b as f64 / bin_capacity;
            if raw > 1.0 {
                overloaded = true;
                1.0
            } else {
                raw
            }
        })
        .collect();
    Ok(UtilizationSeries {
        bin_width_ns,
        capacity_bps,
        values,
        overloaded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pkt(ts: Nanos, size: u32) -> PacketArrival {
        PacketArrival {
            timestamp_ns: ts,
            size_bytes: size,
            app_class: AppClass::BestEffort,
        }
    }

    #[test]
    fn utilization_empty_stream_is_all_zero() {
        let s = ArrivalStream::new(vec![], 10_000_000, DEFAULT_MAX_PACKET_BYTES).unwrap();
        let u = utilization_series(&s, 1_000_000, 100_000_000).unwrap();
        assert_eq!(u.values.len(), 10);
        assert!(u.values.iter().all(|&v| v == 0.0));
        assert!(!u.overloaded);
    }

    #[test]
    fn utilization_single_packet_arithmetic() {
        // one 1500-byte packet on a 100 Mbps link, 1 ms bins:
        // 12000 bits / (1e8 b/s * 1e-3 s) = 0.12
        let s = ArrivalStream::new(vec![pkt(0, 1500)], 1_000_000, DEFAULT_MAX_PACKET_BYTES)
            .unwrap();
        let u = utilization_series(&s, 1_000_000, 100_000_000).unwrap();
        assert_eq!(u.values.len(), 1);
        assert!((u.values[0] - 0.12).abs() < 1e-12);
    }

    #[test]
    fn utilization_clamps_and_flags_overload() {
        // 200 x 9216B packets in one 1 ms bin vastly exceeds 100 Mbps
        let arrivals: Vec<_> = (0..200).map(|i| pkt(i, 9216)).collect();
        let s = ArrivalStream::new(arrivals, 1_000_000, DEFAULT_MAX_PACKET_BYTES).unwrap();
        let u = utilization_series(&s, 1_000_000, 100_000_000).unwrap();
        assert_eq!(u.values[0], 1.0);
        assert!(u.overloaded);
    }

    #[test]
    fn stream_rejects_decreasing_timestamps() {
        let r = ArrivalStream::new(
            vec![pkt(10, 100), pkt(5, 100)],
            100,
            DEFAULT_MAX_PACKET_BYTES,
        );
        assert!(matches!(r, Err(TrafficError::Ordering { line: 2, .. })));
    }

    #[test]
    fn stream_rejects_undersized_packet() {
        let r = ArrivalStream::new(vec![pkt(0, 32)], 100, DEFAULT_MAX_PACKET_BYTES);
        assert!(matches!(r, Err(TrafficError::Parameter(_))));
    }
}
