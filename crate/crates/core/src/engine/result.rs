//! Run results: energy ledger, packet accounting, delay statistics.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::power::ComponentKind;
use crate::traffic::AppClass;
use crate::Nanos;

/// Energy buckets per component; the ledger resolves joules by component
/// and by the state (or phase) that consumed them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyBucket {
    Active,
    LowPowerIdle,
    Off,
    Transition,
    LpiSleep,
    LpiQuiet,
    LpiRefresh,
    LpiWake,
    Dynamic,
}

pub const N_BUCKETS: usize = 9;

pub const ALL_BUCKETS: [EnergyBucket; N_BUCKETS] = [
    EnergyBucket::Active,
    EnergyBucket::LowPowerIdle,
    EnergyBucket::Off,
    EnergyBucket::Transition,
    EnergyBucket::LpiSleep,
    EnergyBucket::LpiQuiet,
    EnergyBucket::LpiRefresh,
    EnergyBucket::LpiWake,
    EnergyBucket::Dynamic,
];

#[derive(Debug, Clone, Serialize)]
pub struct LedgerRow {
    pub name: String,
    pub kind: ComponentKind,
    /// Linecard name or "chassis".
    pub scope: String,
    /// Wall-referred joules per bucket.
    pub joules: [f64; N_BUCKETS],
}

impl LedgerRow {
    pub fn total_j(&self) -> f64 {
        self.joules.iter().sum()
    }
}

/// Wall-referred energy by component and state.
#[derive(Debug, Clone, Default, Serialize)]
pub struct EnergyLedger {
    pub rows: Vec<LedgerRow>,
}

impl EnergyLedger {
    pub fn total_j(&self) -> f64 {
        self.rows.iter().map(|r| r.total_j()).sum()
    }

    pub fn by_kind(&self) -> BTreeMap<ComponentKind, f64> {
        let mut map = BTreeMap::new();
        for row in &self.rows {
            *map.entry(row.kind).or_insert(0.0) += row.total_j();
        }
        map
    }

    pub fn kind_total_j(&self, kind: ComponentKind) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.kind == kind)
            .map(|r| r.total_j())
            .sum()
    }
}

/// Why a packet was dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DropCause {
    BufferOverflow,
    PortInactive,
}

/// Streaming delay statistics: exact count/sum/max plus a bounded,
/// deterministically sampled reservoir for quantiles.
#[derive(Debug, Clone)]
pub struct DelayStats {
    reservoir: Vec<Nanos>,
    capacity: usize,
    rng: ChaCha8Rng,
    pub count: u64,
    pub sum_ns: u128,
    pub max_ns: Nanos,
}

impl DelayStats {
    pub fn new(seed: u64, capacity: usize) -> Self {
        DelayStats {
            reservoir: Vec::with_capacity(capacity.min(4096)),
            capacity,
            rng: ChaCha8Rng::seed_from_u64(seed),
            count: 0,
            sum_ns: 0,
            max_ns: 0,
        }
    }

    pub fn record(&mut self, delay_ns: Nanos) {
        self.count += 1;
        self.sum_ns += delay_ns as u128;
        self.max_ns = self.max_ns.max(delay_ns);
        if self.reservoir.len() < self.capacity {
            self.reservoir.push(delay_ns);
        } else {
            // Algorithm R, seeded: deterministic reservoir sampling.
            let j = self.rng.gen_range(0..self.count);
            if (j as usize) < self.capacity {
                self.reservoir[j as usize] = delay_ns;
            }
        }
    }

    pub fn mean_ns(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum_ns as f64 / self.count as f64
        }
    }

    /// Nearest-rank percentile over the reservoir; exact when fewer samples
    /// were seen than the reservoir holds.
    pub fn percentile_ns(&self, p: f64) -> Option<Nanos> {
        if self.reservoir.is_empty() {
            return None;
        }
        let mut sorted = self.reservoir.clone();
        sorted.sort_unstable();
        let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
        Some(sorted[rank.clamp(1, sorted.len()) - 1])
    }

    pub fn summary(&self) -> DelaySummary {
        DelaySummary {
            count: self.count,
            mean_ns: self.mean_ns(),
            p50_ns: self.percentile_ns(50.0),
            p95_ns: self.percentile_ns(95.0),
            p99_ns: self.percentile_ns(99.0),
            max_ns: if self.count == 0 { None } else { Some(self.max_ns) },
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct DelaySummary {
    pub count: u64,
    pub mean_ns: f64,
    pub p50_ns: Option<Nanos>,
    pub p95_ns: Option<Nanos>,
    pub p99_ns: Option<Nanos>,
    pub max_ns: Option<Nanos>,
}

/// Sweep-axis annotations carried through to the metrics layer.
#[derive(Debug, Clone, Default, Serialize, PartialEq)]
pub struct RunMeta {
    pub load: Option<f64>,
    pub packet_size_bytes: Option<u32>,
    pub fill: Option<u32>,
}

/// Everything a completed run reports.
#[derive(Debug, Clone)]
pub struct SimResult {
    pub model_name: String,
    pub duration_ns: Nanos,
    pub seed: u64,
    pub meta: RunMeta,

    pub total_energy_j: f64,
    pub ledger: EnergyLedger,

    pub offered_packets: u64,
    pub offered_bits: u64,
    pub delivered_packets: u64,
    pub delivered_bits: u64,
    pub dropped_buffer_overflow: u64,
    pub dropped_port_inactive: u64,
    pub residual_in_buffer: u64,

    pub delay: DelaySummary,
    /// Policy-added delay (jitter relative to the peak-mode path).
    pub policy_added: DelaySummary,
    pub max_policy_added_ns: Nanos,
    pub sla_violations: BTreeMap<AppClass, u64>,

    pub event_log_digest: u64,
}

impl SimResult {
    pub fn average_power_w(&self) -> f64 {
        if self.duration_ns == 0 {
            0.0
        } else {
            self.total_energy_j / crate::ns_to_secs(self.duration_ns)
        }
    }

    pub fn delivered_gbps(&self) -> f64 {
        if self.duration_ns == 0 {
            0.0
        } else {
            self.delivered_bits as f64 / crate::ns_to_secs(self.duration_ns) / 1e9
        }
    }

    pub fn dropped_packets(&self) -> u64 {
        self.dropped_buffer_overflow + self.dropped_port_inactive
    }

    pub fn total_violations(&self) -> u64 {
        self.sla_violations.values().sum()
    }

    /// Packet conservation: offered = delivered + dropped + residual.
    pub fn conserves_packets(&self) -> bool {
        self.offered_packets
            == self.delivered_packets + self.dropped_packets() + self.residual_in_buffer
    }
}

/// Piecewise energy integral over a component's recorded draw segments,
/// plus any transition impulse energies that began inside the interval.
///
/// Segments are (start, end, watts), non-overlapping and time-ordered.
pub fn integrate_energy(
    segments: &[(Nanos, Nanos, f64)],
    impulses: &[(Nanos, f64)],
    from_ns: Nanos,
    to_ns: Nanos,
) -> f64 {
    debug_assert!(from_ns <= to_ns);
    let mut joules = 0.0;
    for &(s, e, w) in segments {
        let lo = s.max(from_ns);
        let hi = e.min(to_ns);
        if hi > lo {
            joules += w * crate::ns_to_secs(hi - lo);
        }
    }
    for &(t, j) in impulses {
        if t >= from_ns && t < to_ns {
            joules += j;
        }
    }
    joules
}
