//! Chassis power hierarchy and load-elasticity calibration.
//!
//! A device is a chassis (common infrastructure, fabric planes, power
//! supplies) holding linecards, each of which is a set of components with
//! power states and transitions. Device-level elasticity is calibrated from
//! measured (load, watts) anchor points and distributed to components
//! proportionally to their budget shares.
//!
//! Because the measured watts-vs-load curve is not linear in load, the
//! dynamic (above-idle) part of a linecard's power follows the piecewise
//! linear anchor curve of the calibration rather than a single joules/bit
//! constant; the per-component coefficient report exposes the endpoint
//! equivalent (idle static, full-load per-bit and per-packet rates).

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

use crate::lpi::LpiParams;
use crate::Nanos;

#[derive(Debug, Error)]
pub enum PowerError {
    #[error("load {0} outside [0, 1]")]
    LoadRange(f64),
    #[error("invalid calibration: {0}")]
    Calibration(String),
    #[error("invalid component spec `{0}`: {1}")]
    Component(String, String),
    #[error("invalid chassis spec: {0}")]
    Chassis(String),
}

/// The three declared power states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerStateName {
    Active,
    LowPowerIdle,
    Off,
}

impl PowerStateName {
    pub fn name(&self) -> &'static str {
        match self {
            PowerStateName::Active => "active",
            PowerStateName::LowPowerIdle => "low_power_idle",
            PowerStateName::Off => "off",
        }
    }
}

/// Linecard component roles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentKind {
    PhyLink,
    Serdes,
    NpuCore,
    SramBank,
    EmbeddedCpu,
    CentralCpu,
    FabricPlane,
    PowerSupply,
    LookupEngine,
    BufferMemory,
}

impl ComponentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ComponentKind::PhyLink => "phy_link",
            ComponentKind::Serdes => "serdes",
            ComponentKind::NpuCore => "npu_core",
            ComponentKind::SramBank => "sram_bank",
            ComponentKind::EmbeddedCpu => "embedded_cpu",
            ComponentKind::CentralCpu => "central_cpu",
            ComponentKind::FabricPlane => "fabric_plane",
            ComponentKind::PowerSupply => "power_supply",
            ComponentKind::LookupEngine => "lookup_engine",
            ComponentKind::BufferMemory => "buffer_memory",
        }
    }
}

impl std::fmt::Display for ComponentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One power state of a component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerStateSpec {
    pub name: PowerStateName,
    pub static_draw_w: f64,
    /// Joules per bit of work; nonzero only in Active.
    pub per_bit_energy_j: f64,
    /// Joules per packet of work; nonzero only in Active.
    pub per_packet_energy_j: f64,
    /// Whether the component can process traffic in this state.
    pub functional: bool,
}

/// A state-to-state transition with its cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionSpec {
    pub from: PowerStateName,
    pub to: PowerStateName,
    pub duration_ns: Nanos,
    pub energy_j: f64,
}

/// A calibrated component: declared states, transition graph, budget share.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSpec {
    pub name: String,
    pub kind: ComponentKind,
    pub states: Vec<PowerStateSpec>,
    pub transitions: Vec<TransitionSpec>,
    /// Fraction of the linecard Active budget carried by this component.
    pub budget_share: f64,
    /// Whether packets traverse this component.
    pub datapath: bool,
    /// Whether the delay-variable policy may put this component to sleep.
    pub sleepable: bool,
    /// Low-power-idle link parameters; PHY links only.
    pub lpi: Option<LpiParams>,
}

impl ComponentSpec {
    pub fn state(&self, name: PowerStateName) -> Option<&PowerStateSpec> {
        self.states.iter().find(|s| s.name == name)
    }

    pub fn active_draw_w(&self) -> f64 {
        self.state(PowerStateName::Active)
            .map(|s| s.static_draw_w)
            .unwrap_or(0.0)
    }

    pub fn static_draw_w(&self, name: PowerStateName) -> f64 {
        self.state(name).map(|s| s.static_draw_w).unwrap_or(0.0)
    }

    pub fn transition(&self, from: PowerStateName, to: PowerStateName) -> Option<&TransitionSpec> {
        self.transitions
            .iter()
            .find(|t| t.from == from && t.to == to)
    }

    /// Worst-case duration of any transition into Active.
    pub fn wake_to_active_ns(&self) -> Nanos {
        self.transitions
            .iter()
            .filter(|t| t.to == PowerStateName::Active)
            .map(|t| t.duration_ns)
            .max()
            .unwrap_or(0)
    }

    pub fn validate(&self) -> Result<(), PowerError> {
        let fail = |m: String| Err(PowerError::Component(self.name.clone(), m));
        let n_active = self
            .states
            .iter()
            .filter(|s| s.name == PowerStateName::Active)
            .count();
        if n_active != 1 {
            return fail(format!("expected exactly one Active state, found {n_active}"));
        }
        for s in &self.states {
            if s.static_draw_w < 0.0 {
                return fail(format!("negative static draw in {}", s.name.name()));
            }
            if s.name != PowerStateName::Active
                && (s.per_bit_energy_j != 0.0 || s.per_packet_energy_j != 0.0)
            {
                return fail(format!("work energy outside Active state {}", s.name.name()));
            }
        }
        if let (Some(active), Some(lpi_state)) = (
            self.state(PowerStateName::Active),
            self.state(PowerStateName::LowPowerIdle),
        ) {
            if lpi_state.static_draw_w >= active.static_draw_w && active.static_draw_w > 0.0 {
                return fail("LowPowerIdle draw must be below Active draw".into());
            }
        }
        for t in &self.transitions {
            if self.state(t.from).is_none() || self.state(t.to).is_none() {
                return fail(format!(
                    "transition {} -> {} references undeclared state",
                    t.from.name(),
                    t.to.name()
                ));
            }
            if t.energy_j < 0.0 {
                return fail("negative transition energy".into());
            }
        }
        if !self.transitions.is_empty() && !self.transition_graph_connected() {
            return fail("transition graph does not connect all declared states".into());
        }
        if !(0.0..=1.0).contains(&self.budget_share) {
            return fail(format!("budget_share {} outside [0, 1]", self.budget_share));
        }
        Ok(())
    }

    fn transition_graph_connected(&self) -> bool {
        let mut reached = vec![false; self.states.len()];
        let idx = |n: PowerStateName| self.states.iter().position(|s| s.name == n);
        reached[0] = true;
        let mut changed = true;
        while changed {
            changed = false;
            for t in &self.transitions {
                let (Some(a), Some(b)) = (idx(t.from), idx(t.to)) else {
                    return false;
                };
                if reached[a] != reached[b] {
                    reached[a] = true;
                    reached[b] = true;
                    changed = true;
                }
            }
        }
        reached.iter().all(|&r| r)
    }
}

/// Structural description of one linecard before calibration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinecardSpec {
    pub name: String,
    pub ports: u32,
    pub port_rate_bps: u64,
    #[serde(default = "default_pipeline_latency")]
    pub pipeline_latency_ns: Nanos,
    #[serde(default = "default_buffer_bytes")]
    pub buffer_bytes: u64,
    pub components: Vec<ComponentTemplate>,
}

fn default_pipeline_latency() -> Nanos {
    5_000
}

fn default_buffer_bytes() -> u64 {
    1_048_576
}

impl LinecardSpec {
    pub fn capacity_bps(&self) -> u64 {
        self.ports as u64 * self.port_rate_bps
    }
}

/// Component as declared in a device model, before calibration fills in
/// state draws. Wake times come straight from the tolerance table rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComponentTemplate {
    pub name: String,
    pub kind: ComponentKind,
    /// Fraction of linecard Active budget; defaults from the share map.
    pub budget_share: Option<f64>,
    pub wake_ns: Nanos,
    #[serde(default)]
    pub sleep_entry_ns: Nanos,
    #[serde(default)]
    pub transition_energy_j: f64,
    /// LowPowerIdle draw as a fraction of Active static draw.
    #[serde(default = "default_low_power_fraction")]
    pub low_power_fraction: f64,
    /// Whether packets traverse this component; non-datapath components
    /// never block forwarding when asleep.
    #[serde(default = "default_true")]
    pub datapath: bool,
    /// Whether the delay-variable policy may put this component to sleep.
    #[serde(default = "default_true")]
    pub sleepable: bool,
    #[serde(default)]
    pub lpi: Option<LpiParams>,
}

fn default_low_power_fraction() -> f64 {
    0.1
}

fn default_true() -> bool {
    true
}

/// Whole-chassis structure: slots, cards, shared infrastructure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChassisSpec {
    pub linecard_slots: u32,
    pub linecards: Vec<LinecardSpec>,
    pub fabric_planes: u32,
    pub fabric_plane_draw_w: f64,
    pub power_supplies: u32,
    pub psu_overhead_w: f64,
    pub psu_efficiency: f64,
    pub common_draw_w: f64,
}

impl ChassisSpec {
    pub fn validate(&self) -> Result<(), PowerError> {
        if self.linecards.len() > self.linecard_slots as usize {
            return Err(PowerError::Chassis(format!(
                "{} linecards exceed {} slots",
                self.linecards.len(),
                self.linecard_slots
            )));
        }
        if !(self.psu_efficiency > 0.0 && self.psu_efficiency <= 1.0) {
            return Err(PowerError::Chassis(format!(
                "psu_efficiency {} outside (0, 1]",
                self.psu_efficiency
            )));
        }
        if self.fabric_plane_draw_w < 0.0 || self.psu_overhead_w < 0.0 || self.common_draw_w < 0.0
        {
            return Err(PowerError::Chassis("negative draw".into()));
        }
        let mut names = std::collections::HashSet::new();
        for lc in &self.linecards {
            if !names.insert(lc.name.clone()) {
                return Err(PowerError::Chassis(format!(
                    "duplicate linecard name `{}`",
                    lc.name
                )));
            }
            if lc.ports == 0 || lc.port_rate_bps == 0 {
                return Err(PowerError::Chassis(format!(
                    "linecard `{}` has zero capacity",
                    lc.name
                )));
            }
        }
        Ok(())
    }

    pub fn capacity_bps(&self) -> u64 {
        self.linecards.iter().map(|lc| lc.capacity_bps()).sum()
    }
}

/// Measured device-level (load, watts) anchors plus nominal capacity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticityCalibration {
    pub capacity_bps: u64,
    /// (load fraction, device watts) pairs, sorted, including 0.0 and 1.0.
    pub anchors: Vec<(f64, f64)>,
}

impl ElasticityCalibration {
    pub fn validate(&self) -> Result<(), PowerError> {
        if self.capacity_bps == 0 {
            return Err(PowerError::Calibration("capacity must be > 0".into()));
        }
        if self.anchors.len() < 2 {
            return Err(PowerError::Calibration("need at least two anchors".into()));
        }
        if self.anchors.first().map(|a| a.0) != Some(0.0) {
            return Err(PowerError::Calibration("anchors must include u = 0".into()));
        }
        if self.anchors.last().map(|a| a.0) != Some(1.0) {
            return Err(PowerError::Calibration("anchors must include u = 1".into()));
        }
        for w in self.anchors.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(PowerError::Calibration("anchor loads must increase".into()));
            }
            if w[1].1 < w[0].1 {
                return Err(PowerError::Calibration(
                    "anchor watts must be non-decreasing".into(),
                ));
            }
        }
        if self.anchors.iter().any(|a| a.1 < 0.0) {
            return Err(PowerError::Calibration("negative watts anchor".into()));
        }
        Ok(())
    }
}

/// Device power at the wall for a given offered load fraction.
///
/// Piecewise-linear interpolation through the calibration anchors; exact at
/// every anchor.
pub fn device_power(cal: &ElasticityCalibration, load: f64) -> Result<f64, PowerError> {
    if !(0.0..=1.0).contains(&load) || load.is_nan() {
        return Err(PowerError::LoadRange(load));
    }
    Ok(interp(&cal.anchors, load))
}

fn interp(anchors: &[(f64, f64)], x: f64) -> f64 {
    if x <= anchors[0].0 {
        return anchors[0].1;
    }
    for w in anchors.windows(2) {
        let (x0, y0) = w[0];
        let (x1, y1) = w[1];
        if x <= x1 {
            return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
        }
    }
    anchors.last().unwrap().1
}

/// Per-kind budget shares. The shipped defaults pin 10% at the PHY; the
/// remaining split is editable model configuration.
pub type BudgetShares = BTreeMap<ComponentKind, f64>;

pub fn default_budget_shares() -> BudgetShares {
    BTreeMap::from([
        (ComponentKind::PhyLink, 0.10),
        (ComponentKind::Serdes, 0.12),
        (ComponentKind::NpuCore, 0.35),
        (ComponentKind::LookupEngine, 0.10),
        (ComponentKind::SramBank, 0.15),
        (ComponentKind::EmbeddedCpu, 0.08),
        (ComponentKind::PowerSupply, 0.10),
    ])
}

/// One row of the coefficient report, wall-referred.
#[derive(Debug, Clone, Serialize)]
pub struct CoefficientRow {
    pub name: String,
    pub kind: ComponentKind,
    /// "linecard:<name>" or "chassis".
    pub scope: String,
    pub static_draw_w: f64,
    pub per_bit_energy_j: f64,
    pub per_packet_energy_j: f64,
    /// Active power at full load and reference packet size.
    pub active_full_load_w: f64,
}

/// Endpoint-equivalent linear coefficients for every power sink in the
/// device, wall-referred so that the static column sums to the zero-load
/// anchor and the full-load column sums to the full-load anchor.
#[derive(Debug, Clone, Serialize)]
pub struct CalibrationReport {
    pub rows: Vec<CoefficientRow>,
}

impl CalibrationReport {
    pub fn total_static_w(&self) -> f64 {
        self.rows.iter().map(|r| r.static_draw_w).sum()
    }

    pub fn total_full_load_w(&self) -> f64 {
        self.rows.iter().map(|r| r.active_full_load_w).sum()
    }

    /// A kind's share of the aggregated linecard full-load budget.
    pub fn linecard_kind_share(&self, kind: ComponentKind) -> f64 {
        let card_rows: Vec<_> = self.rows.iter().filter(|r| r.scope != "chassis").collect();
        let total: f64 = card_rows.iter().map(|r| r.active_full_load_w).sum();
        if total == 0.0 {
            return 0.0;
        }
        card_rows
            .iter()
            .filter(|r| r.kind == kind)
            .map(|r| r.active_full_load_w)
            .sum::<f64>()
            / total
    }
}

/// A linecard with calibrated component coefficients and its share of the
/// device elasticity curve.
#[derive(Debug, Clone)]
pub struct CalibratedLinecard {
    pub name: String,
    pub ports: u32,
    pub port_rate_bps: u64,
    pub pipeline_latency_ns: Nanos,
    pub buffer_bytes: u64,
    pub components: Vec<ComponentSpec>,
    /// Dynamic inside-the-wall watts above idle at each calibration anchor
    /// load; linearly interpolated between anchors.
    pub dynamic_anchors: Vec<(f64, f64)>,
    /// Joules per packet beyond the reference-size packet mix.
    pub per_packet_correction_j: f64,
}

impl CalibratedLinecard {
    pub fn capacity_bps(&self) -> u64 {
        self.ports as u64 * self.port_rate_bps
    }

    pub fn idle_inside_w(&self) -> f64 {
        self.components.iter().map(|c| c.active_draw_w()).sum()
    }

    /// Dynamic inside watts for the card's served rates.
    ///
    /// The first term follows the calibration curve at the reference packet
    /// size; the second charges (or credits) the deviation of the packet
    /// rate from the reference mix at the same bit load.
    pub fn dynamic_inside_w(&self, bit_rate_bps: f64, pkt_rate_pps: f64, ref_bytes: u32) -> f64 {
        let cap = self.capacity_bps() as f64;
        if cap == 0.0 {
            return 0.0;
        }
        let u = (bit_rate_bps / cap).clamp(0.0, 1.0);
        let curve = interp(&self.dynamic_anchors, u);
        let ref_pps = bit_rate_bps / (8.0 * ref_bytes as f64);
        // oversized packets credit the per-packet term; never below zero
        (curve + self.per_packet_correction_j * (pkt_rate_pps - ref_pps)).max(0.0)
    }
}

/// A fully calibrated device ready to simulate.
#[derive(Debug, Clone)]
pub struct CalibratedDevice {
    pub name: String,
    pub calibration: ElasticityCalibration,
    pub linecard_slots: u32,
    pub linecards: Vec<CalibratedLinecard>,
    pub fabric_planes: u32,
    pub fabric_plane_draw_w: f64,
    pub power_supplies: u32,
    pub psu_overhead_w: f64,
    pub psu_efficiency: f64,
    pub common_draw_w: f64,
    pub reference_packet_bytes: u32,
    pub report: CalibrationReport,
}

impl CalibratedDevice {
    pub fn capacity_bps(&self) -> u64 {
        self.linecards.iter().map(|lc| lc.capacity_bps()).sum()
    }
}

/// Distribute the device calibration onto components.
///
/// The zero-load anchor, less chassis overheads, becomes component static
/// draws split by budget share; the above-idle anchor curve becomes each
/// card's dynamic curve; the packet-size factor becomes a per-packet
/// correction sized so that full-rate 64-byte traffic draws `factor` more
/// wall power than full-rate reference traffic.
pub fn calibrate_components(
    chassis: &ChassisSpec,
    cal: &ElasticityCalibration,
    shares: &BudgetShares,
    packet_size_factor: f64,
    reference_packet_bytes: u32,
    name: &str,
) -> Result<CalibratedDevice, PowerError> {
    chassis.validate()?;
    cal.validate()?;
    if chassis.linecards.is_empty() {
        return Err(PowerError::Chassis("no linecards populated".into()));
    }
    if !(0.0..1.0).contains(&packet_size_factor) {
        return Err(PowerError::Calibration(format!(
            "packet_size_factor {packet_size_factor} outside [0, 1)"
        )));
    }

    let p0 = device_power(cal, 0.0)?;
    let p1 = device_power(cal, 1.0)?;
    let eff = chassis.psu_efficiency;
    let overhead_w =
        chassis.common_draw_w + chassis.power_supplies as f64 * chassis.psu_overhead_w;
    let fabric_w = chassis.fabric_planes as f64 * chassis.fabric_plane_draw_w;

    // Inside-the-wall card budget at each anchor load.
    let inside = |wall: f64| (wall - overhead_w) * eff - fabric_w;
    let inside0 = inside(p0);
    if inside0 <= 0.0 {
        return Err(PowerError::Calibration(format!(
            "chassis overheads ({overhead_w} W + fabric {fabric_w} W) leave no idle budget \
             from the {p0} W zero-load anchor"
        )));
    }
    if inside(p1) < inside0 {
        return Err(PowerError::Calibration(
            "full-load anchor below zero-load anchor".into(),
        ));
    }

    let device_cap = chassis.capacity_bps() as f64;
    let mut linecards = Vec::with_capacity(chassis.linecards.len());
    let mut rows = Vec::new();

    for lc in &chassis.linecards {
        let cap_share = lc.capacity_bps() as f64 / device_cap;
        let mut share_sum = 0.0;
        for c in &lc.components {
            share_sum += resolve_share(c, shares)?;
        }
        if (share_sum - 1.0).abs() > 1e-9 {
            return Err(PowerError::Chassis(format!(
                "linecard `{}` budget shares sum to {share_sum}, expected 1.0",
                lc.name
            )));
        }

        let card_idle = inside0 * cap_share;
        let dynamic_anchors: Vec<(f64, f64)> = cal
            .anchors
            .iter()
            .map(|&(u, w)| (u, (inside(w) - inside0) * cap_share))
            .collect();
        let card_full_dyn = dynamic_anchors.last().unwrap().1;

        // Per-packet correction: at full rate, 64-byte traffic must draw
        // `factor` more wall power than reference traffic.
        let cap = lc.capacity_bps() as f64;
        let pps_small = cap / (8.0 * 64.0);
        let pps_ref = cap / (8.0 * reference_packet_bytes as f64);
        let per_packet_correction_j =
            packet_size_factor * p1 * eff * cap_share / (pps_small - pps_ref);

        let mut components = Vec::with_capacity(lc.components.len());
        for tpl in &lc.components {
            let share = resolve_share(tpl, shares)?;
            let static_w = card_idle * share;
            let full_w = static_w + card_full_dyn * share;
            let spec = build_component(tpl, share, static_w)?;
            spec.validate()?;
            rows.push(CoefficientRow {
                name: format!("{}/{}", lc.name, tpl.name),
                kind: tpl.kind,
                scope: format!("linecard:{}", lc.name),
                static_draw_w: static_w / eff,
                per_bit_energy_j: (card_full_dyn * share / eff
                    - share * per_packet_correction_j * pps_ref / eff)
                    / cap,
                per_packet_energy_j: share * per_packet_correction_j / eff,
                active_full_load_w: full_w / eff,
            });
            components.push(spec);
        }

        linecards.push(CalibratedLinecard {
            name: lc.name.clone(),
            ports: lc.ports,
            port_rate_bps: lc.port_rate_bps,
            pipeline_latency_ns: lc.pipeline_latency_ns,
            buffer_bytes: lc.buffer_bytes,
            components,
            dynamic_anchors,
            per_packet_correction_j,
        });
    }

    for i in 0..chassis.fabric_planes {
        rows.push(CoefficientRow {
            name: format!("fabric{i}"),
            kind: ComponentKind::FabricPlane,
            scope: "chassis".into(),
            static_draw_w: chassis.fabric_plane_draw_w / eff,
            per_bit_energy_j: 0.0,
            per_packet_energy_j: 0.0,
            active_full_load_w: chassis.fabric_plane_draw_w / eff,
        });
    }
    for i in 0..chassis.power_supplies {
        rows.push(CoefficientRow {
            name: format!("psu{i}"),
            kind: ComponentKind::PowerSupply,
            scope: "chassis".into(),
            static_draw_w: chassis.psu_overhead_w,
            per_bit_energy_j: 0.0,
            per_packet_energy_j: 0.0,
            active_full_load_w: chassis.psu_overhead_w,
        });
    }
    if chassis.common_draw_w > 0.0 {
        rows.push(CoefficientRow {
            name: "common".into(),
            kind: ComponentKind::CentralCpu,
            scope: "chassis".into(),
            static_draw_w: chassis.common_draw_w,
            per_bit_energy_j: 0.0,
            per_packet_energy_j: 0.0,
            active_full_load_w: chassis.common_draw_w,
        });
    }

    Ok(CalibratedDevice {
        name: name.to_string(),
        calibration: cal.clone(),
        linecard_slots: chassis.linecard_slots,
        linecards,
        fabric_planes: chassis.fabric_planes,
        fabric_plane_draw_w: chassis.fabric_plane_draw_w,
        power_supplies: chassis.power_supplies,
        psu_overhead_w: chassis.psu_overhead_w,
        psu_efficiency: chassis.psu_efficiency,
        common_draw_w: chassis.common_draw_w,
        reference_packet_bytes,
        report: CalibrationReport { rows },
    })
}

fn resolve_share(tpl: &ComponentTemplate, shares: &BudgetShares) -> Result<f64, PowerError> {
    if let Some(s) = tpl.budget_share {
        return Ok(s);
    }
    shares.get(&tpl.kind).copied().ok_or_else(|| {
        PowerError::Component(
            tpl.name.clone(),
            format!("no budget share configured for kind {}", tpl.kind),
        )
    })
}

fn build_component(
    tpl: &ComponentTemplate,
    share: f64,
    static_w: f64,
) -> Result<ComponentSpec, PowerError> {
    if !(0.0..1.0).contains(&tpl.low_power_fraction) {
        return Err(PowerError::Component(
            tpl.name.clone(),
            format!(
                "low_power_fraction {} outside [0, 1)",
                tpl.low_power_fraction
            ),
        ));
    }
    let states = vec![
        PowerStateSpec {
            name: PowerStateName::Active,
            static_draw_w: static_w,
            per_bit_energy_j: 0.0,
            per_packet_energy_j: 0.0,
            functional: true,
        },
        PowerStateSpec {
            name: PowerStateName::LowPowerIdle,
            static_draw_w: static_w * tpl.low_power_fraction,
            per_bit_energy_j: 0.0,
            per_packet_energy_j: 0.0,
            functional: false,
        },
        PowerStateSpec {
            name: PowerStateName::Off,
            static_draw_w: 0.0,
            per_bit_energy_j: 0.0,
            per_packet_energy_j: 0.0,
            functional: false,
        },
    ];
    let transitions = vec![
        TransitionSpec {
            from: PowerStateName::Active,
            to: PowerStateName::LowPowerIdle,
            duration_ns: tpl.sleep_entry_ns,
            energy_j: tpl.transition_energy_j,
        },
        TransitionSpec {
            from: PowerStateName::LowPowerIdle,
            to: PowerStateName::Active,
            duration_ns: tpl.wake_ns,
            energy_j: tpl.transition_energy_j,
        },
        TransitionSpec {
            from: PowerStateName::Active,
            to: PowerStateName::Off,
            duration_ns: 0,
            energy_j: 0.0,
        },
        TransitionSpec {
            from: PowerStateName::Off,
            to: PowerStateName::Active,
            duration_ns: tpl.wake_ns,
            energy_j: tpl.transition_energy_j,
        },
    ];
    Ok(ComponentSpec {
        name: tpl.name.clone(),
        kind: tpl.kind,
        states,
        transitions,
        budget_share: share,
        datapath: tpl.datapath,
        sleepable: tpl.sleepable,
        lpi: tpl.lpi.clone(),
    })
}

/// Instantaneous component draw as seen by the power audit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ComponentPower {
    /// Steady in a declared state.
    State(PowerStateName),
    /// Mid-transition; draws the max of the endpoint statics.
    Transitioning(PowerStateName, PowerStateName),
    /// Drawing a fraction of the Active static (LPI phases).
    Scaled(f64),
}

/// Snapshot of one card for the power audit.
#[derive(Debug, Clone)]
pub struct CardSnapshot {
    pub component_power: Vec<ComponentPower>,
    /// Components currently accruing their share of the dynamic term.
    pub dynamic_active: Vec<bool>,
    pub bit_rate_bps: f64,
    pub pkt_rate_pps: f64,
}

/// Snapshot of the whole device for the power audit.
#[derive(Debug, Clone)]
pub struct PowerSnapshot {
    pub cards: Vec<CardSnapshot>,
    pub active_fabric_planes: u32,
    pub active_psus: u32,
}

/// Wall power of a device snapshot: per-component state draws plus the
/// cards' rate-dependent dynamic terms, divided by PSU efficiency, plus
/// per-PSU overhead and the common draw.
pub fn instantaneous_power(device: &CalibratedDevice, snap: &PowerSnapshot) -> f64 {
    let mut inside = 0.0;
    for (card, cs) in device.linecards.iter().zip(&snap.cards) {
        let dyn_total = card.dynamic_inside_w(
            cs.bit_rate_bps,
            cs.pkt_rate_pps,
            device.reference_packet_bytes,
        );
        for (i, comp) in card.components.iter().enumerate() {
            inside += component_draw_w(comp, cs.component_power[i]);
            if cs.dynamic_active[i] {
                inside += comp.budget_share * dyn_total;
            }
        }
    }
    inside += snap.active_fabric_planes as f64 * device.fabric_plane_draw_w;
    let mut wall = inside / device.psu_efficiency;
    wall += snap.active_psus as f64 * device.psu_overhead_w;
    wall += device.common_draw_w;
    wall
}

pub fn component_draw_w(comp: &ComponentSpec, power: ComponentPower) -> f64 {
    match power {
        ComponentPower::State(s) => comp.static_draw_w(s),
        ComponentPower::Transitioning(a, b) => comp.static_draw_w(a).max(comp.static_draw_w(b)),
        ComponentPower::Scaled(f) => f * comp.active_draw_w(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    fn t1600() -> CalibratedDevice {
        models::shipped_model(models::T1600_LIKE).unwrap()
    }

    fn mx960() -> CalibratedDevice {
        models::shipped_model(models::MX960_LIKE).unwrap()
    }

    fn all_active_snapshot(dev: &CalibratedDevice, load: f64) -> PowerSnapshot {
        let cards = dev
            .linecards
            .iter()
            .map(|lc| {
                let n = lc.components.len();
                let cap = lc.capacity_bps() as f64;
                CardSnapshot {
                    component_power: vec![ComponentPower::State(PowerStateName::Active); n],
                    dynamic_active: vec![true; n],
                    bit_rate_bps: cap * load,
                    pkt_rate_pps: cap * load / (8.0 * dev.reference_packet_bytes as f64),
                }
            })
            .collect();
        PowerSnapshot {
            cards,
            active_fabric_planes: dev.fabric_planes,
            active_psus: dev.power_supplies,
        }
    }

    #[test]
    fn device_power_hits_anchors_exactly() {
        let dev = t1600();
        assert_eq!(device_power(&dev.calibration, 0.0).unwrap(), 5376.0);
        assert_eq!(device_power(&dev.calibration, 0.25).unwrap(), 5423.0);
        assert_eq!(device_power(&dev.calibration, 0.5).unwrap(), 5616.0);
        assert_eq!(device_power(&dev.calibration, 1.0).unwrap(), 5856.0);
    }

    #[test]
    fn device_power_interpolates_between_anchors() {
        // midpoint of the 25% and 50% anchors
        let dev = t1600();
        let w = device_power(&dev.calibration, 0.375).unwrap();
        assert!((w - 5519.5).abs() < 1e-9, "got {w}");
    }

    #[test]
    fn device_power_rejects_out_of_range_load() {
        let dev = t1600();
        assert!(device_power(&dev.calibration, -0.1).is_err());
        assert!(device_power(&dev.calibration, 1.1).is_err());
    }

    #[test]
    fn monotone_in_load_for_shipped_calibrations() {
        for dev in [t1600(), mx960()] {
            let mut prev = 0.0;
            for i in 0..=100 {
                let u = i as f64 / 100.0;
                let w = device_power(&dev.calibration, u).unwrap();
                assert!(w >= prev, "{} not monotone at {u}", dev.name);
                prev = w;
            }
        }
    }

    #[test]
    fn report_static_sum_matches_zero_load_anchor() {
        let dev = t1600();
        assert!(
            (dev.report.total_static_w() - 5376.0).abs() < 1e-3,
            "got {}",
            dev.report.total_static_w()
        );
        let dev = mx960();
        assert!((dev.report.total_static_w() - 2925.0).abs() < 1e-3);
    }

    #[test]
    fn report_full_load_sum_matches_full_anchor() {
        let dev = t1600();
        assert!(
            (dev.report.total_full_load_w() - 5856.0).abs() < 1e-3,
            "got {}",
            dev.report.total_full_load_w()
        );
        let dev = mx960();
        assert!((dev.report.total_full_load_w() - 3289.0).abs() < 1e-3);
    }

    #[test]
    fn phy_kind_holds_ten_percent_of_linecard_budget() {
        for dev in [t1600(), mx960()] {
            let share = dev.report.linecard_kind_share(ComponentKind::PhyLink);
            assert!(
                (share - 0.10).abs() < 1e-4,
                "{}: PHY share {share}",
                dev.name
            );
        }
    }

    #[test]
    fn budget_shares_recoverable_from_coefficients() {
        let dev = t1600();
        let lc = &dev.linecards[0];
        let full_dyn = lc.dynamic_anchors.last().unwrap().1;
        let total: f64 = lc
            .components
            .iter()
            .map(|c| c.active_draw_w() + c.budget_share * full_dyn)
            .sum();
        for c in &lc.components {
            let full = c.active_draw_w() + c.budget_share * full_dyn;
            let recomputed = full / total;
            assert!(
                (recomputed - c.budget_share).abs() < 1e-6,
                "{}: {recomputed} vs {}",
                c.name,
                c.budget_share
            );
        }
    }

    #[test]
    fn instantaneous_all_off_is_zero() {
        let mut dev = t1600();
        dev.common_draw_w = 0.0;
        let cards = dev
            .linecards
            .iter()
            .map(|lc| CardSnapshot {
                component_power: vec![
                    ComponentPower::State(PowerStateName::Off);
                    lc.components.len()
                ],
                dynamic_active: vec![false; lc.components.len()],
                bit_rate_bps: 0.0,
                pkt_rate_pps: 0.0,
            })
            .collect();
        let snap = PowerSnapshot {
            cards,
            active_fabric_planes: 0,
            active_psus: 0,
        };
        assert_eq!(instantaneous_power(&dev, &snap), 0.0);
    }

    #[test]
    fn instantaneous_matches_mx960_anchors() {
        let dev = mx960();
        let idle = instantaneous_power(&dev, &all_active_snapshot(&dev, 0.0));
        assert!((idle - 2925.0).abs() / 2925.0 < 0.01, "idle {idle}");
        let full = instantaneous_power(&dev, &all_active_snapshot(&dev, 1.0));
        assert!((full - 3289.0).abs() / 3289.0 < 0.01, "full {full}");
        // intermediate anchors follow the curve too
        let quarter = instantaneous_power(&dev, &all_active_snapshot(&dev, 0.25));
        assert!((quarter - 3110.0).abs() / 3110.0 < 0.01, "quarter {quarter}");
    }

    #[test]
    fn smaller_packets_draw_at_least_reference_power() {
        let dev = t1600();
        let mut small = all_active_snapshot(&dev, 1.0);
        for (cs, lc) in small.cards.iter_mut().zip(&dev.linecards) {
            cs.pkt_rate_pps = lc.capacity_bps() as f64 / (8.0 * 64.0);
        }
        let w_small = instantaneous_power(&dev, &small);
        let w_ref = instantaneous_power(&dev, &all_active_snapshot(&dev, 1.0));
        assert!(w_small >= w_ref);
        // sized by the configured 5% factor
        assert!(
            (w_small - 1.05 * w_ref).abs() / w_ref < 1e-6,
            "w_small {w_small}, w_ref {w_ref}"
        );
    }

    #[test]
    fn chassis_additivity_over_idle_linecards() {
        let dev = mx960();
        let one = {
            let mut snap = all_active_snapshot(&dev, 0.0);
            for cs in snap.cards.iter_mut().skip(1) {
                cs.component_power
                    .iter_mut()
                    .for_each(|p| *p = ComponentPower::State(PowerStateName::Off));
                cs.dynamic_active.iter_mut().for_each(|d| *d = false);
            }
            instantaneous_power(&dev, &snap)
        };
        let all = instantaneous_power(&dev, &all_active_snapshot(&dev, 0.0));
        let per_card = dev.linecards[0].idle_inside_w() / dev.psu_efficiency;
        let expected = one + 3.0 * per_card;
        assert!(
            (all - expected).abs() < 1e-9,
            "all {all}, expected {expected}"
        );
    }

    #[test]
    fn mid_transition_draws_max_of_endpoints() {
        let dev = t1600();
        let comp = &dev.linecards[0].components[0];
        let active = comp.active_draw_w();
        let draw = component_draw_w(
            comp,
            ComponentPower::Transitioning(PowerStateName::LowPowerIdle, PowerStateName::Active),
        );
        assert_eq!(draw, active);
    }

    #[test]
    fn infeasible_overheads_are_a_calibration_error() {
        let json = models::device_model_json(models::T1600_LIKE).unwrap();
        let mut model: models::DeviceModel = serde_json::from_str(&json).unwrap();
        model.chassis.common_draw_w = 10_000.0; // exceeds the idle anchor
        let err = models::calibrate(&model).unwrap_err();
        assert!(matches!(err, PowerError::Calibration(_)));
    }

    #[test]
    fn share_sum_must_be_one() {
        let json = models::device_model_json(models::T1600_LIKE).unwrap();
        let mut model: models::DeviceModel = serde_json::from_str(&json).unwrap();
        model.chassis.linecards[0].components[0].budget_share = Some(0.5);
        let err = models::calibrate(&model).unwrap_err();
        assert!(matches!(err, PowerError::Chassis(_)));
    }
}
