//! Runtime state of the device under simulation: component power states,
//! per-card service tracking, and the wall-referred energy ledger.

use crate::lpi::{LpiParams, LpiPhase, LpiState};
use crate::power::{
    CalibratedDevice, CardSnapshot, ComponentPower, ComponentSpec, PowerSnapshot, PowerStateName,
};
use crate::traffic::AppClass;
use crate::Nanos;

use super::result::{EnergyBucket, EnergyLedger, LedgerRow, N_BUCKETS};

/// Administrative state driven by the idle-management schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CardAdmin {
    Up,
    BringingUp,
    Down,
}

/// Power state of one component instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CompState {
    Steady(PowerStateName),
    Transition {
        from: PowerStateName,
        to: PowerStateName,
        ends_ns: Nanos,
    },
    /// PHY governed by the LPI machine (Active phase included).
    Lpi(LpiState),
}

impl CompState {
    pub fn functional(&self, spec: &ComponentSpec) -> bool {
        match self {
            CompState::Steady(s) => spec.state(*s).map(|st| st.functional).unwrap_or(false),
            CompState::Transition { .. } => false,
            CompState::Lpi(state) => state.phase == LpiPhase::Active,
        }
    }

    fn power(&self, params: Option<&LpiParams>) -> ComponentPower {
        match self {
            CompState::Steady(s) => ComponentPower::State(*s),
            CompState::Transition { from, to, .. } => ComponentPower::Transitioning(*from, *to),
            CompState::Lpi(state) => match params {
                Some(p) => ComponentPower::Scaled(crate::lpi::phase_power_fraction(state.phase, p)),
                None => ComponentPower::State(PowerStateName::Active),
            },
        }
    }

    fn bucket(&self) -> EnergyBucket {
        match self {
            CompState::Steady(PowerStateName::Active) => EnergyBucket::Active,
            CompState::Steady(PowerStateName::LowPowerIdle) => EnergyBucket::LowPowerIdle,
            CompState::Steady(PowerStateName::Off) => EnergyBucket::Off,
            CompState::Transition { .. } => EnergyBucket::Transition,
            CompState::Lpi(s) => match s.phase {
                LpiPhase::Active => EnergyBucket::Active,
                LpiPhase::Sleep => EnergyBucket::LpiSleep,
                LpiPhase::Quiet => EnergyBucket::LpiQuiet,
                LpiPhase::Refresh => EnergyBucket::LpiRefresh,
                LpiPhase::Wake => EnergyBucket::LpiWake,
            },
        }
    }
}

pub struct ComponentRuntime {
    pub state: CompState,
    /// Negotiated LPI parameters, when this PHY runs the LPI machine.
    pub lpi_params: Option<LpiParams>,
    /// Invalidates stale LPI timer events.
    pub lpi_timer_gen: u64,
    /// Traffic arrived while a sleep-entry transition was in flight; wake
    /// as soon as it lands.
    pub pending_wake: bool,
    /// Start of the current energy segment.
    seg_since: Nanos,
    /// Owned by a scheduled bringup until this time; delay-variable must
    /// not touch it inside the window.
    pub managed_until: Option<Nanos>,
    /// Time spent Active (accruing dynamic share) inside the open window.
    active_accum_ns: Nanos,
    active_since: Option<Nanos>,
    joules: [f64; N_BUCKETS],
}

impl ComponentRuntime {
    pub fn is_active(&self) -> bool {
        matches!(self.state, CompState::Steady(PowerStateName::Active))
            || matches!(self.state, CompState::Lpi(s) if s.phase == LpiPhase::Active)
    }
}

pub struct CardRuntime {
    pub admin: CardAdmin,
    pub components: Vec<ComponentRuntime>,
    /// Cached pipeline check; refreshed by update_nf on state changes.
    pub functional: bool,
    /// Last time a packet was served on this card.
    pub last_served_ns: Nanos,
    /// Per-class most recent sighting, for strictest-class gating.
    pub class_last_seen: [Option<Nanos>; 5],
    /// Cumulative nanoseconds with a non-functional datapath.
    nf_accum_ns: Nanos,
    nf_since: Option<Nanos>,
    /// Serviced work inside the open energy window.
    pub window_bits: u64,
    pub window_packets: u64,
}

impl CardRuntime {
    /// Non-functional datapath time accumulated up to `now`.
    pub fn nf_ns_at(&self, now: Nanos) -> Nanos {
        self.nf_accum_ns + self.nf_since.map_or(0, |s| now - s)
    }

    /// Most demanding class observed within the sliding window. Before any
    /// observation the window is empty and gating falls back to the classes
    /// declared by the traffic source (cold-start safety: a component must
    /// not sleep past the budget of traffic that is known to be coming).
    pub fn strictest_class(
        &self,
        now: Nanos,
        window_ns: Nanos,
        declared: Option<AppClass>,
        budget_of: impl Fn(AppClass) -> Option<Nanos>,
    ) -> Option<AppClass> {
        let cutoff = now.saturating_sub(window_ns);
        let mut best: Option<(AppClass, Nanos)> = None;
        let mut any_seen = false;
        for (i, seen) in self.class_last_seen.iter().enumerate() {
            if let Some(t) = seen {
                any_seen = true;
                if *t >= cutoff {
                    let class = AppClass::ALL[i];
                    let budget = budget_of(class).unwrap_or(u64::MAX);
                    if best.map_or(true, |(_, b)| budget < b) {
                        best = Some((class, budget));
                    }
                }
            }
        }
        if !any_seen {
            return declared;
        }
        best.map(|(c, _)| c)
    }
}

pub struct DeviceRuntime {
    pub device: CalibratedDevice,
    pub cards: Vec<CardRuntime>,
    pub active_fabric_planes: u32,
    pub active_psus: u32,
    /// (fabric planes, psus, common) energy segments cut at state changes.
    chassis_seg_since: Nanos,
    fabric_joules: f64,
    psu_joules: f64,
    common_joules: f64,
    transition_joules_total: f64,
    /// Optional recording for the power-audit test.
    pub record_timeline: bool,
    pub timeline: Vec<TimelineSegment>,
    window_open_since: Nanos,
}

/// One homogeneous interval for the audit: no state change inside, rates
/// from the window the interval belongs to.
pub struct TimelineSegment {
    pub from_ns: Nanos,
    pub to_ns: Nanos,
    pub snapshot: PowerSnapshot,
}

impl DeviceRuntime {
    pub fn new(device: CalibratedDevice, populated_cards: usize, record_timeline: bool) -> Self {
        let cards = device
            .linecards
            .iter()
            .enumerate()
            .map(|(i, lc)| {
                let up = i < populated_cards;
                let components = lc
                    .components
                    .iter()
                    .map(|_| ComponentRuntime {
                        state: if up {
                            CompState::Steady(PowerStateName::Active)
                        } else {
                            CompState::Steady(PowerStateName::Off)
                        },
                        lpi_params: None,
                        lpi_timer_gen: 0,
                        pending_wake: false,
                        seg_since: 0,
                        managed_until: None,
                        active_accum_ns: 0,
                        active_since: if up { Some(0) } else { None },
                        joules: [0.0; N_BUCKETS],
                    })
                    .collect();
                CardRuntime {
                    admin: if up { CardAdmin::Up } else { CardAdmin::Down },
                    components,
                    functional: up,
                    last_served_ns: 0,
                    class_last_seen: [None; 5],
                    nf_accum_ns: 0,
                    nf_since: if up { None } else { Some(0) },
                    window_bits: 0,
                    window_packets: 0,
                }
            })
            .collect();
        DeviceRuntime {
            active_fabric_planes: device.fabric_planes,
            active_psus: device.power_supplies,
            device,
            cards,
            chassis_seg_since: 0,
            fabric_joules: 0.0,
            psu_joules: 0.0,
            common_joules: 0.0,
            transition_joules_total: 0.0,
            record_timeline,
            timeline: Vec::new(),
            window_open_since: 0,
        }
    }

    pub fn spec(&self, card: usize, comp: usize) -> &ComponentSpec {
        &self.device.linecards[card].components[comp]
    }

    /// Is the card's datapath able to serve right now?
    pub fn pipeline_functional(&self, card: usize) -> bool {
        if self.cards[card].admin != CardAdmin::Up {
            return false;
        }
        let lc = &self.device.linecards[card];
        self.cards[card]
            .components
            .iter()
            .zip(&lc.components)
            .all(|(rt, spec)| !spec.datapath || rt.state.functional(spec))
    }

    /// Refresh the card's non-functional clock and cache after a state
    /// change.
    pub fn update_nf(&mut self, card: usize, now: Nanos) {
        let functional = self.pipeline_functional(card);
        let rt = &mut self.cards[card];
        rt.functional = functional;
        match (functional, rt.nf_since) {
            (false, None) => rt.nf_since = Some(now),
            (true, Some(since)) => {
                rt.nf_accum_ns += now - since;
                rt.nf_since = None;
            }
            _ => {}
        }
    }

    /// Close the open energy segment of a component at `now` and move it to
    /// `next` state. Adds the segment's wall-referred joules to its bucket.
    pub fn set_comp_state(&mut self, card: usize, comp: usize, now: Nanos, next: CompState) {
        self.cut_comp_segment(card, comp, now);
        let rt = &mut self.cards[card].components[comp];
        let was_active = rt.is_active();
        rt.state = next;
        let is_active = rt.is_active();
        if was_active != is_active {
            if is_active {
                rt.active_since = Some(now);
            } else if let Some(since) = rt.active_since.take() {
                rt.active_accum_ns += now - since;
            }
        }
    }

    fn cut_comp_segment(&mut self, card: usize, comp: usize, now: Nanos) {
        let eff = self.device.psu_efficiency;
        let spec = &self.device.linecards[card].components[comp];
        let rt = &mut self.cards[card].components[comp];
        let dt = now - rt.seg_since;
        if dt > 0 {
            let draw =
                crate::power::component_draw_w(spec, rt.state.power(rt.lpi_params.as_ref()));
            let bucket = rt.state.bucket();
            rt.joules[bucket as usize] += draw / eff * crate::ns_to_secs(dt);
        }
        rt.seg_since = now;
    }

    /// Lump a transition's energy cost at its start.
    pub fn add_transition_energy(&mut self, card: usize, comp: usize, joules: f64) {
        let eff = self.device.psu_efficiency;
        let rt = &mut self.cards[card].components[comp];
        rt.joules[EnergyBucket::Transition as usize] += joules / eff;
        self.transition_joules_total += joules / eff;
    }

    /// Cut the chassis-level (fabric / PSU / common) segment at `now`.
    pub fn cut_chassis_segment(&mut self, now: Nanos) {
        let dt = now - self.chassis_seg_since;
        if dt > 0 {
            let secs = crate::ns_to_secs(dt);
            self.fabric_joules += self.active_fabric_planes as f64
                * self.device.fabric_plane_draw_w
                / self.device.psu_efficiency
                * secs;
            self.psu_joules += self.active_psus as f64 * self.device.psu_overhead_w * secs;
            self.common_joules += self.device.common_draw_w * secs;
        }
        self.chassis_seg_since = now;
    }

    pub fn note_served(&mut self, card: usize, now: Nanos, bits: u64) {
        let rt = &mut self.cards[card];
        rt.last_served_ns = now;
        rt.window_bits += bits;
        rt.window_packets += 1;
    }

    pub fn note_class_seen(&mut self, card: usize, now: Nanos, class: AppClass) {
        self.cards[card].class_last_seen[class.index()] = Some(now);
    }

    /// Close the energy window [window_open_since, now): distribute each
    /// card's dynamic watts over its Active components in proportion to
    /// budget share and Active dwell time inside the window.
    pub fn close_window(&mut self, now: Nanos) {
        let window_ns = now - self.window_open_since;
        if window_ns == 0 {
            return;
        }
        if self.record_timeline {
            self.record_window_timeline(now);
        }
        let eff = self.device.psu_efficiency;
        let window_secs = crate::ns_to_secs(window_ns);
        for (card_idx, lc) in self.device.linecards.iter().enumerate() {
            let rt = &mut self.cards[card_idx];
            let bit_rate = rt.window_bits as f64 / window_secs;
            let pkt_rate = rt.window_packets as f64 / window_secs;
            let dyn_w = if rt.window_bits > 0 {
                lc.dynamic_inside_w(bit_rate, pkt_rate, self.device.reference_packet_bytes)
            } else {
                0.0
            };
            for (comp_idx, comp) in rt.components.iter_mut().enumerate() {
                let active_ns = comp.active_accum_ns
                    + comp.active_since.map_or(0, |s| now - s);
                if dyn_w > 0.0 && active_ns > 0 {
                    let share = lc.components[comp_idx].budget_share;
                    comp.joules[EnergyBucket::Dynamic as usize] +=
                        dyn_w * share / eff * crate::ns_to_secs(active_ns);
                }
                comp.active_accum_ns = 0;
                if comp.active_since.is_some() {
                    comp.active_since = Some(now);
                }
            }
            rt.window_bits = 0;
            rt.window_packets = 0;
        }
        self.window_open_since = now;
    }

    /// Record one audit segment for the window being closed. Valid because
    /// the engine closes the window before every state change while
    /// recording, so power state is constant across the segment.
    fn record_window_timeline(&mut self, now: Nanos) {
        let window_ns = now - self.window_open_since;
        let window_secs = crate::ns_to_secs(window_ns);
        let cards = self
            .device
            .linecards
            .iter()
            .zip(&self.cards)
            .map(|(_lc, rt)| CardSnapshot {
                component_power: rt
                    .components
                    .iter()
                    .map(|c| c.state.power(c.lpi_params.as_ref()))
                    .collect(),
                dynamic_active: rt.components.iter().map(|c| c.is_active()).collect(),
                bit_rate_bps: rt.window_bits as f64 / window_secs,
                pkt_rate_pps: rt.window_packets as f64 / window_secs,
            })
            .collect();
        self.timeline.push(TimelineSegment {
            from_ns: self.window_open_since,
            to_ns: now,
            snapshot: PowerSnapshot {
                cards,
                active_fabric_planes: self.active_fabric_planes,
                active_psus: self.active_psus,
            },
        });
    }

    /// Assemble the final ledger; all open segments must have been cut.
    pub fn into_ledger(mut self, end_ns: Nanos) -> EnergyLedger {
        self.cut_chassis_segment(end_ns);
        for card in 0..self.cards.len() {
            for comp in 0..self.cards[card].components.len() {
                self.cut_comp_segment(card, comp, end_ns);
            }
        }
        let mut rows = Vec::new();
        for (lc, card) in self.device.linecards.iter().zip(&self.cards) {
            for (spec, rt) in lc.components.iter().zip(&card.components) {
                rows.push(LedgerRow {
                    name: format!("{}/{}", lc.name, spec.name),
                    kind: spec.kind,
                    scope: lc.name.clone(),
                    joules: rt.joules,
                });
            }
        }
        let mut fabric = [0.0; N_BUCKETS];
        fabric[EnergyBucket::Active as usize] = self.fabric_joules;
        rows.push(LedgerRow {
            name: "fabric".into(),
            kind: crate::power::ComponentKind::FabricPlane,
            scope: "chassis".into(),
            joules: fabric,
        });
        let mut psu = [0.0; N_BUCKETS];
        psu[EnergyBucket::Active as usize] = self.psu_joules;
        rows.push(LedgerRow {
            name: "psu".into(),
            kind: crate::power::ComponentKind::PowerSupply,
            scope: "chassis".into(),
            joules: psu,
        });
        let mut common = [0.0; N_BUCKETS];
        common[EnergyBucket::Active as usize] = self.common_joules;
        rows.push(LedgerRow {
            name: "common".into(),
            kind: crate::power::ComponentKind::CentralCpu,
            scope: "chassis".into(),
            joules: common,
        });
        EnergyLedger { rows }
    }
}
