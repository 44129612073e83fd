//! Energy-management regimes.
//!
//! Three modes compose: peak (no management, the hero-test baseline),
//! delay-variable (sub-SLA-timescale sleep of idle components, gated by the
//! tolerance policy), and idle management (scheduled chassis-scale
//! activation/deactivation where unplanned load spikes are dropped by
//! contract). `combined` runs the last two together; they act on disjoint
//! timescales and never command the same component inside one bringup
//! window.

use serde::{Deserialize, Serialize};

use crate::power::ComponentKind;
use crate::sla::{MarginalPolicy, SlaPolicy};
use crate::traffic::AppClass;
use crate::Nanos;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyMode {
    #[default]
    PeakOnly,
    DelayVariable,
    IdleManagement,
    Combined,
}

impl PolicyMode {
    pub fn delay_variable_active(&self) -> bool {
        matches!(self, PolicyMode::DelayVariable | PolicyMode::Combined)
    }

    pub fn idle_management_active(&self) -> bool {
        matches!(self, PolicyMode::IdleManagement | PolicyMode::Combined)
    }
}

/// Which components the delay-variable regime may put to sleep: every
/// sleepable component, or only links with a negotiated low-power-idle
/// machine (an 802.3az-only deployment).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SleepScope {
    #[default]
    All,
    LpiOnly,
}

/// Chassis-scale scheduled operations (the slow-process regime).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    DeactivateLinecard,
    ActivateLinecard,
    DeactivateFabricPlane,
    ActivateFabricPlane,
    DeactivatePsu,
    ActivatePsu,
    /// Alias of linecard activation used for planned growth.
    CapacityUpgrade,
}

/// Duration classes of slow network processes, for schedule annotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlowProcessClass {
    /// Dynamic capacity (bundle) increase: seconds to minutes.
    BundleIncrease,
    /// Planned system capacity upgrade: minutes to hours.
    CapacityUpgrade,
    /// Planned non-operation: minutes, no upper limit.
    PlannedNonOperation,
    /// Short-term traffic pattern (day/night): minutes to hours.
    DayNightPattern,
    /// Long-term pattern (weekend/holiday): days to months.
    LongTermPattern,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledAction {
    /// Offset from run start; scenario files may give an ISO-8601 duration.
    pub at_ns: Nanos,
    pub action: ActionKind,
    /// Linecard name, or fabric plane / PSU index rendered as a string.
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_duration_class: Option<SlowProcessClass>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyConfig {
    #[serde(default)]
    pub mode: PolicyMode,
    /// Observed idleness before a sleep request; defaults to 10x the shipped
    /// LPI sleep-entry time to avoid thrash on micro-gaps.
    #[serde(default = "default_idle_threshold")]
    pub idle_threshold_ns: Nanos,
    #[serde(default)]
    pub marginal_policy: MarginalPolicy,
    #[serde(default)]
    pub sleep_scope: SleepScope,
    /// Negative-control switch; leave on for any honest run.
    #[serde(default = "default_true")]
    pub sla_gating: bool,
    /// Sliding window defining which classes are "present" on a component.
    #[serde(default = "default_class_window")]
    pub class_window_ns: Nanos,
    /// Whether external wake-on-demand summons are honored.
    #[serde(default = "default_true")]
    pub summons_enabled: bool,
    #[serde(default)]
    pub schedule: Vec<ScheduledAction>,
}

fn default_idle_threshold() -> Nanos {
    2_000_000 // 10 x t_s for the shipped LPI defaults
}

fn default_class_window() -> Nanos {
    crate::NANOS_PER_SEC
}

fn default_true() -> bool {
    true
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            mode: PolicyMode::PeakOnly,
            idle_threshold_ns: default_idle_threshold(),
            marginal_policy: MarginalPolicy::default(),
            sleep_scope: SleepScope::default(),
            sla_gating: true,
            class_window_ns: default_class_window(),
            summons_enabled: true,
            schedule: Vec::new(),
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.idle_threshold_ns == 0 {
            return Err("policy.idle_threshold_ns must be > 0".into());
        }
        if self.class_window_ns == 0 {
            return Err("policy.class_window_ns must be > 0".into());
        }
        Ok(())
    }
}

/// What the delay-variable policy sees of one component at a tick.
#[derive(Debug, Clone, Copy)]
pub struct ComponentIdleView {
    pub kind: ComponentKind,
    /// Wake time keying the tolerance matrix row.
    pub wake_ns: Nanos,
    /// Total delay a sleeping component would add to a packet (full wake
    /// chain; for LPI links this is the sleep + wake bound).
    pub total_wake_delay_ns: Nanos,
    pub idle_ns: Nanos,
    /// Most demanding class seen within the class window, if any.
    pub strictest_class: Option<AppClass>,
    pub sleepable: bool,
    /// A scheduled bringup currently owns this component.
    pub managed_by_schedule: bool,
}

/// Decide whether to request sleep for one component.
///
/// Requires sustained idleness past the threshold and, when gating is on, a
/// tolerance verdict for the strictest class recently present. A component
/// that saw no classed traffic in the window is unconstrained.
pub fn delay_variable_tick(
    view: &ComponentIdleView,
    config: &PolicyConfig,
    sla: &SlaPolicy,
) -> bool {
    if !config.mode.delay_variable_active()
        || !view.sleepable
        || view.managed_by_schedule
        || view.idle_ns < config.idle_threshold_ns
    {
        return false;
    }
    if !config.sla_gating {
        return true;
    }
    match view.strictest_class {
        None => true,
        Some(class) => sla.may_sleep(
            Some((view.kind, view.wake_ns)),
            view.total_wake_delay_ns,
            class,
            config.marginal_policy,
        ),
    }
}

/// Schedule entries due strictly after `after` and at or before `upto`,
/// in time order.
pub fn due_actions<'a>(
    schedule: &'a [ScheduledAction],
    after: Option<Nanos>,
    upto: Nanos,
) -> Vec<&'a ScheduledAction> {
    let mut due: Vec<&ScheduledAction> = schedule
        .iter()
        .filter(|a| after.map_or(true, |t| a.at_ns > t) && a.at_ns <= upto)
        .collect();
    due.sort_by_key(|a| a.at_ns);
    due
}

/// Parse an ISO-8601-style duration offset ("PT2.5S", "PT3M", "P1DT4H")
/// into nanoseconds.
pub fn parse_iso_offset(s: &str) -> Option<Nanos> {
    let rest = s.strip_prefix('P')?;
    let (date_part, time_part) = match rest.split_once('T') {
        Some((d, t)) => (d, t),
        None => (rest, ""),
    };
    let mut total: f64 = 0.0;
    let mut parse_fields = |part: &str, units: &[(char, f64)]| -> Option<()> {
        let mut num = String::new();
        for ch in part.chars() {
            if ch.is_ascii_digit() || ch == '.' {
                num.push(ch);
            } else {
                let (_, mult) = units.iter().find(|(u, _)| *u == ch.to_ascii_uppercase())?;
                let v: f64 = num.parse().ok()?;
                total += v * mult;
                num.clear();
            }
        }
        if num.is_empty() {
            Some(())
        } else {
            None // trailing number without a unit
        }
    };
    parse_fields(date_part, &[('D', 86_400.0)])?;
    parse_fields(time_part, &[('H', 3_600.0), ('M', 60.0), ('S', 1.0)])?;
    if !total.is_finite() || total < 0.0 {
        return None;
    }
    Some((total * crate::NANOS_PER_SEC as f64).round() as Nanos)
}
