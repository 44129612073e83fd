//! Scenario files: the complete, validated input of one simulation.
//!
//! A scenario is a JSON document naming a device model, a traffic source,
//! a policy configuration, the horizon, and the seed. Validation resolves
//! every cross-reference before any simulation starts and names the
//! offending field on failure.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{LpiPeer, RunInput, RunMeta, Summon, TrafficSource};
use crate::lpi::{Advertiser, LpiParams};
use crate::models::{self, ModelError};
use crate::policy::{parse_iso_offset, PolicyConfig, ScheduledAction};
use crate::sla::SlaPolicy;
use crate::traffic::{
    generate_aggregate, generate_poisson, load_trace, AppClass, OnOffSourceParams, PoissonParams,
    TrafficError,
};
use crate::Nanos;

pub const SCENARIO_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario field `{field}`: {reason}")]
    Field { field: String, reason: String },
    #[error("cannot read scenario {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("scenario is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Traffic(#[from] TrafficError),
}

fn field_err(field: &str, reason: impl std::fmt::Display) -> ScenarioError {
    ScenarioError::Field {
        field: field.to_string(),
        reason: reason.to_string(),
    }
}

/// A time offset: raw nanoseconds or an ISO-8601-style duration string.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum TimeOffset {
    Ns(Nanos),
    Iso(String),
}

impl TimeOffset {
    pub fn to_ns(&self, field: &str) -> Result<Nanos, ScenarioError> {
        match self {
            TimeOffset::Ns(n) => Ok(*n),
            TimeOffset::Iso(s) => parse_iso_offset(s)
                .ok_or_else(|| field_err(field, format!("`{s}` is not an ISO-8601 duration"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeviceSection {
    /// Shipped model name, or a path to a device model file.
    pub model: String,
    /// Cards powered at start (chassis fill); default all populated.
    #[serde(default)]
    pub populated_linecards: Option<u32>,
    #[serde(default)]
    pub lpi: Option<LpiSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LpiSection {
    #[serde(default = "default_true")]
    pub enabled: bool,
    #[serde(default = "default_true")]
    pub peer_supported: bool,
    /// Replaces the per-link parameters from the device model.
    #[serde(default)]
    pub params: Option<LpiParams>,
    #[serde(default)]
    pub peer_params: Option<LpiParams>,
    #[serde(default = "default_advertiser")]
    pub advertiser: Advertiser,
}

fn default_true() -> bool {
    true
}

fn default_advertiser() -> Advertiser {
    Advertiser::Local
}

impl Default for LpiSection {
    fn default() -> Self {
        LpiSection {
            enabled: true,
            peer_supported: true,
            params: None,
            peer_params: None,
            advertiser: Advertiser::Local,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrafficSection {
    /// Uniformly spaced packets at a fraction of device capacity.
    Constant {
        load: f64,
        #[serde(default = "default_packet_size")]
        packet_size_bytes: u32,
        #[serde(default = "default_app_class")]
        app_class: AppClass,
    },
    /// Superposed heavy-tailed ON/OFF sources.
    OnOff {
        sources: Vec<OnOffSourceParams>,
        #[serde(default = "default_count")]
        count_per_params: usize,
    },
    /// Poisson control generator.
    Poisson {
        rate_pps: f64,
        #[serde(default = "default_packet_size")]
        packet_size_bytes: u32,
        #[serde(default = "default_app_class")]
        app_class: AppClass,
    },
    /// Replay a trace file.
    Trace { path: PathBuf },
}

fn default_packet_size() -> u32 {
    1500
}

fn default_app_class() -> AppClass {
    AppClass::BestEffort
}

fn default_count() -> usize {
    1
}

/// Scheduled action with a flexible time representation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub at: TimeOffset,
    pub action: crate::policy::ActionKind,
    pub target: String,
    #[serde(default)]
    pub expected_duration_class: Option<crate::policy::SlowProcessClass>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicySection {
    #[serde(default)]
    pub mode: crate::policy::PolicyMode,
    #[serde(default)]
    pub idle_threshold_ns: Option<Nanos>,
    #[serde(default)]
    pub marginal_policy: Option<crate::sla::MarginalPolicy>,
    #[serde(default)]
    pub sleep_scope: Option<crate::policy::SleepScope>,
    #[serde(default = "default_true")]
    pub sla_gating: bool,
    #[serde(default)]
    pub class_window_ns: Option<Nanos>,
    #[serde(default = "default_true")]
    pub summons_enabled: bool,
    #[serde(default)]
    pub schedule: Vec<ScheduleEntry>,
}

impl Default for PolicySection {
    fn default() -> Self {
        PolicySection {
            mode: crate::policy::PolicyMode::PeakOnly,
            idle_threshold_ns: None,
            marginal_policy: None,
            sleep_scope: None,
            sla_gating: true,
            class_window_ns: None,
            summons_enabled: true,
            schedule: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlaSection {
    /// Mission-critical budget; the other class budgets are fixed data.
    #[serde(default)]
    pub mc_budget_ns: Option<Nanos>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummonEntry {
    pub at: TimeOffset,
    pub target: String,
}

/// The on-disk scenario document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub format_version: u32,
    pub device: DeviceSection,
    pub traffic: TrafficSection,
    #[serde(default)]
    pub policy: PolicySection,
    #[serde(default)]
    pub sla: Option<SlaSection>,
    pub duration_ns: Nanos,
    pub seed: u64,
    #[serde(default)]
    pub summons: Vec<SummonEntry>,
    #[serde(default)]
    pub energy_window_ns: Option<Nanos>,
    #[serde(default)]
    pub policy_tick_ns: Option<Nanos>,
    /// Requested report set; `summary` is always produced.
    #[serde(default)]
    pub outputs: Vec<String>,
}

impl Scenario {
    pub fn from_path(path: &Path) -> Result<Scenario, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Scenario::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Scenario, ScenarioError> {
        let scenario: Scenario = serde_json::from_str(text)?;
        if scenario.format_version != SCENARIO_FORMAT_VERSION {
            return Err(field_err(
                "format_version",
                format!(
                    "{} unsupported (expected {SCENARIO_FORMAT_VERSION})",
                    scenario.format_version
                ),
            ));
        }
        Ok(scenario)
    }

    /// Override the seed (CLI `--seed`).
    pub fn with_seed(mut self, seed: u64) -> Scenario {
        self.seed = seed;
        self
    }

    /// Sweep helpers: the load and packet-size axes require constant
    /// traffic; fill applies to any scenario.
    pub fn with_load(mut self, load: f64) -> Result<Scenario, ScenarioError> {
        match &mut self.traffic {
            TrafficSection::Constant { load: l, .. } => {
                *l = load;
                Ok(self)
            }
            _ => Err(field_err(
                "traffic.kind",
                "load sweep requires constant traffic",
            )),
        }
    }

    pub fn with_packet_size(mut self, size: u32) -> Result<Scenario, ScenarioError> {
        match &mut self.traffic {
            TrafficSection::Constant {
                packet_size_bytes, ..
            } => {
                *packet_size_bytes = size;
                Ok(self)
            }
            _ => Err(field_err(
                "traffic.kind",
                "packet-size sweep requires constant traffic",
            )),
        }
    }

    pub fn with_fill(mut self, cards: u32) -> Scenario {
        self.device.populated_linecards = Some(cards);
        self
    }

    /// Resolve models, generate traffic, and produce a runnable input.
    pub fn build(&self) -> Result<RunInput, ScenarioError> {
        let mut device = models::resolve_model(&self.device.model)?;

        let lpi_section = self.device.lpi.clone().unwrap_or_default();
        if let Some(params) = &lpi_section.params {
            params
                .validate()
                .map_err(|e| field_err("device.lpi.params", e))?;
            for lc in &mut device.linecards {
                for comp in &mut lc.components {
                    if comp.lpi.is_some() {
                        comp.lpi = Some(params.clone());
                    }
                }
            }
        }
        let lpi_peer = if lpi_section.enabled {
            Some(LpiPeer {
                supported: lpi_section.peer_supported,
                params_override: lpi_section.peer_params.clone(),
                advertiser: lpi_section.advertiser,
            })
        } else {
            None
        };

        if let Some(n) = self.device.populated_linecards {
            if n as usize > device.linecards.len() {
                return Err(field_err(
                    "device.populated_linecards",
                    format!("{n} exceeds the {} linecards", device.linecards.len()),
                ));
            }
        }

        let traffic = self.build_traffic()?;

        let mut policy = PolicyConfig {
            mode: self.policy.mode,
            sla_gating: self.policy.sla_gating,
            summons_enabled: self.policy.summons_enabled,
            ..PolicyConfig::default()
        };
        if let Some(v) = self.policy.idle_threshold_ns {
            policy.idle_threshold_ns = v;
        }
        if let Some(v) = self.policy.marginal_policy {
            policy.marginal_policy = v;
        }
        if let Some(v) = self.policy.sleep_scope {
            policy.sleep_scope = v;
        }
        if let Some(v) = self.policy.class_window_ns {
            policy.class_window_ns = v;
        }
        for (i, entry) in self.policy.schedule.iter().enumerate() {
            let at_ns = entry.at.to_ns(&format!("policy.schedule[{i}].at"))?;
            policy.schedule.push(ScheduledAction {
                at_ns,
                action: entry.action,
                target: entry.target.clone(),
                expected_duration_class: entry.expected_duration_class,
            });
        }
        policy
            .validate()
            .map_err(|e| field_err("policy", e))?;

        let sla = match &self.sla {
            Some(SlaSection {
                mc_budget_ns: Some(mc),
            }) => SlaPolicy::shipped(*mc),
            _ => SlaPolicy::default(),
        };

        let meta = RunMeta {
            load: match &self.traffic {
                TrafficSection::Constant { load, .. } => Some(*load),
                _ => None,
            },
            packet_size_bytes: match &self.traffic {
                TrafficSection::Constant {
                    packet_size_bytes, ..
                } => Some(*packet_size_bytes),
                _ => None,
            },
            fill: self.device.populated_linecards,
        };

        let summons = self
            .summons
            .iter()
            .enumerate()
            .map(|(i, s)| {
                Ok(Summon {
                    at_ns: s.at.to_ns(&format!("summons[{i}].at"))?,
                    target: s.target.clone(),
                })
            })
            .collect::<Result<Vec<_>, ScenarioError>>()?;

        let mut input = RunInput::new(device, traffic, self.duration_ns, self.seed);
        input.policy = policy;
        input.sla = sla;
        input.lpi_peer = lpi_peer;
        input.populated_cards = self.device.populated_linecards.map(|n| n as usize);
        input.meta = meta;
        input.summons = summons;
        if let Some(w) = self.energy_window_ns {
            input.energy_window_ns = w;
        }
        if let Some(t) = self.policy_tick_ns {
            input.policy_tick_ns = t;
        }
        Ok(input)
    }

    fn build_traffic(&self) -> Result<TrafficSource, ScenarioError> {
        match &self.traffic {
            TrafficSection::Constant {
                load,
                packet_size_bytes,
                app_class,
            } => {
                if !(0.0..=1.0).contains(load) || load.is_nan() {
                    return Err(field_err("traffic.load", format!("{load} outside [0, 1]")));
                }
                Ok(TrafficSource::Constant {
                    load: *load,
                    packet_size_bytes: *packet_size_bytes,
                    app_class: *app_class,
                })
            }
            TrafficSection::OnOff {
                sources,
                count_per_params,
            } => {
                if sources.is_empty() {
                    return Err(field_err("traffic.sources", "must not be empty"));
                }
                let stream =
                    generate_aggregate(sources, *count_per_params, self.duration_ns, self.seed)
                        .map_err(|e| field_err("traffic.sources", e))?;
                Ok(TrafficSource::Stream(stream))
            }
            TrafficSection::Poisson {
                rate_pps,
                packet_size_bytes,
                app_class,
            } => {
                let params = PoissonParams {
                    rate_pps: *rate_pps,
                    packet_size_bytes: *packet_size_bytes,
                    app_class: *app_class,
                };
                let stream = generate_poisson(&params, self.duration_ns, self.seed)
                    .map_err(|e| field_err("traffic.rate_pps", e))?;
                Ok(TrafficSource::Stream(stream))
            }
            TrafficSection::Trace { path } => Ok(TrafficSource::Stream(load_trace(path)?)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(traffic: &str) -> String {
        format!(
            r#"{{
              "format_version": 1,
              "device": {{ "model": "mx960-like" }},
              "traffic": {traffic},
              "duration_ns": 1000000,
              "seed": 42
            }}"#
        )
    }

    #[test]
    fn minimal_constant_scenario_builds() {
        let s = Scenario::from_json(&minimal(
            r#"{ "kind": "constant", "load": 0.5 }"#,
        ))
        .unwrap();
        let input = s.build().unwrap();
        assert_eq!(input.duration_ns, 1_000_000);
        assert_eq!(input.seed, 42);
        assert_eq!(input.meta.load, Some(0.5));
        assert!(matches!(input.traffic, TrafficSource::Constant { .. }));
    }

    #[test]
    fn unknown_model_names_the_problem() {
        let s = Scenario::from_json(
            &minimal(r#"{ "kind": "constant", "load": 0.5 }"#)
                .replace("mx960-like", "missing-model"),
        )
        .unwrap();
        let err = s.build().unwrap_err();
        assert!(err.to_string().contains("missing-model"), "{err}");
    }

    #[test]
    fn bad_load_names_the_field() {
        let s = Scenario::from_json(&minimal(r#"{ "kind": "constant", "load": 1.5 }"#)).unwrap();
        let err = s.build().unwrap_err();
        assert!(err.to_string().contains("traffic.load"), "{err}");
    }

    #[test]
    fn format_version_checked() {
        let text = minimal(r#"{ "kind": "constant", "load": 0.5 }"#)
            .replace("\"format_version\": 1", "\"format_version\": 9");
        let err = Scenario::from_json(&text).unwrap_err();
        assert!(err.to_string().contains("format_version"), "{err}");
    }

    #[test]
    fn iso_schedule_offsets_convert() {
        let text = r#"{
          "format_version": 1,
          "device": { "model": "mx960-like" },
          "traffic": { "kind": "constant", "load": 0.0 },
          "policy": {
            "mode": "idle_management",
            "schedule": [
              { "at": "PT0.5S", "action": "deactivate_linecard", "target": "lc3" },
              { "at": 1000, "action": "deactivate_psu", "target": "0" }
            ]
          },
          "duration_ns": 1000000000,
          "seed": 1
        }"#;
        let s = Scenario::from_json(text).unwrap();
        let input = s.build().unwrap();
        assert_eq!(input.policy.schedule[0].at_ns, 500_000_000);
        assert_eq!(input.policy.schedule[1].at_ns, 1_000);
    }

    #[test]
    fn on_off_traffic_generates_deterministically() {
        let text = r#"{
          "format_version": 1,
          "device": { "model": "mx960-like" },
          "traffic": { "kind": "on_off", "count_per_params": 4, "sources": [{
            "shape_on": 1.4, "shape_off": 1.4,
            "min_on_ns": 100000, "min_off_ns": 1000000,
            "peak_rate_bps": 1000000000, "packet_size_bytes": 1500,
            "app_class": "Voice"
          }] },
          "duration_ns": 100000000,
          "seed": 9
        }"#;
        let a = Scenario::from_json(text).unwrap().build().unwrap();
        let b = Scenario::from_json(text).unwrap().build().unwrap();
        match (&a.traffic, &b.traffic) {
            (TrafficSource::Stream(x), TrafficSource::Stream(y)) => assert_eq!(x, y),
            _ => panic!("expected streams"),
        }
    }

    #[test]
    fn sweep_helpers() {
        let s = Scenario::from_json(&minimal(r#"{ "kind": "constant", "load": 0.5 }"#)).unwrap();
        let loaded = s.clone().with_load(1.0).unwrap();
        match loaded.traffic {
            TrafficSection::Constant { load, .. } => assert_eq!(load, 1.0),
            _ => unreachable!(),
        }
        let filled = s.clone().with_fill(2);
        assert_eq!(filled.device.populated_linecards, Some(2));
        // load sweep rejected on trace scenarios
        let t = Scenario::from_json(&minimal(r#"{ "kind": "trace", "path": "/dev/null" }"#)).unwrap();
        assert!(t.with_load(0.5).is_err());
    }

    #[test]
    fn lpi_params_override_applies_to_phys() {
        let text = r#"{
          "format_version": 1,
          "device": { "model": "mx960-like", "lpi": { "params": {
            "t_s_ns": 100000, "t_q_ns": 40000, "t_r_ns": 1000, "t_w_ns": 20000,
            "quiet_power_fraction": 0.1, "refresh_power_fraction": 1.0
          } } },
          "traffic": { "kind": "constant", "load": 0.0 },
          "duration_ns": 1000000,
          "seed": 1
        }"#;
        let input = Scenario::from_json(text).unwrap().build().unwrap();
        let phy = input.device.linecards[0]
            .components
            .iter()
            .find(|c| c.lpi.is_some())
            .unwrap();
        assert_eq!(phy.lpi.as_ref().unwrap().t_s_ns, 100_000);
    }
}
