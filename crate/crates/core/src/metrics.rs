//! Efficiency metrics over completed runs: ECR (watts per delivered Gbps),
//! sweep curves, energy breakdowns, and delay/violation summaries.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::engine::{DelaySummary, SimResult};
use crate::power::ComponentKind;
use crate::traffic::AppClass;

pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("curve needs at least two points, got {0}")]
    TooFewPoints(usize),
    #[error("mixed device models in one curve: `{0}` and `{1}`")]
    MixedModels(String, String),
    #[error("sweep point missing its `{0}` annotation")]
    MissingAxis(&'static str),
}

/// One point of an efficiency curve. `ecr` is explicitly undefined (None,
/// serialized as null/`undefined`) at zero delivered throughput; it is
/// never a numeric sentinel.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct EfficiencyPoint {
    /// Load fraction, packet size in bytes, or populated linecards.
    pub x: f64,
    pub watts: f64,
    pub gbps: f64,
    pub ecr: Option<f64>,
}

/// Energy consumption rating: average watts per delivered Gbps.
/// Undefined when nothing was delivered.
pub fn ecr(result: &SimResult) -> Option<f64> {
    let gbps = result.delivered_gbps();
    if gbps == 0.0 {
        None
    } else {
        Some(result.average_power_w() / gbps)
    }
}

fn point(x: f64, result: &SimResult) -> EfficiencyPoint {
    EfficiencyPoint {
        x,
        watts: result.average_power_w(),
        gbps: result.delivered_gbps(),
        ecr: ecr(result),
    }
}

fn check_same_model(results: &[SimResult]) -> Result<(), MetricsError> {
    if results.len() < 2 {
        return Err(MetricsError::TooFewPoints(results.len()));
    }
    let first = &results[0].model_name;
    for r in results {
        if &r.model_name != first {
            return Err(MetricsError::MixedModels(first.clone(), r.model_name.clone()));
        }
    }
    Ok(())
}

/// Efficiency versus offered load, sorted by load.
pub fn efficiency_curve(results: &[SimResult]) -> Result<Vec<EfficiencyPoint>, MetricsError> {
    check_same_model(results)?;
    let mut points = results
        .iter()
        .map(|r| {
            r.meta
                .load
                .map(|x| point(x, r))
                .ok_or(MetricsError::MissingAxis("load"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    points.sort_by(|a, b| a.x.total_cmp(&b.x));
    Ok(points)
}

/// Efficiency versus packet size at fixed load, sorted by size.
pub fn packet_size_curve(results: &[SimResult]) -> Result<Vec<EfficiencyPoint>, MetricsError> {
    check_same_model(results)?;
    let mut points = results
        .iter()
        .map(|r| {
            r.meta
                .packet_size_bytes
                .map(|x| point(x as f64, r))
                .ok_or(MetricsError::MissingAxis("packet_size"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    points.sort_by(|a, b| a.x.total_cmp(&b.x));
    Ok(points)
}

/// Efficiency versus chassis fill (populated linecards) at fixed per-card
/// load, sorted by fill.
pub fn chassis_fill_curve(results: &[SimResult]) -> Result<Vec<EfficiencyPoint>, MetricsError> {
    check_same_model(results)?;
    let mut points = results
        .iter()
        .map(|r| {
            r.meta
                .fill
                .map(|x| point(x as f64, r))
                .ok_or(MetricsError::MissingAxis("fill"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    points.sort_by(|a, b| a.x.total_cmp(&b.x));
    Ok(points)
}

/// Energy share per component kind; empty for a zero-energy run. Shares sum
/// to 1 within 1e-9.
pub fn breakdown_report(result: &SimResult) -> BTreeMap<ComponentKind, f64> {
    let total = result.ledger.total_j();
    if total <= 0.0 {
        return BTreeMap::new();
    }
    result
        .ledger
        .by_kind()
        .into_iter()
        .filter(|(_, j)| *j > 0.0)
        .map(|(k, j)| (k, j / total))
        .collect()
}

/// Delay and jitter summary plus per-class SLA violation counts.
#[derive(Debug, Clone, Serialize)]
pub struct DelayReport {
    pub delay: DelaySummary,
    /// Policy-added delay relative to the peak-mode path (the jitter an
    /// outside observer attributes to sleep/wake events).
    pub policy_added: DelaySummary,
    pub max_policy_added_ns: u64,
    pub violations: BTreeMap<AppClass, u64>,
}

/// None when the run delivered no packets.
pub fn delay_summary(result: &SimResult) -> Option<DelayReport> {
    if result.delivered_packets == 0 {
        return None;
    }
    Some(DelayReport {
        delay: result.delay.clone(),
        policy_added: result.policy_added.clone(),
        max_policy_added_ns: result.max_policy_added_ns,
        violations: result.sla_violations.clone(),
    })
}

/// Curve CSV: `x,watts,gbps,ecr` with a version header; undefined ECR cells
/// carry the literal marker `undefined`.
pub fn curve_to_csv(points: &[EfficiencyPoint], axis: &str) -> String {
    let mut out = format!("# format_version={REPORT_FORMAT_VERSION}\n{axis},watts,gbps,ecr\n");
    for p in points {
        let ecr_cell = match p.ecr {
            Some(v) => format!("{v}"),
            None => "undefined".to_string(),
        };
        out.push_str(&format!("{},{},{},{}\n", p.x, p.watts, p.gbps, ecr_cell));
    }
    out
}

/// The JSON summary document bundling every report for one run.
pub fn summary_json(result: &SimResult) -> serde_json::Value {
    let breakdown: BTreeMap<String, f64> = breakdown_report(result)
        .into_iter()
        .map(|(k, v)| (k.name().to_string(), v))
        .collect();
    let violations: BTreeMap<String, u64> = result
        .sla_violations
        .iter()
        .map(|(k, v)| (k.name().to_string(), *v))
        .collect();
    serde_json::json!({
        "format_version": REPORT_FORMAT_VERSION,
        "model": result.model_name,
        "seed": result.seed,
        "duration_ns": result.duration_ns,
        "meta": result.meta,
        "energy": {
            "total_j": result.total_energy_j,
            "average_w": result.average_power_w(),
            "breakdown_by_kind": breakdown,
        },
        "traffic": {
            "offered_packets": result.offered_packets,
            "offered_bits": result.offered_bits,
            "delivered_packets": result.delivered_packets,
            "delivered_bits": result.delivered_bits,
            "delivered_gbps": result.delivered_gbps(),
            "dropped_buffer_overflow": result.dropped_buffer_overflow,
            "dropped_port_inactive": result.dropped_port_inactive,
            "residual_in_buffer": result.residual_in_buffer,
        },
        "ecr_w_per_gbps": ecr(result),
        "delay": result.delay,
        "policy_added_delay": result.policy_added,
        "max_policy_added_ns": result.max_policy_added_ns,
        "sla_violations": violations,
        "event_log_digest": format!("{:016x}", result.event_log_digest),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{EnergyLedger, RunMeta};
    use std::collections::BTreeMap as Map;

    fn result(model: &str, load: Option<f64>, watts: f64, gbps: f64) -> SimResult {
        // a 1-second run delivering `gbps` at `watts`
        let duration_ns = crate::NANOS_PER_SEC;
        SimResult {
            model_name: model.into(),
            duration_ns,
            seed: 0,
            meta: RunMeta {
                load,
                packet_size_bytes: None,
                fill: None,
            },
            total_energy_j: watts,
            ledger: EnergyLedger::default(),
            offered_packets: 0,
            offered_bits: 0,
            delivered_packets: if gbps > 0.0 { 1 } else { 0 },
            delivered_bits: (gbps * 1e9) as u64,
            dropped_buffer_overflow: 0,
            dropped_port_inactive: 0,
            residual_in_buffer: 0,
            delay: crate::engine::DelayStats::new(0, 8).summary(),
            policy_added: crate::engine::DelayStats::new(0, 8).summary(),
            max_policy_added_ns: 0,
            sla_violations: Map::new(),
            event_log_digest: 0,
        }
    }

    #[test]
    fn ecr_quotients_from_shipped_anchors() {
        // full load: 5856 W at 640 Gbps
        let r = result("t1600-like", Some(1.0), 5856.0, 640.0);
        let e = ecr(&r).unwrap();
        assert!((e - 9.15).abs() < 1e-9, "got {e}");
        // half load: 5616 W at 320 Gbps
        let r = result("t1600-like", Some(0.5), 5616.0, 320.0);
        let e = ecr(&r).unwrap();
        assert!((e - 17.55).abs() < 1e-9, "got {e}");
    }

    #[test]
    fn ecr_undefined_at_zero_throughput() {
        let r = result("t1600-like", Some(0.0), 5376.0, 0.0);
        assert_eq!(ecr(&r), None);
    }

    #[test]
    fn ecr_identity() {
        let r = result("mx960-like", Some(1.0), 3289.0, 480.0);
        let e = ecr(&r).unwrap();
        assert!((e * r.delivered_gbps() - r.average_power_w()).abs() / r.average_power_w() < 1e-9);
    }

    #[test]
    fn t1600_sweep_is_strictly_decreasing() {
        let results = vec![
            result("t1600-like", Some(0.5), 5616.0, 320.0),
            result("t1600-like", Some(0.25), 5423.0, 160.0),
            result("t1600-like", Some(1.0), 5856.0, 640.0),
        ];
        let curve = efficiency_curve(&results).unwrap();
        let ecrs: Vec<f64> = curve.iter().map(|p| p.ecr.unwrap()).collect();
        assert!((ecrs[0] - 33.89375).abs() < 1e-9);
        assert!((ecrs[1] - 17.55).abs() < 1e-9);
        assert!((ecrs[2] - 9.15).abs() < 1e-9);
        assert!(ecrs.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn mx960_sweep_quotients() {
        let results = vec![
            result("mx960-like", Some(0.5), 3209.0, 240.0),
            result("mx960-like", Some(1.0), 3289.0, 480.0),
        ];
        let curve = efficiency_curve(&results).unwrap();
        assert!((curve[0].ecr.unwrap() - 3209.0 / 240.0).abs() < 1e-9);
        assert!((curve[1].ecr.unwrap() - 3289.0 / 480.0).abs() < 1e-9);
    }

    #[test]
    fn single_point_sweep_is_an_error() {
        let results = vec![result("t1600-like", Some(1.0), 5856.0, 640.0)];
        assert!(matches!(
            efficiency_curve(&results),
            Err(MetricsError::TooFewPoints(1))
        ));
    }

    #[test]
    fn mixed_models_are_an_error() {
        let results = vec![
            result("t1600-like", Some(0.5), 5616.0, 320.0),
            result("mx960-like", Some(1.0), 3289.0, 480.0),
        ];
        assert!(matches!(
            efficiency_curve(&results),
            Err(MetricsError::MixedModels(_, _))
        ));
    }

    #[test]
    fn undefined_cells_render_as_markers() {
        let points = vec![
            EfficiencyPoint {
                x: 0.0,
                watts: 5376.0,
                gbps: 0.0,
                ecr: None,
            },
            EfficiencyPoint {
                x: 1.0,
                watts: 5856.0,
                gbps: 640.0,
                ecr: Some(9.15),
            },
        ];
        let csv = curve_to_csv(&points, "load");
        assert!(csv.contains("0,5376,0,undefined"));
        assert!(csv.contains("9.15"));
        let json = serde_json::to_value(&points).unwrap();
        assert!(json[0]["ecr"].is_null());
    }

    #[test]
    fn empty_breakdown_for_zero_energy() {
        let r = result("t1600-like", Some(0.0), 0.0, 0.0);
        assert!(breakdown_report(&r).is_empty());
    }

    #[test]
    fn delay_summary_none_without_deliveries() {
        let r = result("t1600-like", Some(0.0), 5376.0, 0.0);
        assert!(delay_summary(&r).is_none());
    }
}
