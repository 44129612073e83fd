//! Device model files and the two shipped models.
//!
//! A model file is a JSON document holding the chassis structure, the
//! measured (load, watts) calibration anchors, and packet-size/reference
//! settings. `t1600-like` (640 Gbps core router) and `mx960-like` (480 Gbps
//! ethernet services router) are embedded in the binary; a directory named
//! by the `CHRONOWATT_MODEL_DIR` environment variable can shadow them or add
//! new models.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::power::{
    calibrate_components, default_budget_shares, BudgetShares, CalibratedDevice, ChassisSpec,
    ElasticityCalibration, PowerError,
};

pub const T1600_LIKE: &str = "t1600-like";
pub const MX960_LIKE: &str = "mx960-like";
pub const MODEL_DIR_ENV: &str = "CHRONOWATT_MODEL_DIR";

pub const MODEL_FORMAT_VERSION: u32 = 1;

const T1600_JSON: &str = include_str!("../models/t1600-like.json");
const MX960_JSON: &str = include_str!("../models/mx960-like.json");

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("unknown device model `{0}` (no file and not a shipped model)")]
    Unknown(String),
    #[error("model file {path}: {reason}")]
    Format { path: String, reason: String },
    #[error(transparent)]
    Power(#[from] PowerError),
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// On-disk device model document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeviceModel {
    pub format_version: u32,
    pub name: String,
    pub calibration: ElasticityCalibration,
    pub chassis: ChassisSpec,
    #[serde(default = "default_packet_size_factor")]
    pub packet_size_factor: f64,
    #[serde(default = "default_reference_packet_bytes")]
    pub reference_packet_bytes: u32,
    /// Per-kind budget shares for components without an explicit share.
    #[serde(default)]
    pub budget_shares: Option<BudgetShares>,
}

fn default_packet_size_factor() -> f64 {
    0.05
}

fn default_reference_packet_bytes() -> u32 {
    1500
}

/// Calibrate a parsed model into a runnable device.
pub fn calibrate(model: &DeviceModel) -> Result<CalibratedDevice, PowerError> {
    let shares = model
        .budget_shares
        .clone()
        .unwrap_or_else(default_budget_shares);
    if model.calibration.capacity_bps != model.chassis.capacity_bps() {
        return Err(PowerError::Calibration(format!(
            "calibration capacity {} does not match chassis capacity {}",
            model.calibration.capacity_bps,
            model.chassis.capacity_bps()
        )));
    }
    calibrate_components(
        &model.chassis,
        &model.calibration,
        &shares,
        model.packet_size_factor,
        model.reference_packet_bytes,
        &model.name,
    )
}

/// JSON text of a shipped model, if `name` is one.
pub fn device_model_json(name: &str) -> Option<String> {
    match name {
        T1600_LIKE => Some(T1600_JSON.to_string()),
        MX960_LIKE => Some(MX960_JSON.to_string()),
        _ => None,
    }
}

pub fn parse_model(json: &str, origin: &str) -> Result<DeviceModel, ModelError> {
    let model: DeviceModel = serde_json::from_str(json).map_err(|e| ModelError::Format {
        path: origin.to_string(),
        reason: e.to_string(),
    })?;
    if model.format_version != MODEL_FORMAT_VERSION {
        return Err(ModelError::Format {
            path: origin.to_string(),
            reason: format!(
                "format_version {} unsupported (expected {MODEL_FORMAT_VERSION})",
                model.format_version
            ),
        });
    }
    Ok(model)
}

/// Load and calibrate a shipped model by name.
pub fn shipped_model(name: &str) -> Result<CalibratedDevice, ModelError> {
    let json = device_model_json(name).ok_or_else(|| ModelError::Unknown(name.to_string()))?;
    let model = parse_model(&json, name)?;
    Ok(calibrate(&model)?)
}

/// Resolve a model reference the way the CLI does: explicit paths first,
/// then `$CHRONOWATT_MODEL_DIR/<name>.json`, then the shipped models.
pub fn resolve_model(reference: &str) -> Result<CalibratedDevice, ModelError> {
    let as_path = Path::new(reference);
    if as_path.is_file() {
        return load_model_file(as_path);
    }
    if let Ok(dir) = std::env::var(MODEL_DIR_ENV) {
        let candidate = PathBuf::from(dir).join(format!("{reference}.json"));
        if candidate.is_file() {
            return load_model_file(&candidate);
        }
    }
    shipped_model(reference)
}

pub fn load_model_file(path: &Path) -> Result<CalibratedDevice, ModelError> {
    let json = std::fs::read_to_string(path).map_err(|e| ModelError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let model = parse_model(&json, &path.display().to_string())?;
    Ok(calibrate(&model)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::power::ComponentKind;

    #[test]
    fn shipped_models_parse_and_calibrate() {
        for name in [T1600_LIKE, MX960_LIKE] {
            let dev = shipped_model(name).unwrap();
            assert_eq!(dev.name, name);
            assert_eq!(dev.capacity_bps(), dev.calibration.capacity_bps);
        }
    }

    #[test]
    fn t1600_structure() {
        let dev = shipped_model(T1600_LIKE).unwrap();
        assert_eq!(dev.linecards.len(), 8);
        assert_eq!(dev.capacity_bps(), 640_000_000_000);
        let lc = &dev.linecards[0];
        assert!(lc
            .components
            .iter()
            .any(|c| c.kind == ComponentKind::PhyLink && c.lpi.is_some()));
        let pwr = lc
            .components
            .iter()
            .find(|c| c.kind == ComponentKind::PowerSupply)
            .unwrap();
        assert!(!pwr.sleepable && !pwr.datapath);
    }

    #[test]
    fn unknown_model_is_an_error() {
        assert!(matches!(
            shipped_model("nonexistent"),
            Err(ModelError::Unknown(_))
        ));
    }

    #[test]
    fn version_mismatch_rejected() {
        let json = device_model_json(T1600_LIKE).unwrap().replace(
            "\"format_version\": 1",
            "\"format_version\": 99",
        );
        assert!(matches!(
            parse_model(&json, "test"),
            Err(ModelError::Format { .. })
        ));
    }
}
