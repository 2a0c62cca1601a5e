use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{DeviceProfile, HttpTransaction};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OverlapError {
    #[error("overlap analysis needs at least two devices, got {0}")]
    FewerThanTwoDevices(usize),
    #[error("no profile for device `{0}`")]
    MissingProfile(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceOverlap {
    pub service: String,
    pub devices: Vec<String>,
    pub device_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub services: Vec<ServiceOverlap>,
}

/// For each third-party service label, the devices whose captures reached
/// it. Most widely shared services come first.
pub fn cross_device_overlap(
    captures: &[(String, Vec<HttpTransaction>)],
    profiles: &[DeviceProfile],
) -> Result<OverlapReport, OverlapError> {
    let devices: BTreeSet<&str> = captures.iter().map(|(d, _)| d.as_str()).collect();
    if devices.len() < 2 {
        return Err(OverlapError::FewerThanTwoDevices(devices.len()));
    }
    let mut by_service: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for (device, txns) in captures {
        let profile = profiles
            .iter()
            .find(|p| &p.device_name == device)
            .ok_or_else(|| OverlapError::MissingProfile(device.clone()))?;
        for t in txns {
            if let Some(service) = profile.third_party_service(&t.host) {
                by_service
                    .entry(service.to_string())
                    .or_default()
                    .insert(device.clone());
            }
        }
    }
    let mut services: Vec<ServiceOverlap> = by_service
        .into_iter()
        .map(|(service, devices)| ServiceOverlap {
            service,
            device_count: devices.len(),
            devices: devices.into_iter().collect(),
        })
        .collect();
    services.sort_by(|a, b| {
        b.device_count
            .cmp(&a.device_count)
            .then_with(|| a.service.cmp(&b.service))
    });
    Ok(OverlapReport { services })
}
