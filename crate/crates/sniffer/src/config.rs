//! Capture configurations as managed by the access point.

use std::sync::OnceLock;

use csi_core::DeviceId;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const CHANNELS_5GHZ: &str = include_str!("../data/channels-5ghz.txt");

/// Channel numbers allowed on the 5 GHz band.
pub fn channels_5ghz() -> &'static [u32] {
    static LIST: OnceLock<Vec<u32>> = OnceLock::new();
    LIST.get_or_init(|| {
        CHANNELS_5GHZ
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| l.parse().expect("channel list holds integers"))
            .collect()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Band {
    #[serde(rename = "2.4")]
    Ghz2_4,
    #[serde(rename = "5")]
    Ghz5,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    #[default]
    Stopped,
    Running,
}

/// The user-editable part of a configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureSettings {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub band: Band,
    /// MHz.
    pub bandwidth: u32,
    pub channel: u32,
    /// Transmitters to keep; empty keeps every device.
    #[serde(default)]
    pub device_filter: Vec<DeviceId>,
}

impl CaptureSettings {
    pub fn validate(&self) -> Result<()> {
        validate_name(&self.name)?;
        match self.band {
            Band::Ghz2_4 => {
                if !matches!(self.bandwidth, 20 | 40) {
                    return Err(Error::InvalidConfig(format!(
                        "bandwidth {} MHz not available on 2.4 GHz (20 or 40)",
                        self.bandwidth
                    )));
                }
                if !(1..=13).contains(&self.channel) {
                    return Err(Error::InvalidConfig(format!("channel {} not in 1..=13 for 2.4 GHz", self.channel)));
                }
            }
            Band::Ghz5 => {
                if !matches!(self.bandwidth, 40 | 80) {
                    return Err(Error::InvalidConfig(format!(
                        "bandwidth {} MHz not available on 5 GHz (40 or 80)",
                        self.bandwidth
                    )));
                }
                if !channels_5ghz().contains(&self.channel) {
                    return Err(Error::InvalidConfig(format!("channel {} is not a 5 GHz channel", self.channel)));
                }
            }
        }
        let mut seen = self.device_filter.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.device_filter.len() {
            return Err(Error::InvalidConfig("device filter lists a MAC twice".into()));
        }
        Ok(())
    }
}

/// Names become capture file names, so only `[A-Za-z0-9._-]` is allowed and
/// a leading dot is rejected.
pub fn validate_name(name: &str) -> Result<()> {
    let ok = !name.is_empty()
        && name.len() <= 64
        && !name.starts_with('.')
        && name.bytes().all(|b| b.is_ascii_alphanumeric() || matches!(b, b'.' | b'_' | b'-'));
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "name {name:?} must be 1-64 characters of letters, digits, '.', '_' or '-' and not start with '.'"
        )))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureConfig {
    #[serde(flatten)]
    pub settings: CaptureSettings,
    #[serde(default)]
    pub status: RunStatus,
}

impl CaptureConfig {
    pub fn name(&self) -> &str {
        &self.settings.name
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings(band: Band, bandwidth: u32, channel: u32) -> CaptureSettings {
        CaptureSettings {
            name: "lab-1".into(),
            description: String::new(),
            band,
            bandwidth,
            channel,
            device_filter: vec![],
        }
    }

    #[test]
    fn band_rules() {
        assert!(settings(Band::Ghz2_4, 20, 6).validate().is_ok());
        assert!(settings(Band::Ghz2_4, 40, 13).validate().is_ok());
        assert!(settings(Band::Ghz2_4, 80, 6).validate().is_err());
        assert!(settings(Band::Ghz2_4, 20, 14).validate().is_err());
        assert!(settings(Band::Ghz2_4, 20, 0).validate().is_err());
        assert!(settings(Band::Ghz5, 80, 36).validate().is_ok());
        assert!(settings(Band::Ghz5, 40, 165).validate().is_ok());
        assert!(settings(Band::Ghz5, 20, 36).validate().is_err());
        assert!(settings(Band::Ghz5, 80, 37).validate().is_err());
        assert!(settings(Band::Ghz5, 80, 6).validate().is_err());
    }

    #[test]
    fn names() {
        for ok in ["a", "room_1.cap", "A-b"] {
            validate_name(ok).unwrap();
        }
        for bad in ["", ".hidden", "a/b", "..", "sp ace", &"x".repeat(65)] {
            assert!(validate_name(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn duplicate_filter_entries() {
        let mut s = settings(Band::Ghz2_4, 20, 1);
        let mac: DeviceId = "00:11:22:33:44:55".parse().unwrap();
        s.device_filter = vec![mac, mac];
        assert!(s.validate().is_err());
    }

    #[test]
    fn json_shape() {
        let c = CaptureConfig { settings: settings(Band::Ghz5, 40, 44), status: RunStatus::Running };
        let v = serde_json::to_value(&c).unwrap();
        assert_eq!(v["band"], "5");
        assert_eq!(v["status"], "running");
        assert_eq!(serde_json::from_value::<CaptureConfig>(v).unwrap(), c);
        assert!(serde_json::from_str::<CaptureSettings>(r#"{"name":"a","band":"3","bandwidth":20,"channel":1}"#).is_err());
    }

    #[test]
    fn channel_list_loaded() {
        assert_eq!(channels_5ghz().first(), Some(&36));
        assert_eq!(channels_5ghz().len(), 25);
    }
}
