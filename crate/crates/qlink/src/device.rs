//! Device parameter files.

use std::path::Path;

use qlink_core::model::{ChannelParams, CouplerParams, DeviceParams, QubitParams};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// The shipped reference device file.
pub const REFERENCE_DEVICE: &str = include_str!("../device/reference.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QubitSection {
    max_freq_ghz: f64,
    idle_freq_ghz: f64,
    c_q_ff: f64,
    l_q_nh: f64,
    anharmonicity_mhz: f64,
    t1_int_us: f64,
    t2_ramsey_us: f64,
    t2_echo_us: f64,
    readout_fg: f64,
    readout_fe: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CouplerSection {
    l_t_nh: f64,
    l_g_nh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelSection {
    z0_ohm: f64,
    alpha_db_per_m: f64,
    inductance_nh_per_m: f64,
    length_m: f64,
    fsr_mhz: f64,
    t1r_int_ns: f64,
    mode_freq_ghz: f64,
    switch_offset_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DeviceFile {
    q1: QubitSection,
    q2: QubitSection,
    coupler1: CouplerSection,
    coupler2: CouplerSection,
    channel: ChannelSection,
}

impl From<QubitSection> for QubitParams {
    fn from(q: QubitSection) -> Self {
        QubitParams {
            max_freq_ghz: q.max_freq_ghz,
            idle_freq_ghz: q.idle_freq_ghz,
            c_q_ff: q.c_q_ff,
            l_q_nh: q.l_q_nh,
            anharmonicity_mhz: q.anharmonicity_mhz,
            t1_int_us: q.t1_int_us,
            t2_ramsey_us: q.t2_ramsey_us,
            t2_echo_us: q.t2_echo_us,
            readout_fg: q.readout_fg,
            readout_fe: q.readout_fe,
        }
    }
}

impl From<CouplerSection> for CouplerParams {
    fn from(c: CouplerSection) -> Self {
        CouplerParams { l_t_nh: c.l_t_nh, l_g_nh: c.l_g_nh }
    }
}

impl From<ChannelSection> for ChannelParams {
    fn from(c: ChannelSection) -> Self {
        ChannelParams {
            z0_ohm: c.z0_ohm,
            alpha_db_per_m: c.alpha_db_per_m,
            inductance_nh_per_m: c.inductance_nh_per_m,
            length_m: c.length_m,
            fsr_mhz: c.fsr_mhz,
            t1r_int_ns: c.t1r_int_ns,
            mode_freq_ghz: c.mode_freq_ghz,
            switch_offset_mm: c.switch_offset_mm,
        }
    }
}

/// Parses and validates device TOML; `origin` labels diagnostics.
pub fn parse_device(text: &str, origin: &str) -> Result<DeviceParams> {
    let file: DeviceFile = toml::from_str(text).map_err(|e| HarnessError::config(origin, e.to_string()))?;
    let device = DeviceParams {
        q1: file.q1.into(),
        q2: file.q2.into(),
        coupler1: file.coupler1.into(),
        coupler2: file.coupler2.into(),
        channel: file.channel.into(),
    };
    device.validate().map_err(|e| HarnessError::config(origin, e.to_string()))?;
    Ok(device)
}

pub fn load_device(path: &Path) -> Result<(DeviceParams, String)> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Read { path: path.into(), source })?;
    Ok((parse_device(&text, &path.display().to_string())?, text))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_file_is_the_reference_device() {
        assert_eq!(parse_device(REFERENCE_DEVICE, "reference").unwrap(), DeviceParams::reference());
    }

    #[test]
    fn unknown_key_is_reported_with_location() {
        let text = REFERENCE_DEVICE.replace("l_q_nh = 7.2", "l_q_henry = 7.2");
        let err = parse_device(&text, "dev.toml").unwrap_err().to_string();
        assert!(err.contains("dev.toml") && err.contains("l_q_henry"), "{err}");
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn non_positive_value_rejected() {
        let text = REFERENCE_DEVICE.replace("length_m = 0.73", "length_m = -0.73");
        assert!(parse_device(&text, "dev.toml").is_err());
    }
}
