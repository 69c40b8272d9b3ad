//! Scenario configuration, read from a sectioned TOML file.
//!
//! ```toml
//! [area]
//! side_m = 60000.0
//! ue_count = 100
//!
//! [leos]
//! count = 9
//!
//! [rng]
//! seed = 3
//! ```
//!
//! Every key is optional; missing keys take the defaults below.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AreaConfig {
    pub side_m: f64,
    pub ue_count: usize,
    /// Per-UE demand expressed as spectrum (MHz) ...
    pub max_demand_mhz: f64,
    /// ... converted to a rate with this spectral efficiency (bit/s/Hz).
    pub demand_efficiency: f64,
}

impl Default for AreaConfig {
    fn default() -> Self {
        Self {
            side_m: 60_000.0,
            ue_count: 400,
            max_demand_mhz: 1.5,
            demand_efficiency: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LeosConfig {
    pub count: usize,
    /// Radius of the circular ground track.
    pub track_radius_m: f64,
    pub speed_mps: f64,
    /// Used only for slant range in the path loss.
    pub altitude_m: f64,
    pub coverage_radius_m: f64,
    pub tx_power_w: f64,
    /// Combined transmit and receive antenna gain of the access link.
    pub antenna_gain_db: f64,
    pub time_step_s: f64,
}

impl Default for LeosConfig {
    fn default() -> Self {
        Self {
            count: 3,
            track_radius_m: 8_000.0,
            speed_mps: 2_230.0,
            altitude_m: 500_000.0,
            coverage_radius_m: 10_000.0,
            tx_power_w: 10.0,
            antenna_gain_db: 80.0,
            time_step_s: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DemandSplit {
    /// Proportional to each CC's interference-free spectral efficiency.
    #[default]
    Efficiency,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CarrierConfig {
    /// Number of CCs; each LEOS gets one as PCC and may toggle the rest.
    pub count: usize,
    pub bandwidth_hz: f64,
    /// Center of the CC block; CCs are laid side by side around it.
    pub center_hz: f64,
    pub noise_psd_dbm_hz: f64,
    /// Log-normal shadowing standard deviation; 0 disables it.
    pub shadowing_sigma_db: f64,
    pub demand_split: DemandSplit,
}

impl Default for CarrierConfig {
    fn default() -> Self {
        Self {
            count: 5,
            bandwidth_hz: 400e6,
            center_hz: 26e9,
            noise_psd_dbm_hz: -174.0,
            shadowing_sigma_db: 0.0,
            demand_split: DemandSplit::Efficiency,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackhaulConfig {
    pub sc_count: usize,
    pub sc_bandwidth_hz: f64,
    pub center_hz: f64,
    pub tx_power_w: f64,
    pub antenna_gain_db: f64,
    /// Gateway ground position; defaults to the area center.
    pub gateway_x_m: f64,
    pub gateway_y_m: f64,
}

impl Default for BackhaulConfig {
    fn default() -> Self {
        Self {
            sc_count: 6,
            sc_bandwidth_hz: 1e6,
            center_hz: 20e9,
            tx_power_w: 10.0,
            antenna_gain_db: 60.0,
            gateway_x_m: 30_000.0,
            gateway_y_m: 30_000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RngConfig {
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub area: AreaConfig,
    pub leos: LeosConfig,
    pub carriers: CarrierConfig,
    pub backhaul: BackhaulConfig,
    pub rng: RngConfig,
}

fn merge_tables(base: &mut toml::Table, overlay: toml::Table) {
    for (key, value) in overlay {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge_tables(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// `self` with the keys present in `text` replaced; other keys keep their current values.
    pub fn with_overrides(&self, text: &str) -> Result<Self> {
        let overlay: toml::Table = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        let mut base = toml::Table::try_from(self).map_err(|e| Error::config(e.to_string()))?;
        merge_tables(&mut base, overlay);
        let cfg: SimConfig = base.try_into().map_err(|e: toml::de::Error| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("area.side_m", self.area.side_m),
            ("area.max_demand_mhz", self.area.max_demand_mhz),
            ("area.demand_efficiency", self.area.demand_efficiency),
            ("leos.track_radius_m", self.leos.track_radius_m),
            ("leos.speed_mps", self.leos.speed_mps),
            ("leos.altitude_m", self.leos.altitude_m),
            ("leos.tx_power_w", self.leos.tx_power_w),
            ("leos.time_step_s", self.leos.time_step_s),
            ("carriers.bandwidth_hz", self.carriers.bandwidth_hz),
            ("carriers.center_hz", self.carriers.center_hz),
            ("backhaul.sc_bandwidth_hz", self.backhaul.sc_bandwidth_hz),
            ("backhaul.center_hz", self.backhaul.center_hz),
            ("backhaul.tx_power_w", self.backhaul.tx_power_w),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.leos.coverage_radius_m >= 0.0) {
            return Err(Error::config("leos.coverage_radius_m must be non-negative"));
        }
        if self.leos.count == 0 {
            return Err(Error::config("need at least one LEOS"));
        }
        if self.carriers.count == 0 || self.carriers.count > 16 {
            return Err(Error::config("carriers.count must be in 1..=16"));
        }
        if self.backhaul.sc_count > 16 {
            return Err(Error::config("backhaul.sc_count must be at most 16"));
        }
        if !(self.carriers.shadowing_sigma_db >= 0.0) {
            return Err(Error::config("shadowing sigma must be non-negative"));
        }
        if self.carriers.center_hz <= self.carriers.bandwidth_hz * self.carriers.count as f64 / 2.0 {
            return Err(Error::config("CC block extends below 0 Hz"));
        }
        Ok(())
    }

    /// Per-UE demanded rate in bit/s.
    pub fn ue_demand_bps(&self) -> f64 {
        self.area.max_demand_mhz * 1e6 * self.area.demand_efficiency
    }

    /// Center frequency of CC `c`; CCs are adjacent and centered on `carriers.center_hz`.
    pub fn cc_frequency(&self, c: usize) -> f64 {
        let offset = c as f64 - (self.carriers.count as f64 - 1.0) / 2.0;
        self.carriers.center_hz + offset * self.carriers.bandwidth_hz
    }

    pub fn sc_frequency(&self, k: usize) -> f64 {
        let offset = k as f64 - (self.backhaul.sc_count as f64 - 1.0) / 2.0;
        self.backhaul.center_hz + offset * self.backhaul.sc_bandwidth_hz
    }

    /// Access transmit power including antenna gains (W).
    pub fn access_power(&self) -> f64 {
        self.leos.tx_power_w * db_to_linear(self.leos.antenna_gain_db)
    }

    pub fn backhaul_power(&self) -> f64 {
        self.backhaul.tx_power_w * db_to_linear(self.backhaul.antenna_gain_db)
    }

    pub fn noise_psd_w_hz(&self) -> f64 {
        db_to_linear(self.carriers.noise_psd_dbm_hz) * 1e-3
    }

    pub fn cc_noise_w(&self) -> f64 {
        self.noise_psd_w_hz() * self.carriers.bandwidth_hz
    }

    pub fn sc_noise_w(&self) -> f64 {
        self.noise_psd_w_hz() * self.backhaul.sc_bandwidth_hz
    }

    /// Ground-track period `2 pi r / v`.
    pub fn orbit_period_s(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.leos.track_radius_m / self.leos.speed_mps
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_parameter_table() {
        let cfg = SimConfig::default();
        assert_eq!(cfg.area.side_m, 60_000.0);
        assert_eq!(cfg.area.ue_count, 400);
        assert_eq!(cfg.leos.track_radius_m, 8_000.0);
        assert_eq!(cfg.leos.speed_mps, 2_230.0);
        assert_eq!(cfg.carriers.count, 5);
        assert_eq!(cfg.carriers.bandwidth_hz, 400e6);
        assert_eq!(cfg.carriers.center_hz, 26e9);
        assert_eq!(cfg.backhaul.sc_count, 6);
        assert_eq!(cfg.leos.tx_power_w, 10.0);
        assert_eq!(cfg.ue_demand_bps(), 1.5e6);
        cfg.validate().unwrap();
    }

    #[test]
    fn partial_file_fills_defaults() {
        let cfg = SimConfig::from_toml_str("[leos]\ncount = 9\n[rng]\nseed = 4\n").unwrap();
        assert_eq!(cfg.leos.count, 9);
        assert_eq!(cfg.rng.seed, 4);
        assert_eq!(cfg.area, AreaConfig::default());
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = SimConfig::default();
        cfg.carriers.demand_split = DemandSplit::Uniform;
        cfg.leos.count = 7;
        assert_eq!(SimConfig::from_toml_str(&cfg.to_toml_string()).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        assert!(SimConfig::from_toml_str("[area]\nsidee_m = 3.0\n").is_err());
        assert!(SimConfig::from_toml_str("[leos]\ncount = 0\n").is_err());
        assert!(SimConfig::from_toml_str("[leos]\nspeed_mps = -1.0\n").is_err());
    }

    #[test]
    fn overrides_keep_the_base_values() {
        let mut base = SimConfig::default();
        base.area.ue_count = 100;
        let cfg = base.with_overrides("[leos]\ncount = 9\n").unwrap();
        assert_eq!(cfg.area.ue_count, 100);
        assert_eq!(cfg.leos.count, 9);
        assert_eq!(cfg.leos.speed_mps, 2_230.0);
        assert!(base.with_overrides("[leos]\ncuont = 9\n").is_err());
        assert!(base.with_overrides("[leos]\ncount = 0\n").is_err());
    }

    #[test]
    fn carriers_are_adjacent_around_center() {
        let cfg = SimConfig::default();
        assert_eq!(cfg.cc_frequency(2), 26e9);
        assert_eq!(cfg.cc_frequency(0), 26e9 - 800e6);
        assert_eq!(cfg.cc_frequency(4), 26e9 + 800e6);
    }
}
