//! Free-space gains, SINR with load-weighted co-channel interference, and Shannon rates.

use std::f64::consts::PI;

use super::config::{SimConfig, SPEED_OF_LIGHT};
use super::scenario::ScenarioState;

/// Free-space gain `(c / (4 pi d f))^2`. `distance_m` must be positive.
pub fn path_gain(distance_m: f64, frequency_hz: f64) -> f64 {
    debug_assert!(distance_m > 0.0 && frequency_hz > 0.0);
    let a = SPEED_OF_LIGHT / (4.0 * PI * distance_m * frequency_hz);
    a * a
}

pub fn shannon_rate(bandwidth_hz: f64, sinr: f64) -> f64 {
    bandwidth_hz * (1.0 + sinr.max(0.0)).log2()
}

/// `P g / (sum_j load_j P g_j + noise)`.
pub fn sinr_from_parts(power: f64, gain: f64, interferers: impl IntoIterator<Item = (f64, f64)>, noise: f64) -> f64 {
    let interference: f64 = interferers.into_iter().map(|(load, g)| load * power * g).sum();
    power * gain / (interference + noise)
}

/// Gains recomputed from the current geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct GainTable {
    leos: usize,
    ues: usize,
    ccs: usize,
    scs: usize,
    access: Vec<f64>,
    backhaul: Vec<f64>,
}

impl GainTable {
    pub fn compute(state: &ScenarioState, cfg: &SimConfig) -> Self {
        let (leos, ues, ccs, scs) = (
            state.leos.len(),
            state.ue_positions.len(),
            cfg.carriers.count,
            cfg.backhaul.sc_count,
        );
        let h2 = cfg.leos.altitude_m * cfg.leos.altitude_m;
        let cc_freq: Vec<f64> = (0..ccs).map(|c| cfg.cc_frequency(c)).collect();
        let mut access = Vec::with_capacity(leos * ues * ccs);
        for i in 0..leos {
            let p = state.leos_position(i, cfg);
            for (u, q) in state.ue_positions.iter().enumerate() {
                let d = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + h2).sqrt();
                let shadow = state.shadowing_factor(i, u);
                access.extend(cc_freq.iter().map(|f| path_gain(d, *f) * shadow));
            }
        }
        let gw = [cfg.backhaul.gateway_x_m, cfg.backhaul.gateway_y_m];
        let mut backhaul = Vec::with_capacity(leos * scs);
        for i in 0..leos {
            let p = state.leos_position(i, cfg);
            let d = ((p[0] - gw[0]).powi(2) + (p[1] - gw[1]).powi(2) + h2).sqrt();
            backhaul.extend((0..scs).map(|k| path_gain(d, cfg.sc_frequency(k))));
        }
        Self {
            leos,
            ues,
            ccs,
            scs,
            access,
            backhaul,
        }
    }

    pub fn access(&self, leos: usize, ue: usize, cc: usize) -> f64 {
        self.access[(leos * self.ues + ue) * self.ccs + cc]
    }

    pub fn backhaul(&self, leos: usize, sc: usize) -> f64 {
        self.backhaul[leos * self.scs + sc]
    }

    pub fn leos_count(&self) -> usize {
        self.leos
    }

    pub fn ue_count(&self) -> usize {
        self.ues
    }
}

/// Access SINR of UE `u` served by `leos` on `cc`, with interference from every
/// other LEOS that has `cc` active, weighted by its load.
pub fn sinr(state: &ScenarioState, gains: &GainTable, cfg: &SimConfig, load: &[Vec<f64>], u: usize, leos: usize, cc: usize) -> f64 {
    let interferers = (0..state.leos.len())
        .filter(|&j| j != leos && state.leos[j].is_active(cc))
        .map(|j| (load[j][cc], gains.access(j, u, cc)));
    sinr_from_parts(cfg.access_power(), gains.access(leos, u, cc), interferers, cfg.cc_noise_w())
}

/// Sum of Shannon rates over the SCs set in `sc_mask`.
pub fn backhaul_capacity(leos: usize, sc_mask: u32, gains: &GainTable, cfg: &SimConfig) -> f64 {
    let noise = cfg.sc_noise_w();
    let power = cfg.backhaul_power();
    (0..cfg.backhaul.sc_count)
        .filter(|k| sc_mask & (1 << k) != 0)
        .map(|k| shannon_rate(cfg.backhaul.sc_bandwidth_hz, power * gains.backhaul(leos, k) / noise))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shannon_examples() {
        assert_eq!(shannon_rate(400e6, 0.0), 0.0);
        assert_eq!(shannon_rate(400e6, 1.0), 400e6);
        assert!((shannon_rate(1e6, 3.0) - 2e6).abs() < 1e-6);
    }

    #[test]
    fn inverse_square_in_distance_and_frequency() {
        let g = path_gain(500e3, 26e9);
        assert!((path_gain(1000e3, 26e9) * 4.0 / g - 1.0).abs() < 1e-12);
        assert!((path_gain(500e3, 52e9) * 4.0 / g - 1.0).abs() < 1e-12);
    }

    #[test]
    fn no_interference_gives_snr() {
        let s = sinr_from_parts(10.0, 1e-3, [(0.0, 5e-3), (0.0, 1.0)], 1e-4);
        assert!((s - 100.0).abs() < 1e-9);
        let more = sinr_from_parts(10.0, 1e-3, [(0.1, 5e-3)], 1e-4);
        let most = sinr_from_parts(10.0, 1e-3, [(0.2, 5e-3)], 1e-4);
        assert!(most < more && more < s);
    }
}
