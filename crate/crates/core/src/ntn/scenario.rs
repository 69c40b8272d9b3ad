//! UE field, LEOS ground tracks and the per-LEOS carrier/backhaul configuration.

use std::f64::consts::TAU;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::config::SimConfig;
use super::channel::GainTable;
use crate::{Error, Result};

/// Loads kept in the state are clipped here; overload is reported separately.
pub const LOAD_CAP: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LeosState {
    pub track_center: [f64; 2],
    /// Angle on the ground track, kept in `[0, 2 pi)`.
    pub phase: f64,
    pub pcc: usize,
    /// Bit `c` set when CC `c` is active. Always contains the PCC.
    pub active_ccs: u32,
    /// Bit `k` set when backhaul SC `k` is assigned to this LEOS.
    pub scs: u32,
}

impl LeosState {
    pub fn is_active(&self, cc: usize) -> bool {
        self.active_ccs & (1 << cc) != 0
    }

    pub fn active_cc_count(&self) -> usize {
        self.active_ccs.count_ones() as usize
    }

    pub fn sc_count(&self) -> usize {
        self.scs.count_ones() as usize
    }

    /// Secondary CCs of this LEOS in ascending order.
    pub fn secondary_ccs(&self, cc_count: usize) -> Vec<usize> {
        (0..cc_count).filter(|c| *c != self.pcc).collect()
    }

    /// Active SCCs as a mask over `secondary_ccs` positions.
    pub fn scc_mask(&self, cc_count: usize) -> u32 {
        self.secondary_ccs(cc_count)
            .iter()
            .enumerate()
            .filter(|(_, c)| self.is_active(**c))
            .fold(0, |m, (bit, _)| m | 1 << bit)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioState {
    pub ue_positions: Vec<[f64; 2]>,
    pub leos: Vec<LeosState>,
    /// Per-(LEOS, CC) load of the last solve, clipped to `LOAD_CAP`.
    pub load: Vec<Vec<f64>>,
    pub clock_s: f64,
    /// Linear shadowing factor per (LEOS, UE); empty when disabled.
    shadowing: Vec<f64>,
}

/// Draws UEs, track centers and phases from the config seed.
pub fn init_scenario(cfg: &SimConfig) -> Result<ScenarioState> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng.seed);
    let side = cfg.area.side_m;
    let ue_positions = (0..cfg.area.ue_count)
        .map(|_| [rng.random_range(0.0..side), rng.random_range(0.0..side)])
        .collect();
    let cc_count = cfg.carriers.count;
    let leos = (0..cfg.leos.count)
        .map(|i| {
            let track_center = [rng.random_range(0.0..side), rng.random_range(0.0..side)];
            let pcc = i % cc_count;
            LeosState {
                track_center,
                phase: rng.random_range(0.0..TAU),
                pcc,
                active_ccs: 1 << pcc,
                scs: 0,
            }
        })
        .collect();
    let sigma = cfg.carriers.shadowing_sigma_db;
    let shadowing = if sigma > 0.0 {
        (0..cfg.leos.count * cfg.area.ue_count)
            .map(|_| {
                let db: f64 = sigma * rng.sample::<f64, _>(StandardNormal);
                // A fade can only attenuate; free space is the upper bound.
                10f64.powf(-db.abs() / 10.0)
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(ScenarioState {
        ue_positions,
        leos,
        load: vec![vec![0.0; cc_count]; cfg.leos.count],
        clock_s: 0.0,
        shadowing,
    })
}

impl ScenarioState {
    pub fn leos_position(&self, i: usize, cfg: &SimConfig) -> [f64; 2] {
        let l = &self.leos[i];
        let r = cfg.leos.track_radius_m;
        [l.track_center[0] + r * l.phase.cos(), l.track_center[1] + r * l.phase.sin()]
    }

    pub(crate) fn shadowing_factor(&self, leos: usize, ue: usize) -> f64 {
        if self.shadowing.is_empty() {
            1.0
        } else {
            self.shadowing[leos * self.ue_positions.len() + ue]
        }
    }

    /// Moves every LEOS along its track by `v dt`.
    pub fn advance(&mut self, cfg: &SimConfig, dt: f64) -> Result<()> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::config(format!("time step must be positive, got {dt}")));
        }
        let dphi = cfg.leos.speed_mps * dt / cfg.leos.track_radius_m;
        for l in &mut self.leos {
            l.phase = (l.phase + dphi).rem_euclid(TAU);
        }
        self.clock_s += dt;
        Ok(())
    }

    /// UEs within the coverage radius of each LEOS's ground position.
    pub fn coverage(&self, cfg: &SimConfig) -> Vec<Vec<usize>> {
        let r2 = cfg.leos.coverage_radius_m * cfg.leos.coverage_radius_m;
        (0..self.leos.len())
            .map(|i| {
                let p = self.leos_position(i, cfg);
                self.ue_positions
                    .iter()
                    .enumerate()
                    .filter(|(_, q)| (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) <= r2)
                    .map(|(u, _)| u)
                    .collect()
            })
            .collect()
    }

    /// Serving LEOS per UE: the covering LEOS with the strongest PCC gain.
    /// Ties go to the lower index.
    pub fn association(&self, cfg: &SimConfig, gains: &GainTable) -> Vec<Option<usize>> {
        let mut best: Vec<Option<(usize, f64)>> = vec![None; self.ue_positions.len()];
        for (i, covered) in self.coverage(cfg).iter().enumerate() {
            let pcc = self.leos[i].pcc;
            for &u in covered {
                let g = gains.access(i, u, pcc);
                if best[u].is_none_or(|(_, bg)| g > bg) {
                    best[u] = Some((i, g));
                }
            }
        }
        best.into_iter().map(|b| b.map(|(i, _)| i)).collect()
    }

    pub fn assign_pccs(&mut self, pccs: &[usize], cfg: &SimConfig) -> Result<()> {
        if pccs.len() != self.leos.len() || pccs.iter().any(|c| *c >= cfg.carriers.count) {
            return Err(Error::config("PCC assignment does not fit the scenario"));
        }
        for (l, &pcc) in self.leos.iter_mut().zip(pccs) {
            l.pcc = pcc;
            l.active_ccs = 1 << pcc;
        }
        Ok(())
    }

    /// SCs owned by any LEOS other than `leos`.
    pub fn scs_owned_by_others(&self, leos: usize) -> u32 {
        self.leos
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != leos)
            .fold(0, |m, (_, l)| m | l.scs)
    }

    /// Sets the active SCCs (mask over `secondary_ccs` positions) and the SC set.
    pub fn apply_configuration(&mut self, leos: usize, scc_mask: u32, sc_mask: u32, cfg: &SimConfig) -> Result<()> {
        let sccs = self.leos[leos].secondary_ccs(cfg.carriers.count);
        if scc_mask >> sccs.len() != 0 || sc_mask >> cfg.backhaul.sc_count != 0 {
            return Err(Error::config("configuration mask out of range"));
        }
        if sc_mask & self.scs_owned_by_others(leos) != 0 {
            return Err(Error::config(format!("SC mask {sc_mask:#b} overlaps another LEOS")));
        }
        let l = &mut self.leos[leos];
        l.active_ccs = sccs
            .iter()
            .enumerate()
            .filter(|(bit, _)| scc_mask & (1 << bit) != 0)
            .fold(1 << l.pcc, |m, (_, c)| m | 1 << c);
        l.scs = sc_mask;
        Ok(())
    }

    /// PCC active on every LEOS and SC sets pairwise disjoint.
    pub fn check_invariants(&self) -> Result<()> {
        let mut owned = 0u32;
        for (i, l) in self.leos.iter().enumerate() {
            if !l.is_active(l.pcc) {
                return Err(Error::Invariant(format!("leos {i} has its PCC {} switched off", l.pcc)));
            }
            if owned & l.scs != 0 {
                return Err(Error::Invariant(format!("leos {i} shares SCs {:#b}", owned & l.scs)));
            }
            owned |= l.scs;
        }
        Ok(())
    }

    /// Back to PCC only, no SCs, zero load.
    pub fn reset_configuration(&mut self) {
        for l in &mut self.leos {
            l.active_ccs = 1 << l.pcc;
            l.scs = 0;
        }
        for row in &mut self.load {
            row.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    /// Appends one CSV row per LEOS: `t,leos,x_m,y_m,pcc,active_ccs,scs,rho_0..`.
    pub fn write_dump_rows<W: Write>(&self, cfg: &SimConfig, out: &mut csv::Writer<W>) -> Result<()> {
        for (i, l) in self.leos.iter().enumerate() {
            let p = self.leos_position(i, cfg);
            let ccs: Vec<String> = (0..cfg.carriers.count).filter(|c| l.is_active(*c)).map(|c| c.to_string()).collect();
            let scs: Vec<String> = (0..cfg.backhaul.sc_count).filter(|k| l.scs & (1 << k) != 0).map(|k| k.to_string()).collect();
            let mut row = vec![
                format!("{}", self.clock_s),
                i.to_string(),
                format!("{:.3}", p[0]),
                format!("{:.3}", p[1]),
                l.pcc.to_string(),
                ccs.join(";"),
                scs.join(";"),
            ];
            row.extend(self.load[i].iter().map(|r| format!("{r:.6}")));
            out.write_record(&row).map_err(csv_error)?;
        }
        Ok(())
    }

    pub fn dump_header(cfg: &SimConfig) -> Vec<String> {
        let mut h: Vec<String> = ["t_s", "leos", "x_m", "y_m", "pcc", "active_ccs", "scs"].iter().map(|s| s.to_string()).collect();
        h.extend((0..cfg.carriers.count).map(|c| format!("rho_{c}")));
        h
    }
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::config(format!("csv: {other:?}")),
    }
}
