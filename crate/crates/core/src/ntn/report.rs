//! Per-UE and per-LEOS rates after a load solve.

use super::channel::{backhaul_capacity, GainTable};
use super::config::SimConfig;
use super::scenario::{ScenarioState, LOAD_CAP};
use crate::load::{LoadProblem, LoadSolution};

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    /// Delivered access rate per UE (bit/s); 0 for unserved UEs.
    pub ue_rate: Vec<f64>,
    /// Total demand of the UEs each LEOS serves (bit/s).
    pub demand: Vec<f64>,
    /// Sum over served UEs of `min(demand, achievable)` (bit/s).
    pub access_rate: Vec<f64>,
    pub backhaul_capacity: Vec<f64>,
    /// Traffic actually carried: access rate limited by the backhaul.
    pub served: Vec<f64>,
    /// `capacity - access_rate`; negative when the backhaul is the bottleneck.
    pub slack: Vec<f64>,
    pub overloaded: Vec<bool>,
    pub served_ues: Vec<usize>,
}

impl RateReport {
    pub fn compute(
        state: &ScenarioState,
        gains: &GainTable,
        cfg: &SimConfig,
        problem: &LoadProblem,
        solution: &LoadSolution,
    ) -> Self {
        let leos = state.leos.len();
        let mut ue_rate = vec![0.0; state.ue_positions.len()];
        let mut ue_demand = vec![0.0; state.ue_positions.len()];
        let mut ue_leos = vec![None; state.ue_positions.len()];
        for d in problem.demands() {
            let held = solution.load[d.leos][d.cc].min(LOAD_CAP);
            let needed = solution.required[d.leos][d.cc];
            let fraction = if needed > 0.0 { (held / needed).min(1.0) } else { 1.0 };
            ue_rate[d.ue] += d.demand_bps * fraction;
            ue_demand[d.ue] += d.demand_bps;
            ue_leos[d.ue] = Some(d.leos);
        }
        let mut demand = vec![0.0; leos];
        let mut access_rate = vec![0.0; leos];
        let mut served_ues = vec![0; leos];
        for u in 0..ue_rate.len() {
            if let Some(i) = ue_leos[u] {
                demand[i] += ue_demand[u];
                access_rate[i] += ue_rate[u].min(ue_demand[u]);
                served_ues[i] += 1;
            }
        }
        let backhaul_capacity: Vec<f64> = (0..leos)
            .map(|i| backhaul_capacity(i, state.leos[i].scs, gains, cfg))
            .collect();
        let served: Vec<f64> = access_rate.iter().zip(&backhaul_capacity).map(|(a, c)| a.min(*c)).collect();
        let slack = access_rate.iter().zip(&backhaul_capacity).map(|(a, c)| c - a).collect();
        for (s, c) in served.iter().zip(&backhaul_capacity) {
            assert!(s <= c, "served traffic exceeds backhaul capacity");
        }
        Self {
            ue_rate,
            demand,
            access_rate,
            backhaul_capacity,
            served,
            slack,
            overloaded: solution.overloaded_leos(),
            served_ues,
        }
    }

    /// Backhaul feasibility: all access traffic fits the assigned SCs.
    pub fn backhaul_feasible(&self, leos: usize) -> bool {
        self.access_rate[leos] <= self.backhaul_capacity[leos]
    }

    pub fn total_served(&self) -> f64 {
        self.served.iter().sum()
    }
}
