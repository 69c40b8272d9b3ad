//! Load coupling: per-(LEOS, CC) load factors at the fixed point where every
//! served UE's demand is met with equality.
//!
//! The update maps loads to the resource share each cell needs when its
//! neighbours transmit with those loads:
//! `rho'(i, c) = sum_u d(u, c) / (B_c log2(1 + SINR(u, i, c; rho)))`.
//! Interfering loads are capped at [`LOAD_CAP`] since a cell cannot transmit
//! more than all of its resources.

use crate::ntn::channel::{sinr_from_parts, GainTable};
use crate::ntn::config::{DemandSplit, SimConfig};
use crate::ntn::scenario::{ScenarioState, LOAD_CAP};
use crate::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 500;

/// Demand of one UE on one CC of its serving LEOS.
#[derive(Debug, Clone, PartialEq)]
pub struct ServedDemand {
    pub ue: usize,
    pub leos: usize,
    pub cc: usize,
    pub demand_bps: f64,
    /// Gain from every LEOS to this UE on `cc`, indexed by LEOS.
    pub gains: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadProblem {
    leos: usize,
    ccs: usize,
    active: Vec<u32>,
    bandwidth_hz: Vec<f64>,
    noise_w: Vec<f64>,
    power_w: f64,
    demands: Vec<ServedDemand>,
}

impl LoadProblem {
    pub fn new(
        active: Vec<u32>,
        bandwidth_hz: Vec<f64>,
        noise_w: Vec<f64>,
        power_w: f64,
        demands: Vec<ServedDemand>,
    ) -> Result<Self> {
        let leos = active.len();
        let ccs = bandwidth_hz.len();
        if noise_w.len() != ccs || ccs == 0 || ccs > 32 {
            return Err(Error::config("bandwidth and noise lists must match and be non-empty"));
        }
        if !(power_w > 0.0) || bandwidth_hz.iter().any(|b| !(*b > 0.0)) || noise_w.iter().any(|n| !(*n >= 0.0)) {
            return Err(Error::config("power and bandwidth must be positive, noise non-negative"));
        }
        for d in &demands {
            if d.leos >= leos || d.cc >= ccs || d.gains.len() != leos {
                return Err(Error::config(format!("demand entry for ue {} does not fit the problem", d.ue)));
            }
            if active[d.leos] & (1 << d.cc) == 0 {
                return Err(Error::config(format!("demand on inactive cc {} of leos {}", d.cc, d.leos)));
            }
            if !(d.demand_bps >= 0.0) {
                return Err(Error::config("demands must be non-negative"));
            }
        }
        Ok(Self {
            leos,
            ccs,
            active,
            bandwidth_hz,
            noise_w,
            power_w,
            demands,
        })
    }

    /// Splits each associated UE's demand over its serving LEOS's active CCs.
    pub fn from_scenario(
        state: &ScenarioState,
        gains: &GainTable,
        cfg: &SimConfig,
        association: &[Option<usize>],
    ) -> Result<Self> {
        let ccs = cfg.carriers.count;
        let leos = state.leos.len();
        let power = cfg.access_power();
        let noise = cfg.cc_noise_w();
        let demand = cfg.ue_demand_bps();
        let mut demands = Vec::new();
        for (u, serving) in association.iter().enumerate() {
            let Some(i) = *serving else { continue };
            let active: Vec<usize> = (0..ccs).filter(|c| state.leos[i].is_active(*c)).collect();
            let weights: Vec<f64> = match cfg.carriers.demand_split {
                DemandSplit::Uniform => vec![1.0; active.len()],
                DemandSplit::Efficiency => active
                    .iter()
                    .map(|c| (1.0 + power * gains.access(i, u, *c) / noise).log2())
                    .collect(),
            };
            let total: f64 = weights.iter().sum();
            for (c, w) in active.iter().zip(&weights) {
                let share = if total > 0.0 { w / total } else { 1.0 / active.len() as f64 };
                demands.push(ServedDemand {
                    ue: u,
                    leos: i,
                    cc: *c,
                    demand_bps: demand * share,
                    gains: (0..leos).map(|j| gains.access(j, u, *c)).collect(),
                });
            }
        }
        Self::new(
            state.leos.iter().map(|l| l.active_ccs).collect(),
            vec![cfg.carriers.bandwidth_hz; ccs],
            vec![noise; ccs],
            power,
            demands,
        )
    }

    pub fn leos_count(&self) -> usize {
        self.leos
    }

    pub fn cc_count(&self) -> usize {
        self.ccs
    }

    pub fn demands(&self) -> &[ServedDemand] {
        &self.demands
    }

    pub fn is_active(&self, leos: usize, cc: usize) -> bool {
        self.active[leos] & (1 << cc) != 0
    }

    pub fn zero_load(&self) -> Vec<Vec<f64>> {
        vec![vec![0.0; self.ccs]; self.leos]
    }

    pub fn sinr(&self, d: &ServedDemand, load: &[Vec<f64>]) -> f64 {
        let interferers = (0..self.leos)
            .filter(|&j| j != d.leos && self.is_active(j, d.cc))
            .map(|j| (load[j][d.cc].min(LOAD_CAP), d.gains[j]));
        sinr_from_parts(self.power_w, d.gains[d.leos], interferers, self.noise_w[d.cc])
    }

    /// Resource share `d / (B log2(1 + SINR))` one demand entry needs under `load`.
    pub fn required_share(&self, d: &ServedDemand, load: &[Vec<f64>]) -> Result<f64> {
        if d.demand_bps == 0.0 {
            return Ok(0.0);
        }
        let se = (1.0 + self.sinr(d, load)).log2();
        if !(se > 0.0) || !se.is_finite() {
            return Err(Error::InfeasibleLoad { leos: d.leos, cc: d.cc });
        }
        Ok(d.demand_bps / (self.bandwidth_hz[d.cc] * se))
    }
}

/// One application of the load update.
pub fn lb_update(load: &[Vec<f64>], problem: &LoadProblem) -> Result<Vec<Vec<f64>>> {
    if load.len() != problem.leos || load.iter().any(|r| r.len() != problem.ccs) {
        return Err(Error::config("load matrix shape does not match the problem"));
    }
    if load.iter().flatten().any(|v| !(*v >= 0.0)) {
        return Err(Error::config("loads must be non-negative"));
    }
    let mut next = problem.zero_load();
    for d in &problem.demands {
        next[d.leos][d.cc] += problem.required_share(d, load)?;
    }
    Ok(next)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadSolution {
    pub load: Vec<Vec<f64>>,
    /// Update applied to `load`; equals `load` at an exact fixed point.
    pub required: Vec<Vec<f64>>,
    pub converged: bool,
    pub iterations: usize,
    /// Max-norm fixed-point residual `|T(load) - load|`.
    pub residual: f64,
}

impl LoadSolution {
    pub fn overloaded(&self) -> bool {
        self.load.iter().flatten().any(|v| *v > LOAD_CAP)
    }

    pub fn overloaded_leos(&self) -> Vec<bool> {
        self.load.iter().map(|r| r.iter().any(|v| *v > LOAD_CAP)).collect()
    }

    /// Largest relative gap between delivered and demanded rate over loaded cells.
    /// A cell holding load `rho` that needs `T(rho)` delivers `rho / T(rho)` of its demand.
    pub fn demand_residual(&self) -> f64 {
        self.load
            .iter()
            .flatten()
            .zip(self.required.iter().flatten())
            .filter(|(_, t)| **t > 0.0)
            .map(|(r, t)| (r / t - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Loads clipped to the cap, as stored in the scenario.
    pub fn clipped(&self) -> Vec<Vec<f64>> {
        self.load.iter().map(|r| r.iter().map(|v| v.min(LOAD_CAP)).collect()).collect()
    }
}

pub fn solve_load(problem: &LoadProblem, tol: f64, max_iter: usize) -> Result<LoadSolution> {
    solve_load_from(problem, problem.zero_load(), tol, max_iter)
}

/// Iterates `rho <- T(rho)` from `start` until the fixed-point residual
/// `|T(rho) - rho|` drops below `tol`. Running out of iterations is reported
/// through `converged`, not as an error.
pub fn solve_load_from(problem: &LoadProblem, start: Vec<Vec<f64>>, tol: f64, max_iter: usize) -> Result<LoadSolution> {
    if !(tol > 0.0) {
        return Err(Error::config("tolerance must be positive"));
    }
    let mut load = start;
    let mut required = lb_update(&load, problem)?;
    let mut residual = max_abs_diff(&required, &load);
    let mut iterations = 0;
    while iterations < max_iter && residual.is_finite() {
        load = required;
        required = lb_update(&load, problem)?;
        iterations += 1;
        residual = max_abs_diff(&required, &load);
        if residual < tol {
            return Ok(LoadSolution {
                load,
                required,
                converged: true,
                iterations,
                residual,
            });
        }
    }
    log::warn!("load solve stopped after {iterations} iterations, residual {residual:e}");
    Ok(LoadSolution {
        load,
        required,
        converged: false,
        iterations,
        residual,
    })
}

pub(crate) fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
