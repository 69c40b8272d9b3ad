//! Multi-agent controllers for SCC activation and backhaul SC assignment.

pub mod actor_critic;
pub mod agent;
pub mod ddqn;
pub mod replay;
pub mod ucb;

use serde::{Deserialize, Serialize};

use crate::diffusion::{NoiseScale, DEFAULT_BETA_HI, DEFAULT_BETA_LO, DEFAULT_STEPS};
use crate::ntn::{RateReport, ScenarioState};
use crate::{Error, Result};

pub use actor_critic::{actor_loss, ActorCritic, ActorCriticLosses};
pub use agent::{Agent, PolicyKind};
pub use ddqn::Ddqn;
pub use replay::{ReplayBuffer, Transition};
pub use ucb::Ucb;

/// `PCC(i) = cc[i mod |cc|]`.
pub fn round_robin_pcc(leos: usize, ccs: &[usize]) -> Result<Vec<usize>> {
    if leos == 0 || ccs.is_empty() {
        return Err(Error::config("round robin needs at least one LEOS and one CC"));
    }
    Ok((0..leos).map(|i| ccs[i % ccs.len()]).collect())
}

/// Joint (SCC mask, SC mask) actions. Index bits: low `scc_count` bits
/// toggle SCCs, the next `sc_count` bits request SCs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionSpace {
    pub scc_count: usize,
    pub sc_count: usize,
}

pub const MAX_ACTIONS: usize = 4096;

impl ActionSpace {
    pub fn new(scc_count: usize, sc_count: usize) -> Result<Self> {
        if 1usize << (scc_count + sc_count) > MAX_ACTIONS {
            return Err(Error::config(format!(
                "{scc_count} SCCs x {sc_count} SCs exceeds {MAX_ACTIONS} joint actions"
            )));
        }
        Ok(Self { scc_count, sc_count })
    }

    pub fn len(&self) -> usize {
        1 << (self.scc_count + self.sc_count)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn decode(&self, action: usize) -> (u32, u32) {
        let scc = (action & ((1 << self.scc_count) - 1)) as u32;
        (scc, (action >> self.scc_count) as u32)
    }

    pub fn encode(&self, scc_mask: u32, sc_mask: u32) -> usize {
        (scc_mask as usize) | (sc_mask as usize) << self.scc_count
    }

    /// An action is feasible unless it requests an SC owned by another LEOS.
    pub fn feasibility(&self, owned_by_others: u32) -> Vec<bool> {
        (0..self.len()).map(|a| self.decode(a).1 & owned_by_others == 0).collect()
    }

    /// Number of activated SCCs plus assigned SCs.
    pub fn resource_count(&self, action: usize) -> u32 {
        let (scc, sc) = self.decode(action);
        scc.count_ones() + sc.count_ones()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardWeights {
    pub rate: f64,
    pub energy: f64,
    pub infeasible: f64,
    /// bit/s mapped to one unit of rate reward.
    pub rate_norm_bps: f64,
    pub energy_norm: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            rate: 1.0,
            energy: 0.2,
            infeasible: 1.0,
            rate_norm_bps: 10e6,
            energy_norm: 1.0,
        }
    }
}

/// Reward of one LEOS: served rate minus an energy cost per activated SCC and
/// assigned SC, minus a penalty when any of its CCs is overloaded.
pub fn reward(served_bps: f64, active_sccs: usize, assigned_scs: usize, overloaded: bool, w: &RewardWeights) -> f64 {
    w.rate * served_bps / w.rate_norm_bps
        - w.energy * (active_sccs + assigned_scs) as f64 / w.energy_norm
        - if overloaded { w.infeasible } else { 0.0 }
}

/// Per-LEOS reward read off the scenario and the latest report.
pub fn leos_reward(state: &ScenarioState, report: &RateReport, leos: usize, w: &RewardWeights) -> f64 {
    let l = &state.leos[leos];
    reward(report.served[leos], l.active_cc_count() - 1, l.sc_count(), report.overloaded[leos], w)
}

/// Observation: demand total and per-UE mean, access and served rate,
/// backhaul slack, SCC mask, own SC mask, available SC mask, episode clock.
pub fn observation_width(space: &ActionSpace) -> usize {
    5 + space.scc_count + 2 * space.sc_count + 1
}

pub fn observe(
    state: &ScenarioState,
    report: Option<&RateReport>,
    leos: usize,
    space: &ActionSpace,
    per_ue_demand_bps: f64,
    clock: f64,
    w: &RewardWeights,
) -> Vec<f64> {
    let l = &state.leos[leos];
    let cc_count = space.scc_count + 1;
    let mut obs = Vec::with_capacity(observation_width(space));
    match report {
        Some(r) => {
            let mean = if r.served_ues[leos] > 0 {
                r.demand[leos] / r.served_ues[leos] as f64 / per_ue_demand_bps
            } else {
                0.0
            };
            obs.push((r.demand[leos] / w.rate_norm_bps).tanh());
            obs.push(mean.clamp(0.0, 1.0));
            obs.push((r.access_rate[leos] / w.rate_norm_bps).tanh());
            obs.push((r.served[leos] / w.rate_norm_bps).tanh());
            obs.push((r.slack[leos] / w.rate_norm_bps).tanh());
        }
        None => obs.extend([0.0; 5]),
    }
    let scc = l.scc_mask(cc_count);
    obs.extend((0..space.scc_count).map(|b| f64::from((scc >> b) & 1)));
    obs.extend((0..space.sc_count).map(|k| f64::from((l.scs >> k) & 1)));
    let taken = state.scs_owned_by_others(leos);
    obs.extend((0..space.sc_count).map(|k| f64::from(1 - ((taken >> k) & 1))));
    obs.push(clock.clamp(0.0, 1.0));
    obs
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentHyper {
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Entropy weight in the actor loss.
    pub entropy: f64,
    pub discount: f64,
    pub batch: usize,
    pub buffer: usize,
    /// Target-network soft-update weight.
    pub tau: f64,
    pub episodes: usize,
    pub steps_per_episode: usize,
    pub diffusion_steps: usize,
    pub beta_lo: f64,
    pub beta_hi: f64,
    pub literal_noise_scale: bool,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    /// Gradient updates happen every this many environment steps.
    pub update_every: usize,
    pub ucb_c: f64,
    /// Weight on `log pi` in the guided UCB score.
    pub guidance: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of all steps over which epsilon decays.
    pub epsilon_fraction: f64,
}

impl Default for AgentHyper {
    fn default() -> Self {
        Self {
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            entropy: 0.05,
            discount: 0.95,
            batch: 64,
            buffer: 100_000,
            tau: 0.005,
            episodes: 200,
            steps_per_episode: 200,
            diffusion_steps: DEFAULT_STEPS,
            beta_lo: DEFAULT_BETA_LO,
            beta_hi: DEFAULT_BETA_HI,
            literal_noise_scale: false,
            actor_hidden: vec![32, 32],
            critic_hidden: vec![64, 64],
            update_every: 1,
            ucb_c: 1.0,
            guidance: 1.0,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_fraction: 0.5,
        }
    }
}

impl AgentHyper {
    pub fn noise_scale(&self) -> NoiseScale {
        if self.literal_noise_scale {
            NoiseScale::LiteralHalfSquared
        } else {
            NoiseScale::Posterior
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 || self.buffer < self.batch {
            return Err(Error::config("need 0 < batch <= buffer"));
        }
        if !(0.0..=1.0).contains(&self.tau) || !(0.0..=1.0).contains(&self.discount) {
            return Err(Error::config("tau and discount must lie in [0, 1]"));
        }
        if self.update_every == 0 || self.episodes == 0 || self.steps_per_episode == 0 {
            return Err(Error::config("episodes, steps and update_every must be positive"));
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0 && self.entropy >= 0.0) {
            return Err(Error::config("learning rates must be positive and entropy weight non-negative"));
        }
        Ok(())
    }
}
