//! One learner per policy and scenario, shared by every LEOS in it. UCB
//! statistics stay per LEOS.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ActorCritic, AgentHyper, Ddqn, ReplayBuffer, Transition, Ucb};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    /// Diffusion actor with twin critics.
    Ijcalb,
    /// UCB guided by the diffusion actor's log-probabilities.
    Dujcalb,
    /// Double DQN.
    Djcalb,
    /// Plain UCB.
    Ujcalb,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [PolicyKind::Ijcalb, PolicyKind::Dujcalb, PolicyKind::Djcalb, PolicyKind::Ujcalb];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Ijcalb => "ijcalb",
            PolicyKind::Dujcalb => "dujcalb",
            PolicyKind::Djcalb => "djcalb",
            PolicyKind::Ujcalb => "ujcalb",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::config(format!("unknown policy '{s}'")))
    }
}

#[derive(Debug, Clone)]
enum Learner {
    ActorCritic(Box<ActorCritic>),
    Ddqn(Box<Ddqn>),
    Bandit,
}

#[derive(Debug, Clone)]
pub struct Agent {
    kind: PolicyKind,
    learner: Learner,
    ucb: Vec<Ucb>,
    buffer: ReplayBuffer,
    batch: usize,
    update_every: usize,
    guidance: f64,
    steps: usize,
}

impl Agent {
    pub fn new<R: Rng + ?Sized>(
        kind: PolicyKind,
        leos: usize,
        obs_dim: usize,
        actions: usize,
        hyper: &AgentHyper,
        total_steps: usize,
        rng: &mut R,
    ) -> Result<Self> {
        hyper.validate()?;
        let learner = match kind {
            PolicyKind::Ijcalb | PolicyKind::Dujcalb => {
                Learner::ActorCritic(Box::new(ActorCritic::new(obs_dim, actions, hyper, rng)?))
            }
            PolicyKind::Djcalb => Learner::Ddqn(Box::new(Ddqn::new(obs_dim, actions, hyper, total_steps, rng)?)),
            PolicyKind::Ujcalb => Learner::Bandit,
        };
        let ucb = match kind {
            PolicyKind::Ujcalb | PolicyKind::Dujcalb => vec![Ucb::new(actions, hyper.ucb_c); leos],
            _ => Vec::new(),
        };
        let buffer_cap = if matches!(learner, Learner::Bandit) { 1 } else { hyper.buffer };
        Ok(Self {
            kind,
            learner,
            ucb,
            buffer: ReplayBuffer::new(buffer_cap),
            batch: hyper.batch,
            update_every: hyper.update_every,
            guidance: hyper.guidance,
            steps: 0,
        })
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn actor_critic(&self) -> Option<&ActorCritic> {
        match &self.learner {
            Learner::ActorCritic(ac) => Some(ac),
            _ => None,
        }
    }

    pub fn ddqn(&self) -> Option<&Ddqn> {
        match &self.learner {
            Learner::Ddqn(d) => Some(d),
            _ => None,
        }
    }

    pub fn ucb(&self, leos: usize) -> Option<&Ucb> {
        self.ucb.get(leos)
    }

    /// Picks an action for `leos`; `None` means keep the current configuration.
    pub fn select<R: Rng + ?Sized>(&self, leos: usize, obs: &[f64], feasible: &[bool], rng: &mut R) -> Result<Option<usize>> {
        let chosen = match (&self.learner, self.kind) {
            (Learner::ActorCritic(ac), PolicyKind::Ijcalb) => ac.select(obs, feasible, rng)?,
            (Learner::ActorCritic(ac), _) => {
                let dist = ac.distribution(obs, rng)?;
                let w = self.guidance;
                self.ucb[leos].select_with(feasible, |a| w * dist.probs[a].max(1e-300).ln())
            }
            (Learner::Ddqn(d), _) => d.select(obs, feasible, rng)?,
            (Learner::Bandit, _) => self.ucb[leos].select(feasible),
        };
        if chosen.is_none() {
            log::debug!("leos {leos}: no feasible action, keeping configuration");
        }
        Ok(chosen)
    }

    pub fn record(&mut self, leos: usize, t: Transition) {
        if let Some(u) = self.ucb.get_mut(leos) {
            u.record(t.action, t.reward);
        }
        if !matches!(self.learner, Learner::Bandit) {
            self.buffer.push(t);
        }
    }

    /// Call once per environment step. Runs a gradient update every
    /// `update_every` steps once the buffer holds a full batch; returns the
    /// critic (or Q) loss when an update ran.
    pub fn end_step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Option<f64>> {
        self.steps += 1;
        if let Learner::Ddqn(d) = &mut self.learner {
            d.tick();
        }
        if self.steps % self.update_every != 0 || self.buffer.len() < self.batch {
            return Ok(None);
        }
        let batch = self.buffer.sample(self.batch, rng);
        match &mut self.learner {
            Learner::ActorCritic(ac) => Ok(Some(ac.update(&batch, rng)?.critic)),
            Learner::Ddqn(d) => Ok(Some(d.update(&batch)?)),
            Learner::Bandit => Ok(None),
        }
    }
}
