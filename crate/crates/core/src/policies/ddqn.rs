//! Double DQN with a linearly decaying epsilon-greedy behaviour policy.

use rand::Rng;

use super::actor_critic::critic_net;
use super::replay::Transition;
use super::AgentHyper;
use crate::diffnet::{Adam, DenseNet, Gradients};
use crate::diffusion::ActionDistribution;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct Ddqn {
    pub online: DenseNet,
    pub target: DenseNet,
    opt: Adam,
    discount: f64,
    tau: f64,
    epsilon_start: f64,
    epsilon_end: f64,
    decay_steps: f64,
    steps: u64,
}

impl Ddqn {
    /// `total_steps` sets the length of the epsilon decay.
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        actions: usize,
        hyper: &AgentHyper,
        total_steps: usize,
        rng: &mut R,
    ) -> Result<Self> {
        hyper.validate()?;
        let online = critic_net(obs_dim, actions, &hyper.critic_hidden, rng)?;
        Ok(Self {
            opt: Adam::new(&online, hyper.critic_lr),
            target: online.clone(),
            online,
            discount: hyper.discount,
            tau: hyper.tau,
            epsilon_start: hyper.epsilon_start,
            epsilon_end: hyper.epsilon_end,
            decay_steps: (hyper.epsilon_fraction * total_steps as f64).max(1.0),
            steps: 0,
        })
    }

    pub fn epsilon(&self) -> f64 {
        let frac = (self.steps as f64 / self.decay_steps).min(1.0);
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }

    /// Advances the epsilon schedule by one environment step.
    pub fn tick(&mut self) {
        self.steps += 1;
    }

    fn greedy(q: &[f64], feasible: &[bool]) -> Option<usize> {
        q.iter()
            .zip(feasible)
            .enumerate()
            .filter(|(_, (_, f))| **f)
            .fold(None, |best: Option<(usize, f64)>, (a, (v, _))| match best {
                Some((_, bv)) if bv >= *v => best,
                _ => Some((a, *v)),
            })
            .map(|(a, _)| a)
    }

    /// Behaviour policy: epsilon-uniform over feasible actions, else greedy.
    pub fn action_probabilities(&self, obs: &[f64], feasible: &[bool]) -> Result<Option<ActionDistribution>> {
        let q = self.online.forward(obs)?;
        let Some(best) = Self::greedy(&q, feasible) else {
            return Ok(None);
        };
        let eps = self.epsilon();
        let n = feasible.iter().filter(|f| **f).count() as f64;
        let probs = feasible
            .iter()
            .enumerate()
            .map(|(a, f)| match (*f, a == best) {
                (false, _) => 0.0,
                (true, true) => 1.0 - eps + eps / n,
                (true, false) => eps / n,
            })
            .collect();
        Ok(Some(ActionDistribution { probs }))
    }

    pub fn select<R: Rng + ?Sized>(&self, obs: &[f64], feasible: &[bool], rng: &mut R) -> Result<Option<usize>> {
        if rng.random::<f64>() < self.epsilon() {
            let options: Vec<usize> = (0..feasible.len()).filter(|a| feasible[*a]).collect();
            if options.is_empty() {
                return Ok(None);
            }
            return Ok(Some(options[rng.random_range(0..options.len())]));
        }
        let q = self.online.forward(obs)?;
        Ok(Self::greedy(&q, feasible))
    }

    /// Online network picks `a'`, target network evaluates it.
    pub fn td_target(&self, t: &Transition) -> Result<f64> {
        if t.done {
            return Ok(t.reward);
        }
        let q_online = self.online.forward(&t.next_obs)?;
        let all = vec![true; q_online.len()];
        let a = Self::greedy(&q_online, &all).expect("non-empty action set");
        Ok(t.reward + self.discount * self.target.forward(&t.next_obs)?[a])
    }

    pub fn update(&mut self, batch: &[&Transition]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::config("empty update batch"));
        }
        let n = batch.len();
        let nf = n as f64;
        let actions = self.online.output_width();
        let mut targets: Vec<f64> = batch.iter().map(|t| t.reward).collect();
        let live: Vec<usize> = (0..n).filter(|k| !batch[*k].done).collect();
        if !live.is_empty() {
            let next: Vec<f64> = live.iter().flat_map(|k| batch[*k].next_obs.iter().copied()).collect();
            let q_online = self.online.forward_batch(&next, live.len())?;
            let q_target = self.target.forward_batch(&next, live.len())?;
            let all = vec![true; actions];
            for (m, &k) in live.iter().enumerate() {
                let a = Self::greedy(q_online.output(m), &all).expect("non-empty action set");
                targets[k] += self.discount * q_target.output(m)[a];
            }
        }
        let obs: Vec<f64> = batch.iter().flat_map(|t| t.obs.iter().copied()).collect();
        let tape = self.online.forward_batch(&obs, n)?;
        let mut out_grads = vec![0.0; n * actions];
        let mut loss = 0.0;
        for (s, (t, y)) in batch.iter().zip(&targets).enumerate() {
            let err = tape.output(s)[t.action] - y;
            loss += err * err / (2.0 * nf);
            out_grads[s * actions + t.action] = 2.0 * err / nf;
        }
        let mut grads = Gradients::zeros_like(&self.online);
        self.online.backward_batch(&tape, &out_grads, &mut grads, false)?;
        self.opt
            .step(&mut self.online, &grads)
            .map_err(|e| Error::training("ddqn", e.to_string()))?;
        self.target.soft_update_from(&self.online, self.tau);
        if !loss.is_finite() {
            return Err(Error::training("ddqn", "non-finite loss"));
        }
        Ok(loss)
    }
}
