//! Diffusion actor with twin critics and soft-updated targets.

use rand::Rng;

use super::replay::Transition;
use super::AgentHyper;
use crate::diffnet::{Activation, Adam, DenseNet, Gradients};
use crate::diffusion::{ActionDistribution, DiffusionSchedule, GadmPolicy};
use crate::{Error, Result};

/// `-sum_a pi(a) q(a) - zeta H(pi)`.
pub fn actor_loss(probs: &[f64], q: &[f64], zeta: f64) -> f64 {
    let expected: f64 = probs.iter().zip(q).map(|(p, v)| p * v).sum();
    let entropy = ActionDistribution { probs: probs.to_vec() }.entropy();
    -expected - zeta * entropy
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ActorCriticLosses {
    pub critic: f64,
    pub actor: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone)]
pub struct ActorCritic {
    pub actor: GadmPolicy,
    actor_opt: Adam,
    pub critics: [DenseNet; 2],
    pub targets: [DenseNet; 2],
    critic_opts: [Adam; 2],
    entropy: f64,
    discount: f64,
    tau: f64,
}

pub(crate) fn critic_net<R: Rng + ?Sized>(obs_dim: usize, actions: usize, hidden: &[usize], rng: &mut R) -> Result<DenseNet> {
    let mut widths = vec![obs_dim];
    widths.extend_from_slice(hidden);
    widths.push(actions);
    DenseNet::mlp(&widths, Activation::Relu, Activation::Identity, rng)
}

impl ActorCritic {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, actions: usize, hyper: &AgentHyper, rng: &mut R) -> Result<Self> {
        hyper.validate()?;
        let schedule = DiffusionSchedule::linear(hyper.diffusion_steps, hyper.beta_lo, hyper.beta_hi)?;
        let widths = GadmPolicy::denoiser_widths(actions, obs_dim, hyper.diffusion_steps, &hyper.actor_hidden);
        let denoiser = DenseNet::mlp(&widths, Activation::Tanh, Activation::Identity, rng)?;
        let actor = GadmPolicy::new(denoiser, schedule, hyper.noise_scale(), actions, obs_dim)?;
        let critics = [
            critic_net(obs_dim, actions, &hyper.critic_hidden, rng)?,
            critic_net(obs_dim, actions, &hyper.critic_hidden, rng)?,
        ];
        Ok(Self {
            actor_opt: Adam::new(&actor.denoiser, hyper.actor_lr),
            critic_opts: [
                Adam::new(&critics[0], hyper.critic_lr),
                Adam::new(&critics[1], hyper.critic_lr),
            ],
            targets: critics.clone(),
            critics,
            actor,
            entropy: hyper.entropy,
            discount: hyper.discount,
            tau: hyper.tau,
        })
    }

    pub fn action_count(&self) -> usize {
        self.actor.action_dim()
    }

    /// One reverse-chain draw of the policy.
    pub fn distribution<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R) -> Result<ActionDistribution> {
        self.actor.sample(obs, rng)
    }

    /// Policy averaged over `draws` chain noises.
    pub fn mean_distribution<R: Rng + ?Sized>(&self, obs: &[f64], draws: usize, rng: &mut R) -> Result<ActionDistribution> {
        let mut probs = vec![0.0; self.action_count()];
        for _ in 0..draws {
            for (acc, p) in probs.iter_mut().zip(self.actor.sample(obs, rng)?.probs) {
                *acc += p / draws as f64;
            }
        }
        Ok(ActionDistribution { probs })
    }

    /// Samples a feasible action; `None` when nothing feasible has mass.
    pub fn select<R: Rng + ?Sized>(&self, obs: &[f64], feasible: &[bool], rng: &mut R) -> Result<Option<usize>> {
        let dist = self.distribution(obs, rng)?;
        Ok(dist.masked(feasible).map(|d| d.sample(rng)))
    }

    pub fn min_q(&self, obs: &[f64]) -> Result<Vec<f64>> {
        let a = self.critics[0].forward(obs)?;
        let b = self.critics[1].forward(obs)?;
        Ok(a.iter().zip(&b).map(|(x, y)| x.min(*y)).collect())
    }

    fn min_target_q(&self, obs: &[f64]) -> Result<Vec<f64>> {
        let a = self.targets[0].forward(obs)?;
        let b = self.targets[1].forward(obs)?;
        Ok(a.iter().zip(&b).map(|(x, y)| x.min(*y)).collect())
    }

    /// `r + discount (1 - done) E_{a' ~ pi}[min target Q(s', a')]`.
    pub fn td_target<R: Rng + ?Sized>(&self, t: &Transition, rng: &mut R) -> Result<f64> {
        if t.done {
            return Ok(t.reward);
        }
        let next = self.distribution(&t.next_obs, rng)?;
        let q = self.min_target_q(&t.next_obs)?;
        let v: f64 = next.probs.iter().zip(&q).map(|(p, v)| p * v).sum();
        Ok(t.reward + self.discount * v)
    }

    /// Batched TD targets; one chain draw per non-terminal transition.
    fn td_targets<R: Rng + ?Sized>(&self, batch: &[&Transition], rng: &mut R) -> Result<Vec<f64>> {
        let mut targets: Vec<f64> = batch.iter().map(|t| t.reward).collect();
        let live: Vec<usize> = (0..batch.len()).filter(|k| !batch[*k].done).collect();
        if live.is_empty() {
            return Ok(targets);
        }
        let next: Vec<f64> = live.iter().flat_map(|k| batch[*k].next_obs.iter().copied()).collect();
        let noises: Vec<_> = live.iter().map(|_| self.actor.draw_noise(rng)).collect();
        let (dists, _) = self.actor.distribution_batch(&next, &noises)?;
        let q1 = self.targets[0].forward_batch(&next, live.len())?;
        let q2 = self.targets[1].forward_batch(&next, live.len())?;
        for (m, &k) in live.iter().enumerate() {
            let v: f64 = dists[m]
                .probs
                .iter()
                .zip(q1.output(m).iter().zip(q2.output(m)))
                .map(|(p, (a, b))| p * a.min(*b))
                .sum();
            targets[k] += self.discount * v;
        }
        Ok(targets)
    }

    /// One critic step, one actor step, then a soft target update.
    pub fn update<R: Rng + ?Sized>(&mut self, batch: &[&Transition], rng: &mut R) -> Result<ActorCriticLosses> {
        if batch.is_empty() {
            return Err(Error::config("empty update batch"));
        }
        let n = batch.len();
        let nf = n as f64;
        let actions = self.action_count();
        let obs: Vec<f64> = batch.iter().flat_map(|t| t.obs.iter().copied()).collect();
        let targets = self.td_targets(batch, rng)?;

        let mut critic_loss = 0.0;
        for k in 0..2 {
            let tape = self.critics[k].forward_batch(&obs, n)?;
            let mut out_grads = vec![0.0; n * actions];
            for (s, (t, y)) in batch.iter().zip(&targets).enumerate() {
                let err = tape.output(s)[t.action] - y;
                critic_loss += err * err / (2.0 * nf);
                out_grads[s * actions + t.action] = 2.0 * err / nf;
            }
            let mut grads = Gradients::zeros_like(&self.critics[k]);
            self.critics[k].backward_batch(&tape, &out_grads, &mut grads, false)?;
            self.critic_opts[k]
                .step(&mut self.critics[k], &grads)
                .map_err(|e| Error::training(format!("critic {k}"), e.to_string()))?;
        }

        let q1 = self.critics[0].forward_batch(&obs, n)?;
        let q2 = self.critics[1].forward_batch(&obs, n)?;
        let noises: Vec<_> = (0..n).map(|_| self.actor.draw_noise(rng)).collect();
        let (dists, tape) = self.actor.distribution_batch(&obs, &noises)?;
        let (mut actor_total, mut entropy_total) = (0.0, 0.0);
        let mut prob_grads = Vec::with_capacity(n * actions);
        for (s, dist) in dists.iter().enumerate() {
            let q: Vec<f64> = q1.output(s).iter().zip(q2.output(s)).map(|(a, b)| a.min(*b)).collect();
            actor_total += actor_loss(&dist.probs, &q, self.entropy) / nf;
            entropy_total += dist.entropy() / nf;
            // d/dpi of -pi.q + zeta sum pi ln pi.
            prob_grads.extend(
                dist.probs
                    .iter()
                    .zip(&q)
                    .map(|(p, v)| (-v + self.entropy * (p.max(1e-300).ln() + 1.0)) / nf),
            );
        }
        let mut grads = Gradients::zeros_like(&self.actor.denoiser);
        self.actor.backward_batch(&tape, &prob_grads, &mut grads)?;
        self.actor_opt
            .step(&mut self.actor.denoiser, &grads)
            .map_err(|e| Error::training("actor", e.to_string()))?;

        for k in 0..2 {
            self.targets[k].soft_update_from(&self.critics[k], self.tau);
        }
        if !(critic_loss.is_finite() && actor_total.is_finite()) {
            return Err(Error::training("actor-critic update", "non-finite loss"));
        }
        Ok(ActorCriticLosses {
            critic: critic_loss,
            actor: actor_total,
            entropy: entropy_total,
        })
    }
}
