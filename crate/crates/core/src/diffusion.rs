//! Conditional denoising diffusion over discrete-action logits.
//!
//! A [`GadmPolicy`] starts from `x_T ~ N(0, I)` in logit space, runs `T`
//! reverse steps with a denoiser conditioned on the observation, and turns
//! `x_0` into an [`ActionDistribution`] with a softmax. All randomness is
//! drawn up front into a [`ChainNoise`], so a chain with frozen noise is a
//! pure function of `(observation, parameters)` and can be differentiated
//! end to end.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::diffnet::{softmax, softmax_in_place, BatchTape, DenseNet, Gradients, Tape};
use crate::{Error, Result};

pub const DEFAULT_STEPS: usize = 5;
pub const DEFAULT_BETA_LO: f64 = 0.1;
pub const DEFAULT_BETA_HI: f64 = 0.9;

/// Linear beta schedule with its cumulative products and posterior variances.
/// Step indices are 1-based throughout, matching the reverse loop `T..=1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSchedule {
    beta: Vec<f64>,
    alpha_bar: Vec<f64>,
    tilde_beta: Vec<f64>,
}

impl DiffusionSchedule {
    pub fn linear(steps: usize, beta_lo: f64, beta_hi: f64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::config("diffusion needs at least one step"));
        }
        if !(beta_lo > 0.0 && beta_lo <= beta_hi && beta_hi < 1.0) {
            return Err(Error::config(format!(
                "beta range must satisfy 0 < lo <= hi < 1, got [{beta_lo}, {beta_hi}]"
            )));
        }
        let beta: Vec<f64> = (0..steps)
            .map(|i| {
                if steps == 1 {
                    beta_lo
                } else {
                    beta_lo + (beta_hi - beta_lo) * i as f64 / (steps - 1) as f64
                }
            })
            .collect();
        let mut alpha_bar = Vec::with_capacity(steps);
        let mut acc = 1.0;
        for b in &beta {
            acc *= 1.0 - b;
            alpha_bar.push(acc);
        }
        let tilde_beta = (0..steps)
            .map(|i| {
                let prev = if i == 0 { 1.0 } else { alpha_bar[i - 1] };
                beta[i] * (1.0 - prev) / (1.0 - alpha_bar[i])
            })
            .collect();
        Ok(Self {
            beta,
            alpha_bar,
            tilde_beta,
        })
    }

    pub fn steps(&self) -> usize {
        self.beta.len()
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.beta[t - 1]
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t - 1]
    }

    pub fn tilde_beta(&self, t: usize) -> f64 {
        self.tilde_beta[t - 1]
    }

    pub fn betas(&self) -> &[f64] {
        &self.beta
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bar
    }

    pub fn tilde_betas(&self) -> &[f64] {
        &self.tilde_beta
    }

    fn check_step(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.steps() {
            return Err(Error::config(format!("step {t} outside [1, {}]", self.steps())));
        }
        Ok(())
    }
}

/// How the injected noise of a reverse step is scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseScale {
    /// Standard deviation `sqrt(tilde_beta_t)`.
    #[default]
    Posterior,
    /// `(tilde_beta_t / 2)^2`, taken verbatim from the update rule as printed.
    LiteralHalfSquared,
}

impl NoiseScale {
    pub fn factor(self, tilde_beta: f64) -> f64 {
        match self {
            NoiseScale::Posterior => tilde_beta.sqrt(),
            NoiseScale::LiteralHalfSquared => (tilde_beta / 2.0).powi(2),
        }
    }
}

/// Closed-form forward noising `x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps`.
pub fn ddpm_forward(x0: &[f64], t: usize, eps: &[f64], sched: &DiffusionSchedule) -> Result<Vec<f64>> {
    sched.check_step(t)?;
    if x0.len() != eps.len() {
        return Err(Error::config("x0 and eps widths differ"));
    }
    let ab = sched.alpha_bar(t);
    Ok(noised(x0, eps, ab))
}

fn noised(x0: &[f64], eps: &[f64], alpha_bar: f64) -> Vec<f64> {
    let (a, b) = (alpha_bar.sqrt(), (1.0 - alpha_bar).sqrt());
    x0.iter().zip(eps).map(|(x, e)| a * x + b * e).collect()
}

/// Posterior mean `(x_t - beta_t / sqrt(1 - abar_t) * eps) / sqrt(1 - beta_t)`.
pub fn posterior_mean(x_t: &[f64], eps: &[f64], t: usize, sched: &DiffusionSchedule) -> Vec<f64> {
    let beta = sched.beta(t);
    let coef = beta / (1.0 - sched.alpha_bar(t)).sqrt();
    let inv = 1.0 / (1.0 - beta).sqrt();
    x_t.iter().zip(eps).map(|(x, e)| inv * (x - coef * e)).collect()
}

/// Denoiser input: `[x_t, one_hot(t), s]`.
pub fn denoiser_input(x_t: &[f64], t: usize, s: &[f64], steps: usize) -> Vec<f64> {
    let mut input = Vec::with_capacity(x_t.len() + steps + s.len());
    input.extend_from_slice(x_t);
    input.extend((1..=steps).map(|u| if u == t { 1.0 } else { 0.0 }));
    input.extend_from_slice(s);
    input
}

fn check_finite(values: &[f64], t: usize) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::training(format!("reverse step {t}"), "non-finite denoiser output"))
    }
}

/// One reverse step `x_{t-1} = mu_theta(x_t, t, s) + scale(tilde_beta_t) * noise`
/// with `mu_theta` the posterior mean evaluated at `tanh(eps_theta)`.
pub fn reverse_step(
    x_t: &[f64],
    t: usize,
    s: &[f64],
    denoiser: &DenseNet,
    sched: &DiffusionSchedule,
    scale: NoiseScale,
    noise: &[f64],
) -> Result<Vec<f64>> {
    sched.check_step(t)?;
    if noise.len() != x_t.len() || denoiser.output_width() != x_t.len() {
        return Err(Error::config("noise, x_t and denoiser output widths must agree"));
    }
    let raw = denoiser.forward(&denoiser_input(x_t, t, s, sched.steps()))?;
    check_finite(&raw, t)?;
    let eps: Vec<f64> = raw.iter().map(|v| v.tanh()).collect();
    let sigma = scale.factor(sched.tilde_beta(t));
    Ok(posterior_mean(x_t, &eps, t, sched)
        .into_iter()
        .zip(noise)
        .map(|(m, z)| m + sigma * z)
        .collect())
}

/// Probability vector over a discrete action set.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionDistribution {
    pub probs: Vec<f64>,
}

impl ActionDistribution {
    pub fn from_logits(logits: &[f64]) -> Self {
        Self {
            probs: softmax(logits),
        }
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Zeroes infeasible actions and renormalizes. `None` when no feasible
    /// action carries mass.
    pub fn masked(&self, feasible: &[bool]) -> Option<Self> {
        let total: f64 = self
            .probs
            .iter()
            .zip(feasible)
            .filter(|(_, f)| **f)
            .map(|(p, _)| p)
            .sum();
        if !(total > 0.0) {
            return None;
        }
        Some(Self {
            probs: self
                .probs
                .iter()
                .zip(feasible)
                .map(|(p, f)| if *f { p / total } else { 0.0 })
                .collect(),
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last = 0;
        for (i, p) in self.probs.iter().enumerate() {
            if *p > 0.0 {
                acc += p;
                last = i;
                if u < acc {
                    return i;
                }
            }
        }
        last
    }

    pub fn entropy(&self) -> f64 {
        -self
            .probs
            .iter()
            .filter(|p| **p > 0.0)
            .map(|p| p * p.ln())
            .sum::<f64>()
    }

    pub fn argmax(&self) -> usize {
        self.probs
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, p)| if *p > best.1 { (i, *p) } else { best })
            .0
    }
}

/// Pre-drawn randomness for one reverse chain: the start point `x_T` and
/// one noise vector per step, indexed by `t - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainNoise {
    pub x_start: Vec<f64>,
    pub step_noise: Vec<Vec<f64>>,
}

impl ChainNoise {
    pub fn draw<R: Rng + ?Sized>(width: usize, steps: usize, rng: &mut R) -> Self {
        let mut normal = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.sample(StandardNormal)).collect() };
        let x_start = normal(width);
        let step_noise = (0..steps).map(|_| normal(width)).collect();
        Self { x_start, step_noise }
    }

    pub fn zeros(width: usize, steps: usize) -> Self {
        Self {
            x_start: vec![0.0; width],
            step_noise: vec![vec![0.0; width]; steps],
        }
    }
}

/// Everything needed to backpropagate through one recorded chain.
#[derive(Debug, Clone)]
pub struct ChainTape {
    /// Indexed by `t - 1`.
    steps: Vec<(Tape, Vec<f64>)>,
    x0: Vec<f64>,
    probs: Vec<f64>,
}

impl ChainTape {
    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// Diffusion actor: a denoiser network plus its schedule.
#[derive(Debug, Clone)]
pub struct GadmPolicy {
    pub denoiser: DenseNet,
    pub schedule: DiffusionSchedule,
    pub noise_scale: NoiseScale,
    action_dim: usize,
    obs_dim: usize,
}

impl GadmPolicy {
    pub fn new(
        denoiser: DenseNet,
        schedule: DiffusionSchedule,
        noise_scale: NoiseScale,
        action_dim: usize,
        obs_dim: usize,
    ) -> Result<Self> {
        let expected = action_dim + schedule.steps() + obs_dim;
        if denoiser.input_width() != expected || denoiser.output_width() != action_dim {
            return Err(Error::config(format!(
                "denoiser must map {expected} inputs to {action_dim} outputs, got {} -> {}",
                denoiser.input_width(),
                denoiser.output_width()
            )));
        }
        Ok(Self {
            denoiser,
            schedule,
            noise_scale,
            action_dim,
            obs_dim,
        })
    }

    /// Width list for a denoiser with the given hidden layers.
    pub fn denoiser_widths(action_dim: usize, obs_dim: usize, steps: usize, hidden: &[usize]) -> Vec<usize> {
        let mut widths = vec![action_dim + steps + obs_dim];
        widths.extend_from_slice(hidden);
        widths.push(action_dim);
        widths
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn draw_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> ChainNoise {
        ChainNoise::draw(self.action_dim, self.schedule.steps(), rng)
    }

    fn check(&self, s: &[f64], noise: &ChainNoise) -> Result<()> {
        if s.len() != self.obs_dim {
            return Err(Error::config(format!(
                "observation width {} does not match {}",
                s.len(),
                self.obs_dim
            )));
        }
        if noise.x_start.len() != self.action_dim
            || noise.step_noise.len() != self.schedule.steps()
            || noise.step_noise.iter().any(|z| z.len() != self.action_dim)
        {
            return Err(Error::config("chain noise does not match action width and step count"));
        }
        Ok(())
    }

    /// Runs the reverse chain `T..=1` and returns `x_0`.
    pub fn denoise(&self, s: &[f64], noise: &ChainNoise) -> Result<Vec<f64>> {
        self.check(s, noise)?;
        let mut x = noise.x_start.clone();
        for t in (1..=self.schedule.steps()).rev() {
            x = reverse_step(
                &x,
                t,
                s,
                &self.denoiser,
                &self.schedule,
                self.noise_scale,
                &noise.step_noise[t - 1],
            )?;
        }
        Ok(x)
    }

    pub fn distribution(&self, s: &[f64], noise: &ChainNoise) -> Result<ActionDistribution> {
        Ok(ActionDistribution::from_logits(&self.denoise(s, noise)?))
    }

    /// Draws fresh chain noise from `rng` and returns the resulting distribution.
    pub fn sample<R: Rng + ?Sized>(&self, s: &[f64], rng: &mut R) -> Result<ActionDistribution> {
        let noise = self.draw_noise(rng);
        self.distribution(s, &noise)
    }

    pub fn distribution_recorded(&self, s: &[f64], noise: &ChainNoise) -> Result<(ActionDistribution, ChainTape)> {
        self.check(s, noise)?;
        let steps = self.schedule.steps();
        let mut records: Vec<Option<(Tape, Vec<f64>)>> = vec![None; steps];
        let mut x = noise.x_start.clone();
        for t in (1..=steps).rev() {
            let tape = self.denoiser.forward_recorded(&denoiser_input(&x, t, s, steps))?;
            check_finite(tape.output(), t)?;
            let eps: Vec<f64> = tape.output().iter().map(|v| v.tanh()).collect();
            let sigma = self.noise_scale.factor(self.schedule.tilde_beta(t));
            x = posterior_mean(&x, &eps, t, &self.schedule)
                .into_iter()
                .zip(&noise.step_noise[t - 1])
                .map(|(m, z)| m + sigma * z)
                .collect();
            records[t - 1] = Some((tape, eps));
        }
        let probs = softmax(&x);
        if probs.iter().any(|p| !p.is_finite()) {
            return Err(Error::training("softmax", "non-finite action probabilities"));
        }
        let tape = ChainTape {
            steps: records.into_iter().map(|r| r.expect("every step recorded")).collect(),
            x0: x,
            probs: probs.clone(),
        };
        Ok((ActionDistribution { probs }, tape))
    }

    /// Accumulates `d(prob_grad . pi)/d(theta)` into `grads`.
    pub fn backward(&self, tape: &ChainTape, prob_grad: &[f64], grads: &mut Gradients) -> Result<()> {
        if prob_grad.len() != self.action_dim {
            return Err(Error::config("probability gradient width mismatch"));
        }
        let dot: f64 = prob_grad.iter().zip(&tape.probs).map(|(g, p)| g * p).sum();
        let logit_grad: Vec<f64> = prob_grad
            .iter()
            .zip(&tape.probs)
            .map(|(g, p)| p * (g - dot))
            .collect();
        self.backward_logits(tape, &logit_grad, grads)
    }

    /// Same as [`Self::backward`] but starting from `dL/dx_0`.
    pub fn backward_logits(&self, tape: &ChainTape, x0_grad: &[f64], grads: &mut Gradients) -> Result<()> {
        let mut g = x0_grad.to_vec();
        for t in 1..=self.schedule.steps() {
            let (net_tape, eps) = &tape.steps[t - 1];
            let beta = self.schedule.beta(t);
            let inv = 1.0 / (1.0 - beta).sqrt();
            let coef = beta / (1.0 - self.schedule.alpha_bar(t)).sqrt();
            let out_grad: Vec<f64> = g
                .iter()
                .zip(eps)
                .map(|(gi, e)| -coef * inv * gi * (1.0 - e * e))
                .collect();
            let input_grad = self.denoiser.backward(net_tape, &out_grad, grads)?;
            for (gi, ig) in g.iter_mut().zip(&input_grad[..self.action_dim]) {
                *gi = inv * *gi + ig;
            }
        }
        Ok(())
    }

    /// Runs one chain per noise draw in a single batched pass. `obs` holds
    /// one observation row per chain, row-major.
    pub fn distribution_batch(&self, obs: &[f64], noises: &[ChainNoise]) -> Result<(Vec<ActionDistribution>, BatchChainTape)> {
        let (n, a, od, steps) = (noises.len(), self.action_dim, self.obs_dim, self.schedule.steps());
        if obs.len() != n * od {
            return Err(Error::config("batch observations do not match the number of chains"));
        }
        for (k, noise) in noises.iter().enumerate() {
            self.check(&obs[k * od..(k + 1) * od], noise)?;
        }
        let mut x: Vec<f64> = noises.iter().flat_map(|z| z.x_start.iter().copied()).collect();
        let mut records: Vec<Option<(BatchTape, Vec<f64>)>> = vec![None; steps];
        for t in (1..=steps).rev() {
            let mut input = Vec::with_capacity(n * (a + steps + od));
            for k in 0..n {
                input.extend(denoiser_input(&x[k * a..(k + 1) * a], t, &obs[k * od..(k + 1) * od], steps));
            }
            let tape = self.denoiser.forward_batch(&input, n)?;
            check_finite(tape.outputs(), t)?;
            let eps: Vec<f64> = tape.outputs().iter().map(|v| v.tanh()).collect();
            let beta = self.schedule.beta(t);
            let coef = beta / (1.0 - self.schedule.alpha_bar(t)).sqrt();
            let inv = 1.0 / (1.0 - beta).sqrt();
            let sigma = self.noise_scale.factor(self.schedule.tilde_beta(t));
            for (k, noise) in noises.iter().enumerate() {
                for (j, z) in noise.step_noise[t - 1].iter().enumerate() {
                    let i = k * a + j;
                    x[i] = inv * (x[i] - coef * eps[i]) + sigma * z;
                }
            }
            records[t - 1] = Some((tape, eps));
        }
        let mut probs = x.clone();
        for row in probs.chunks_exact_mut(a) {
            softmax_in_place(row);
        }
        if probs.iter().any(|p| !p.is_finite()) {
            return Err(Error::training("softmax", "non-finite action probabilities"));
        }
        let dists = probs
            .chunks_exact(a)
            .map(|p| ActionDistribution { probs: p.to_vec() })
            .collect();
        let tape = BatchChainTape {
            n,
            steps: records.into_iter().map(|r| r.expect("every step recorded")).collect(),
            probs,
        };
        Ok((dists, tape))
    }

    /// Batched [`Self::backward`]; `prob_grads` holds one row per chain.
    pub fn backward_batch(&self, tape: &BatchChainTape, prob_grads: &[f64], grads: &mut Gradients) -> Result<()> {
        let (n, a) = (tape.n, self.action_dim);
        if prob_grads.len() != n * a {
            return Err(Error::config("batch probability gradient has the wrong size"));
        }
        let mut g = vec![0.0; n * a];
        for k in 0..n {
            let (pg, p) = (&prob_grads[k * a..(k + 1) * a], &tape.probs[k * a..(k + 1) * a]);
            let dot: f64 = pg.iter().zip(p).map(|(x, y)| x * y).sum();
            for j in 0..a {
                g[k * a + j] = p[j] * (pg[j] - dot);
            }
        }
        let in_w = self.denoiser.input_width();
        for t in 1..=self.schedule.steps() {
            let (net_tape, eps) = &tape.steps[t - 1];
            let beta = self.schedule.beta(t);
            let inv = 1.0 / (1.0 - beta).sqrt();
            let coef = beta / (1.0 - self.schedule.alpha_bar(t)).sqrt();
            let out_grad: Vec<f64> = g
                .iter()
                .zip(eps)
                .map(|(gi, e)| -coef * inv * gi * (1.0 - e * e))
                .collect();
            let input_grad = self.denoiser.backward_batch(net_tape, &out_grad, grads, true)?;
            for k in 0..n {
                for j in 0..a {
                    g[k * a + j] = inv * g[k * a + j] + input_grad[k * in_w + j];
                }
            }
        }
        Ok(())
    }
}

/// Recorded batch of reverse chains.
#[derive(Debug, Clone)]
pub struct BatchChainTape {
    n: usize,
    /// Indexed by `t - 1`.
    steps: Vec<(BatchTape, Vec<f64>)>,
    probs: Vec<f64>,
}
