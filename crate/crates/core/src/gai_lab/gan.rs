//! Minimax GAN training with `k` discriminator ascent steps per generator step.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::diffnet::{Activation, Adam, DenseNet, Gradients};
use crate::{Error, Result};

/// Discriminator outputs are clamped into this band before taking logs.
pub const D_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct GanPair {
    pub generator: DenseNet,
    pub discriminator: DenseNet,
}

impl GanPair {
    pub fn new<R: Rng + ?Sized>(latent_dim: usize, data_dim: usize, hidden: usize, rng: &mut R) -> Result<Self> {
        let generator = DenseNet::mlp(&[latent_dim, hidden, hidden, data_dim], Activation::Tanh, Activation::Identity, rng)?;
        let discriminator = DenseNet::mlp(&[data_dim, hidden, hidden, 1], Activation::Tanh, Activation::Sigmoid, rng)?;
        Self::from_nets(generator, discriminator)
    }

    pub fn from_nets(generator: DenseNet, discriminator: DenseNet) -> Result<Self> {
        if generator.output_width() != discriminator.input_width() || discriminator.output_width() != 1 {
            return Err(Error::config("generator output must feed a scalar discriminator"));
        }
        Ok(Self {
            generator,
            discriminator,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.generator.input_width()
    }

    pub fn data_dim(&self) -> usize {
        self.generator.output_width()
    }

    pub fn discriminate(&self, x: &[f64]) -> Result<f64> {
        Ok(self.discriminator.forward(x)?[0])
    }

    pub fn generate(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.generator.forward(z)
    }

    pub fn draw_latent<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Vec<Vec<f64>> {
        (0..m)
            .map(|_| (0..self.latent_dim()).map(|_| rng.sample(StandardNormal)).collect())
            .collect()
    }
}

fn clamped_ln(d: f64) -> f64 {
    if !(D_CLAMP..=1.0 - D_CLAMP).contains(&d) {
        log::warn!("discriminator saturated at {d}; clamping before log");
    }
    d.clamp(D_CLAMP, 1.0 - D_CLAMP).ln()
}

/// Minibatch estimate of `E[log D(x)] + E[log(1 - D(G(z)))]`.
pub fn gan_value(pair: &GanPair, real: &[Vec<f64>], latent: &[Vec<f64>]) -> Result<f64> {
    if real.is_empty() || latent.is_empty() {
        return Err(Error::config("gan value needs non-empty batches"));
    }
    let mut real_term = 0.0;
    for x in real {
        real_term += clamped_ln(pair.discriminate(x)?);
    }
    let mut fake_term = 0.0;
    for z in latent {
        let d = pair.discriminate(&pair.generate(z)?)?;
        fake_term += clamped_ln(1.0 - d);
    }
    Ok(real_term / real.len() as f64 + fake_term / latent.len() as f64)
}

/// Optimal discriminator for densities `p` (data) and `q` (generator).
pub fn optimal_discriminator(p: f64, q: f64) -> f64 {
    p / (p + q)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateKind {
    Discriminator,
    Generator,
}

#[derive(Debug, Clone, Copy)]
pub struct GanConfig {
    pub iterations: usize,
    /// Discriminator steps per generator step.
    pub k: usize,
    /// Minibatch size.
    pub m: usize,
    pub lr_discriminator: f64,
    pub lr_generator: f64,
    /// First-moment decay for both optimizers.
    pub beta1: f64,
}

impl Default for GanConfig {
    fn default() -> Self {
        Self {
            iterations: 8000,
            k: 1,
            m: 64,
            lr_discriminator: 2e-4,
            lr_generator: 2e-4,
            beta1: 0.5,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct GanTrace {
    /// `(outer iteration, kind)` for every parameter update, in order.
    pub updates: Vec<(usize, UpdateKind)>,
    /// Minibatch value estimate after each outer iteration.
    pub values: Vec<f64>,
    /// Mean discriminator output on the real minibatch, per outer iteration.
    pub d_real: Vec<f64>,
}

fn discriminator_step(
    pair: &mut GanPair,
    opt: &mut Adam,
    real: &[&Vec<f64>],
    latent: &[Vec<f64>],
) -> Result<f64> {
    let mut grads = Gradients::zeros_like(&pair.discriminator);
    let m = real.len() as f64;
    let mut d_sum = 0.0;
    // Ascend V: descend on -V.
    for x in real {
        let tape = pair.discriminator.forward_recorded(x)?;
        let d = tape.output()[0].clamp(D_CLAMP, 1.0 - D_CLAMP);
        d_sum += d;
        pair.discriminator.backward(&tape, &[-1.0 / (d * m)], &mut grads)?;
    }
    let mz = latent.len() as f64;
    for z in latent {
        let fake = pair.generate(z)?;
        let tape = pair.discriminator.forward_recorded(&fake)?;
        let d = tape.output()[0].clamp(D_CLAMP, 1.0 - D_CLAMP);
        pair.discriminator.backward(&tape, &[1.0 / ((1.0 - d) * mz)], &mut grads)?;
    }
    opt.step(&mut pair.discriminator, &grads)?;
    Ok(d_sum / m)
}

fn generator_step(pair: &mut GanPair, opt: &mut Adam, latent: &[Vec<f64>]) -> Result<()> {
    let mut grads = Gradients::zeros_like(&pair.generator);
    let mut scratch = Gradients::zeros_like(&pair.discriminator);
    let m = latent.len() as f64;
    // Descend mean log(1 - D(G(z))).
    for z in latent {
        let g_tape = pair.generator.forward_recorded(z)?;
        let d_tape = pair.discriminator.forward_recorded(g_tape.output())?;
        let d = d_tape.output()[0].clamp(D_CLAMP, 1.0 - D_CLAMP);
        let dx = pair.discriminator.backward(&d_tape, &[-1.0 / ((1.0 - d) * m)], &mut scratch)?;
        pair.generator.backward(&g_tape, &dx, &mut grads)?;
    }
    opt.step(&mut pair.generator, &grads)
}

/// Alternates `k` discriminator ascent steps with one generator descent step.
pub fn gan_train<R: Rng + ?Sized>(
    dataset: &[Vec<f64>],
    mut pair: GanPair,
    cfg: GanConfig,
    rng: &mut R,
) -> Result<(GanPair, GanTrace)> {
    if dataset.is_empty() {
        return Err(Error::config("dataset is empty"));
    }
    if cfg.m == 0 || cfg.m > dataset.len() || cfg.k == 0 {
        return Err(Error::config("need 0 < m <= |dataset| and k >= 1"));
    }
    if dataset.iter().any(|x| x.len() != pair.data_dim()) {
        return Err(Error::config("dataset width does not match generator output"));
    }
    let mut d_opt = Adam::new(&pair.discriminator, cfg.lr_discriminator);
    let mut g_opt = Adam::new(&pair.generator, cfg.lr_generator);
    d_opt.beta1 = cfg.beta1;
    g_opt.beta1 = cfg.beta1;
    let mut trace = GanTrace::default();
    for it in 0..cfg.iterations {
        let mut d_real = 0.0;
        for _ in 0..cfg.k {
            let latent = pair.draw_latent(cfg.m, rng);
            let real: Vec<&Vec<f64>> = dataset.choose_multiple(rng, cfg.m).collect();
            d_real = discriminator_step(&mut pair, &mut d_opt, &real, &latent)
                .map_err(|e| Error::training(format!("iteration {it}"), e.to_string()))?;
            trace.updates.push((it, UpdateKind::Discriminator));
        }
        let latent = pair.draw_latent(cfg.m, rng);
        generator_step(&mut pair, &mut g_opt, &latent)
            .map_err(|e| Error::training(format!("iteration {it}"), e.to_string()))?;
        trace.updates.push((it, UpdateKind::Generator));

        let real: Vec<Vec<f64>> = dataset.choose_multiple(rng, cfg.m).cloned().collect();
        let value = gan_value(&pair, &real, &latent)?;
        if !value.is_finite() {
            return Err(Error::training(format!("iteration {it}"), "non-finite value estimate"));
        }
        trace.values.push(value);
        trace.d_real.push(d_real);
    }
    Ok((pair, trace))
}
