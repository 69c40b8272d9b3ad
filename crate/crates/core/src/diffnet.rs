//! Small dense feed-forward networks with hand-written reverse mode.
//!
//! All parameters of a [`DenseNet`] live in one flat `Vec<f64>`; each layer
//! owns a row-major `(outputs, inputs)` weight block followed by its bias.
//! Keeping the parameters flat makes optimizer state, soft target updates
//! and finite-difference checks straightforward.
//!
//! A forward pass can be recorded into a [`Tape`]; [`DenseNet::backward`]
//! replays it in reverse, accumulating parameter gradients and returning the
//! gradient with respect to the network input so callers can chain networks
//! (generator into discriminator, denoiser across diffusion steps).

use rand::Rng;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    Sigmoid,
    /// Element-wise exponential; used where outputs must stay positive.
    Exp,
    /// Normalizes the whole layer output; computed with max subtraction.
    Softmax,
}

impl Activation {
    fn apply(self, z: &mut [f64]) {
        match self {
            Activation::Identity => {}
            Activation::Relu => z.iter_mut().for_each(|v| *v = v.max(0.0)),
            Activation::Tanh => z.iter_mut().for_each(|v| *v = v.tanh()),
            Activation::Sigmoid => z.iter_mut().for_each(|v| *v = sigmoid(*v)),
            Activation::Exp => z.iter_mut().for_each(|v| *v = v.exp()),
            Activation::Softmax => softmax_in_place(z),
        }
    }

    /// Converts `dL/dy` into `dL/dz` in place, given the activation output `y`.
    fn backprop(self, y: &[f64], g: &mut [f64]) {
        match self {
            Activation::Identity => {}
            Activation::Relu => {
                for (gi, yi) in g.iter_mut().zip(y) {
                    if *yi <= 0.0 {
                        *gi = 0.0;
                    }
                }
            }
            Activation::Tanh => g.iter_mut().zip(y).for_each(|(gi, yi)| *gi *= 1.0 - yi * yi),
            Activation::Sigmoid => g.iter_mut().zip(y).for_each(|(gi, yi)| *gi *= yi * (1.0 - yi)),
            Activation::Exp => g.iter_mut().zip(y).for_each(|(gi, yi)| *gi *= yi),
            Activation::Softmax => {
                let dot: f64 = g.iter().zip(y).map(|(a, b)| a * b).sum();
                g.iter_mut().zip(y).for_each(|(gi, yi)| *gi = yi * (*gi - dot));
            }
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    z.iter_mut().for_each(|v| *v /= sum);
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let mut out = z.to_vec();
    softmax_in_place(&mut out);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
    offset: usize,
}

impl Layer {
    fn weight_range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.inputs * self.outputs
    }

    fn bias_range(&self) -> std::ops::Range<usize> {
        let start = self.offset + self.inputs * self.outputs;
        start..start + self.outputs
    }

    fn param_count(&self) -> usize {
        self.outputs * (self.inputs + 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    layers: Vec<Layer>,
    params: Vec<f64>,
}

/// Activations recorded during one forward pass: `values[0]` is the input,
/// `values[l + 1]` the output of layer `l`.
#[derive(Debug, Clone)]
pub struct Tape {
    values: Vec<Vec<f64>>,
}

impl Tape {
    pub fn input(&self) -> &[f64] {
        &self.values[0]
    }

    pub fn output(&self) -> &[f64] {
        self.values.last().expect("tape always holds the input")
    }
}

/// Batched counterpart of [`Tape`]: `values[l]` holds `n` rows, row-major.
#[derive(Debug, Clone)]
pub struct BatchTape {
    n: usize,
    values: Vec<Vec<f64>>,
}

impl BatchTape {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn outputs(&self) -> &[f64] {
        self.values.last().expect("tape always holds the input")
    }

    pub fn output(&self, sample: usize) -> &[f64] {
        let all = self.outputs();
        let w = all.len() / self.n;
        &all[sample * w..(sample + 1) * w]
    }
}

/// Dot product with four partial sums, which lets the compiler vectorize it.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += a * x`.
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

impl DenseNet {
    /// Builds a multilayer perceptron through `widths` (input first), with
    /// `hidden` on every inner layer and `output` on the last one.
    pub fn mlp<R: Rng + ?Sized>(
        widths: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::config("an mlp needs at least input and output widths"));
        }
        let spec: Vec<_> = widths
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                let act = if l + 2 == widths.len() { output } else { hidden };
                (w[0], w[1], act)
            })
            .collect();
        Self::from_layers(&spec, rng)
    }

    /// Uniform initialization in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` for weights and biases.
    pub fn from_layers<R: Rng + ?Sized>(
        spec: &[(usize, usize, Activation)],
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Self::zeros(spec)?;
        for layer in net.layers.clone() {
            let bound = 1.0 / (layer.inputs as f64).sqrt();
            for p in &mut net.params[layer.offset..layer.offset + layer.param_count()] {
                *p = rng.random_range(-bound..=bound);
            }
        }
        Ok(net)
    }

    pub fn zeros(spec: &[(usize, usize, Activation)]) -> Result<Self> {
        if spec.is_empty() {
            return Err(Error::config("network needs at least one layer"));
        }
        let mut layers = Vec::with_capacity(spec.len());
        let mut offset = 0;
        for (l, &(inputs, outputs, activation)) in spec.iter().enumerate() {
            if inputs == 0 || outputs == 0 {
                return Err(Error::config(format!("layer {l} has a zero width")));
            }
            if let Some(prev) = layers.last() {
                let prev: &Layer = prev;
                if prev.outputs != inputs {
                    return Err(Error::config(format!(
                        "layer {l} expects {inputs} inputs but layer {} emits {}",
                        l - 1,
                        prev.outputs
                    )));
                }
            }
            let layer = Layer {
                inputs,
                outputs,
                activation,
                offset,
            };
            offset += layer.param_count();
            layers.push(layer);
        }
        Ok(Self {
            layers,
            params: vec![0.0; offset],
        })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn weights(&self, layer: usize) -> &[f64] {
        &self.params[self.layers[layer].weight_range()]
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut [f64] {
        let r = self.layers[layer].weight_range();
        &mut self.params[r]
    }

    pub fn bias(&self, layer: usize) -> &[f64] {
        &self.params[self.layers[layer].bias_range()]
    }

    pub fn bias_mut(&mut self, layer: usize) -> &mut [f64] {
        let r = self.layers[layer].bias_range();
        &mut self.params[r]
    }

    /// Index of the layer that owns flat parameter `index`.
    pub fn layer_of_param(&self, index: usize) -> usize {
        self.layers
            .iter()
            .position(|l| index < l.offset + l.param_count())
            .unwrap_or(self.layers.len() - 1)
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_width() {
            return Err(Error::config(format!(
                "input width {} does not match network input width {}",
                input.len(),
                self.input_width()
            )));
        }
        Ok(())
    }

    fn layer_forward(&self, layer: &Layer, x: &[f64]) -> Vec<f64> {
        let w = &self.params[layer.weight_range()];
        let b = &self.params[layer.bias_range()];
        let mut z: Vec<f64> = w
            .chunks_exact(layer.inputs)
            .zip(b)
            .map(|(row, bias)| bias + dot(row, x))
            .collect();
        layer.activation.apply(&mut z);
        z
    }

    /// Same as `layer_forward` on `n` row-major inputs: `Z = X W^T + b`.
    fn layer_forward_batch(&self, layer: &Layer, x: &[f64], n: usize) -> Vec<f64> {
        let (inp, out) = (layer.inputs, layer.outputs);
        let w = &self.params[layer.weight_range()];
        let b = &self.params[layer.bias_range()];
        let mut z = Vec::with_capacity(n * out);
        for _ in 0..n {
            z.extend_from_slice(b);
        }
        // SAFETY: every slice covers the full strided extent described by its
        // dimensions, and `z` does not alias `x` or `w`.
        unsafe {
            matrixmultiply::dgemm(
                n, inp, out, 1.0,
                x.as_ptr(), inp as isize, 1,
                w.as_ptr(), 1, inp as isize,
                1.0,
                z.as_mut_ptr(), out as isize, 1,
            );
        }
        for s in 0..n {
            layer.activation.apply(&mut z[s * out..(s + 1) * out]);
        }
        z
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut x = self.layer_forward(&self.layers[0], input);
        for layer in &self.layers[1..] {
            x = self.layer_forward(layer, &x);
        }
        Ok(x)
    }

    pub fn forward_recorded(&self, input: &[f64]) -> Result<Tape> {
        self.check_input(input)?;
        let mut values = Vec::with_capacity(self.layers.len() + 1);
        values.push(input.to_vec());
        for layer in &self.layers {
            let next = self.layer_forward(layer, values.last().unwrap());
            values.push(next);
        }
        Ok(Tape { values })
    }

    /// Accumulates `d(out_grad . output)/d(params)` into `grads` and returns
    /// the gradient with respect to the recorded input.
    pub fn backward(&self, tape: &Tape, out_grad: &[f64], grads: &mut Gradients) -> Result<Vec<f64>> {
        if out_grad.len() != self.output_width() {
            return Err(Error::config(format!(
                "output gradient width {} does not match network output width {}",
                out_grad.len(),
                self.output_width()
            )));
        }
        if grads.0.len() != self.params.len() || tape.values.len() != self.layers.len() + 1 {
            return Err(Error::config("gradient buffer or tape does not belong to this network"));
        }
        let mut g = out_grad.to_vec();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let x = &tape.values[l];
            let y = &tape.values[l + 1];
            layer.activation.backprop(y, &mut g);
            let w = &self.params[layer.weight_range()];
            let mut gx = vec![0.0; layer.inputs];
            {
                let (gw, gb) = grads.0[layer.offset..layer.offset + layer.param_count()]
                    .split_at_mut(layer.inputs * layer.outputs);
                for (o, &dz) in g.iter().enumerate() {
                    if dz == 0.0 {
                        continue;
                    }
                    gb[o] += dz;
                    let row = o * layer.inputs..(o + 1) * layer.inputs;
                    for ((gwi, xi), (gxi, wi)) in gw[row.clone()]
                        .iter_mut()
                        .zip(x)
                        .zip(gx.iter_mut().zip(&w[row]))
                    {
                        *gwi += dz * xi;
                        *gxi += dz * wi;
                    }
                }
            }
            g = gx;
        }
        Ok(g)
    }

    /// Forward pass over `n` inputs stored row-major in `inputs`.
    pub fn forward_batch(&self, inputs: &[f64], n: usize) -> Result<BatchTape> {
        if inputs.len() != n * self.input_width() {
            return Err(Error::config(format!(
                "batch input holds {} values, expected {n} x {}",
                inputs.len(),
                self.input_width()
            )));
        }
        let mut values = Vec::with_capacity(self.layers.len() + 1);
        values.push(inputs.to_vec());
        for layer in &self.layers {
            let next = self.layer_forward_batch(layer, values.last().unwrap(), n);
            values.push(next);
        }
        Ok(BatchTape { n, values })
    }

    /// Batched [`Self::backward`]: `out_grads` holds one output gradient row
    /// per sample; parameter gradients are summed over the batch. Returns the
    /// input gradient rows, or an empty vector when `input_grad` is false.
    pub fn backward_batch(
        &self,
        tape: &BatchTape,
        out_grads: &[f64],
        grads: &mut Gradients,
        input_grad: bool,
    ) -> Result<Vec<f64>> {
        let n = tape.n;
        if out_grads.len() != n * self.output_width() {
            return Err(Error::config("batch output gradient has the wrong size"));
        }
        if grads.0.len() != self.params.len() || tape.values.len() != self.layers.len() + 1 {
            return Err(Error::config("gradient buffer or tape does not belong to this network"));
        }
        let mut g = out_grads.to_vec();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let (inp, out) = (layer.inputs, layer.outputs);
            let x = &tape.values[l];
            let y = &tape.values[l + 1];
            for s in 0..n {
                layer.activation.backprop(&y[s * out..(s + 1) * out], &mut g[s * out..(s + 1) * out]);
            }
            let need_gx = l > 0 || input_grad;
            let w = &self.params[layer.weight_range()];
            let mut gx = vec![0.0; if need_gx { n * inp } else { 0 }];
            if need_gx {
                // SAFETY: as in `layer_forward_batch`; `gx` is a fresh buffer.
                unsafe {
                    matrixmultiply::dgemm(
                        n, out, inp, 1.0,
                        g.as_ptr(), out as isize, 1,
                        w.as_ptr(), inp as isize, 1,
                        0.0,
                        gx.as_mut_ptr(), inp as isize, 1,
                    );
                }
            }
            let (gw, gb) = grads.0[layer.offset..layer.offset + layer.param_count()].split_at_mut(inp * out);
            for s in 0..n {
                axpy(gb, 1.0, &g[s * out..(s + 1) * out]);
            }
            // SAFETY: `gw` is exactly `out x inp` and belongs to `grads`, not the tape.
            unsafe {
                matrixmultiply::dgemm(
                    out, n, inp, 1.0,
                    g.as_ptr(), 1, out as isize,
                    x.as_ptr(), inp as isize, 1,
                    1.0,
                    gw.as_mut_ptr(), inp as isize, 1,
                );
            }
            g = gx;
        }
        Ok(g)
    }

    /// `self <- tau * online + (1 - tau) * self`.
    pub fn soft_update_from(&mut self, online: &DenseNet, tau: f64) {
        debug_assert_eq!(self.params.len(), online.params.len());
        for (t, o) in self.params.iter_mut().zip(&online.params) {
            *t = tau * o + (1.0 - tau) * *t;
        }
    }

    pub fn distance(&self, other: &DenseNet) -> f64 {
        self.params
            .iter()
            .zip(&other.params)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Flat gradient buffer shaped like a network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<f64>);

impl Gradients {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Gradients(vec![0.0; net.num_params()])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn scale(&mut self, k: f64) {
        self.0.iter_mut().for_each(|g| *g *= k);
    }

    pub fn fill_zero(&mut self) {
        self.0.iter_mut().for_each(|g| *g = 0.0);
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    /// Rescales so the global L2 norm does not exceed `max_norm`.
    pub fn clip_norm(&mut self, max_norm: f64) {
        let n = self.norm();
        if n > max_norm && n.is_finite() {
            self.scale(max_norm / n);
        }
    }
}

/// Adaptive moment estimation with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(net: &DenseNet, lr: f64) -> Self {
        Self::with_len(net.num_params(), lr)
    }

    pub fn with_len(len: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One descent step on `net` along `grads`. Rejects non-finite gradients
    /// without touching the parameters.
    pub fn step(&mut self, net: &mut DenseNet, grads: &Gradients) -> Result<()> {
        if let Some(i) = grads.0.iter().position(|g| !g.is_finite()) {
            return Err(Error::training(
                format!("layer {}", net.layer_of_param(i)),
                format!("non-finite gradient at parameter {i}"),
            ));
        }
        self.step_slice(&mut net.params, &grads.0)
    }

    /// Same update on an arbitrary parameter slice (scalar parameters such as log Z).
    pub fn step_slice(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::config("optimizer state does not match parameter count"));
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::training("parameters", format!("non-finite gradient at {i}")));
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let mut net = DenseNet::zeros(&[(2, 2, Activation::Identity)]).unwrap();
        net.weights_mut(0).copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(net.forward(&[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn zero_weights_return_bias() {
        let mut net = DenseNet::zeros(&[(3, 2, Activation::Identity)]).unwrap();
        net.bias_mut(0).copy_from_slice(&[0.5, -1.5]);
        assert_eq!(net.forward(&[9.0, -4.0, 2.0]).unwrap(), vec![0.5, -1.5]);
    }

    #[test]
    fn softmax_of_constant_logits_is_uniform() {
        let mut net = DenseNet::zeros(&[(1, 4, Activation::Softmax)]).unwrap();
        net.bias_mut(0).copy_from_slice(&[3.0; 4]);
        let y = net.forward(&[1.0]).unwrap();
        for p in y {
            assert!((p - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn width_mismatch_is_config_error() {
        let net = DenseNet::mlp(&[3, 4, 2], Activation::Tanh, Activation::Identity, &mut rng()).unwrap();
        assert!(matches!(net.forward(&[1.0, 2.0]), Err(Error::Config(_))));
        let tape = net.forward_recorded(&[1.0, 2.0, 3.0]).unwrap();
        let mut g = Gradients::zeros_like(&net);
        assert!(matches!(net.backward(&tape, &[1.0], &mut g), Err(Error::Config(_))));
    }

    #[test]
    fn non_chaining_widths_rejected() {
        let err = DenseNet::zeros(&[(2, 3, Activation::Relu), (4, 1, Activation::Identity)]);
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn linear_scalar_derivative() {
        let mut net = DenseNet::zeros(&[(1, 1, Activation::Identity)]).unwrap();
        net.weights_mut(0)[0] = 0.7;
        let tape = net.forward_recorded(&[3.0]).unwrap();
        let mut g = Gradients::zeros_like(&net);
        let dx = net.backward(&tape, &[1.0], &mut g).unwrap();
        assert_eq!(g.0, vec![3.0, 1.0]);
        assert_eq!(dx, vec![0.7]);
    }

    #[test]
    fn tanh_derivative_at_zero_is_one() {
        let mut net = DenseNet::zeros(&[(1, 1, Activation::Tanh)]).unwrap();
        net.weights_mut(0)[0] = 1.0;
        let tape = net.forward_recorded(&[0.0]).unwrap();
        let mut g = Gradients::zeros_like(&net);
        let dx = net.backward(&tape, &[1.0], &mut g).unwrap();
        assert_eq!(dx, vec![1.0]);
    }

    #[test]
    fn initialization_is_bounded_by_fan_in() {
        let net = DenseNet::mlp(&[16, 8, 3], Activation::Relu, Activation::Identity, &mut rng()).unwrap();
        assert!(net.weights(0).iter().all(|w| w.abs() <= 0.25));
        assert!(net.weights(1).iter().all(|w| w.abs() <= 1.0 / 8f64.sqrt()));
    }

    #[test]
    fn adam_zero_gradient_keeps_parameters() {
        let mut net = DenseNet::mlp(&[2, 3, 1], Activation::Tanh, Activation::Identity, &mut rng()).unwrap();
        let before = net.clone();
        let mut opt = Adam::new(&net, 1e-2);
        let g = Gradients::zeros_like(&net);
        for _ in 0..5 {
            opt.step(&mut net, &g).unwrap();
        }
        assert_eq!(net, before);
    }

    #[test]
    fn adam_constant_positive_gradient_decreases_parameter() {
        let mut net = DenseNet::zeros(&[(1, 1, Activation::Identity)]).unwrap();
        let mut opt = Adam::new(&net, 1e-3);
        let g = Gradients(vec![0.3, 0.3]);
        let mut last = net.params()[0];
        for _ in 0..20 {
            opt.step(&mut net, &g).unwrap();
            assert!(net.params()[0] < last);
            last = net.params()[0];
        }
    }

    #[test]
    fn adam_minimizes_quadratic_bowl() {
        // f(w) = w^2, gradient 2w
        let mut w = [1.0];
        let mut opt = Adam::with_len(1, 0.1);
        for _ in 0..200 {
            let g = [2.0 * w[0]];
            opt.step_slice(&mut w, &g).unwrap();
        }
        assert!(w[0].abs() < 1e-2, "w = {}", w[0]);
    }

    #[test]
    fn adam_rejects_non_finite_gradient_with_layer() {
        let mut net = DenseNet::mlp(&[2, 3, 1], Activation::Tanh, Activation::Identity, &mut rng()).unwrap();
        let mut opt = Adam::new(&net, 1e-2);
        let mut g = Gradients::zeros_like(&net);
        let last = g.0.len() - 1;
        g.0[last] = f64::NAN;
        match opt.step(&mut net, &g) {
            Err(Error::Training { context, .. }) => assert_eq!(context, "layer 1"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn soft_update_with_unit_weight_copies() {
        let a = DenseNet::mlp(&[2, 3, 1], Activation::Tanh, Activation::Identity, &mut rng()).unwrap();
        let mut b = DenseNet::mlp(&[2, 3, 1], Activation::Tanh, Activation::Identity, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        b.soft_update_from(&a, 1.0);
        assert_eq!(a, b);
    }
}
