//! Reverse-mode gradients checked against central finite differences.

use leo_gai::diffnet::{Activation, DenseNet, Gradients};
use leo_gai::diffusion::{DiffusionSchedule, GadmPolicy, NoiseScale};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Central difference of `f` with respect to every parameter of `net`.
fn finite_difference(net: &DenseNet, f: impl Fn(&DenseNet) -> f64) -> Vec<f64> {
    let mut probe = net.clone();
    (0..net.num_params())
        .map(|i| {
            let orig = probe.params()[i];
            probe.params_mut()[i] = orig + H;
            let up = f(&probe);
            probe.params_mut()[i] = orig - H;
            let down = f(&probe);
            probe.params_mut()[i] = orig;
            (up - down) / (2.0 * H)
        })
        .collect()
}

fn check_dense(hidden: Activation, output: Activation, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = DenseNet::mlp(&[3, 5, 4], hidden, output, &mut rng).unwrap();
    let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
    let w: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
    let objective = |n: &DenseNet| -> f64 { n.forward(&x).unwrap().iter().zip(&w).map(|(a, b)| a * b).sum() };
    let tape = net.forward_recorded(&x).unwrap();
    let mut grads = Gradients::zeros_like(&net);
    net.backward(&tape, &w, &mut grads).unwrap();
    let fd = finite_difference(&net, objective);
    grads
        .as_slice()
        .iter()
        .zip(&fd)
        .filter(|(a, b)| a.abs().max(b.abs()) > 1e-7)
        .map(|(a, b)| rel_err(*a, *b))
        .fold(0.0, f64::max)
}

#[test]
fn dense_gradients_match_finite_differences_for_every_activation() {
    let cases = [
        (Activation::Tanh, Activation::Identity),
        (Activation::Relu, Activation::Identity),
        (Activation::Tanh, Activation::Softmax),
        (Activation::Tanh, Activation::Sigmoid),
        (Activation::Identity, Activation::Exp),
    ];
    for (seed, (h, o)) in cases.iter().enumerate() {
        let err = check_dense(*h, *o, seed as u64 + 100);
        assert!(err < 1e-4, "{h:?}/{o:?}: relative error {err}");
    }
}

#[test]
fn dense_input_gradient_matches_finite_difference() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let net = DenseNet::mlp(&[4, 6, 2], Activation::Tanh, Activation::Identity, &mut rng).unwrap();
    let x = vec![0.3, -0.2, 0.8, -0.9];
    let tape = net.forward_recorded(&x).unwrap();
    let mut grads = Gradients::zeros_like(&net);
    let dx = net.backward(&tape, &[1.0, -2.0], &mut grads).unwrap();
    for i in 0..4 {
        let mut up = x.clone();
        up[i] += H;
        let mut down = x.clone();
        down[i] -= H;
        let f = |v: &[f64]| {
            let y = net.forward(v).unwrap();
            y[0] - 2.0 * y[1]
        };
        let fd = (f(&up) - f(&down)) / (2.0 * H);
        assert!(rel_err(dx[i], fd) < 1e-6, "input {i}: {} vs {fd}", dx[i]);
    }
}

#[test]
fn softmax_outputs_are_positive_and_normalized() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let net = DenseNet::mlp(&[3, 8, 7], Activation::Relu, Activation::Softmax, &mut rng).unwrap();
    for _ in 0..50 {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-5.0..5.0)).collect();
        let y = net.forward(&x).unwrap();
        assert!(y.iter().all(|p| *p > 0.0));
        assert!((y.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn forward_and_backward_are_bit_identical_under_fixed_seed() {
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let net = DenseNet::mlp(&[3, 8, 8, 2], Activation::Tanh, Activation::Identity, &mut rng).unwrap();
        let tape = net.forward_recorded(&[0.1, 0.2, 0.3]).unwrap();
        let mut g = Gradients::zeros_like(&net);
        net.backward(&tape, &[1.0, 1.0], &mut g).unwrap();
        (tape.output().to_vec(), g.0)
    };
    let (a, ga) = run();
    let (b, gb) = run();
    assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    assert_eq!(ga.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), gb.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
}

/// -log pi(a|s) through the whole reverse chain with frozen noise.
#[test]
fn gadm_chain_gradient_matches_finite_differences() {
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let (actions, obs_dim) = (2, 3);
        let sched = DiffusionSchedule::linear(5, 1e-4, 0.2).unwrap();
        let widths = GadmPolicy::denoiser_widths(actions, obs_dim, 5, &[8]);
        let net = DenseNet::mlp(&widths, Activation::Tanh, Activation::Identity, &mut rng).unwrap();
        let policy = GadmPolicy::new(net, sched, NoiseScale::Posterior, actions, obs_dim).unwrap();
        let noise = policy.draw_noise(&mut rng);
        let obs = [0.5, -0.25, 0.75];
        let target = (seed % 2) as usize;
        let (dist, tape) = policy.distribution_recorded(&obs, &noise).unwrap();
        let mut prob_grad = vec![0.0; actions];
        prob_grad[target] = -1.0 / dist.probs[target];
        let mut grads = Gradients::zeros_like(&policy.denoiser);
        policy.backward(&tape, &prob_grad, &mut grads).unwrap();

        let fd = finite_difference(&policy.denoiser, |n| {
            let mut p = policy.clone();
            p.denoiser = n.clone();
            -p.distribution(&obs, &noise).unwrap().probs[target].ln()
        });
        let worst = grads
            .as_slice()
            .iter()
            .zip(&fd)
            .filter(|(a, b)| a.abs().max(b.abs()) > 1e-7)
            .map(|(a, b)| rel_err(*a, *b))
            .fold(0.0, f64::max);
        assert!(worst < 1e-3, "seed {seed}: worst relative error {worst}");
    }
}
