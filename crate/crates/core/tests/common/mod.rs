//! Toy problems shared by the policy tests and the acceptance suite.
#![allow(dead_code)]

use leo_gai::load::{LoadProblem, ServedDemand};
use leo_gai::policies::{ActorCritic, AgentHyper, Ddqn, ReplayBuffer, Transition, Ucb};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Deterministic two-armed bandit: arm 0 pays 1, arm 1 pays 0.
pub const OBS: [f64; 2] = [1.0, 0.0];

pub fn bandit_reward(arm: usize) -> f64 {
    if arm == 0 {
        1.0
    } else {
        0.0
    }
}

fn pull(arm: usize) -> Transition {
    Transition {
        obs: OBS.to_vec(),
        action: arm,
        reward: bandit_reward(arm),
        next_obs: OBS.to_vec(),
        done: true,
    }
}

/// Trains the diffusion actor-critic for `updates` gradient steps, acting
/// once per step; returns the learner and its chain-averaged `pi(best)`.
pub fn train_actor_critic(seed: u64, hyper: &AgentHyper, updates: usize) -> (ActorCritic, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ac = ActorCritic::new(2, 2, hyper, &mut rng).unwrap();
    let mut buffer = ReplayBuffer::new(hyper.buffer);
    let mut done = 0;
    while done < updates {
        let arm = ac.select(&OBS, &[true, true], &mut rng).unwrap().unwrap();
        buffer.push(pull(arm));
        if buffer.len() >= hyper.batch {
            let batch = buffer.sample(hyper.batch, &mut rng);
            ac.update(&batch, &mut rng).unwrap();
            done += 1;
        }
    }
    let best = ac.mean_distribution(&OBS, 1000, &mut rng).unwrap().probs[0];
    (ac, best)
}

/// Same loop for double DQN; returns its behaviour-policy `pi(best)`.
pub fn train_ddqn(seed: u64, hyper: &AgentHyper, updates: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = updates + hyper.batch;
    let mut d = Ddqn::new(2, 2, hyper, total, &mut rng).unwrap();
    let mut buffer = ReplayBuffer::new(hyper.buffer);
    let mut done = 0;
    while done < updates {
        let arm = d.select(&OBS, &[true, true], &mut rng).unwrap().unwrap();
        buffer.push(pull(arm));
        d.tick();
        if buffer.len() >= hyper.batch {
            let batch = buffer.sample(hyper.batch, &mut rng);
            d.update(&batch).unwrap();
            done += 1;
        }
    }
    d.action_probabilities(&OBS, &[true, true]).unwrap().unwrap().probs[0]
}

/// Cumulative regret of plain UCB after each of `steps` pulls.
pub fn ucb_regret(steps: usize, c: f64) -> Vec<f64> {
    let mut ucb = Ucb::new(2, c);
    let mut regret = 0.0;
    (0..steps)
        .map(|_| {
            let arm = ucb.select(&[true, true]).unwrap();
            ucb.record(arm, bandit_reward(arm));
            regret += bandit_reward(0) - bandit_reward(arm);
            regret
        })
        .collect()
}

pub const LEOS: usize = 3;
pub const CCS: usize = 2;
pub const BANDWIDTH: f64 = 1e6;

/// Three LEOS sharing two CCs, with cross gains a fraction of the serving gain.
pub fn random_load_problem(rng: &mut impl Rng) -> LoadProblem {
    let noise = 1e-12 / 30.0;
    let mut demands = Vec::new();
    let mut ue = 0;
    for i in 0..LEOS {
        for _ in 0..rng.random_range(3..7) {
            for c in 0..CCS {
                let own = rng.random_range(1e-12..2e-12);
                let gains = (0..LEOS)
                    .map(|j| if j == i { own } else { own * rng.random_range(0.05..0.5) })
                    .collect();
                demands.push(ServedDemand {
                    ue,
                    leos: i,
                    cc: c,
                    demand_bps: BANDWIDTH * rng.random_range(0.01..0.06),
                    gains,
                });
            }
            ue += 1;
        }
    }
    LoadProblem::new(vec![0b11; LEOS], vec![BANDWIDTH; CCS], vec![noise; CCS], 1.0, demands).unwrap()
}
