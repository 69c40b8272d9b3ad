//! Flow-matching GFlowNet on small enumerable DAGs.
//!
//! Boundary conventions: the source receives a fixed inflow of 1, and each
//! terminal `s_T` drains `Z * R(s_T)` where `Z` is learned through `log_z`.
//! At balance every edge flow is then the probability mass passing through
//! that edge and `Z = 1 / sum(R)`.

use rand::Rng;

use crate::diffnet::{Activation, Adam, DenseNet, Gradients};
use crate::{Error, Result};

pub const SOURCE_INFLOW: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    children: Vec<Vec<usize>>,
    parents: Vec<Vec<usize>>,
    source: usize,
}

impl Dag {
    pub fn new(states: usize, edges: &[(usize, usize)], source: usize) -> Result<Self> {
        if source >= states {
            return Err(Error::config("source state out of range"));
        }
        let mut children = vec![Vec::new(); states];
        let mut parents = vec![Vec::new(); states];
        for &(a, b) in edges {
            if a >= states || b >= states || a == b {
                return Err(Error::config(format!("invalid edge ({a}, {b})")));
            }
            if children[a].contains(&b) {
                return Err(Error::config(format!("duplicate edge ({a}, {b})")));
            }
            children[a].push(b);
            parents[b].push(a);
        }
        if !parents[source].is_empty() {
            return Err(Error::config("source state must not have parents"));
        }
        let dag = Self {
            children,
            parents,
            source,
        };
        dag.topological_order()?;
        Ok(dag)
    }

    /// Kahn's algorithm; errors on a cycle.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let n = self.children.len();
        let mut indegree: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut ready: Vec<usize> = (0..n).filter(|s| indegree[*s] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(s) = ready.pop() {
            order.push(s);
            for &c in &self.children[s] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.push(c);
                }
            }
        }
        if order.len() != n {
            return Err(Error::config("graph contains a cycle"));
        }
        Ok(order)
    }

    pub fn len(&self) -> usize {
        self.children.len()
    }

    pub fn is_empty(&self) -> bool {
        self.children.is_empty()
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn children(&self, s: usize) -> &[usize] {
        &self.children[s]
    }

    pub fn parents(&self, s: usize) -> &[usize] {
        &self.parents[s]
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.children[s].is_empty()
    }

    pub fn terminals(&self) -> Vec<usize> {
        (0..self.len()).filter(|s| self.is_terminal(*s)).collect()
    }

    /// `s0 -> {s1, s2}`, both of which reach terminals `s3` and `s4`.
    pub fn diamond() -> Self {
        Self::new(5, &[(0, 1), (0, 2), (1, 3), (1, 4), (2, 3), (2, 4)], 0).expect("static dag")
    }

    /// Five internal states funnelling into one terminal (`s4`).
    pub fn funnel() -> Self {
        Self::new(
            6,
            &[(0, 1), (0, 2), (1, 3), (2, 3), (2, 5), (5, 3), (3, 4)],
            0,
        )
        .expect("static dag")
    }

    /// Single chain `s0 -> s1 -> ... -> s_{n-1}`.
    pub fn chain(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::new(n, &edges, 0).expect("static dag")
    }
}

/// Flow on every edge, laid out like [`Dag::children`].
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeFlows {
    flows: Vec<Vec<f64>>,
}

impl EdgeFlows {
    pub fn zeros(dag: &Dag) -> Self {
        Self {
            flows: (0..dag.len()).map(|s| vec![0.0; dag.children(s).len()]).collect(),
        }
    }

    pub fn get(&self, dag: &Dag, from: usize, to: usize) -> f64 {
        dag.children(from)
            .iter()
            .position(|c| *c == to)
            .map_or(0.0, |k| self.flows[from][k])
    }

    pub fn set(&mut self, dag: &Dag, from: usize, to: usize, value: f64) -> Result<()> {
        let k = dag
            .children(from)
            .iter()
            .position(|c| *c == to)
            .ok_or_else(|| Error::config(format!("no edge ({from}, {to})")))?;
        self.flows[from][k] = value;
        Ok(())
    }

    pub fn outgoing(&self, s: usize) -> &[f64] {
        &self.flows[s]
    }
}

/// Reward-dependent boundary terms of the balance equations.
#[derive(Debug, Clone, PartialEq)]
pub struct Boundary {
    /// Reward per state; only terminal entries are read.
    pub rewards: Vec<f64>,
    pub z: f64,
}

impl Boundary {
    fn inflow(&self, dag: &Dag, flows: &EdgeFlows, s: usize) -> f64 {
        if s == dag.source() {
            SOURCE_INFLOW
        } else {
            dag.parents(s).iter().map(|&p| flows.get(dag, p, s)).sum()
        }
    }

    fn outflow(&self, dag: &Dag, flows: &EdgeFlows, s: usize) -> f64 {
        if dag.is_terminal(s) {
            self.z * self.rewards[s]
        } else {
            flows.outgoing(s).iter().sum()
        }
    }

    /// `inflow(s) - outflow(s)`.
    pub fn residual(&self, dag: &Dag, flows: &EdgeFlows, s: usize) -> f64 {
        self.inflow(dag, flows, s) - self.outflow(dag, flows, s)
    }
}

/// Sum of squared in/out mismatches over the states in `batch`.
pub fn flow_loss(dag: &Dag, flows: &EdgeFlows, boundary: &Boundary, batch: &[usize]) -> Result<f64> {
    let mut loss = 0.0;
    for &s in batch {
        if s >= dag.len() {
            return Err(Error::config(format!("state {s} is not in the graph")));
        }
        loss += boundary.residual(dag, flows, s).powi(2);
    }
    Ok(loss)
}

/// `pi(a|s) = F(s, T(s, a)) / sum_a' F(s, T(s, a'))`, ordered like `dag.children(s)`.
pub fn flow_policy(dag: &Dag, flows: &EdgeFlows, s: usize) -> Result<Vec<f64>> {
    if s >= dag.len() || dag.is_terminal(s) {
        return Err(Error::config(format!("state {s} has no actions")));
    }
    let out = flows.outgoing(s);
    let total: f64 = out.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateState(s));
    }
    Ok(out.iter().map(|f| f / total).collect())
}

/// Edge flows produced by a network over one-hot state encodings with an
/// exponential head: `F(s, s') = net(one_hot(s))[s']`.
#[derive(Debug, Clone)]
pub struct FlowNetwork {
    pub dag: Dag,
    pub rewards: Vec<f64>,
    pub net: DenseNet,
    pub log_z: f64,
}

impl FlowNetwork {
    pub fn new<R: Rng + ?Sized>(dag: Dag, rewards: Vec<f64>, hidden: usize, rng: &mut R) -> Result<Self> {
        if rewards.len() != dag.len() {
            return Err(Error::config("one reward entry per state required"));
        }
        for t in dag.terminals() {
            if !(rewards[t] > 0.0) {
                return Err(Error::config(format!("terminal {t} needs a positive reward")));
            }
        }
        let n = dag.len();
        let net = DenseNet::mlp(&[n, hidden, n], Activation::Tanh, Activation::Exp, rng)?;
        Ok(Self {
            dag,
            rewards,
            net,
            log_z: 0.0,
        })
    }

    fn one_hot(&self, s: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.dag.len()];
        v[s] = 1.0;
        v
    }

    pub fn boundary(&self) -> Boundary {
        Boundary {
            rewards: self.rewards.clone(),
            z: self.log_z.exp(),
        }
    }

    pub fn edge_flows(&self) -> Result<EdgeFlows> {
        let mut flows = EdgeFlows::zeros(&self.dag);
        for s in 0..self.dag.len() {
            if self.dag.is_terminal(s) {
                continue;
            }
            let out = self.net.forward(&self.one_hot(s))?;
            for (k, &c) in self.dag.children(s).iter().enumerate() {
                flows.flows[s][k] = out[c];
            }
        }
        Ok(flows)
    }

    pub fn loss(&self, batch: &[usize]) -> Result<f64> {
        flow_loss(&self.dag, &self.edge_flows()?, &self.boundary(), batch)
    }

    pub fn full_loss(&self) -> Result<f64> {
        let all: Vec<usize> = (0..self.dag.len()).collect();
        self.loss(&all)
    }

    pub fn policy(&self, s: usize) -> Result<Vec<f64>> {
        flow_policy(&self.dag, &self.edge_flows()?, s)
    }

    /// Mean squared residual over `batch` with its gradient w.r.t. the
    /// network parameters and `log_z`.
    pub fn loss_and_gradients(&self, batch: &[usize]) -> Result<(f64, Gradients, f64)> {
        let n = self.dag.len();
        let tapes: Vec<_> = (0..n)
            .map(|s| {
                if self.dag.is_terminal(s) {
                    Ok(None)
                } else {
                    self.net.forward_recorded(&self.one_hot(s)).map(Some)
                }
            })
            .collect::<Result<_>>()?;
        let mut flows = EdgeFlows::zeros(&self.dag);
        for s in 0..n {
            if let Some(tape) = &tapes[s] {
                for (k, &c) in self.dag.children(s).iter().enumerate() {
                    flows.flows[s][k] = tape.output()[c];
                }
            }
        }
        let boundary = self.boundary();
        let weight = 1.0 / batch.len().max(1) as f64;
        let mut out_grads = vec![vec![0.0; n]; n];
        let mut dlogz = 0.0;
        let mut loss = 0.0;
        for &s in batch {
            if s >= n {
                return Err(Error::config(format!("state {s} is not in the graph")));
            }
            let r = boundary.residual(&self.dag, &flows, s);
            loss += weight * r * r;
            let d = 2.0 * weight * r;
            if s != self.dag.source() {
                for &p in self.dag.parents(s) {
                    out_grads[p][s] += d;
                }
            }
            if self.dag.is_terminal(s) {
                dlogz -= d * boundary.z * self.rewards[s];
            } else {
                for &c in self.dag.children(s) {
                    out_grads[s][c] -= d;
                }
            }
        }
        if !loss.is_finite() {
            return Err(Error::training("flow matching", "non-finite loss"));
        }
        let mut grads = Gradients::zeros_like(&self.net);
        for s in 0..n {
            if let Some(tape) = &tapes[s] {
                if out_grads[s].iter().any(|g| *g != 0.0) {
                    self.net.backward(tape, &out_grads[s], &mut grads)?;
                }
            }
        }
        Ok((loss, grads, dlogz))
    }

    /// Samples a trajectory from the source by following [`flow_policy`].
    pub fn rollout<R: Rng + ?Sized>(&self, flows: &EdgeFlows, rng: &mut R) -> Result<Vec<usize>> {
        let mut s = self.dag.source();
        let mut path = vec![s];
        while !self.dag.is_terminal(s) {
            let pi = flow_policy(&self.dag, flows, s)?;
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = pi.len() - 1;
            for (k, p) in pi.iter().enumerate() {
                acc += p;
                if u < acc {
                    pick = k;
                    break;
                }
            }
            s = self.dag.children(s)[pick];
            path.push(s);
        }
        Ok(path)
    }

    /// Empirical terminal frequencies over `rollouts` samples, indexed by state.
    pub fn terminal_frequencies<R: Rng + ?Sized>(&self, rollouts: usize, rng: &mut R) -> Result<Vec<f64>> {
        let flows = self.edge_flows()?;
        let mut counts = vec![0usize; self.dag.len()];
        for _ in 0..rollouts {
            let path = self.rollout(&flows, rng)?;
            counts[*path.last().unwrap()] += 1;
        }
        Ok(counts.into_iter().map(|c| c as f64 / rollouts as f64).collect())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GflowConfig {
    pub iterations: usize,
    pub lr: f64,
    /// On-policy trajectories gathered per iteration.
    pub rollouts_per_batch: usize,
    pub hidden: usize,
}

impl Default for GflowConfig {
    fn default() -> Self {
        Self {
            iterations: 3000,
            lr: 1e-2,
            rollouts_per_batch: 8,
            hidden: 16,
        }
    }
}

/// Trains edge flows by flow matching on states visited by on-policy rollouts.
/// Returns the network and the per-iteration batch loss.
pub fn gflownet_train<R: Rng + ?Sized>(
    dag: Dag,
    rewards: Vec<f64>,
    cfg: GflowConfig,
    rng: &mut R,
) -> Result<(FlowNetwork, Vec<f64>)> {
    let mut fnet = FlowNetwork::new(dag, rewards, cfg.hidden, rng)?;
    let mut opt = Adam::new(&fnet.net, cfg.lr);
    let mut z_opt = Adam::with_len(1, cfg.lr);
    let mut curve = Vec::with_capacity(cfg.iterations);
    for it in 0..cfg.iterations {
        let flows = fnet.edge_flows()?;
        let mut batch = Vec::new();
        for _ in 0..cfg.rollouts_per_batch {
            batch.extend(fnet.rollout(&flows, rng)?);
        }
        let (loss, grads, dlogz) = fnet.loss_and_gradients(&batch)?;
        if !loss.is_finite() {
            return Err(Error::training(format!("iteration {it}"), "non-finite flow loss"));
        }
        opt.step(&mut fnet.net, &grads)?;
        let mut lz = [fnet.log_z];
        z_opt.step_slice(&mut lz, &[dlogz])?;
        fnet.log_z = lz[0];
        curve.push(loss);
    }
    Ok((fnet, curve))
}

/// Exact terminal distribution `R / sum(R)` over terminals reachable from the source.
pub fn reward_distribution(dag: &Dag, rewards: &[f64]) -> Vec<f64> {
    let total: f64 = dag.terminals().iter().map(|t| rewards[*t]).sum();
    (0..dag.len())
        .map(|s| if dag.is_terminal(s) { rewards[s] / total } else { 0.0 })
        .collect()
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}
