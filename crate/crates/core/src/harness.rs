//! Experiment runner: trains each policy on every (LEOS count, seed) cell,
//! logs per-episode metrics and aggregates them into summary and plot files.
//!
//! Output files (all CSV with a header row):
//! - `metrics.csv`: one row per (policy, leos, seed, episode). `rate_mbps` is
//!   the mean served rate per LEOS in Mbit/s; `load_per_cc` the mean load per
//!   activated CC; `active_ccs` counts the PCC; `reward` is per LEOS-step;
//!   `feasibility` is the share of LEOS-steps with backhaul room and no overload.
//! - `summary.csv`: per (policy, leos), seed means of the final 10% of episodes.
//! - `fig_rate.csv`, `fig_load.csv`, `fig_cc.csv`, `fig_sc.csv`: one row per
//!   LEOS count, one column per policy.

use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::load::{solve_load, LoadProblem, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::ntn::scenario::csv_error;
use crate::ntn::{init_scenario, GainTable, RateReport, SimConfig};
use crate::policies::{
    leos_reward, observation_width, observe, round_robin_pcc, ActionSpace, Agent, AgentHyper, PolicyKind,
    RewardWeights, Transition,
};
use crate::{Error, Result};

pub const WORKERS_ENV: &str = "LEOGAI_WORKERS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: SimConfig,
    pub policies: Vec<PolicyKind>,
    pub seeds: Vec<u64>,
    pub sweep: Vec<usize>,
    pub hyper: AgentHyper,
    pub reward: RewardWeights,
    pub load_tol: f64,
    pub load_max_iter: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::desk_profile()
    }
}

impl RunConfig {
    /// 100 UEs, I in {3, 9, 15}, 60 episodes of 60 steps, 5 seeds.
    pub fn desk_profile() -> Self {
        let mut scenario = SimConfig::default();
        scenario.area.ue_count = 100;
        Self {
            scenario,
            policies: PolicyKind::ALL.to_vec(),
            seeds: (0..5).collect(),
            sweep: vec![3, 9, 15],
            hyper: AgentHyper {
                episodes: 60,
                steps_per_episode: 60,
                ..desk_hyper()
            },
            reward: RewardWeights::default(),
            load_tol: DEFAULT_TOL,
            load_max_iter: DEFAULT_MAX_ITER,
        }
    }

    /// 400 UEs, I in {3, 9, 15, 21, 27}, 200 episodes of 200 steps.
    pub fn full_paper_profile() -> Self {
        let mut cfg = Self::desk_profile();
        cfg.scenario.area.ue_count = 400;
        cfg.sweep = vec![3, 9, 15, 21, 27];
        cfg.hyper = AgentHyper::default();
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.hyper.validate()?;
        if self.seeds.is_empty() || self.sweep.is_empty() || self.policies.is_empty() {
            return Err(Error::config("need at least one seed, sweep value and policy"));
        }
        if self.sweep.contains(&0) {
            return Err(Error::config("sweep values must be positive"));
        }
        Ok(())
    }

    pub fn total_steps(&self) -> usize {
        self.hyper.episodes * self.hyper.steps_per_episode
    }
}

/// Smaller nets and sparser updates so the desk grid fits a workstation budget.
fn desk_hyper() -> AgentHyper {
    AgentHyper {
        actor_hidden: vec![16],
        critic_hidden: vec![32],
        update_every: 4,
        actor_lr: 3e-3,
        ..AgentHyper::default()
    }
}

/// Deterministic 64-bit mixer (splitmix64 finalizer).
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Scenario seed: depends on (seed, LEOS count) only, so every policy sees
/// the same network.
pub fn scenario_seed(seed: u64, leos: usize) -> u64 {
    mix(mix(seed) ^ leos as u64)
}

fn agent_seed(seed: u64, leos: usize, policy: PolicyKind) -> u64 {
    mix(scenario_seed(seed, leos) ^ mix(policy as u64 + 1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub policy: PolicyKind,
    pub leos: usize,
    pub seed: u64,
    pub episode: usize,
    pub rate_mbps: f64,
    pub load_per_cc: f64,
    pub active_ccs: f64,
    pub assigned_scs: f64,
    pub reward: f64,
    pub feasibility: f64,
    pub status: String,
}

#[derive(Default)]
struct EpisodeTally {
    samples: usize,
    rate: f64,
    load: f64,
    ccs: f64,
    scs: f64,
    reward: f64,
    feasible: f64,
}

impl EpisodeTally {
    fn row(&self, policy: PolicyKind, leos: usize, seed: u64, episode: usize, status: &str) -> MetricsRow {
        let n = self.samples.max(1) as f64;
        MetricsRow {
            policy,
            leos,
            seed,
            episode,
            rate_mbps: self.rate / n / 1e6,
            load_per_cc: self.load / n,
            active_ccs: self.ccs / n,
            assigned_scs: self.scs / n,
            reward: self.reward / n,
            feasibility: self.feasible / n,
            status: status.to_string(),
        }
    }
}

/// Trains one policy on one (LEOS count, seed) cell. A training failure ends
/// the cell early with its last row marked `failed`.
pub fn run_cell(cfg: &RunConfig, policy: PolicyKind, leos: usize, seed: u64) -> Result<Vec<MetricsRow>> {
    let mut scenario = cfg.scenario.clone();
    scenario.leos.count = leos;
    scenario.rng.seed = scenario_seed(seed, leos);
    let mut state = init_scenario(&scenario)?;
    let ccs: Vec<usize> = (0..scenario.carriers.count).collect();
    state.assign_pccs(&round_robin_pcc(leos, &ccs)?, &scenario)?;
    let space = ActionSpace::new(scenario.carriers.count - 1, scenario.backhaul.sc_count)?;
    let obs_dim = observation_width(&space);
    let mut rng = ChaCha8Rng::seed_from_u64(agent_seed(seed, leos, policy));
    let mut agent = Agent::new(policy, leos, obs_dim, space.len(), &cfg.hyper, cfg.total_steps(), &mut rng)?;
    let mut gains = GainTable::compute(&state, &scenario);
    let demand = scenario.ue_demand_bps();
    let steps = cfg.hyper.steps_per_episode;
    let mut rows = Vec::with_capacity(cfg.hyper.episodes);

    for episode in 0..cfg.hyper.episodes {
        state.reset_configuration();
        let mut report: Option<RateReport> = None;
        let mut tally = EpisodeTally::default();
        let mut failure = None;
        for step in 0..steps {
            let clock = step as f64 / steps as f64;
            let mut taken = Vec::with_capacity(leos);
            for i in 0..leos {
                let obs = observe(&state, report.as_ref(), i, &space, demand, clock, &cfg.reward);
                let feasible = space.feasibility(state.scs_owned_by_others(i));
                let action = match agent.select(i, &obs, &feasible, &mut rng) {
                    Ok(a) => a,
                    Err(e) => {
                        failure = Some(e);
                        break;
                    }
                };
                let action = match action {
                    Some(a) => {
                        let (scc, sc) = space.decode(a);
                        state.apply_configuration(i, scc, sc, &scenario)?;
                        a
                    }
                    None => space.encode(state.leos[i].scc_mask(ccs.len()), state.leos[i].scs),
                };
                taken.push((obs, action));
            }
            if failure.is_some() {
                break;
            }

            state.check_invariants()?;
            let association = state.association(&scenario, &gains);
            let problem = LoadProblem::from_scenario(&state, &gains, &scenario, &association)?;
            let solution = solve_load(&problem, cfg.load_tol, cfg.load_max_iter)?;
            state.load = solution.clipped();
            let step_report = RateReport::compute(&state, &gains, &scenario, &problem, &solution);

            let next_clock = (step + 1) as f64 / steps as f64;
            let done = step + 1 == steps;
            for (i, (obs, action)) in taken.into_iter().enumerate() {
                let l = &state.leos[i];
                let r = leos_reward(&state, &step_report, i, &cfg.reward);
                let active = l.active_cc_count() as f64;
                tally.samples += 1;
                tally.rate += step_report.served[i];
                tally.load += state.load[i].iter().sum::<f64>() / active;
                tally.ccs += active;
                tally.scs += l.sc_count() as f64;
                tally.reward += r;
                if step_report.backhaul_feasible(i) && !step_report.overloaded[i] {
                    tally.feasible += 1.0;
                }
                let next_obs = observe(&state, Some(&step_report), i, &space, demand, next_clock, &cfg.reward);
                agent.record(
                    i,
                    Transition {
                        obs,
                        action,
                        reward: r,
                        next_obs,
                        done,
                    },
                );
            }
            if let Err(e) = agent.end_step(&mut rng) {
                failure = Some(e);
                break;
            }
            report = Some(step_report);
            state.advance(&scenario, scenario.leos.time_step_s)?;
            gains = GainTable::compute(&state, &scenario);
        }
        match failure {
            None => rows.push(tally.row(policy, leos, seed, episode, "ok")),
            Some(Error::Training { context, message }) => {
                log::error!("{policy} leos={leos} seed={seed} episode {episode}: {context}: {message}");
                rows.push(tally.row(policy, leos, seed, episode, "failed"));
                return Ok(rows);
            }
            Some(e) => return Err(e),
        }
    }
    Ok(rows)
}

/// Number of worker threads: `LEOGAI_WORKERS` when set, else all cores.
pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|n| *n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs every (policy, LEOS count, seed) cell and returns rows sorted by key.
pub fn run(cfg: &RunConfig, workers: usize) -> Result<Vec<MetricsRow>> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for &p in &cfg.policies {
        for &i in &cfg.sweep {
            for &s in &cfg.seeds {
                cells.push((p, i, s));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    let results: Vec<Result<Vec<MetricsRow>>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(p, i, s)| {
                let t0 = std::time::Instant::now();
                let r = run_cell(cfg, p, i, s);
                log::info!("{p} leos={i} seed={s} finished in {:.1?}", t0.elapsed());
                r
            })
            .collect()
    });
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    rows.sort_by(|a, b| (a.policy, a.leos, a.seed, a.episode).cmp(&(b.policy, b.leos, b.seed, b.episode)));
    Ok(rows)
}

/// True when every cell failed, which is the only case that should exit non-zero.
pub fn all_failed(rows: &[MetricsRow]) -> bool {
    let mut cells: BTreeMap<(PolicyKind, usize, u64), bool> = BTreeMap::new();
    for r in rows {
        *cells.entry((r.policy, r.leos, r.seed)).or_insert(false) |= r.status == "failed";
    }
    !cells.is_empty() && cells.values().all(|f| *f)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub policy: PolicyKind,
    pub leos: usize,
    pub seeds: usize,
    pub rate_mbps: f64,
    pub load_per_cc: f64,
    pub active_ccs: f64,
    pub assigned_scs: f64,
    pub reward: f64,
    pub feasibility: f64,
}

impl SummaryRow {
    pub fn metric(&self, m: Metric) -> f64 {
        match m {
            Metric::Rate => self.rate_mbps,
            Metric::Load => self.load_per_cc,
            Metric::Ccs => self.active_ccs,
            Metric::Scs => self.assigned_scs,
            Metric::Reward => self.reward,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Rate,
    Load,
    Ccs,
    Scs,
    Reward,
}

/// Seed means of each cell's final 10% of episodes (at least one), averaged
/// over seeds. Failed cells are left out.
pub fn summarize(rows: &[MetricsRow]) -> Vec<SummaryRow> {
    let mut cells: BTreeMap<(PolicyKind, usize, u64), Vec<&MetricsRow>> = BTreeMap::new();
    for r in rows {
        cells.entry((r.policy, r.leos, r.seed)).or_default().push(r);
    }
    let mut groups: BTreeMap<(PolicyKind, usize), Vec<[f64; 6]>> = BTreeMap::new();
    for ((p, i, _), mut cell) in cells {
        if cell.iter().any(|r| r.status == "failed") {
            continue;
        }
        cell.sort_by_key(|r| r.episode);
        let tail = cell.len().div_ceil(10).max(1);
        let last = &cell[cell.len() - tail..];
        let mut acc = [0.0; 6];
        for r in last {
            let v = [r.rate_mbps, r.load_per_cc, r.active_ccs, r.assigned_scs, r.reward, r.feasibility];
            for (a, x) in acc.iter_mut().zip(v) {
                *a += x / tail as f64;
            }
        }
        groups.entry((p, i)).or_default().push(acc);
    }
    groups
        .into_iter()
        .map(|((policy, leos), per_seed)| {
            let n = per_seed.len() as f64;
            let mean = |k: usize| per_seed.iter().map(|v| v[k]).sum::<f64>() / n;
            SummaryRow {
                policy,
                leos,
                seeds: per_seed.len(),
                rate_mbps: mean(0),
                load_per_cc: mean(1),
                active_ccs: mean(2),
                assigned_scs: mean(3),
                reward: mean(4),
                feasibility: mean(5),
            }
        })
        .collect()
}

fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record([
        "policy",
        "leos",
        "seed",
        "episode",
        "rate_mbps",
        "load_per_cc",
        "active_ccs",
        "assigned_scs",
        "reward",
        "feasibility",
        "status",
    ])
    .map_err(csv_error)?;
    for r in rows {
        w.write_record([
            r.policy.to_string(),
            r.leos.to_string(),
            r.seed.to_string(),
            r.episode.to_string(),
            fmt(r.rate_mbps),
            fmt(r.load_per_cc),
            fmt(r.active_ccs),
            fmt(r.assigned_scs),
            fmt(r.reward),
            fmt(r.feasibility),
            r.status.clone(),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record([
        "policy",
        "leos",
        "seeds",
        "rate_mbps",
        "load_per_cc",
        "active_ccs",
        "assigned_scs",
        "reward",
        "feasibility",
    ])
    .map_err(csv_error)?;
    for r in rows {
        w.write_record([
            r.policy.to_string(),
            r.leos.to_string(),
            r.seeds.to_string(),
            fmt(r.rate_mbps),
            fmt(r.load_per_cc),
            fmt(r.active_ccs),
            fmt(r.assigned_scs),
            fmt(r.reward),
            fmt(r.feasibility),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Wide table: one row per LEOS count, one column per policy.
pub fn write_figure(path: &Path, rows: &[SummaryRow], metric: Metric) -> Result<()> {
    let mut policies: Vec<PolicyKind> = rows.iter().map(|r| r.policy).collect();
    policies.sort();
    policies.dedup();
    let mut by_leos: BTreeMap<usize, BTreeMap<PolicyKind, f64>> = BTreeMap::new();
    for r in rows {
        by_leos.entry(r.leos).or_default().insert(r.policy, r.metric(metric));
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    let mut header = vec!["leos".to_string()];
    header.extend(policies.iter().map(|p| p.to_string()));
    w.write_record(&header).map_err(csv_error)?;
    for (leos, vals) in by_leos {
        let mut rec = vec![leos.to_string()];
        rec.extend(policies.iter().map(|p| vals.get(p).map_or(String::new(), |v| fmt(*v))));
        w.write_record(&rec).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes all six output files into `dir`.
pub fn write_outputs(dir: &Path, rows: &[MetricsRow]) -> Result<Vec<SummaryRow>> {
    std::fs::create_dir_all(dir)?;
    write_metrics(&dir.join("metrics.csv"), rows)?;
    let summary = summarize(rows);
    write_summary(&dir.join("summary.csv"), &summary)?;
    for (name, m) in [
        ("fig_rate.csv", Metric::Rate),
        ("fig_load.csv", Metric::Load),
        ("fig_cc.csv", Metric::Ccs),
        ("fig_sc.csv", Metric::Scs),
    ] {
        write_figure(&dir.join(name), &summary, m)?;
    }
    Ok(summary)
}
