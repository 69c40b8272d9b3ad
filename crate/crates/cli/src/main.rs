use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use leo_gai::gai_lab::gflownet::{reward_distribution, total_variation};
use leo_gai::gai_lab::{gan_train, gflownet_train, Dag, GanConfig, GanPair, GflowConfig};
use leo_gai::harness::{self, RunConfig};
use leo_gai::ntn::{init_scenario, ScenarioState, SimConfig};
use leo_gai::policies::{round_robin_pcc, AgentHyper, PolicyKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// LEO carrier-aggregation and load-balancing experiments.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the policies over a LEOS-count sweep and write the CSV tables.
    Run(RunArgs),
    /// Train a flow network on the diamond DAG and compare with the reward oracle.
    GflownetDemo {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        rollouts: usize,
    },
    /// Train a 1-D GAN on N(3, 1) and report the generator's moments.
    GanDemo {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Advance a scenario under round-robin PCCs and write one CSV row per (step, LEOS).
    DumpScenario {
        /// Scenario TOML; keys not given keep their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Scenario TOML layered over the profile's scenario.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Agent hyperparameter TOML layered over the profile's values.
    #[arg(long)]
    hyper: Option<PathBuf>,
    /// Policy name, or `all`.
    #[arg(long, default_value = "all")]
    policy: String,
    /// Comma-separated LEOS counts.
    #[arg(long, value_delimiter = ',')]
    sweep: Option<Vec<usize>>,
    /// Number of seeds; runs seeds 0..N.
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// 400 UEs, I in {3, 9, 15, 21, 27}, 200 x 200 episodes and steps.
    #[arg(long)]
    full_paper_profile: bool,
    /// Reverse-chain noise scale `(tilde_beta / 2)^2` instead of `sqrt(tilde_beta)`.
    #[arg(long)]
    literal_eq8_scale: bool,
}

fn read(path: &PathBuf) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn build_run_config(args: &RunArgs) -> anyhow::Result<RunConfig> {
    let mut cfg = if args.full_paper_profile {
        RunConfig::full_paper_profile()
    } else {
        RunConfig::desk_profile()
    };
    if let Some(path) = &args.config {
        cfg.scenario = cfg.scenario.with_overrides(&read(path)?)?;
    }
    if let Some(path) = &args.hyper {
        let mut base = toml::Table::try_from(&cfg.hyper)?;
        let overlay: toml::Table = toml::from_str(&read(path)?)?;
        base.extend(overlay);
        cfg.hyper = base.try_into::<AgentHyper>()?;
    }
    if args.policy != "all" {
        cfg.policies = vec![args.policy.parse::<PolicyKind>()?];
    }
    if let Some(sweep) = &args.sweep {
        cfg.sweep = sweep.clone();
    }
    if let Some(n) = args.seeds {
        cfg.seeds = (0..n).collect();
    }
    if let Some(e) = args.episodes {
        cfg.hyper.episodes = e;
    }
    if let Some(s) = args.steps {
        cfg.hyper.steps_per_episode = s;
    }
    if args.literal_eq8_scale {
        cfg.hyper.literal_noise_scale = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(args: RunArgs) -> anyhow::Result<ExitCode> {
    let cfg = build_run_config(&args)?;
    let workers = harness::worker_count();
    log::info!(
        "{} policies x {} LEOS counts x {} seeds on {workers} workers",
        cfg.policies.len(),
        cfg.sweep.len(),
        cfg.seeds.len()
    );
    let rows = harness::run(&cfg, workers)?;
    let summary = harness::write_outputs(&args.out, &rows)?;
    for r in &summary {
        println!(
            "{:8} I={:2}  rate {:8.3} Mbit/s  load/CC {:.5}  CCs {:.2}  SCs {:.2}  reward {:7.3}  feasible {:.2}",
            r.policy, r.leos, r.rate_mbps, r.load_per_cc, r.active_ccs, r.assigned_scs, r.reward, r.feasibility
        );
    }
    println!("wrote {}", args.out.display());
    if harness::all_failed(&rows) {
        eprintln!("every run failed");
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn gflownet_demo(seed: u64, rollouts: usize) -> anyhow::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rewards = vec![0.0, 0.0, 0.0, 1.0, 3.0];
    let dag = Dag::diamond();
    let target = reward_distribution(&dag, &rewards);
    let (fnet, curve) = gflownet_train(dag, rewards, GflowConfig::default(), &mut rng)?;
    let freq = fnet.terminal_frequencies(rollouts, &mut rng)?;
    println!("final batch loss {:.3e}", curve.last().copied().unwrap_or(f64::NAN));
    println!("terminal  target  sampled");
    for s in fnet.dag.terminals() {
        println!("{s:>8}  {:.4}  {:.4}", target[s], freq[s]);
    }
    println!("total variation {:.4}", total_variation(&freq, &target));
    Ok(())
}

fn gan_demo(seed: u64) -> anyhow::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(3.0, 1.0)?;
    let data: Vec<Vec<f64>> = (0..10_000).map(|_| vec![normal.sample(&mut rng)]).collect();
    let pair = GanPair::new(1, 1, 16, &mut rng)?;
    let (pair, trace) = gan_train(&data, pair, GanConfig::default(), &mut rng)?;
    let samples: Vec<f64> = pair
        .draw_latent(10_000, &mut rng)
        .iter()
        .map(|z| pair.generate(z).map(|x| x[0]))
        .collect::<Result<_, _>>()?;
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / samples.len() as f64;
    println!("generator mean {mean:.3}, std {:.3} (target 3, 1)", var.sqrt());
    let n = trace.d_real.len();
    for k in [0, n / 4, n / 2, 3 * n / 4, n.saturating_sub(1)] {
        if let Some(d) = trace.d_real.get(k) {
            println!("iteration {k:>6}: D(real) {d:.3}");
        }
    }
    Ok(())
}

fn dump_scenario(config: Option<PathBuf>, steps: usize, out: PathBuf) -> anyhow::Result<()> {
    let cfg = match &config {
        Some(path) => SimConfig::default().with_overrides(&read(path)?)?,
        None => SimConfig::default(),
    };
    if steps == 0 {
        bail!("need at least one step");
    }
    let mut state = init_scenario(&cfg)?;
    let ccs: Vec<usize> = (0..cfg.carriers.count).collect();
    state.assign_pccs(&round_robin_pcc(cfg.leos.count, &ccs)?, &cfg)?;
    let mut w = csv::Writer::from_path(&out).with_context(|| format!("creating {}", out.display()))?;
    w.write_record(ScenarioState::dump_header(&cfg))?;
    for _ in 0..steps {
        state.write_dump_rows(&cfg, &mut w)?;
        state.advance(&cfg, cfg.leos.time_step_s)?;
    }
    w.flush()?;
    println!("wrote {} rows to {}", steps * cfg.leos.count, out.display());
    Ok(())
}

fn main() -> anyhow::Result<ExitCode> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::GflownetDemo { seed, rollouts } => gflownet_demo(seed, rollouts).map(|_| ExitCode::SUCCESS),
        Command::GanDemo { seed } => gan_demo(seed).map(|_| ExitCode::SUCCESS),
        Command::DumpScenario { config, steps, out } => dump_scenario(config, steps, out).map(|_| ExitCode::SUCCESS),
    }
}
