use std::collections::BTreeMap;

use leo_gai::harness::{all_failed, run, run_cell, summarize, write_outputs, MetricsRow, RunConfig};
use leo_gai::policies::{AgentHyper, PolicyKind};

fn tiny(policies: Vec<PolicyKind>, sweep: Vec<usize>, seeds: Vec<u64>, episodes: usize, steps: usize) -> RunConfig {
    let mut cfg = RunConfig::desk_profile();
    cfg.scenario.area.ue_count = 40;
    cfg.policies = policies;
    cfg.sweep = sweep;
    cfg.seeds = seeds;
    cfg.hyper = AgentHyper {
        episodes,
        steps_per_episode: steps,
        actor_hidden: vec![8],
        critic_hidden: vec![8],
        batch: 8,
        ..cfg.hyper
    };
    cfg
}

fn row(policy: PolicyKind, seed: u64, episode: usize, v: f64) -> MetricsRow {
    MetricsRow {
        policy,
        leos: 3,
        seed,
        episode,
        rate_mbps: v,
        load_per_cc: v,
        active_ccs: v,
        assigned_scs: v,
        reward: v,
        feasibility: v / 10.0,
        status: "ok".into(),
    }
}

#[test]
fn one_step_gives_one_row_per_seed() {
    let cfg = tiny(vec![PolicyKind::Ujcalb], vec![3], vec![0, 1, 2], 1, 1);
    let rows = run(&cfg, 1).unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![0, 1, 2]);
    assert!(rows.iter().all(|r| r.status == "ok" && r.leos == 3));
}

#[test]
fn row_count_is_the_product_of_the_grid() {
    let cfg = tiny(vec![PolicyKind::Ujcalb, PolicyKind::Djcalb], vec![3, 9], vec![0, 1], 3, 4);
    let rows = run(&cfg, 2).unwrap();
    assert_eq!(rows.len(), 2 * 2 * 2 * 3);
    let keys: Vec<_> = rows.iter().map(|r| (r.policy, r.leos, r.seed, r.episode)).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    sorted.dedup();
    assert_eq!(keys, sorted);
}

#[test]
fn repeated_runs_write_identical_files() {
    let cfg = tiny(PolicyKind::ALL.to_vec(), vec![3], vec![4], 2, 10);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    write_outputs(a.path(), &run(&cfg, 1).unwrap()).unwrap();
    write_outputs(b.path(), &run(&cfg, 3).unwrap()).unwrap();
    for name in ["metrics.csv", "summary.csv", "fig_rate.csv", "fig_load.csv", "fig_cc.csv", "fig_sc.csv"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name} differs");
    }
}

#[test]
fn logged_metrics_stay_in_range() {
    let cfg = tiny(PolicyKind::ALL.to_vec(), vec![9], vec![0], 2, 10);
    for p in PolicyKind::ALL {
        for r in run_cell(&cfg, p, 9, 0).unwrap() {
            assert!((0.0..=1.0).contains(&r.feasibility));
            assert!(r.active_ccs >= 1.0 && r.active_ccs <= 5.0);
            assert!(r.assigned_scs >= 0.0 && r.assigned_scs <= 6.0);
            assert!(r.rate_mbps >= 0.0 && r.load_per_cc >= 0.0 && r.reward.is_finite());
        }
    }
}

#[test]
fn summary_of_one_row_is_that_row() {
    let rows = vec![row(PolicyKind::Ijcalb, 0, 0, 2.5)];
    let s = summarize(&rows);
    assert_eq!(s.len(), 1);
    assert_eq!(s[0].seeds, 1);
    assert_eq!(s[0].rate_mbps, 2.5);
    assert_eq!(s[0].feasibility, 0.25);
}

#[test]
fn summary_averages_over_seeds() {
    let rows = vec![row(PolicyKind::Djcalb, 0, 0, 2.0), row(PolicyKind::Djcalb, 1, 0, 4.0)];
    let s = summarize(&rows);
    assert_eq!(s[0].seeds, 2);
    assert_eq!(s[0].reward, 3.0);
}

#[test]
fn summary_uses_the_final_tenth_of_episodes() {
    // 20 episodes: the last 2 count.
    let rows: Vec<MetricsRow> = (0..20).map(|e| row(PolicyKind::Ujcalb, 0, e, e as f64)).collect();
    assert_eq!(summarize(&rows)[0].active_ccs, 18.5);
}

#[test]
fn failed_cells_are_left_out() {
    let mut rows = vec![row(PolicyKind::Ujcalb, 0, 0, 1.0), row(PolicyKind::Ujcalb, 1, 0, 9.0)];
    rows[1].status = "failed".into();
    let s = summarize(&rows);
    assert_eq!((s[0].seeds, s[0].rate_mbps), (1, 1.0));
    assert!(!all_failed(&rows));
    rows[0].status = "failed".into();
    assert!(all_failed(&rows));
    assert!(summarize(&rows).is_empty());
}

#[test]
fn empty_table_still_has_headers() {
    let dir = tempfile::tempdir().unwrap();
    write_outputs(dir.path(), &[]).unwrap();
    let text = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("policy,leos,seeds,"));
    assert_eq!(std::fs::read_to_string(dir.path().join("fig_cc.csv")).unwrap().trim(), "leos");
}

/// Rebuilds summary.csv from metrics.csv using only the written text.
#[test]
fn summary_matches_recomputation_from_the_metrics_file() {
    let cfg = tiny(vec![PolicyKind::Ujcalb, PolicyKind::Djcalb], vec![3, 9], vec![0, 1], 12, 5);
    let dir = tempfile::tempdir().unwrap();
    write_outputs(dir.path(), &run(&cfg, 1).unwrap()).unwrap();

    let mut metrics = csv::Reader::from_path(dir.path().join("metrics.csv")).unwrap();
    let header = metrics.headers().unwrap().clone();
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let value_cols: Vec<usize> = ["rate_mbps", "load_per_cc", "active_ccs", "assigned_scs", "reward", "feasibility"]
        .iter()
        .map(|c| col(c))
        .collect();
    let mut cells: BTreeMap<(String, String, String), Vec<(usize, Vec<f64>)>> = BTreeMap::new();
    for rec in metrics.records() {
        let rec = rec.unwrap();
        let key = (rec[col("policy")].to_string(), rec[col("leos")].to_string(), rec[col("seed")].to_string());
        let vals = value_cols.iter().map(|c| rec[*c].parse().unwrap()).collect();
        cells.entry(key).or_default().push((rec[col("episode")].parse().unwrap(), vals));
    }
    let mut expected: BTreeMap<(String, String), Vec<Vec<f64>>> = BTreeMap::new();
    for ((p, i, _), mut eps) in cells {
        eps.sort_by_key(|e| e.0);
        // 12 episodes: the final 10% rounds up to 2.
        let tail = &eps[eps.len() - 2..];
        let means = (0..6).map(|k| tail.iter().map(|e| e.1[k]).sum::<f64>() / 2.0).collect();
        expected.entry((p, i)).or_default().push(means);
    }

    let mut summary = csv::Reader::from_path(dir.path().join("summary.csv")).unwrap();
    let mut seen = 0;
    for rec in summary.records() {
        let rec = rec.unwrap();
        let seeds = &expected[&(rec[0].to_string(), rec[1].to_string())];
        assert_eq!(rec[2].parse::<usize>().unwrap(), seeds.len());
        for k in 0..6 {
            let want = seeds.iter().map(|s| s[k]).sum::<f64>() / seeds.len() as f64;
            let got: f64 = rec[3 + k].parse().unwrap();
            assert!((got - want).abs() < 2e-6, "column {k}: {got} vs {want}");
        }
        seen += 1;
    }
    assert_eq!(seen, 4);
}

#[test]
fn config_round_trips_through_toml() {
    let cfg = RunConfig::desk_profile();
    let text = toml::to_string(&cfg).unwrap();
    let back: RunConfig = toml::from_str(&text).unwrap();
    assert_eq!(back, cfg);
    let full = RunConfig::full_paper_profile();
    assert_eq!(full.sweep, vec![3, 9, 15, 21, 27]);
    assert_eq!((full.hyper.episodes, full.hyper.steps_per_episode), (200, 200));
    assert_eq!(full.scenario.area.ue_count, 400);
    assert_eq!(full.hyper.actor_lr, 1e-4);
    assert_eq!(full.hyper.actor_hidden, vec![32, 32]);
}
