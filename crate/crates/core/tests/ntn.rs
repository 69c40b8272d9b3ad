use leo_gai::ntn::{
    backhaul_capacity, init_scenario, path_gain, shannon_rate, sinr, GainTable, ScenarioState, SimConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config(leos: usize, ues: usize, seed: u64) -> SimConfig {
    let mut cfg = SimConfig::default();
    cfg.leos.count = leos;
    cfg.area.ue_count = ues;
    cfg.rng.seed = seed;
    cfg
}

fn positions(state: &ScenarioState, cfg: &SimConfig) -> Vec<[f64; 2]> {
    (0..state.leos.len()).map(|i| state.leos_position(i, cfg)).collect()
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

#[test]
fn one_period_returns_to_start() {
    let cfg = config(7, 10, 1);
    let mut state = init_scenario(&cfg).unwrap();
    let start = positions(&state, &cfg);
    state.advance(&cfg, cfg.orbit_period_s()).unwrap();
    for (a, b) in start.iter().zip(positions(&state, &cfg)) {
        assert!(dist(*a, b) < 1e-9, "moved {} m", dist(*a, b));
    }
}

#[test]
fn half_period_is_diametrically_opposite() {
    let cfg = config(5, 10, 2);
    let mut state = init_scenario(&cfg).unwrap();
    let start = positions(&state, &cfg);
    state.advance(&cfg, cfg.orbit_period_s() / 2.0).unwrap();
    for (i, b) in positions(&state, &cfg).into_iter().enumerate() {
        let c = state.leos[i].track_center;
        let mirrored = [2.0 * c[0] - start[i][0], 2.0 * c[1] - start[i][1]];
        assert!(dist(mirrored, b) < 1e-9);
        assert!((dist(start[i], b) - 2.0 * cfg.leos.track_radius_m).abs() < 1e-9);
    }
}

#[test]
fn advances_compose() {
    let cfg = config(4, 10, 3);
    let mut twice = init_scenario(&cfg).unwrap();
    let mut once = twice.clone();
    twice.advance(&cfg, 1.7).unwrap();
    twice.advance(&cfg, 1.7).unwrap();
    once.advance(&cfg, 3.4).unwrap();
    for (a, b) in positions(&twice, &cfg).into_iter().zip(positions(&once, &cfg)) {
        assert!(dist(a, b) < 1e-9);
    }
    assert!((twice.clock_s - once.clock_s).abs() < 1e-12);
}

#[test]
fn non_positive_step_rejected() {
    let cfg = config(2, 5, 0);
    let mut state = init_scenario(&cfg).unwrap();
    assert!(state.advance(&cfg, 0.0).is_err());
    assert!(state.advance(&cfg, -1.0).is_err());
}

#[test]
fn ues_fill_the_square() {
    let cfg = config(3, 400, 5);
    let state = init_scenario(&cfg).unwrap();
    assert_eq!(state.ue_positions.len(), 400);
    let side = cfg.area.side_m;
    assert!(state.ue_positions.iter().all(|p| (0.0..side).contains(&p[0]) && (0.0..side).contains(&p[1])));
    let mean_x = state.ue_positions.iter().map(|p| p[0]).sum::<f64>() / 400.0;
    // Uniform mean 30 km, standard error about 0.87 km.
    assert!((mean_x - side / 2.0).abs() < 4_000.0);
}

#[test]
fn coverage_matches_brute_force_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..20 {
        let mut cfg = config(rng.random_range(1..12), rng.random_range(1..200), trial);
        cfg.leos.coverage_radius_m = rng.random_range(0.0..25_000.0);
        let mut state = init_scenario(&cfg).unwrap();
        state.advance(&cfg, rng.random_range(0.1..100.0)).unwrap();
        let cover = state.coverage(&cfg);
        for i in 0..cfg.leos.count {
            let p = state.leos_position(i, &cfg);
            let mut expected = Vec::new();
            for (u, q) in state.ue_positions.iter().enumerate() {
                if dist(p, *q) <= cfg.leos.coverage_radius_m {
                    expected.push(u);
                }
            }
            assert_eq!(cover[i], expected);
        }
    }
}

#[test]
fn coverage_extremes() {
    let mut cfg = config(4, 50, 6);
    cfg.leos.coverage_radius_m = cfg.area.side_m * 2f64.sqrt();
    let state = init_scenario(&cfg).unwrap();
    let all: Vec<usize> = (0..50).collect();
    assert!(state.coverage(&cfg).iter().all(|c| *c == all));

    cfg.leos.coverage_radius_m = 0.0;
    let state = init_scenario(&cfg).unwrap();
    assert!(state.coverage(&cfg).iter().all(|c| c.is_empty()));
}

#[test]
fn leos_directly_overhead_covers_the_ue() {
    let mut cfg = config(1, 3, 0);
    cfg.leos.coverage_radius_m = 1.0;
    let mut state = init_scenario(&cfg).unwrap();
    state.ue_positions[1] = state.leos_position(0, &cfg);
    assert_eq!(state.coverage(&cfg)[0], vec![1]);
}

#[test]
fn free_space_gain_scaling_and_pinned_value() {
    let g = path_gain(500e3, 26e9);
    assert!((g / 3.367712223161805e-18 - 1.0).abs() < 1e-12);
    assert!((path_gain(1e6, 26e9) * 4.0 / g - 1.0).abs() < 1e-12);
    assert!((path_gain(500e3, 52e9) * 4.0 / g - 1.0).abs() < 1e-12);
    assert!(path_gain(600e3, 26e9) < g);
}

#[test]
fn shannon_examples() {
    assert_eq!(shannon_rate(400e6, 0.0), 0.0);
    assert_eq!(shannon_rate(400e6, 1.0), 400e6);
}

/// Two LEOS on the same CC, each serving the UE right below it.
#[test]
fn two_leos_sinr_matches_hand_expansion() {
    let mut cfg = config(2, 2, 0);
    cfg.carriers.count = 1;
    let mut state = init_scenario(&cfg).unwrap();
    let r = cfg.leos.track_radius_m;
    state.leos[0].track_center = [10_000.0 - r, 20_000.0];
    state.leos[1].track_center = [40_000.0 - r, 20_000.0];
    for l in &mut state.leos {
        l.phase = 0.0;
    }
    state.ue_positions = vec![[10_000.0, 20_000.0], [40_000.0, 20_000.0]];
    let gains = GainTable::compute(&state, &cfg);
    let load = vec![vec![0.4], vec![0.4]];

    let h = cfg.leos.altitude_m;
    let near = (299_792_458.0 / (4.0 * std::f64::consts::PI * h * 26e9)).powi(2);
    let far_d = (h * h + 30_000.0f64 * 30_000.0).sqrt();
    let far = (299_792_458.0 / (4.0 * std::f64::consts::PI * far_d * 26e9)).powi(2);
    let p = 10.0 * 10f64.powf(cfg.leos.antenna_gain_db / 10.0);
    let n = 10f64.powf(-174.0 / 10.0) * 1e-3 * 400e6;
    let expected = p * near / (0.4 * p * far + n);

    for u in 0..2 {
        let got = sinr(&state, &gains, &cfg, &load, u, u, 0);
        assert!((got / expected - 1.0).abs() < 1e-12, "{got} vs {expected}");
    }
    let quiet = sinr(&state, &gains, &cfg, &[vec![0.0], vec![0.0]], 0, 0, 0);
    assert!((quiet / (p * near / n) - 1.0).abs() < 1e-12);
    let louder = sinr(&state, &gains, &cfg, &[vec![0.4], vec![0.9]], 0, 0, 0);
    assert!(louder < expected);
}

#[test]
fn inactive_neighbours_do_not_interfere() {
    let cfg = config(2, 20, 8);
    let state = init_scenario(&cfg).unwrap();
    let gains = GainTable::compute(&state, &cfg);
    // LEOS 1 holds PCC 1, so CC 0 at LEOS 0 sees no co-channel neighbour.
    let loaded = vec![vec![0.5; 5], vec![0.5; 5]];
    let idle = vec![vec![0.0; 5], vec![0.0; 5]];
    assert_eq!(
        sinr(&state, &gains, &cfg, &loaded, 3, 0, 0),
        sinr(&state, &gains, &cfg, &idle, 3, 0, 0)
    );
}

#[test]
fn gains_lie_in_unit_interval() {
    let cfg = config(5, 60, 9);
    let state = init_scenario(&cfg).unwrap();
    let gains = GainTable::compute(&state, &cfg);
    for i in 0..5 {
        for u in 0..60 {
            for c in 0..5 {
                let g = gains.access(i, u, c);
                assert!(g > 0.0 && g <= 1.0);
            }
        }
        for k in 0..6 {
            assert!(gains.backhaul(i, k) > 0.0 && gains.backhaul(i, k) <= 1.0);
        }
    }
}

#[test]
fn empty_sc_set_has_no_capacity() {
    let cfg = config(2, 5, 0);
    let state = init_scenario(&cfg).unwrap();
    let gains = GainTable::compute(&state, &cfg);
    assert_eq!(backhaul_capacity(0, 0, &gains, &cfg), 0.0);
    let one = backhaul_capacity(0, 0b1, &gains, &cfg);
    assert!(one > 0.0);
    assert!(backhaul_capacity(0, 0b11, &gains, &cfg) > one);
}

#[test]
fn trajectories_are_deterministic() {
    let cfg = config(6, 100, 42);
    let run = || {
        let mut s = init_scenario(&cfg).unwrap();
        for _ in 0..25 {
            s.advance(&cfg, cfg.leos.time_step_s).unwrap();
        }
        s
    };
    let (a, b) = (run(), run());
    assert_eq!(a.ue_positions, b.ue_positions);
    assert_eq!(a.leos, b.leos);
    let other = init_scenario(&config(6, 100, 43)).unwrap();
    assert_ne!(a.ue_positions, other.ue_positions);
}

#[test]
fn sc_assignment_stays_exclusive() {
    let cfg = config(3, 10, 0);
    let mut state = init_scenario(&cfg).unwrap();
    state.apply_configuration(0, 0b0011, 0b000011, &cfg).unwrap();
    state.apply_configuration(1, 0, 0b001100, &cfg).unwrap();
    assert!(state.apply_configuration(2, 0, 0b000110, &cfg).is_err());
    assert_eq!(state.leos[2].scs, 0);
    state.apply_configuration(2, 0, 0b110000, &cfg).unwrap();
    let mut seen = 0u32;
    for l in &state.leos {
        assert_eq!(seen & l.scs, 0);
        seen |= l.scs;
        assert!(l.is_active(l.pcc));
    }
    // Reconfiguring keeps the PCC on even with an empty SCC mask.
    state.apply_configuration(0, 0, 0, &cfg).unwrap();
    assert_eq!(state.leos[0].active_cc_count(), 1);
    assert!(state.leos[0].is_active(state.leos[0].pcc));
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scenario.toml");
    std::fs::write(&path, "[leos]\ncount = 9\ncoverage_radius_m = 12000.0\n[rng]\nseed = 5\n").unwrap();
    let cfg = SimConfig::load(&path).unwrap();
    assert_eq!(cfg.leos.count, 9);
    assert_eq!(cfg.leos.coverage_radius_m, 12_000.0);
    assert_eq!(cfg.area.ue_count, 400);
    assert!(SimConfig::load(&dir.path().join("missing.toml")).is_err());
}

#[test]
fn dump_has_one_row_per_leos_and_step() {
    let cfg = config(3, 10, 0);
    let mut state = init_scenario(&cfg).unwrap();
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(ScenarioState::dump_header(&cfg)).unwrap();
    for _ in 0..4 {
        state.write_dump_rows(&cfg, &mut out).unwrap();
        state.advance(&cfg, 1.0).unwrap();
    }
    let text = String::from_utf8(out.into_inner().unwrap()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1 + 4 * 3);
    assert_eq!(lines[0], "t_s,leos,x_m,y_m,pcc,active_ccs,scs,rho_0,rho_1,rho_2,rho_3,rho_4");
    assert!(lines[1].starts_with("0,0,"));
}
