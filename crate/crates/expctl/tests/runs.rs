use std::path::Path;

use vtwin_core::env::Environment;
use vtwin_core::scenario::Scenario;
use vtwin_expctl::config::{BaselineKind, EvalPolicy, ExperimentConfig, RouteAlgo};
use vtwin_expctl::metrics::{parse_csv, MetricsRecord};
use vtwin_expctl::policies::{run_episode, GreedyNearestPolicy, MigrationPolicy, RandomPolicy};
use vtwin_expctl::runs::route_run;
use vtwin_expctl::{run_baseline, run_eval, run_training};

fn config(dir: &Path) -> ExperimentConfig {
    ExperimentConfig { out_dir: dir.to_path_buf(), ..ExperimentConfig::default() }
}

fn metrics(dir: &Path) -> Vec<MetricsRecord> {
    parse_csv(&std::fs::read_to_string(dir.join("metrics.csv")).unwrap()).unwrap()
}

#[test]
fn no_uav_baseline_records_no_uav_energy() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.baseline.episodes = 1;
    cfg.baseline.kind = BaselineKind::NoUav;
    run_baseline(&cfg).unwrap();
    let recs = metrics(dir.path());
    assert!(recs.iter().any(|r| r.metric == "eval_latency"));
    assert!(!recs.iter().any(|r| r.metric == "uav_energy"));

    cfg.baseline.kind = BaselineKind::Myopic;
    run_baseline(&cfg).unwrap();
    let energy: Vec<f64> = metrics(dir.path()).iter().filter(|r| r.metric == "uav_energy").map(|r| r.value).collect();
    assert_eq!(energy.len(), 1);
    assert!(energy[0] > 0.0);
}

#[test]
fn random_policy_is_uniform_over_valid_actions() {
    let mut env = Scenario::default().build_env().unwrap();
    let obs = env.reset(3).unwrap();
    let mask = env.action_mask();
    let valid = mask.iter().filter(|&&m| m).count();
    let mut counts = vec![0usize; mask.len()];
    let mut policy = RandomPolicy::new(11);
    let draws = 200 * valid;
    for _ in 0..draws {
        counts[policy.choose(&env, &obs).unwrap()] += 1;
    }
    assert!(counts.iter().zip(&mask).all(|(c, m)| *m || *c == 0));
    let expected = draws as f64 / valid as f64;
    let chi2: f64 =
        counts.iter().zip(&mask).filter(|(_, m)| **m).map(|(c, _)| (*c as f64 - expected).powi(2) / expected).sum();
    let df = (valid - 1) as f64;
    // roughly the 99.9th percentile of chi-square with df degrees of freedom
    let critical = df + 4.5 * (2.0 * df).sqrt();
    assert!(chi2 < critical, "chi2 {chi2} with {df} df");
}

#[test]
fn greedy_nearest_on_a_single_rsu_never_premigrates() {
    let mut s = Scenario::toy();
    s.grid.cols = 1;
    s.background.hotspot_nodes = vec![0];
    let mut env = s.build_env().unwrap();
    let res = run_episode(&mut env, &mut GreedyNearestPolicy, 5).unwrap();
    assert_eq!(res.steps, s.t_max);
    assert!(res.actions.iter().all(|&a| a == 0));
}

#[test]
fn greedy_nearest_picks_the_closest_target() {
    let mut env = Scenario::default().build_env().unwrap();
    let obs = env.reset(1).unwrap();
    let a = GreedyNearestPolicy.choose(&env, &obs).unwrap();
    let state = env.state();
    let action = env.decode(a).unwrap();
    if action.alpha_bin > 0 {
        let veh = state.vehicle.pos;
        let d = state.node(action.target).unwrap().pos.distance_to(&veh);
        for t in env.eligible_targets() {
            assert!(state.node(t).unwrap().pos.distance_to(&veh) >= d);
        }
    }
}

#[test]
fn one_point_sweep_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.scenario = "builtin:toy2".into();
    cfg.eval.policy = EvalPolicy::NoMigration;
    cfg.eval.compute_sweep = vec![60e9];
    cfg.eval.assist = vec![false];
    let summary = run_eval(&cfg, None).unwrap();
    let rows = &summary.tables["latency_vs_compute"];
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["compute"], 60e9);
    assert_eq!(rows[0]["episodes"], 1.0);
    assert!(metrics(dir.path()).iter().all(|r| r.metric == "latency_c60_noassist"));
}

#[test]
fn static_hover_stays_put_and_pays_only_hover() {
    let s = Scenario::default();
    let run = route_run(&s, RouteAlgo::StaticHover, 4, 30).unwrap();
    assert!(run.energy_identity);
    assert_eq!(run.trace.len(), 30 * s.uav.count);
    for uav in run.trace.iter().map(|r| r.uav).collect::<std::collections::BTreeSet<_>>() {
        let rows: Vec<_> = run.trace.iter().filter(|r| r.uav == uav).collect();
        assert!(rows.iter().all(|r| (r.x, r.y, r.z) == (rows[0].x, rows[0].y, rows[0].z)));
        assert!(rows.windows(2).all(|w| w[1].battery_mj <= w[0].battery_mj));
    }
    let walk = route_run(&s, RouteAlgo::RandomWalk, 4, 30).unwrap();
    assert!(run.mission_energy <= walk.mission_energy);
}

#[test]
fn zero_episodes_writes_empty_curves_and_no_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.scenario = "builtin:toy2".into();
    cfg.trainer.episodes = 0;
    let summary = run_training(&cfg).unwrap();
    assert!(summary.tables["reward_curve"].is_empty());
    assert_eq!(std::fs::read_to_string(dir.path().join("reward_curve.csv")).unwrap().lines().count(), 1);
    assert!(!dir.path().join("checkpoints").exists());
    assert!(metrics(dir.path()).is_empty());
}

#[test]
fn run_id_ignores_output_directory() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut cfg = config(a.path());
    cfg.scenario = "builtin:toy2".into();
    cfg.baseline.episodes = 1;
    let sa = run_baseline(&cfg).unwrap();
    cfg.out_dir = b.path().to_path_buf();
    let sb = run_baseline(&cfg).unwrap();
    assert_eq!(sa.run_id, sb.run_id);
    assert!(sa.run_id.starts_with("baseline-"));
    cfg.seeds = vec![1];
    assert_ne!(run_baseline(&cfg).unwrap().run_id, sa.run_id);
}
