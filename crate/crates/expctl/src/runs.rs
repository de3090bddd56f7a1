//! Seeded end-to-end runs behind each subcommand. Every run writes
//! `metrics.csv`, `summary.json`, `timing.json` and `config.toml` into the
//! output directory, plus mode-specific artifacts.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use vtwin_core::diffusion::{derive_seed, Agent, Checkpoint, Learner};
use vtwin_core::durp::{
    absorb_workload, mission_energy, mission_energy_mj, DurpPlanner, EnergyModel, GreedyHotspotMover, RandomWalkMover,
    StaticHoverMover, UavAgent, UavMover,
};
use vtwin_core::env::{Environment, VtMigrationEnv};
use vtwin_core::scenario::Scenario;
use vtwin_core::sim::{step_world, NodeId};

use crate::config::{BaselineKind, EvalPolicy, ExperimentConfig, RouteAlgo, RunMode};
use crate::metrics::{
    aggregate, config_hash, emit_metrics, to_json, write_file, MetricsFormat, MetricsRecord, RunSummary, Stat,
};
use crate::policies::{
    run_episode, AgentPolicy, EpisodeResult, GreedyNearestPolicy, MigrationPolicy, MyopicPolicy, NoMigrationPolicy,
    RandomPolicy,
};
use crate::ExpError;

/// Seed streams kept apart from the training episodes `derive_seed(seed, e)`.
const TEST_STREAM: u64 = 1 << 40;
const EVAL_STREAM: u64 = 1 << 41;
const POLICY_STREAM: u64 = 1 << 42;

type Row = BTreeMap<String, f64>;

fn row<const N: usize>(cells: [(&str, f64); N]) -> Row {
    cells.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Runs whatever `cfg.mode` selects.
pub fn run(cfg: &ExperimentConfig, checkpoint: Option<&Path>) -> Result<RunSummary, ExpError> {
    match cfg.mode {
        RunMode::Train => run_training(cfg),
        RunMode::Eval => run_eval(cfg, checkpoint),
        RunMode::Baseline => run_baseline(cfg),
        RunMode::Route => run_route_study(cfg),
        RunMode::Sweep => run_sweep(cfg, checkpoint),
    }
}

struct Output {
    dir: PathBuf,
    run_id: String,
    mode: RunMode,
    hash: String,
    started: Instant,
    records: Vec<MetricsRecord>,
    tables: BTreeMap<String, Vec<Row>>,
    artifacts: Vec<String>,
}

impl Output {
    fn new(cfg: &ExperimentConfig, mode: RunMode) -> Result<Self, ExpError> {
        let mut canon = cfg.clone();
        canon.mode = mode;
        let text = canon.to_toml_string()?;
        // the output location does not change results, so it stays out of the hash
        canon.out_dir = PathBuf::new();
        let hash = config_hash(&canon.to_toml_string()?);
        let dir = cfg.out_dir.clone();
        std::fs::create_dir_all(&dir).map_err(|e| ExpError::Io(format!("{}: {e}", dir.display())))?;
        let mut out = Self {
            run_id: format!("{}-{}", mode_name(mode), &hash[..12]),
            dir,
            mode,
            hash,
            started: Instant::now(),
            records: Vec::new(),
            tables: BTreeMap::new(),
            artifacts: Vec::new(),
        };
        out.write("config.toml", &text)?;
        Ok(out)
    }

    fn record(&mut self, seed: u64, step: u64, metric: &str, value: f64, units: &str) {
        self.records.push(MetricsRecord::new(&self.run_id, seed, step, metric, value, units));
    }

    fn write(&mut self, rel: &str, text: &str) -> Result<(), ExpError> {
        write_file(&self.dir.join(rel), text)?;
        self.artifacts.push(rel.to_string());
        Ok(())
    }

    fn finish(mut self) -> Result<RunSummary, ExpError> {
        emit_metrics(&self.records, MetricsFormat::Csv, &self.dir.join("metrics.csv"))?;
        self.artifacts.push("metrics.csv".into());
        self.artifacts.push("summary.json".into());
        self.artifacts.push("timing.json".into());
        let mut summary = RunSummary {
            run_id: self.run_id.clone(),
            mode: mode_name(self.mode).into(),
            config_hash: self.hash.clone(),
            seeds: aggregate(&self.records),
            tables: std::mem::take(&mut self.tables),
            artifacts: std::mem::take(&mut self.artifacts),
            wall_clock_seconds: 0.0,
        };
        write_file(&self.dir.join("summary.json"), &to_json(&summary)?)?;
        summary.wall_clock_seconds = self.started.elapsed().as_secs_f64();
        #[derive(Serialize)]
        struct Timing<'a> {
            run_id: &'a str,
            wall_clock_seconds: f64,
        }
        let timing = Timing { run_id: &summary.run_id, wall_clock_seconds: summary.wall_clock_seconds };
        write_file(&self.dir.join("timing.json"), &to_json(&timing)?)?;
        Ok(summary)
    }
}

fn mode_name(mode: RunMode) -> &'static str {
    match mode {
        RunMode::Train => "train",
        RunMode::Eval => "eval",
        RunMode::Baseline => "baseline",
        RunMode::Route => "route",
        RunMode::Sweep => "sweep",
    }
}

fn csv_text(header: &[&str], rows: &[Vec<String>]) -> Result<String, ExpError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).map_err(|e| ExpError::Metrics(e.to_string()))?;
    for r in rows {
        w.write_record(r).map_err(|e| ExpError::Metrics(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| ExpError::Metrics(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| ExpError::Metrics(e.to_string()))
}

fn mean(values: &[f64]) -> f64 {
    Stat::of(values).mean
}

/// Seed of evaluation episode `e` for base seed `seed`; shared by every
/// policy so comparisons see identical background traces.
pub fn eval_episode_seed(seed: u64, e: usize) -> u64 {
    derive_seed(seed, EVAL_STREAM + e as u64)
}

fn policy_seed(seed: u64, e: usize) -> u64 {
    derive_seed(seed, POLICY_STREAM + e as u64)
}

fn make_policy(
    kind: EvalPolicy,
    agent: Option<&Agent>,
    seed: u64,
    episode: usize,
) -> Result<Box<dyn MigrationPolicy>, ExpError> {
    Ok(match kind {
        EvalPolicy::Agent => {
            let agent = agent.ok_or_else(|| ExpError::Checkpoint("agent policy needs --checkpoint".into()))?;
            Box::new(AgentPolicy::new(agent.clone(), policy_seed(seed, episode), true))
        }
        EvalPolicy::Myopic => Box::new(MyopicPolicy),
        EvalPolicy::NoMigration => Box::new(NoMigrationPolicy),
        EvalPolicy::Random => Box::new(RandomPolicy::new(policy_seed(seed, episode))),
        EvalPolicy::GreedyNearest => Box::new(GreedyNearestPolicy),
    })
}

fn policy_name(kind: EvalPolicy) -> &'static str {
    match kind {
        EvalPolicy::Agent => "agent",
        EvalPolicy::Myopic => "myopic",
        EvalPolicy::NoMigration => "no-migration",
        EvalPolicy::Random => "random",
        EvalPolicy::GreedyNearest => "greedy-nearest",
    }
}

/// `episodes` evaluation rollouts of `kind` for one seed.
fn evaluate(
    env: &mut VtMigrationEnv,
    kind: EvalPolicy,
    agent: Option<&Agent>,
    seed: u64,
    episodes: usize,
) -> Result<Vec<EpisodeResult>, ExpError> {
    (0..episodes)
        .map(|e| {
            let mut policy = make_policy(kind, agent, seed, e)?;
            Ok(run_episode(env, policy.as_mut(), eval_episode_seed(seed, e))?)
        })
        .collect()
}

fn load_agent(path: Option<&Path>, env: &VtMigrationEnv) -> Result<Agent, ExpError> {
    let path = path.ok_or_else(|| ExpError::Checkpoint("agent policy needs --checkpoint".into()))?;
    let ck = Checkpoint::load(path).map_err(|e| ExpError::Checkpoint(format!("{}: {e}", path.display())))?;
    if ck.obs_dim != env.obs_dim() || ck.actions != env.action_count() {
        return Err(ExpError::Checkpoint(format!(
            "{} was trained for {} observations and {} actions; the scenario has {} and {}",
            path.display(),
            ck.obs_dim,
            ck.actions,
            env.obs_dim(),
            env.action_count()
        )));
    }
    Ok(ck.agent)
}

/// Trains one agent per seed. Writes a checkpoint per seed, the test reward
/// curve, and a final greedy-agent versus random comparison.
pub fn run_training(cfg: &ExperimentConfig) -> Result<RunSummary, ExpError> {
    let mut out = Output::new(cfg, RunMode::Train)?;
    let scenario = cfg.scenario()?;
    let episodes = cfg.trainer.episodes;
    let mut curve_rows = Vec::new();
    for &seed in &cfg.seeds {
        let mut env = scenario.build_env()?;
        let mut test_env = env.clone();
        let mut learner = Learner::new(env.obs_dim(), env.action_count(), &cfg.trainer, seed)
            .map_err(|e| ExpError::diffusion(format!("seed {seed}"), e))?;
        let mut tests: Vec<f64> = Vec::new();
        for e in 0..episodes {
            let log = learner
                .run_episode(&mut env, e, derive_seed(seed, e as u64))
                .map_err(|err| ExpError::diffusion(format!("seed {seed} episode {e}"), err))?;
            let step = e as u64;
            out.record(seed, step, "train_return", log.total_return, "");
            out.record(seed, step, "train_latency", log.mean_latency, "s");
            out.record(seed, step, "critic_loss", log.critic_loss, "");
            out.record(seed, step, "actor_objective", log.actor_objective, "");
            out.record(seed, step, "entropy", log.entropy, "nats");
            if (e + 1) % cfg.train.test_interval == 0 || e + 1 == episodes {
                let mut returns = Vec::new();
                for k in 0..cfg.train.test_episodes {
                    let mut policy =
                        AgentPolicy::new(learner.agent.clone(), derive_seed(seed, TEST_STREAM + k as u64), true);
                    let res = run_episode(&mut test_env, &mut policy, derive_seed(seed, TEST_STREAM + k as u64))?;
                    returns.push(res.total_return);
                }
                let test = mean(&returns);
                tests.push(test);
                let window = &tests[tests.len().saturating_sub(cfg.train.moving_average)..];
                let ma = mean(window);
                out.record(seed, step, "test_reward", test, "");
                out.record(seed, step, "test_reward_ma", ma, "");
                curve_rows.push(row([
                    ("seed", seed as f64),
                    ("episode", e as f64),
                    ("test_reward", test),
                    ("moving_average", ma),
                ]));
            }
        }
        if cfg.train.checkpoint && episodes > 0 {
            let rel = format!("checkpoints/seed-{seed}.json");
            let ck = Checkpoint::new(learner.agent.clone(), cfg.trainer.clone(), learner.updates());
            let text = ck.to_json().map_err(|e| ExpError::diffusion(format!("seed {seed} checkpoint"), e))?;
            out.write(&rel, &text)?;
        }
        if cfg.train.eval_episodes > 0 && episodes > 0 {
            let agent = &learner.agent;
            let trained = evaluate(&mut test_env, EvalPolicy::Agent, Some(agent), seed, cfg.train.eval_episodes)?;
            let random = evaluate(&mut test_env, EvalPolicy::Random, None, seed, cfg.train.eval_episodes)?;
            for (e, (a, r)) in trained.iter().zip(&random).enumerate() {
                out.record(seed, e as u64, "eval_latency", a.mean_latency, "s");
                out.record(seed, e as u64, "eval_return", a.total_return, "");
                out.record(seed, e as u64, "random_eval_latency", r.mean_latency, "s");
                out.record(seed, e as u64, "random_eval_return", r.total_return, "");
            }
            let a = mean(&trained.iter().map(|r| r.mean_latency).collect::<Vec<_>>());
            let r = mean(&random.iter().map(|r| r.mean_latency).collect::<Vec<_>>());
            out.tables.entry("final_eval".into()).or_default().push(row([
                ("seed", seed as f64),
                ("agent_latency", a),
                ("random_latency", r),
                ("improvement", 1.0 - a / r),
            ]));
        }
    }
    let text = csv_text(
        &["seed", "episode", "test_reward", "moving_average"],
        &curve_rows
            .iter()
            .map(|r| {
                vec![
                    (r["seed"] as u64).to_string(),
                    (r["episode"] as u64).to_string(),
                    crate::metrics::format_value(r["test_reward"]),
                    crate::metrics::format_value(r["moving_average"]),
                ]
            })
            .collect::<Vec<_>>(),
    )?;
    out.write("reward_curve.csv", &text)?;
    out.tables.insert("reward_curve".into(), curve_rows);
    out.finish()
}

struct SweepPoint {
    compute: f64,
    assist: bool,
    per_seed: Vec<(u64, Vec<EpisodeResult>)>,
}

fn sweep(
    cfg: &ExperimentConfig,
    scenario: &Scenario,
    kind: EvalPolicy,
    agent: Option<&Agent>,
) -> Result<Vec<SweepPoint>, ExpError> {
    let mut points = Vec::new();
    for &compute in &cfg.eval.compute_sweep {
        for &assist in &cfg.eval.assist {
            let mut s = scenario.clone().with_rsu_compute(compute);
            s.mdp.uav_assist = assist;
            let mut env = s.build_env()?;
            let per_seed = cfg
                .seeds
                .iter()
                .map(|&seed| Ok((seed, evaluate(&mut env, kind, agent, seed, cfg.eval.episodes)?)))
                .collect::<Result<Vec<_>, ExpError>>()?;
            points.push(SweepPoint { compute, assist, per_seed });
        }
    }
    Ok(points)
}

fn record_sweep(out: &mut Output, prefix: &str, points: &[SweepPoint]) {
    let mut summary = Vec::new();
    let mut by_seed = Vec::new();
    for p in points {
        let tag = format!("{prefix}latency_c{}_{}", p.compute / 1e9, if p.assist { "assist" } else { "noassist" });
        let mut all = Vec::new();
        for (seed, results) in &p.per_seed {
            for (e, r) in results.iter().enumerate() {
                out.record(*seed, e as u64, &tag, r.mean_latency, "s");
                all.push(r.mean_latency);
            }
            by_seed.push(row([
                ("seed", *seed as f64),
                ("compute", p.compute),
                ("assist", p.assist as u8 as f64),
                ("mean_latency", mean(&results.iter().map(|r| r.mean_latency).collect::<Vec<_>>())),
            ]));
        }
        let st = Stat::of(&all);
        summary.push(row([
            ("compute", p.compute),
            ("assist", p.assist as u8 as f64),
            ("mean_latency", st.mean),
            ("stddev_latency", st.stddev),
            ("episodes", st.count as f64),
        ]));
    }
    out.tables.insert(format!("{prefix}latency_vs_compute"), summary);
    out.tables.insert(format!("{prefix}latency_by_seed"), by_seed);
}

/// Frozen-policy rollouts over the RSU compute sweep, with and without UAV
/// assistance.
pub fn run_eval(cfg: &ExperimentConfig, checkpoint: Option<&Path>) -> Result<RunSummary, ExpError> {
    let mut out = Output::new(cfg, RunMode::Eval)?;
    let scenario = cfg.scenario()?;
    let agent = match cfg.eval.policy {
        EvalPolicy::Agent => Some(load_agent(checkpoint, &scenario.build_env()?)?),
        _ => None,
    };
    let points = sweep(cfg, &scenario, cfg.eval.policy, agent.as_ref())?;
    record_sweep(&mut out, "", &points);
    out.finish()
}

/// The latency sweep for every fixed policy, and for the agent when a
/// checkpoint is given.
pub fn run_sweep(cfg: &ExperimentConfig, checkpoint: Option<&Path>) -> Result<RunSummary, ExpError> {
    let mut out = Output::new(cfg, RunMode::Sweep)?;
    let scenario = cfg.scenario()?;
    let agent = checkpoint.map(|p| load_agent(Some(p), &scenario.build_env()?)).transpose()?;
    let mut kinds = vec![EvalPolicy::Myopic, EvalPolicy::GreedyNearest, EvalPolicy::Random, EvalPolicy::NoMigration];
    if agent.is_some() {
        kinds.insert(0, EvalPolicy::Agent);
    }
    for kind in kinds {
        let points = sweep(cfg, &scenario, kind, agent.as_ref())?;
        record_sweep(&mut out, &format!("{}/", policy_name(kind)), &points);
    }
    out.finish()
}

/// One fixed comparison policy over `baseline.episodes` episodes per seed,
/// with the same metric names as the training evaluation.
pub fn run_baseline(cfg: &ExperimentConfig) -> Result<RunSummary, ExpError> {
    let mut out = Output::new(cfg, RunMode::Baseline)?;
    let mut scenario = cfg.scenario()?;
    let kind = match cfg.baseline.kind {
        BaselineKind::Random => EvalPolicy::Random,
        BaselineKind::GreedyNearest => EvalPolicy::GreedyNearest,
        BaselineKind::Myopic => EvalPolicy::Myopic,
        BaselineKind::NoMigration => EvalPolicy::NoMigration,
        BaselineKind::NoUav => {
            scenario.mdp.uav_assist = false;
            EvalPolicy::Myopic
        }
    };
    let uavs_active = scenario.mdp.uav_assist && scenario.uav.count > 0;
    let mut env = scenario.build_env()?;
    let mut rows = Vec::new();
    for &seed in &cfg.seeds {
        let results = evaluate(&mut env, kind, None, seed, cfg.baseline.episodes)?;
        for (e, r) in results.iter().enumerate() {
            out.record(seed, e as u64, "eval_latency", r.mean_latency, "s");
            out.record(seed, e as u64, "eval_return", r.total_return, "");
            if uavs_active {
                out.record(seed, e as u64, "uav_energy", r.uav_energy, "J");
            }
        }
        rows.push(row([
            ("seed", seed as f64),
            ("mean_latency", mean(&results.iter().map(|r| r.mean_latency).collect::<Vec<_>>())),
            ("mean_return", mean(&results.iter().map(|r| r.total_return).collect::<Vec<_>>())),
        ]));
    }
    out.tables.insert("baseline".into(), rows);
    out.finish()
}

/// Per-slot route trace row for one UAV.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub uav: NodeId,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub goal: Option<NodeId>,
    pub path_hops: usize,
    pub battery_mj: u64,
    pub rsu_workloads: Vec<f64>,
}

/// Outcome of one routing run.
#[derive(Debug, Clone, PartialEq)]
pub struct RouteRun {
    /// Mean RSU workload over all slots and RSUs, in cycles.
    pub mean_workload: f64,
    /// Mean over slots of the population stddev across RSUs, in cycles.
    pub workload_stddev: f64,
    /// Joules spent by the whole fleet.
    pub mission_energy: f64,
    /// Initial minus final battery equals the summed trace, per UAV.
    pub energy_identity: bool,
    pub trace: Vec<TraceRow>,
}

fn mover_for(algo: RouteAlgo, scenario: &Scenario, seed: u64, k: usize) -> Box<dyn UavMover> {
    match algo {
        RouteAlgo::Durp => Box::new(DurpPlanner::new(scenario.uav.heuristic, scenario.uav.hysteresis)),
        RouteAlgo::RandomWalk => Box::new(RandomWalkMover::new(derive_seed(seed, k as u64))),
        RouteAlgo::StaticHover => Box::new(StaticHoverMover),
        RouteAlgo::GreedyHotspot => Box::new(GreedyHotspotMover { soft_threshold: scenario.uav.assist.soft_threshold }),
    }
}

/// Flies the scenario's UAV fleet with `algo` for `steps` slots over the
/// background workload process seeded by `seed`. The vehicle keeps its whole
/// task on the serving RSU. Each slot the UAVs move one hop, absorb excess
/// workload, and the world advances.
pub fn route_run(scenario: &Scenario, algo: RouteAlgo, seed: u64, steps: usize) -> Result<RouteRun, ExpError> {
    let world = scenario.world_config();
    let mut state = scenario.initial_state()?;
    state.rng_seed = seed;
    state.t_max = steps + 1;
    let graph = scenario.routing_graph();
    let assist = scenario.assist_params();
    let mut fleet: Vec<(UavAgent, Box<dyn UavMover>)> = scenario
        .uav_starts()
        .into_iter()
        .enumerate()
        .map(|(k, (id, v))| {
            (UavAgent::new(id, v, EnergyModel::new(&scenario.uav.energy)), mover_for(algo, scenario, seed, k))
        })
        .collect();
    for (agent, _) in &fleet {
        let i = state.node_index(agent.node).expect("UAV node");
        state.nodes[i].pos = agent.position(&graph);
    }
    let task_cycles = (scenario.task.size_bits * state.vehicle.cycles_per_bit).round();
    let mut trace = Vec::new();
    let (mut sum_mean, mut sum_std) = (0.0, 0.0);
    for step in 1..=steps {
        for (agent, mover) in fleet.iter_mut() {
            let out = agent.advance(mover.as_mut(), &graph, &state.nodes, scenario.slot_seconds)?;
            let i = state.node_index(agent.node).expect("UAV node");
            state.nodes[i].pos = out.position;
            if !agent.grounded {
                absorb_workload(agent.node, &mut state.nodes, &assist)?;
            }
            trace.push(TraceRow {
                step,
                uav: agent.node,
                x: out.position.x,
                y: out.position.y,
                z: out.position.z,
                goal: out.goal.map(|g| graph.node_id(g)),
                path_hops: out.path_hops,
                battery_mj: agent.energy.battery_mj(),
                rsu_workloads: Vec::new(),
            });
        }
        let loads: Vec<f64> = state.rsus().map(|n| n.workload).collect();
        let st = Stat::of(&loads);
        sum_mean += st.mean;
        sum_std += st.stddev;
        for r in trace.iter_mut().rev().take(fleet.len()) {
            r.rsu_workloads = loads.clone();
        }
        state = step_world(&world, &state, &[(state.serving, task_cycles)])?;
    }
    let mut energy = 0.0;
    let mut identity = true;
    for (agent, _) in &fleet {
        energy += mission_energy(&agent.trace);
        identity &= agent.initial_battery_mj() - agent.energy.battery_mj() == mission_energy_mj(&agent.trace);
    }
    let n = steps.max(1) as f64;
    Ok(RouteRun {
        mean_workload: sum_mean / n,
        workload_stddev: sum_std / n,
        mission_energy: energy,
        energy_identity: identity,
        trace,
    })
}

fn trace_csv(trace: &[TraceRow], rsus: usize) -> Result<String, ExpError> {
    let mut header: Vec<String> =
        ["step", "uav", "x", "y", "z", "goal", "path_hops", "battery_mj"].iter().map(|s| s.to_string()).collect();
    header.extend((0..rsus).map(|i| format!("workload_{i}")));
    let fmt = crate::metrics::format_value;
    let rows: Vec<Vec<String>> = trace
        .iter()
        .map(|r| {
            let mut v = vec![
                r.step.to_string(),
                r.uav.0.to_string(),
                fmt(r.x),
                fmt(r.y),
                fmt(r.z),
                r.goal.map(|g| g.0.to_string()).unwrap_or_default(),
                r.path_hops.to_string(),
                r.battery_mj.to_string(),
            ];
            v.extend(r.rsu_workloads.iter().map(|&w| fmt(w)));
            v
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    csv_text(&header, &rows)
}

/// DURP against the UAV baselines on identical seeded workload processes.
pub fn run_route_study(cfg: &ExperimentConfig) -> Result<RunSummary, ExpError> {
    let mut out = Output::new(cfg, RunMode::Route)?;
    let scenario = cfg.scenario()?;
    if scenario.uav.count == 0 {
        return Err(ExpError::Config("route study needs at least one UAV".into()));
    }
    let steps = cfg.route.steps.unwrap_or(scenario.t_max);
    let mut tables: BTreeMap<&str, Vec<Row>> = BTreeMap::new();
    let mut totals: BTreeMap<RouteAlgo, Vec<[f64; 3]>> = BTreeMap::new();
    for &seed in &cfg.seeds {
        let mut rows: [Row; 3] = Default::default();
        for r in rows.iter_mut() {
            r.insert("seed".into(), seed as f64);
        }
        for &algo in &cfg.route.algorithms {
            let res = route_run(&scenario, algo, seed, steps)?;
            let name = algo.name();
            let s = steps as u64;
            out.record(seed, s, &format!("{name}/mean_workload"), res.mean_workload, "cycles");
            out.record(seed, s, &format!("{name}/workload_stddev"), res.workload_stddev, "cycles");
            out.record(seed, s, &format!("{name}/mission_energy"), res.mission_energy, "J");
            out.record(seed, s, &format!("{name}/energy_identity"), res.energy_identity as u8 as f64, "");
            rows[0].insert(name.into(), res.mean_workload);
            rows[1].insert(name.into(), res.workload_stddev);
            rows[2].insert(name.into(), res.mission_energy);
            totals.entry(algo).or_default().push([res.mean_workload, res.workload_stddev, res.mission_energy]);
            if cfg.route.traces {
                let text = trace_csv(&res.trace, scenario.rsu_count())?;
                out.write(&format!("traces/{name}/seed-{seed}.csv"), &text)?;
            }
        }
        let [a, b, c] = rows;
        tables.entry("mean_workload").or_default().push(a);
        tables.entry("workload_stddev").or_default().push(b);
        tables.entry("mission_energy").or_default().push(c);
    }
    for (k, v) in tables {
        out.tables.insert(k.into(), v);
    }
    for (algo, v) in totals {
        let col = |i: usize| mean(&v.iter().map(|x| x[i]).collect::<Vec<_>>());
        let r = row([("mean_workload", col(0)), ("workload_stddev", col(1)), ("mission_energy", col(2))]);
        out.tables.insert(format!("route_summary/{}", algo.name()), vec![r]);
    }
    out.finish()
}
