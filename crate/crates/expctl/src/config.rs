//! Experiment configuration: TOML on disk, defaults for every key, and
//! environment-variable overrides.
//!
//! Overrides use the `VTWIN_` prefix with `__` between key segments, so
//! `VTWIN_TRAINER__BATCH_SIZE=64` sets `trainer.batch_size`. Values are parsed
//! as TOML (`64`, `1e-3`, `true`, `[1, 2]`) and fall back to plain strings.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};
use vtwin_core::diffusion::TrainerConfig;
use vtwin_core::durp::{EnergyParams, HeuristicWeights};
use vtwin_core::scenario::Scenario;

use crate::ExpError;

pub const ENV_PREFIX: &str = "VTWIN_";
pub const ENV_SEPARATOR: &str = "__";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    #[default]
    Train,
    Eval,
    Baseline,
    Route,
    Sweep,
}

/// Fixed migration policies used for comparison runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    /// Uniform over the valid actions.
    #[default]
    Random,
    /// Nearest eligible node with the best ratio for it.
    GreedyNearest,
    /// The exhaustive one-step policy with UAV assistance switched off.
    NoUav,
    /// Exhaustive one-step latency minimization.
    Myopic,
    /// Never pre-migrate.
    NoMigration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EvalPolicy {
    /// The trained agent from `--checkpoint`.
    #[default]
    Agent,
    Myopic,
    NoMigration,
    Random,
    GreedyNearest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RouteAlgo {
    Durp,
    RandomWalk,
    StaticHover,
    GreedyHotspot,
}

impl RouteAlgo {
    pub fn name(self) -> &'static str {
        match self {
            RouteAlgo::Durp => "durp",
            RouteAlgo::RandomWalk => "random-walk",
            RouteAlgo::StaticHover => "static-hover",
            RouteAlgo::GreedyHotspot => "greedy-hotspot",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    /// Greedy test episodes run every `test_interval` training episodes.
    pub test_interval: usize,
    pub test_episodes: usize,
    /// Window of the moving average in the reward curve.
    pub moving_average: usize,
    /// Final comparison episodes against the random baseline.
    pub eval_episodes: usize,
    pub checkpoint: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self { test_interval: 10, test_episodes: 1, moving_average: 10, eval_episodes: 20, checkpoint: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub policy: EvalPolicy,
    /// RSU compute values in cycles/s.
    pub compute_sweep: Vec<f64>,
    pub assist: Vec<bool>,
    pub episodes: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            policy: EvalPolicy::Agent,
            compute_sweep: vec![40e9, 50e9, 60e9, 70e9, 80e9],
            assist: vec![true, false],
            episodes: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineSection {
    pub kind: BaselineKind,
    pub episodes: usize,
}

impl Default for BaselineSection {
    fn default() -> Self {
        Self { kind: BaselineKind::Random, episodes: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RouteSection {
    /// Mission length in slots; the scenario horizon when unset.
    pub steps: Option<usize>,
    pub algorithms: Vec<RouteAlgo>,
    /// Write per-step trace files.
    pub traces: bool,
}

impl Default for RouteSection {
    fn default() -> Self {
        Self {
            steps: None,
            algorithms: vec![RouteAlgo::Durp, RouteAlgo::RandomWalk, RouteAlgo::StaticHover, RouteAlgo::GreedyHotspot],
            traces: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub mode: RunMode,
    /// `builtin:grid16`, `builtin:toy2`, or a scenario file path (relative
    /// paths resolve against the config file's directory).
    pub scenario: String,
    pub trainer: TrainerConfig,
    /// Replaces the scenario's UAV heuristic weights when set.
    pub heuristic: Option<HeuristicWeights>,
    /// Replaces the scenario's UAV energy constants when set.
    pub energy: Option<EnergyParams>,
    /// Route with the verbatim heuristic: remaining charge and unsigned weights.
    pub strict_paper: bool,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub train: TrainSection,
    pub eval: EvalSection,
    pub baseline: BaselineSection,
    pub route: RouteSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: RunMode::Train,
            scenario: "builtin:grid16".into(),
            trainer: TrainerConfig::published(),
            heuristic: None,
            energy: None,
            strict_paper: false,
            seeds: vec![0],
            out_dir: PathBuf::from("runs"),
            train: TrainSection::default(),
            eval: EvalSection::default(),
            baseline: BaselineSection::default(),
            route: RouteSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExpError> {
        if self.seeds.is_empty() {
            return Err(ExpError::Config("seeds must be nonempty".into()));
        }
        self.trainer.validate().map_err(|e| ExpError::Config(format!("trainer: {e}")))?;
        if self.eval.compute_sweep.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
            return Err(ExpError::Config("eval.compute_sweep entries must be > 0".into()));
        }
        if self.train.moving_average == 0 || self.train.test_interval == 0 {
            return Err(ExpError::Config("train.moving_average and train.test_interval must be >= 1".into()));
        }
        self.scenario()?;
        Ok(())
    }

    /// The referenced scenario with this config's heuristic and energy overrides applied.
    pub fn scenario(&self) -> Result<Scenario, ExpError> {
        let mut s = match self.scenario.as_str() {
            "builtin:grid16" => Scenario::default(),
            "builtin:toy2" => Scenario::toy(),
            other if other.starts_with("builtin:") => {
                return Err(ExpError::Config(format!("unknown builtin scenario {other:?}")))
            }
            path => Scenario::load(Path::new(path)).map_err(|e| ExpError::Config(format!("scenario: {e}")))?,
        };
        if let Some(h) = self.heuristic {
            s.uav.heuristic = h;
        }
        if let Some(e) = self.energy {
            s.uav.energy = e;
        }
        if self.strict_paper {
            s.uav.heuristic.strict_paper = true;
        }
        s.validate().map_err(|e| ExpError::Config(format!("scenario: {e}")))?;
        Ok(s)
    }

    pub fn to_toml_string(&self) -> Result<String, ExpError> {
        toml::to_string(self).map_err(|e| ExpError::Config(e.to_string()))
    }
}

/// Reads `path`, applies `VTWIN_*` overrides from the process environment, and validates.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, ExpError> {
    load_config_with_env(path, std::env::vars())
}

pub fn load_config_with_env<I>(path: &Path, env: I) -> Result<ExperimentConfig, ExpError>
where
    I: IntoIterator<Item = (String, String)>,
{
    let text = std::fs::read_to_string(path).map_err(|e| ExpError::Io(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, base, env)
}

/// Parses config text; relative scenario paths resolve against `base_dir`.
pub fn parse_config<I>(text: &str, base_dir: &Path, env: I) -> Result<ExperimentConfig, ExpError>
where
    I: IntoIterator<Item = (String, String)>,
{
    let user: Table = text.parse().map_err(|e: toml::de::Error| ExpError::Config(e.to_string()))?;
    let mut table = Table::try_from(ExperimentConfig::default()).map_err(|e| ExpError::Config(e.to_string()))?;
    merge(&mut table, user);
    apply_env_overrides(&mut table, env)?;
    let mut cfg: ExperimentConfig = from_table(table)?;
    if !cfg.scenario.starts_with("builtin:") {
        let p = Path::new(&cfg.scenario);
        if p.is_relative() {
            cfg.scenario = base_dir.join(p).to_string_lossy().into_owned();
        }
        if !Path::new(&cfg.scenario).is_file() {
            return Err(ExpError::Config(format!("scenario file {} does not exist", cfg.scenario)));
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Recursively overlays `over` onto `base`; non-table values replace.
fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn from_table(table: Table) -> Result<ExperimentConfig, ExpError> {
    let de = Value::Table(table);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ExpError::Config(format!("at `{path}`: {}", e.into_inner()))
    })
}

/// Folds `VTWIN_A__B=v` variables into `table` as `a.b = v`.
pub fn apply_env_overrides<I>(table: &mut Table, env: I) -> Result<(), ExpError>
where
    I: IntoIterator<Item = (String, String)>,
{
    let mut vars: Vec<(String, String)> = env.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
    vars.sort();
    for (key, raw) in vars {
        let path: Vec<String> = key[ENV_PREFIX.len()..].split(ENV_SEPARATOR).map(|s| s.to_ascii_lowercase()).collect();
        if path.iter().any(|s| s.is_empty()) {
            return Err(ExpError::Config(format!("malformed override variable {key}")));
        }
        let value = parse_value(&raw);
        let mut t = &mut *table;
        for seg in &path[..path.len() - 1] {
            let entry = t.entry(seg.clone()).or_insert_with(|| Value::Table(Table::new()));
            t = entry.as_table_mut().ok_or_else(|| ExpError::Config(format!("{key}: `{seg}` is not a table")))?;
        }
        t.insert(path[path.len() - 1].clone(), value);
    }
    Ok(())
}

fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig, ExpError> {
        parse_config(text, Path::new("."), Vec::new())
    }

    #[test]
    fn minimal_config_gets_published_defaults() {
        let cfg = parse("").unwrap();
        assert_eq!(cfg.trainer.actor_lr, 1e-4);
        assert_eq!(cfg.trainer.critic_lr, 1e-4);
        assert_eq!(cfg.trainer.buffer_capacity, 1_000_000);
        assert_eq!(cfg.trainer.batch_size, 512);
        assert_eq!(cfg.trainer.diffusion_steps, 100);
        let s = cfg.scenario().unwrap();
        assert_eq!(s.rsu_count(), 16);
        assert_eq!(s.t_max, 1000);
    }

    #[test]
    fn partial_trainer_table_keeps_other_defaults() {
        let cfg = parse("[trainer]\nbatch_size = 32\n").unwrap();
        assert_eq!(cfg.trainer.batch_size, 32);
        assert_eq!(cfg.trainer.diffusion_steps, 100);
        assert_eq!(cfg.trainer.actor_lr, 1e-4);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = parse("[trainer]\nlearningrate = 0.1\n").unwrap_err().to_string();
        assert!(err.contains("learningrate"), "{err}");
        assert!(err.contains("trainer"), "{err}");
        let err = parse("learningrate = 0.1\n").unwrap_err().to_string();
        assert!(err.contains("learningrate"), "{err}");
    }

    #[test]
    fn round_trip_is_identity() {
        let cfg = parse("seeds = [1, 2]\nscenario = \"builtin:toy2\"\n[route]\nsteps = 10\n").unwrap();
        let again = parse(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn env_overrides_apply() {
        let env = vec![
            ("VTWIN_TRAINER__BATCH_SIZE".to_string(), "64".to_string()),
            ("VTWIN_SEEDS".to_string(), "[3, 4]".to_string()),
            ("VTWIN_SCENARIO".to_string(), "builtin:toy2".to_string()),
            ("OTHER".to_string(), "x".to_string()),
        ];
        let cfg = parse_config("[trainer]\nbatch_size = 8\n", Path::new("."), env).unwrap();
        assert_eq!(cfg.trainer.batch_size, 64);
        assert_eq!(cfg.seeds, vec![3, 4]);
        assert_eq!(cfg.scenario, "builtin:toy2");
        let bad = vec![("VTWIN_NOPE".to_string(), "1".to_string())];
        assert!(parse_config("", Path::new("."), bad).is_err());
    }

    #[test]
    fn missing_scenario_file_is_rejected() {
        assert!(parse("scenario = \"does/not/exist.toml\"\n").is_err());
        assert!(parse("scenario = \"builtin:nope\"\n").is_err());
        assert!(parse("seeds = []\n").is_err());
    }
}
