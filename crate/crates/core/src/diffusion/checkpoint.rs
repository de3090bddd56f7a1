use std::path::Path;

use serde::{Deserialize, Serialize};

use super::trainer::{Agent, TrainerConfig};
use super::DiffusionError;

pub const CHECKPOINT_FORMAT: &str = "vtwin-diffusion-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Self-describing snapshot of a trained agent. Floats are written with
/// shortest round-trip formatting, so save then load is bit-exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: TrainerConfig,
    pub obs_dim: usize,
    pub actions: usize,
    pub updates: u64,
    pub agent: Agent,
}

impl Checkpoint {
    pub fn new(agent: Agent, config: TrainerConfig, updates: u64) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            obs_dim: agent.obs_dim(),
            actions: agent.actions(),
            config,
            updates,
            agent,
        }
    }

    pub fn to_json(&self) -> Result<String, DiffusionError> {
        if !self.agent.is_finite() {
            return Err(DiffusionError::Checkpoint("refusing to save non-finite parameters".into()));
        }
        serde_json::to_string(self).map_err(|e| DiffusionError::Checkpoint(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, DiffusionError> {
        let ck: Self = serde_json::from_str(text).map_err(|e| DiffusionError::Checkpoint(e.to_string()))?;
        ck.check()?;
        Ok(ck)
    }

    fn check(&self) -> Result<(), DiffusionError> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(DiffusionError::Checkpoint(format!("unknown format {:?}", self.format)));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(DiffusionError::Checkpoint(format!(
                "unsupported version {} (expected {CHECKPOINT_VERSION})",
                self.version
            )));
        }
        if self.obs_dim != self.agent.obs_dim() || self.actions != self.agent.actions() {
            return Err(DiffusionError::Checkpoint("header dimensions disagree with parameters".into()));
        }
        self.agent.validate()
    }

    pub fn save(&self, path: &Path) -> Result<(), DiffusionError> {
        let text = self.to_json()?;
        std::fs::write(path, text).map_err(|e| DiffusionError::Checkpoint(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, DiffusionError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| DiffusionError::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let cfg = TrainerConfig { hidden: vec![7, 5], ..TrainerConfig::default() };
        let agent = Agent::new(4, 3, &cfg, 11).unwrap();
        let ck = Checkpoint::new(agent, cfg, 17);
        let text = ck.to_json().unwrap();
        let back = Checkpoint::from_json(&text).unwrap();
        assert_eq!(back, ck);
        let a: Vec<u64> = ck.agent.actor.net.params().iter().map(|v| v.to_bits()).collect();
        let b: Vec<u64> = back.agent.actor.net.params().iter().map(|v| v.to_bits()).collect();
        assert_eq!(a, b);
        assert_eq!(back.to_json().unwrap(), text);
    }

    #[test]
    fn rejects_wrong_version() {
        let cfg = TrainerConfig { hidden: vec![4], ..TrainerConfig::default() };
        let mut ck = Checkpoint::new(Agent::new(2, 2, &cfg, 1).unwrap(), cfg, 0);
        ck.version = 99;
        let text = serde_json::to_string(&ck).unwrap();
        assert!(Checkpoint::from_json(&text).is_err());
    }
}
