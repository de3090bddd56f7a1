//! Parametric hover + move energy model. Energy is accounted in whole
//! millijoules so battery bookkeeping is exact.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyParams {
    /// Watts.
    pub hover_power: f64,
    /// Joules per meter flown.
    pub move_energy_per_meter: f64,
    /// Initial battery charge in joules.
    pub battery: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self { hover_power: 100.0, move_energy_per_meter: 2.0, battery: 2.0e6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyModel {
    pub hover_power: f64,
    pub move_energy_per_meter: f64,
    battery_mj: u64,
}

impl EnergyModel {
    pub fn new(params: &EnergyParams) -> Self {
        Self {
            hover_power: params.hover_power.max(0.0),
            move_energy_per_meter: params.move_energy_per_meter.max(0.0),
            battery_mj: to_mj(params.battery),
        }
    }

    /// Remaining charge in joules.
    pub fn battery_remaining(&self) -> f64 {
        self.battery_mj as f64 / 1000.0
    }

    pub fn battery_mj(&self) -> u64 {
        self.battery_mj
    }

    /// Cost of flying `distance` meters and staying aloft for `duration` seconds.
    pub fn cost_mj(&self, distance: f64, duration: f64) -> u64 {
        to_mj(self.move_energy_per_meter * distance + self.hover_power * duration)
    }

    /// Deducts `mj` if the battery holds it; returns false (and leaves the
    /// battery untouched) otherwise.
    pub fn try_spend(&mut self, mj: u64) -> bool {
        match self.battery_mj.checked_sub(mj) {
            Some(rest) => {
                self.battery_mj = rest;
                true
            }
            None => false,
        }
    }
}

fn to_mj(joules: f64) -> u64 {
    (joules.max(0.0) * 1000.0).round() as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceKind {
    Move,
    Hover,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub kind: TraceKind,
    pub distance: f64,
    pub duration: f64,
    pub energy_mj: u64,
}

impl TraceEntry {
    pub fn new(model: &EnergyModel, distance: f64, duration: f64) -> Self {
        let kind = if distance > 0.0 { TraceKind::Move } else { TraceKind::Hover };
        Self { kind, distance, duration, energy_mj: model.cost_mj(distance, duration) }
    }
}

/// Total energy of a realized trace, in joules.
pub fn mission_energy(trace: &[TraceEntry]) -> f64 {
    mission_energy_mj(trace) as f64 / 1000.0
}

pub fn mission_energy_mj(trace: &[TraceEntry]) -> u64 {
    trace.iter().map(|e| e.energy_mj).sum()
}
