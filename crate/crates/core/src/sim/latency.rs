//! Per-slot service latency of a vehicle-twin task split between the serving
//! node and a pre-migration node.

use serde::{Deserialize, Serialize};

use super::{downlink_rate, EdgeNode, SimError, VehicleState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    /// Total task size in bits.
    pub task_size: f64,
    /// Size of the result sent back to the vehicle, bits.
    pub result_size: f64,
    /// Portion of the task moved ahead of time to the pre-migration node, bits.
    pub premigrated: f64,
}

impl TaskSpec {
    /// Task with `alpha * task_size` bits pre-migrated.
    pub fn with_ratio(task_size: f64, result_size: f64, alpha: f64) -> Result<Self, SimError> {
        let task = Self { task_size, result_size, premigrated: alpha * task_size };
        task.validate()?;
        Ok(task)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.task_size > 0.0 && self.task_size.is_finite()) {
            return Err(SimError::InvalidParameter("task_size must be > 0".into()));
        }
        if !(self.premigrated >= 0.0 && self.premigrated < self.task_size) {
            return Err(SimError::InvalidParameter(format!(
                "pre-migrated bits {} must lie in [0, {})",
                self.premigrated, self.task_size
            )));
        }
        if !(self.result_size > 0.0 && self.result_size.is_finite()) {
            return Err(SimError::InvalidParameter("result_size must be > 0".into()));
        }
        Ok(())
    }

    /// Bits left on the serving node.
    pub fn local_bits(&self) -> f64 {
        self.task_size - self.premigrated
    }
}

/// Every component of one slot's service latency, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LatencyBreakdown {
    pub uplink: f64,
    pub proc_serving: f64,
    pub proc_premig: f64,
    pub migrate: f64,
    pub proc_total: f64,
    pub downlink: f64,
    pub total: f64,
}

impl LatencyBreakdown {
    /// Checks the composition identities exactly.
    pub fn is_consistent(&self) -> bool {
        let fields = [
            self.uplink,
            self.proc_serving,
            self.proc_premig,
            self.migrate,
            self.proc_total,
            self.downlink,
            self.total,
        ];
        fields.iter().all(|v| *v >= 0.0)
            && self.proc_total == self.proc_serving.max(self.proc_premig + self.migrate)
            && self.total == self.uplink + self.proc_total + self.downlink
    }
}

/// Result transfer time over the serving link.
///
/// A zero-rate link yields [`SimError::NoLink`] rather than an infinite latency.
pub fn downlink_latency(task: &TaskSpec, node: &EdgeNode, veh: &VehicleState) -> Result<f64, SimError> {
    if task.result_size == 0.0 {
        return Ok(0.0);
    }
    let rate = downlink_rate(node, veh)?;
    if !(rate > 0.0) {
        return Err(SimError::NoLink(node.id));
    }
    Ok(task.result_size / rate)
}

/// Backhaul transfer time of the pre-migrated portion.
pub fn migration_latency(task: &TaskSpec, src: &EdgeNode) -> f64 {
    if task.premigrated == 0.0 {
        return 0.0;
    }
    task.premigrated / src.inter_node_bandwidth
}

/// Queueing plus compute time for `bits` of new work on `node`.
pub fn processing_latency(node: &EdgeNode, bits: f64, veh: &VehicleState) -> f64 {
    (node.workload + bits * veh.cycles_per_bit) / node.compute
}

/// Full latency for one slot. `premig` may equal `serving` only when nothing is
/// pre-migrated.
pub fn total_latency(
    task: &TaskSpec,
    serving: &EdgeNode,
    premig: &EdgeNode,
    veh: &VehicleState,
    uplink: f64,
) -> Result<LatencyBreakdown, SimError> {
    if serving.id == premig.id && task.premigrated != 0.0 {
        return Err(SimError::InvalidSplit(serving.id));
    }
    if !(uplink >= 0.0) {
        return Err(SimError::InvalidParameter(format!("uplink latency must be >= 0, got {uplink}")));
    }
    let proc_serving = processing_latency(serving, task.local_bits(), veh);
    let proc_premig = processing_latency(premig, task.premigrated, veh);
    let migrate = migration_latency(task, serving);
    let proc_total = proc_serving.max(proc_premig + migrate);
    let downlink = downlink_latency(task, serving, veh)?;
    Ok(LatencyBreakdown {
        uplink,
        proc_serving,
        proc_premig,
        migrate,
        proc_total,
        downlink,
        total: uplink + proc_total + downlink,
    })
}
