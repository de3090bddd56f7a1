//! Simulation and learning core for UAV-assisted vehicle-twin pre-migration.
//!
//! * [`sim`]: edge-network world model and latency formulas.
//! * [`env`]: the episodic decision process over that world.
//! * [`diffusion`]: diffusion-policy actor with double critics.
//! * [`durp`]: dynamic A* routing of UAV edge servers.
//! * [`scenario`]: the scenario file format.

pub mod diffusion;
pub mod durp;
pub mod env;
pub mod par;
pub mod scenario;
pub mod sim;
