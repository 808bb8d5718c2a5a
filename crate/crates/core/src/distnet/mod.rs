//! Edge-agent partitioning and delay simulation.

pub mod delay;
pub mod partition;
pub mod report;
pub mod simulate;

pub use delay::{Component, DelayModel};
pub use partition::{partition_buses, AgentPartition};
pub use report::{check_deadline, CompletionRecord, CompletionReport, DeadlineSummary, Event, EventKind};
pub use simulate::{gather_rounds, gbp_batches, simulate_gbp_run, simulate_gnn_run, SimulationOutcome};
