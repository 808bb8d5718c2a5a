//! Network model, admittances and AC power flow.

pub mod admittance;
pub mod case;
pub mod powerflow;
pub mod scenario;
pub mod state;

pub use admittance::{AdmittanceModel, BranchAdmittance};
pub use case::{Branch, Bus, BusKind, CaseDocument, PowerSystem, BUNDLED_CASES};
pub use powerflow::{solve_power_flow, PowerFlowSolution};
pub use scenario::{apply_load_scenario, LoadScenario};
pub use state::StateVector;
