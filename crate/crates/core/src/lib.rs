//! # gridse
//!
//! Linear PMU state estimation on transmission test systems, with two
//! distributed estimators side by side:
//!
//! - Gaussian belief propagation on the measurement factor graph, checked
//!   against a weighted-least-squares oracle;
//! - k-layer message-passing GNN inference over the bus graph, run either
//!   centrally or per bus on its k-hop neighborhood.
//!
//! Around them sit the pieces needed to run the experiments end to end:
//! Newton-Raphson power flow for ground truth, PMU placement and noisy
//! phasor synthesis, WRSS scoring, and a logical-time simulator of edge
//! agents exchanging messages under a configurable 5G delay model.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distnet;
pub mod error;
pub mod estimator;
pub mod gnn;
pub mod measurement;
pub mod pipeline;
pub mod power;
pub mod rng;

pub use error::{Error, ErrorClass, Result};
pub use power::{PowerSystem, StateVector};
