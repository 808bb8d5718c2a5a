//! Linear state estimation: WLS oracle, Gaussian belief propagation, WRSS scoring.

pub mod factor_graph;
pub mod gbp;
pub mod linear;
pub mod wls;
pub mod wrss;

pub use factor_graph::{Edge, Factor, FactorGraph};
pub use gbp::{gbp_run, FlatPolicy, GaussianMessage, GbpConfig, GbpEngine, GbpRun};
pub use linear::{build_linear_model, compute_wrss, normalized_wrss, LinearModel};
pub use wls::wls_solve;
pub use wrss::{median, quantile_sorted, quantiles_to_csv, Method, QuantileRow, WrssReport, WrssRow};
