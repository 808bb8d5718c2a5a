//! End-to-end experiment runs driven by a TOML configuration.

pub mod config;
pub mod run;

pub use config::{PartitionConfig, PlacementRule, PlacementSource, RunConfig, IDENTITY_MODEL};
pub use run::{
    emit_boxplot_data, load_case, load_gnn_model, resolve_placement, run_pipeline, synthesize, write_all, Dataset,
    Manifest, PipelineOutput, Sample, Seeds, Stage, StageError, Synthesis, POWER_FLOW_TOLERANCE,
};
