use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{PlacementRule, PlacementSource, RunConfig, IDENTITY_MODEL};
use crate::distnet::{
    check_deadline, partition_buses, simulate_gbp_run, simulate_gnn_run, AgentPartition, CompletionReport,
    DeadlineSummary,
};
use crate::error::{Error, ErrorClass, Result};
use crate::estimator::{
    build_linear_model, compute_wrss, normalized_wrss, quantiles_to_csv, wls_solve, FactorGraph, Method, QuantileRow,
    WrssReport,
};
use crate::gnn::{build_node_features, load_model_file, FeatureRow, GnnModel, FEATURE_DIM, FORMAT_VERSION};
use crate::measurement::{greedy_placement, synthesize_measurements, validate_observability, MeasurementSet, PmuPlacement, Provenance};
use crate::power::{apply_load_scenario, solve_power_flow, AdmittanceModel, PowerSystem, StateVector};

/// Mismatch tolerance of the ground-truth power flows.
pub const POWER_FLOW_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Case,
    Placement,
    PowerFlow,
    Synthesis,
    Estimation,
    Simulation,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Case => "case",
            Stage::Placement => "placement",
            Stage::PowerFlow => "power flow",
            Stage::Synthesis => "synthesis",
            Stage::Estimation => "estimation",
            Stage::Simulation => "simulation",
            Stage::Output => "output",
        })
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {source}")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

impl StageError {
    pub fn class(&self) -> ErrorClass {
        self.source.class()
    }
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError> {
        self.map_err(|source| StageError { stage, source })
    }
}

pub fn load_case(case: &str) -> Result<PowerSystem> {
    if crate::power::BUNDLED_CASES.contains(&case) {
        return PowerSystem::bundled(case);
    }
    let text = std::fs::read_to_string(case).map_err(|e| Error::io(case, e))?;
    PowerSystem::load_case(&text)
}

pub fn resolve_placement(source: &PlacementSource, system: &PowerSystem) -> Result<PmuPlacement> {
    let placement = match source {
        PlacementSource::Rule(PlacementRule::Bundled) => {
            let name = system
                .name
                .as_deref()
                .ok_or_else(|| Error::Config("case has no name; use greedy or explicit placement".into()))?;
            PmuPlacement::bundled(name, system)?
        }
        PlacementSource::Rule(PlacementRule::Greedy) => greedy_placement(system),
        PlacementSource::Buses(ids) => PmuPlacement::from_original_ids(system, ids, Provenance::User)?,
    };
    if !validate_observability(&placement, system) {
        let h = crate::measurement::placement::design_matrix(&placement, system, &AdmittanceModel::build(system));
        let rank = crate::measurement::placement::numerical_rank(&h);
        return Err(Error::Unobservable {
            deficient: 2 * system.bus_count() - rank,
            columns: 2 * system.bus_count(),
        });
    }
    Ok(placement)
}

pub fn load_gnn_model(path: &str) -> Result<GnnModel> {
    if path == IDENTITY_MODEL {
        Ok(GnnModel::identity())
    } else {
        load_model_file(path)
    }
}

/// Ground truth and noisy readings for every instance of the scenario.
#[derive(Debug, Clone)]
pub struct Synthesis {
    pub system: PowerSystem,
    pub placement: PmuPlacement,
    /// Exact power-flow state at τ = k + 1.
    pub states: Vec<StateVector>,
    pub measurements: MeasurementSet,
}

pub fn synthesize(cfg: &RunConfig) -> std::result::Result<Synthesis, StageError> {
    cfg.validate().at(Stage::Config)?;
    let system = load_case(&cfg.case).at(Stage::Case)?;
    let placement = resolve_placement(&cfg.placement, &system).at(Stage::Placement)?;
    let states = (1..=cfg.scenario.length)
        .map(|tau| {
            let loaded = apply_load_scenario(&system, tau, &cfg.scenario)?;
            Ok(solve_power_flow(&loaded, POWER_FLOW_TOLERANCE, crate::power::powerflow::DEFAULT_MAX_ITERATIONS)?.state)
        })
        .collect::<Result<Vec<_>>>()
        .at(Stage::PowerFlow)?;
    let measurements =
        synthesize_measurements(&system, &states, &placement, cfg.noise_variance, cfg.seed).at(Stage::Synthesis)?;
    Ok(Synthesis {
        system,
        placement,
        states,
        measurements,
    })
}

/// One supervised sample per instance: masked features and the exact state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub tau: usize,
    pub features: Vec<FeatureRow>,
    /// `[re_0 .. re_{n-1}, im_0 .. im_{n-1}]`
    pub state: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub system: Option<String>,
    /// Case bus id of each internal bus index.
    pub bus_ids: Vec<i64>,
    /// Sorted neighbor lists by internal index.
    pub adjacency: Vec<Vec<usize>>,
    pub feature_dim: usize,
    pub noise_variance: f64,
    pub noise_seed: u64,
    pub scenario_seed: u64,
    pub samples: Vec<Sample>,
}

impl Synthesis {
    pub fn dataset(&self, cfg: &RunConfig) -> Dataset {
        Dataset {
            system: self.system.name.clone(),
            bus_ids: self.system.original_ids.clone(),
            adjacency: self.system.adjacency(),
            feature_dim: FEATURE_DIM,
            noise_variance: cfg.noise_variance,
            noise_seed: cfg.seed,
            scenario_seed: cfg.scenario.seed,
            samples: self
                .measurements
                .instances
                .iter()
                .zip(&self.states)
                .map(|(inst, state)| Sample {
                    tau: inst.tau,
                    features: build_node_features(inst, &self.system).rows,
                    state: state.values().to_vec(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub scenario: u64,
    pub noise: u64,
    pub gbp_damping: u64,
    pub delay_jitter: u64,
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub model_format_version: u32,
    pub case: Option<String>,
    pub buses: usize,
    pub branches: usize,
    pub placement: Vec<i64>,
    pub placement_provenance: Provenance,
    pub agents: usize,
    pub seeds: Seeds,
    pub deadline: Option<DeadlineSummary>,
    pub artifacts: Vec<String>,
    pub config: RunConfig,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub wrss: WrssReport,
    pub quantiles: Vec<QuantileRow>,
    pub completion: CompletionReport,
    pub deadline: Option<DeadlineSummary>,
    pub partition: AgentPartition,
    pub manifest: Manifest,
}

/// Box-plot table of a WRSS report.
pub fn emit_boxplot_data(report: &WrssReport) -> Result<Vec<QuantileRow>> {
    if report.rows.is_empty() {
        return Err(Error::Config("no instances to summarize".into()));
    }
    Ok(report.quantiles())
}

/// Synthesizes the scenario, runs every requested estimator per instance and
/// collects accuracy and timing reports. Nothing is written to disk.
pub fn run_pipeline(cfg: &RunConfig) -> std::result::Result<PipelineOutput, StageError> {
    cfg.validate().at(Stage::Config)?;
    let model = match &cfg.model {
        Some(m) if cfg.wants(Method::Gnn) => Some(load_gnn_model(m).at(Stage::Config)?),
        _ => None,
    };
    let syn = synthesize(cfg)?;
    let system = &syn.system;
    let explicit = cfg.partition.explicit_map().at(Stage::Config)?;
    let partition = partition_buses(system, cfg.partition.agents, explicit.as_ref()).at(Stage::Config)?;
    let ybus = AdmittanceModel::build(system);
    let adjacency = system.adjacency();

    let mut wrss = WrssReport::new();
    let mut completion = CompletionReport::new();
    let period = cfg.delay.pmu_report_period;
    for inst in &syn.measurements.instances {
        let tau = inst.tau;
        let lm = build_linear_model(inst, &ybus).at(Stage::Estimation)?;
        let wls = wls_solve(&lm).at(Stage::Estimation)?;
        let reference = compute_wrss(&lm, &wls);
        let ratio = |x: &StateVector| -> Result<(f64, f64)> {
            let w = compute_wrss(&lm, x);
            Ok((w, normalized_wrss(w, reference)?))
        };
        if cfg.wants(Method::Wls) {
            let (w, r) = ratio(&wls).at(Stage::Estimation)?;
            wrss.push(tau, Method::Wls, 0, w, r);
        }
        if cfg.wants(Method::Gbp) {
            let fg = FactorGraph::build(&lm);
            let mut out = simulate_gbp_run(&fg, &partition, &cfg.delay, &cfg.gbp, tau).at(Stage::Estimation)?;
            for &it in &cfg.gbp_report_iterations {
                let x = &out.iterates[it.min(out.iterates.len()) - 1];
                let (w, r) = ratio(x).at(Stage::Estimation)?;
                wrss.push(tau, Method::Gbp, it, w, r);
            }
            out.record.normalized_wrss = Some(ratio(&out.estimate).at(Stage::Estimation)?.1);
            let events = if cfg.event_log { out.events } else { Vec::new() };
            completion.push(out.record, events, period);
        }
        if let Some(model) = &model {
            let features = build_node_features(inst, system);
            let mut out =
                simulate_gnn_run(model, &partition, &cfg.delay, &adjacency, &features, tau).at(Stage::Estimation)?;
            let (w, r) = ratio(&out.estimate).at(Stage::Estimation)?;
            wrss.push(tau, Method::Gnn, 0, w, r);
            out.record.normalized_wrss = Some(r);
            let events = if cfg.event_log { out.events } else { Vec::new() };
            completion.push(out.record, events, period);
        }
    }

    let quantiles = emit_boxplot_data(&wrss).at(Stage::Estimation)?;
    let deadline = if completion.records.is_empty() {
        None
    } else {
        Some(check_deadline(&completion, period).at(Stage::Simulation)?)
    };
    let manifest = Manifest {
        tool: "gridse".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        model_format_version: FORMAT_VERSION,
        case: system.name.clone(),
        buses: system.bus_count(),
        branches: system.branches.len(),
        placement: syn.placement.original_ids(system),
        placement_provenance: syn.placement.provenance,
        agents: partition.agents,
        seeds: Seeds {
            scenario: cfg.scenario.seed,
            noise: cfg.seed,
            gbp_damping: cfg.gbp.seed,
            delay_jitter: cfg.delay.seed,
        },
        deadline: deadline.clone(),
        artifacts: Vec::new(),
        config: cfg.clone(),
    };
    Ok(PipelineOutput {
        wrss,
        quantiles,
        completion,
        deadline,
        partition,
        manifest,
    })
}

/// Writes named files into `dir`. On any failure the files already written
/// are removed again.
pub fn write_all(dir: &Path, files: &[(&str, String)]) -> std::result::Result<Vec<PathBuf>, StageError> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e)).at(Stage::Output)?;
    let mut written = Vec::new();
    for (name, contents) in files {
        let path = dir.join(name);
        if let Err(e) = std::fs::write(&path, contents) {
            for p in &written {
                let _ = std::fs::remove_file(p);
            }
            let _ = std::fs::remove_file(&path);
            return Err(Error::io(&path, e)).at(Stage::Output);
        }
        written.push(path);
    }
    Ok(written)
}

impl PipelineOutput {
    /// Table files plus the manifest, in write order. Timing tables are
    /// included only with `timing`, the event log only with `events` too.
    pub fn artifacts(&self, timing: bool, events: bool) -> Vec<(&'static str, String)> {
        let mut files = vec![
            ("wrss.csv", self.wrss.to_csv()),
            ("quantiles.csv", quantiles_to_csv(&self.quantiles)),
        ];
        if timing && !self.completion.records.is_empty() {
            files.push(("completion.csv", self.completion.records_csv()));
            if events {
                files.push(("events.csv", self.completion.events_csv()));
            }
        }
        let mut manifest = self.manifest.clone();
        manifest.artifacts = files.iter().map(|(n, _)| n.to_string()).collect();
        if !timing {
            manifest.deadline = None;
        }
        files.push((
            "manifest.json",
            serde_json::to_string_pretty(&manifest).expect("manifests always serialize"),
        ));
        files
    }

    pub fn write(&self, dir: &Path, timing: bool) -> std::result::Result<Vec<PathBuf>, StageError> {
        write_all(dir, &self.artifacts(timing, self.manifest.config.event_log))
    }
}
