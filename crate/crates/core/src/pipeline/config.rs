//! Run configuration (TOML).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::distnet::DelayModel;
use crate::error::{Error, Result};
use crate::estimator::{GbpConfig, Method};
use crate::measurement::DEFAULT_VARIANCE;
use crate::power::{LoadScenario, BUNDLED_CASES};

/// Model name that selects the weight file shipped with the crate.
pub const IDENTITY_MODEL: &str = "identity";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlacementRule {
    Bundled,
    Greedy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PlacementSource {
    Rule(PlacementRule),
    /// Explicit PMU buses by case bus id.
    Buses(Vec<i64>),
}

impl Default for PlacementSource {
    fn default() -> Self {
        PlacementSource::Rule(PlacementRule::Bundled)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionConfig {
    pub agents: usize,
    /// Optional explicit map from case bus id (as a string key) to agent.
    pub buses: Option<BTreeMap<String, usize>>,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        PartitionConfig { agents: 1, buses: None }
    }
}

impl PartitionConfig {
    pub fn explicit_map(&self) -> Result<Option<BTreeMap<i64, usize>>> {
        let Some(map) = &self.buses else {
            return Ok(None);
        };
        map.iter()
            .map(|(k, &a)| {
                k.trim()
                    .parse::<i64>()
                    .map(|id| (id, a))
                    .map_err(|_| Error::Config(format!("partition key `{k}` is not a bus id")))
            })
            .collect::<Result<_>>()
            .map(Some)
    }
}

fn default_methods() -> Vec<Method> {
    vec![Method::Wls, Method::Gbp]
}

fn default_variance() -> f64 {
    DEFAULT_VARIANCE
}

fn default_scenario() -> LoadScenario {
    LoadScenario::new(100, 0)
}

fn default_report_iterations() -> Vec<usize> {
    (1..=10).chain([500]).collect()
}

fn default_true() -> bool {
    true
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Bundled case name (`ieee30`, `ieee118`) or path to a case JSON file.
    pub case: String,
    #[serde(default)]
    pub placement: PlacementSource,
    #[serde(default = "default_variance")]
    pub noise_variance: f64,
    /// Seed of the measurement noise.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_scenario")]
    pub scenario: LoadScenario,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub gbp: GbpConfig,
    /// GBP sweeps at which WRSS rows are emitted; later than the last sweep
    /// means the final iterate.
    #[serde(default = "default_report_iterations")]
    pub gbp_report_iterations: Vec<usize>,
    /// GNN weight file, or `identity` for the bundled reference model.
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub partition: PartitionConfig,
    #[serde(default)]
    pub delay: DelayModel,
    #[serde(default = "default_true")]
    pub event_log: bool,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl RunConfig {
    /// Minimal configuration for a bundled or file case with every default.
    pub fn for_case(case: impl Into<String>) -> Self {
        RunConfig {
            case: case.into(),
            placement: PlacementSource::default(),
            noise_variance: default_variance(),
            seed: 0,
            scenario: default_scenario(),
            methods: default_methods(),
            gbp: GbpConfig::default(),
            gbp_report_iterations: default_report_iterations(),
            model: None,
            partition: PartitionConfig::default(),
            delay: DelayModel::default(),
            event_log: true,
            output_dir: default_output_dir(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file; relative file references resolve against its directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configs always serialize")
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        if !self.is_bundled_case() {
            self.case = base.join(&self.case).display().to_string();
        }
        if let Some(m) = &self.model {
            if m != IDENTITY_MODEL {
                self.model = Some(base.join(m).display().to_string());
            }
        }
        self.output_dir = base.join(&self.output_dir);
    }

    pub fn is_bundled_case(&self) -> bool {
        BUNDLED_CASES.contains(&self.case.as_str())
    }

    /// Replaces every seed (scenario, noise, GBP damping, delay jitter).
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.scenario.seed = seed;
        self.gbp.seed = seed;
        self.delay.seed = seed;
    }

    pub fn wants(&self, method: Method) -> bool {
        self.methods.contains(&method)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("method set is empty".into()));
        }
        if !self.is_bundled_case() && !Path::new(&self.case).is_file() {
            return Err(Error::Config(format!("case file {} does not exist", self.case)));
        }
        if !(self.noise_variance > 0.0) || !self.noise_variance.is_finite() {
            return Err(Error::Config(format!(
                "noise variance must be positive and finite, got {}",
                self.noise_variance
            )));
        }
        self.scenario.validate()?;
        self.gbp.validate()?;
        self.delay.validate()?;
        if self.gbp_report_iterations.is_empty() || self.gbp_report_iterations.contains(&0) {
            return Err(Error::Config("GBP report iterations must be a non-empty list of sweeps >= 1".into()));
        }
        if self.partition.agents == 0 {
            return Err(Error::Config("partition needs at least one agent".into()));
        }
        self.partition.explicit_map()?;
        if self.wants(Method::Gnn) {
            match &self.model {
                None => return Err(Error::Config("method gnn requires a model path".into())),
                Some(m) if m != IDENTITY_MODEL && !Path::new(m).is_file() => {
                    return Err(Error::Config(format!("model file {m} does not exist")))
                }
                _ => {}
            }
        }
        Ok(())
    }
}
