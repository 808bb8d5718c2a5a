//! Gaussian belief propagation on the measurement factor graph.
//!
//! Messages are scalar Gaussians in mean/variance form. One iteration is a
//! synchronous sweep: every factor→variable message is recomputed from the
//! previous variable→factor messages (with randomized damping), then every
//! variable→factor message, then the marginals. Iterate `k` is the vector
//! of marginal means after `k` sweeps.
//!
//! A flat message (infinite variance) carries no information and makes any
//! factor that reads it send a flat message too. Starting every
//! variable→factor message flat deadlocks on buses whose real and imaginary
//! parts only appear together in current rows, so by default the initial
//! messages are a weak prior centered on the flat-start voltage instead (see
//! [`FlatPolicy`]). The prior is overwritten by the first sweep and does not
//! bias converged means.

use serde::{Deserialize, Serialize};

use super::factor_graph::FactorGraph;
use crate::error::{Error, Result};
use crate::power::StateVector;
use crate::rng::{self, Domain};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianMessage {
    pub mean: f64,
    /// `f64::INFINITY` marks a flat message.
    pub variance: f64,
}

impl GaussianMessage {
    pub const FLAT: GaussianMessage = GaussianMessage {
        mean: 0.0,
        variance: f64::INFINITY,
    };

    pub fn new(mean: f64, variance: f64) -> Self {
        GaussianMessage { mean, variance }
    }

    pub fn is_flat(&self) -> bool {
        self.variance == f64::INFINITY
    }

    fn is_valid(&self) -> bool {
        self.is_flat() || (self.mean.is_finite() && self.variance.is_finite() && self.variance > 0.0)
    }
}

/// Initial variable→factor messages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FlatPolicy {
    /// All flat.
    Flat,
    /// `N(flat_start, variance)` on every edge.
    Prior { variance: f64 },
}

impl Default for FlatPolicy {
    fn default() -> Self {
        FlatPolicy::Prior { variance: 1e10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbpConfig {
    pub max_iterations: usize,
    /// Stop once the infinity norm of the change in marginal means drops below this.
    pub tolerance: f64,
    /// Probability that a factor→variable mean is damped in a given sweep.
    pub damping_probability: f64,
    /// Weight of the new mean when damping applies.
    pub damping_weight: f64,
    /// Leading sweeps that run undamped. The first few sweeps move far from the
    /// flat start and damping them leaves a slowly decaying offset.
    pub undamped_sweeps: usize,
    pub flat_policy: FlatPolicy,
    pub seed: u64,
}

impl Default for GbpConfig {
    fn default() -> Self {
        GbpConfig {
            max_iterations: 500,
            tolerance: 1e-10,
            damping_probability: 0.6,
            damping_weight: 0.5,
            undamped_sweeps: 3,
            flat_policy: FlatPolicy::default(),
            seed: 0,
        }
    }
}

impl GbpConfig {
    pub fn undamped() -> Self {
        GbpConfig {
            damping_probability: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.damping_probability) {
            return Err(Error::Config("damping probability must lie in [0, 1]".into()));
        }
        if !(self.damping_weight > 0.0 && self.damping_weight <= 1.0) {
            return Err(Error::Config("damping weight must lie in (0, 1]".into()));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::Config("convergence tolerance must be >= 0".into()));
        }
        if let FlatPolicy::Prior { variance } = self.flat_policy {
            if !(variance > 0.0 && variance.is_finite()) {
                return Err(Error::Config("prior variance must be positive and finite".into()));
            }
        }
        Ok(())
    }
}

/// Message update rules bound to one graph and configuration.
///
/// Each update reads only message arrays from the previous half-sweep, so
/// callers may evaluate edges in any order and get bitwise-identical results.
pub struct GbpEngine<'a> {
    pub graph: &'a FactorGraph,
    pub config: &'a GbpConfig,
}

impl<'a> GbpEngine<'a> {
    pub fn new(graph: &'a FactorGraph, config: &'a GbpConfig) -> Self {
        GbpEngine { graph, config }
    }

    /// Flat-start value of a state component (1 for real parts, 0 for imaginary).
    pub fn flat_start(&self, variable: usize) -> f64 {
        if variable < self.graph.variable_count() / 2 {
            1.0
        } else {
            0.0
        }
    }

    /// Undamped factor→variable message on `edge`.
    pub fn factor_message(&self, edge: usize, v2f: &[GaussianMessage]) -> GaussianMessage {
        let e = self.graph.edges[edge];
        let f = &self.graph.factors[e.factor];
        let mut mean = f.observation;
        let mut variance = f.variance;
        for t in f.edges.clone() {
            if t == edge {
                continue;
            }
            let other = self.graph.edges[t];
            let incoming = v2f[t];
            if incoming.is_flat() {
                return GaussianMessage::FLAT;
            }
            mean -= other.coefficient * incoming.mean;
            variance += other.coefficient * other.coefficient * incoming.variance;
        }
        let h = e.coefficient;
        let variance = variance / (h * h);
        if variance == f64::INFINITY {
            // precision underflowed: no information left
            return GaussianMessage::FLAT;
        }
        GaussianMessage::new(mean / h, variance)
    }

    /// Variable→factor messages before the first sweep.
    pub fn initial_messages(&self) -> Vec<GaussianMessage> {
        match self.config.flat_policy {
            FlatPolicy::Flat => vec![GaussianMessage::FLAT; self.graph.edges.len()],
            FlatPolicy::Prior { variance } => self
                .graph
                .edges
                .iter()
                .map(|e| GaussianMessage::new(self.flat_start(e.variable), variance))
                .collect(),
        }
    }

    /// Applies randomized damping to a freshly computed factor→variable message.
    pub fn damp(&self, edge: usize, iteration: usize, new: GaussianMessage, old: GaussianMessage) -> GaussianMessage {
        let p = self.config.damping_probability;
        let alpha = self.config.damping_weight;
        if p <= 0.0 || alpha >= 1.0 || new.is_flat() || old.is_flat() || iteration <= self.config.undamped_sweeps {
            return new;
        }
        if rng::unit(self.config.seed, Domain::Damping, &[iteration as u64, edge as u64]) < p {
            GaussianMessage::new(alpha * new.mean + (1.0 - alpha) * old.mean, new.variance)
        } else {
            new
        }
    }

    fn combine(&self, variable: usize, skip: Option<usize>, f2v: &[GaussianMessage]) -> GaussianMessage {
        let mut precision = 0.0;
        let mut weighted = 0.0;
        for &g in &self.graph.variable_edges[variable] {
            if Some(g) == skip {
                continue;
            }
            let m = f2v[g];
            if m.is_flat() {
                continue;
            }
            let w = 1.0 / m.variance;
            precision += w;
            weighted += m.mean * w;
        }
        if precision == 0.0 {
            GaussianMessage::FLAT
        } else {
            GaussianMessage::new(weighted / precision, 1.0 / precision)
        }
    }

    /// Variable→factor message on `edge`.
    pub fn variable_message(&self, edge: usize, f2v: &[GaussianMessage]) -> GaussianMessage {
        self.combine(self.graph.edges[edge].variable, Some(edge), f2v)
    }

    /// Marginal belief of a variable.
    pub fn marginal(&self, variable: usize, f2v: &[GaussianMessage]) -> GaussianMessage {
        self.combine(variable, None, f2v)
    }

    /// Marginal mean, falling back to the flat start for uninformed variables.
    pub fn marginal_mean(&self, variable: usize, f2v: &[GaussianMessage]) -> f64 {
        let m = self.marginal(variable, f2v);
        if m.is_flat() {
            self.flat_start(variable)
        } else {
            m.mean
        }
    }

    pub fn check(&self, iteration: usize, messages: &[GaussianMessage], what: &str) -> Result<()> {
        match messages.iter().position(|m| !m.is_valid()) {
            None => Ok(()),
            Some(e) => Err(Error::NonFinite {
                iteration,
                detail: format!("{what} message on edge {e} is {:?}", messages[e]),
            }),
        }
    }
}

/// Iterates of one belief-propagation run.
#[derive(Debug, Clone, PartialEq)]
pub struct GbpRun {
    /// `iterates[k]` is the estimate after `k + 1` sweeps.
    pub iterates: Vec<StateVector>,
    pub converged: bool,
}

impl GbpRun {
    pub fn iterations(&self) -> usize {
        self.iterates.len()
    }

    /// Estimate after the last sweep executed.
    pub fn last(&self) -> &StateVector {
        self.iterates.last().expect("at least one sweep")
    }

    /// Estimate after sweep `k` (1-based); the last one if the run stopped earlier.
    pub fn at(&self, k: usize) -> &StateVector {
        &self.iterates[k.min(self.iterates.len()) - 1]
    }
}

/// Runs synchronous Gaussian BP until the marginal means settle or the budget runs out.
pub fn gbp_run(graph: &FactorGraph, config: &GbpConfig) -> Result<GbpRun> {
    config.validate()?;
    if config.max_iterations == 0 {
        return Err(Error::Config("belief propagation needs at least one iteration".into()));
    }
    let engine = GbpEngine::new(graph, config);
    let edges = graph.edges.len();
    let mut v2f = engine.initial_messages();
    let mut f2v = vec![GaussianMessage::FLAT; edges];
    let mut iterates: Vec<StateVector> = Vec::new();
    let mut converged = false;

    for iteration in 1..=config.max_iterations {
        f2v = (0..edges)
            .map(|e| engine.damp(e, iteration, engine.factor_message(e, &v2f), f2v[e]))
            .collect();
        engine.check(iteration, &f2v, "factor-to-variable")?;
        v2f = (0..edges).map(|e| engine.variable_message(e, &f2v)).collect();
        engine.check(iteration, &v2f, "variable-to-factor")?;
        let x = StateVector::from_values(
            (0..graph.variable_count())
                .map(|s| engine.marginal_mean(s, &f2v))
                .collect(),
        );
        if !x.is_finite() {
            return Err(Error::NonFinite {
                iteration,
                detail: "marginal mean".into(),
            });
        }
        let change = iterates.last().map(|prev| prev.max_abs_diff(&x));
        iterates.push(x);
        if change.is_some_and(|c| c <= config.tolerance) {
            converged = true;
            break;
        }
    }
    Ok(GbpRun { iterates, converged })
}
