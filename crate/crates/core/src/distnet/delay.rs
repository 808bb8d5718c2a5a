use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Domain};

/// Latency components in milliseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DelayModel {
    pub pmu_report_period: f64,
    pub pdc_wait: f64,
    pub ran_uplink: f64,
    pub cn_transit: f64,
    pub edge_compute_per_iteration: f64,
    pub interagent_per_message_batch: f64,
    /// Mean of the exponential perturbation added to every component draw; 0 disables it.
    pub jitter_mean: f64,
    pub seed: u64,
}

impl Default for DelayModel {
    fn default() -> Self {
        DelayModel {
            pmu_report_period: 20.0,
            pdc_wait: 2.0,
            ran_uplink: 1.0,
            cn_transit: 0.5,
            edge_compute_per_iteration: 0.05,
            interagent_per_message_batch: 1.0,
            jitter_mean: 0.0,
            seed: 0,
        }
    }
}

/// Which latency a draw belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Component {
    PdcWait = 1,
    RanUplink = 2,
    CnTransit = 3,
    EdgeCompute = 4,
    Interagent = 5,
}

impl DelayModel {
    /// All delay components zero.
    pub fn zero() -> Self {
        DelayModel {
            pdc_wait: 0.0,
            ran_uplink: 0.0,
            cn_transit: 0.0,
            edge_compute_per_iteration: 0.0,
            interagent_per_message_batch: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("pdc_wait", self.pdc_wait),
            ("ran_uplink", self.ran_uplink),
            ("cn_transit", self.cn_transit),
            ("edge_compute_per_iteration", self.edge_compute_per_iteration),
            ("interagent_per_message_batch", self.interagent_per_message_batch),
            ("jitter_mean", self.jitter_mean),
        ];
        for (name, v) in fields {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("delay component {name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.pmu_report_period > 0.0 && self.pmu_report_period.is_finite()) {
            return Err(Error::Config("PMU report period must be positive".into()));
        }
        Ok(())
    }

    pub fn base(&self, component: Component) -> f64 {
        match component {
            Component::PdcWait => self.pdc_wait,
            Component::RanUplink => self.ran_uplink,
            Component::CnTransit => self.cn_transit,
            Component::EdgeCompute => self.edge_compute_per_iteration,
            Component::Interagent => self.interagent_per_message_batch,
        }
    }

    /// One realization of a component, keyed by `(τ, component, counters)`.
    pub fn draw(&self, tau: usize, component: Component, counters: &[u64]) -> f64 {
        let base = self.base(component);
        if self.jitter_mean == 0.0 {
            return base;
        }
        let mut key = vec![tau as u64, component as u64];
        key.extend_from_slice(counters);
        let u = rng::unit(self.seed, Domain::Jitter, &key);
        base - self.jitter_mean * (1.0 - u).ln()
    }

    /// Frame-to-agent latency: the PMU latches at the frame instant, then PDC, RAN and core network.
    pub fn ingest(&self, tau: usize, agent: usize) -> f64 {
        let a = agent as u64;
        self.draw(tau, Component::PdcWait, &[a])
            + self.draw(tau, Component::RanUplink, &[a])
            + self.draw(tau, Component::CnTransit, &[a])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_ingest_is_the_component_sum() {
        let dm = DelayModel::default();
        assert_eq!(dm.ingest(1, 0), 3.5);
        assert_eq!(dm.draw(5, Component::Interagent, &[1, 2, 3]), 1.0);
    }

    #[test]
    fn jitter_is_positive_seeded_and_has_the_right_mean() {
        let dm = DelayModel {
            jitter_mean: 0.2,
            seed: 4,
            ..DelayModel::default()
        };
        let draws: Vec<f64> = (0..20_000).map(|i| dm.draw(1, Component::Interagent, &[i]) - 1.0).collect();
        assert!(draws.iter().all(|&d| d >= 0.0));
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!((mean - 0.2).abs() < 0.01, "{mean}");
        assert_eq!(dm.draw(3, Component::PdcWait, &[7]), dm.draw(3, Component::PdcWait, &[7]));
        assert_ne!(dm.draw(3, Component::PdcWait, &[7]), dm.draw(4, Component::PdcWait, &[7]));
    }

    #[test]
    fn negative_components_are_rejected() {
        let dm = DelayModel {
            cn_transit: -0.1,
            ..DelayModel::default()
        };
        assert!(dm.validate().is_err());
        assert!(DelayModel { pmu_report_period: 0.0, ..DelayModel::default() }.validate().is_err());
        assert!(DelayModel::default().validate().is_ok());
    }
}
