use serde::{Deserialize, Serialize};

use super::case::PowerSystem;
use crate::error::{Error, Result};
use crate::rng::{self, Domain};

/// Seeded sequence of per-bus multiplicative load factors for τ = 1..=length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadScenario {
    pub length: usize,
    #[serde(default = "LoadScenario::default_range")]
    pub factor_range: (f64, f64),
    #[serde(default)]
    pub seed: u64,
}

impl LoadScenario {
    fn default_range() -> (f64, f64) {
        (0.9, 1.1)
    }

    pub fn new(length: usize, seed: u64) -> Self {
        LoadScenario {
            length,
            factor_range: Self::default_range(),
            seed,
        }
    }

    /// Multiplier applied to the loads of `bus` at instance `tau`.
    pub fn factor(&self, tau: usize, bus: usize) -> f64 {
        let (lo, hi) = self.factor_range;
        rng::uniform(self.seed, Domain::LoadFactor, &[tau as u64, bus as u64], lo, hi)
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.factor_range;
        if self.length == 0 || !lo.is_finite() || !hi.is_finite() || lo > hi {
            return Err(Error::Config(format!(
                "scenario needs length >= 1 and a finite range lo <= hi, got {} and {:?}",
                self.length, self.factor_range
            )));
        }
        Ok(())
    }
}

/// Copy of `system` with every bus load scaled by the scenario factor at `tau`.
pub fn apply_load_scenario(
    system: &PowerSystem,
    tau: usize,
    scenario: &LoadScenario,
) -> Result<PowerSystem> {
    scenario.validate()?;
    if tau == 0 || tau > scenario.length {
        return Err(Error::InstanceOutOfRange {
            tau,
            len: scenario.length,
        });
    }
    let mut out = system.clone();
    for bus in &mut out.buses {
        let k = scenario.factor(tau, bus.id);
        bus.active_load *= k;
        bus.reactive_load *= k;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_factor_is_identity() {
        let sys = PowerSystem::ieee30();
        let sc = LoadScenario {
            length: 3,
            factor_range: (1.0, 1.0),
            seed: 1,
        };
        assert_eq!(apply_load_scenario(&sys, 2, &sc).unwrap(), sys);
    }

    #[test]
    fn deterministic_and_distinct() {
        let sys = PowerSystem::ieee30();
        let sc = LoadScenario::new(100, 7);
        assert_eq!(
            apply_load_scenario(&sys, 5, &sc).unwrap(),
            apply_load_scenario(&sys, 5, &sc).unwrap()
        );
        let all: Vec<_> = (1..=100)
            .map(|t| apply_load_scenario(&sys, t, &sc).unwrap())
            .collect();
        for a in 0..all.len() {
            for b in a + 1..all.len() {
                assert_ne!(all[a], all[b]);
            }
        }
        for t in 1..=100 {
            for bus in 0..30 {
                let k = sc.factor(t, bus);
                assert!((0.9..=1.1).contains(&k));
            }
        }
    }

    #[test]
    fn out_of_range_instances() {
        let sys = PowerSystem::ieee30();
        let sc = LoadScenario::new(100, 7);
        assert!(matches!(
            apply_load_scenario(&sys, 0, &sc),
            Err(Error::InstanceOutOfRange { tau: 0, len: 100 })
        ));
        assert!(apply_load_scenario(&sys, 101, &sc).is_err());
    }
}
