//! PMU placement and observability.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::phasor::{channels_for, polar_to_rectangular_rows};
use crate::error::{Error, Result};
use crate::power::{AdmittanceModel, PowerSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Bundled,
    Computed,
    User,
}

/// Set of buses hosting a PMU (internal indices, sorted).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PmuPlacement {
    pub buses: Vec<usize>,
    pub provenance: Provenance,
}

const BUNDLED: &str = include_str!("../../data/placements.json");

impl PmuPlacement {
    pub fn new(mut buses: Vec<usize>, provenance: Provenance) -> Self {
        buses.sort_unstable();
        buses.dedup();
        PmuPlacement { buses, provenance }
    }

    /// Placement given by document bus ids.
    pub fn from_original_ids(system: &PowerSystem, ids: &[i64], provenance: Provenance) -> Result<Self> {
        let buses = ids
            .iter()
            .map(|&id| {
                system
                    .index_of(id)
                    .ok_or_else(|| Error::Config(format!("placement references unknown bus {id}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(buses, provenance))
    }

    /// Reference placement shipped for a bundled case (10 PMUs on ieee30, 32 on ieee118).
    pub fn bundled(name: &str, system: &PowerSystem) -> Result<Self> {
        let table: BTreeMap<String, Vec<i64>> =
            serde_json::from_str(BUNDLED).expect("bundled placements parse");
        let ids = table
            .get(name)
            .ok_or_else(|| Error::Config(format!("no bundled placement for '{name}'")))?;
        Self::from_original_ids(system, ids, Provenance::Bundled)
    }

    pub fn original_ids(&self, system: &PowerSystem) -> Vec<i64> {
        self.buses.iter().map(|&b| system.original_ids[b]).collect()
    }

    pub fn len(&self) -> usize {
        self.buses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buses.is_empty()
    }

    pub fn contains(&self, bus: usize) -> bool {
        self.buses.binary_search(&bus).is_ok()
    }
}

/// Greedy cover: repeatedly pick the bus whose closed neighborhood covers the
/// most still-uncovered buses (ties to the lowest index).
pub fn greedy_placement(system: &PowerSystem) -> PmuPlacement {
    let adj = system.adjacency();
    let n = adj.len();
    let mut covered = vec![false; n];
    let mut remaining = n;
    let mut chosen = Vec::new();
    while remaining > 0 {
        let gain = |b: usize| {
            usize::from(!covered[b]) + adj[b].iter().filter(|&&u| !covered[u]).count()
        };
        let best = (0..n)
            .max_by(|&a, &b| gain(a).cmp(&gain(b)).then(b.cmp(&a)))
            .expect("non-empty system");
        if gain(best) == 0 {
            break;
        }
        for u in std::iter::once(best).chain(adj[best].iter().copied()) {
            if !covered[u] {
                covered[u] = true;
                remaining -= 1;
            }
        }
        chosen.push(best);
    }
    PmuPlacement::new(chosen, Provenance::Computed)
}

/// Relative singular-value threshold used for numerical rank.
pub const RANK_TOLERANCE: f64 = 1e-9;

/// Dense stacked coefficient matrix of every channel the placement yields.
pub fn design_matrix(placement: &PmuPlacement, system: &PowerSystem, ybus: &AdmittanceModel) -> DMatrix<f64> {
    let n = system.bus_count();
    let channels = channels_for(system, placement);
    let mut h = DMatrix::zeros(2 * channels.len(), 2 * n);
    for (c, ch) in channels.iter().enumerate() {
        let rows = polar_to_rectangular_rows(*ch, ybus, n);
        for (k, row) in rows.iter().enumerate() {
            for &(col, v) in row {
                h[(2 * c + k, col)] = v;
            }
        }
    }
    h
}

/// Numerical column rank of `h` from its singular values.
pub fn numerical_rank(h: &DMatrix<f64>) -> usize {
    if h.nrows() == 0 || h.ncols() == 0 {
        return 0;
    }
    let sv = h.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOLERANCE * max).count()
}

/// True iff the placement's measurements determine all 2n state components.
pub fn validate_observability(placement: &PmuPlacement, system: &PowerSystem) -> bool {
    if placement.buses.iter().any(|&b| b >= system.bus_count()) {
        return false;
    }
    let ybus = AdmittanceModel::build(system);
    let h = design_matrix(placement, system, &ybus);
    numerical_rank(&h) == 2 * system.bus_count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph_case(edges: &[(i64, i64)], n: i64) -> PowerSystem {
        let buses: Vec<String> = (1..=n)
            .map(|i| {
                let kind = if i == 1 { "slack" } else { "load" };
                format!(r#"{{"id": {i}, "kind": "{kind}", "active_load": 0.0, "reactive_load": 0.0, "voltage_setpoint": 1.0}}"#)
            })
            .collect();
        let branches: Vec<String> = edges
            .iter()
            .map(|(f, t)| format!(r#"{{"from_bus": {f}, "to_bus": {t}, "series_resistance": 0.01, "series_reactance": 0.1}}"#))
            .collect();
        PowerSystem::load_case(&format!(
            r#"{{"base_mva": 100.0, "buses": [{}], "branches": [{}]}}"#,
            buses.join(","),
            branches.join(",")
        ))
        .unwrap()
    }

    #[test]
    fn greedy_on_star_and_path() {
        let star = graph_case(&[(1, 2), (1, 3), (1, 4), (1, 5)], 5);
        assert_eq!(greedy_placement(&star).buses, vec![0]);
        let path = graph_case(&[(1, 2), (2, 3)], 3);
        assert_eq!(greedy_placement(&path).buses, vec![1]);
    }

    #[test]
    fn greedy_on_ieee30_is_small_and_observable() {
        let sys = PowerSystem::ieee30();
        let p = greedy_placement(&sys);
        assert!(p.len() <= 10, "greedy picked {}", p.len());
        assert!(validate_observability(&p, &sys));
    }

    #[test]
    fn bundled_placements_have_reference_sizes() {
        let s30 = PowerSystem::ieee30();
        let s118 = PowerSystem::ieee118();
        let p30 = PmuPlacement::bundled("ieee30", &s30).unwrap();
        let p118 = PmuPlacement::bundled("ieee118", &s118).unwrap();
        assert_eq!(p30.len(), 10);
        assert_eq!(p118.len(), 32);
        assert!(validate_observability(&p30, &s30));
        assert!(validate_observability(&p118, &s118));
    }

    #[test]
    fn empty_and_full_placements() {
        let sys = PowerSystem::ieee30();
        assert!(!validate_observability(&PmuPlacement::new(vec![], Provenance::User), &sys));
        let all = PmuPlacement::new((0..30).collect(), Provenance::User);
        assert!(validate_observability(&all, &sys));
    }

    #[test]
    fn uncovered_bus_is_unobservable() {
        let path = graph_case(&[(1, 2), (2, 3), (3, 4)], 4);
        assert!(!validate_observability(&PmuPlacement::new(vec![0], Provenance::User), &path));
        assert!(validate_observability(&PmuPlacement::new(vec![1, 2], Provenance::User), &path));
    }

    #[test]
    fn unknown_original_id_is_a_config_error() {
        let sys = PowerSystem::ieee30();
        assert!(PmuPlacement::from_original_ids(&sys, &[1, 999], Provenance::User).is_err());
    }
}
