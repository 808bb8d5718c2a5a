//! Case documents and the normalized in-memory network.
//!
//! A case is a JSON document with `base_mva`, `buses[]` and `branches[]`.
//! All electrical quantities are per-unit on `base_mva`, angles are radians.
//! Bus ids in the document are arbitrary integers; after loading, buses are
//! renumbered `0..n` in ascending order of their document id and the
//! original ids are kept in [`PowerSystem::original_ids`].

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BusKind {
    Slack,
    Generator,
    Load,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusRecord {
    pub id: i64,
    pub kind: BusKind,
    pub active_load: f64,
    pub reactive_load: f64,
    #[serde(default)]
    pub shunt_conductance: f64,
    #[serde(default)]
    pub shunt_susceptance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub voltage_setpoint: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active_generation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle_setpoint: Option<f64>,
}

fn default_tap() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchRecord {
    pub from_bus: i64,
    pub to_bus: i64,
    pub series_resistance: f64,
    pub series_reactance: f64,
    #[serde(default)]
    pub total_charging_susceptance: f64,
    #[serde(default = "default_tap")]
    pub tap_ratio: f64,
    #[serde(default)]
    pub phase_shift: f64,
    #[serde(default = "default_true")]
    pub in_service: bool,
}

/// Wire form of a case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    pub base_mva: f64,
    pub buses: Vec<BusRecord>,
    pub branches: Vec<BranchRecord>,
}

/// A bus with its internal index.
#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: usize,
    pub kind: BusKind,
    pub active_load: f64,
    pub reactive_load: f64,
    pub shunt_conductance: f64,
    pub shunt_susceptance: f64,
    /// Voltage magnitude setpoint (slack and generator buses).
    pub voltage_setpoint: Option<f64>,
    /// Scheduled active generation (slack and generator buses).
    pub active_generation: Option<f64>,
    /// Reference angle of the slack bus.
    pub angle_setpoint: Option<f64>,
}

impl Bus {
    /// Net scheduled complex injection `(P, Q)`; `Q` is only meaningful at load buses.
    pub fn scheduled_injection(&self) -> (f64, f64) {
        (
            self.active_generation.unwrap_or(0.0) - self.active_load,
            -self.reactive_load,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub from_bus: usize,
    pub to_bus: usize,
    pub series_resistance: f64,
    pub series_reactance: f64,
    pub total_charging_susceptance: f64,
    pub tap_ratio: f64,
    pub phase_shift: f64,
    pub in_service: bool,
}

impl Branch {
    /// The endpoint opposite to `bus`.
    pub fn other_end(&self, bus: usize) -> usize {
        if self.from_bus == bus {
            self.to_bus
        } else {
            self.from_bus
        }
    }
}

/// A validated, normalized network.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSystem {
    pub name: Option<String>,
    pub source: Option<String>,
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    /// `original_ids[i]` is the document id of internal bus `i`.
    pub original_ids: Vec<i64>,
    pub slack: usize,
}

const IEEE30: &str = include_str!("../../data/ieee30.json");
const IEEE118: &str = include_str!("../../data/ieee118.json");

/// Names accepted by [`PowerSystem::bundled`].
pub const BUNDLED_CASES: [&str; 2] = ["ieee30", "ieee118"];

fn finite(what: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidCase(format!("{what} is not finite")))
    }
}

impl PowerSystem {
    /// Parses and validates a case document.
    pub fn load_case(text: &str) -> Result<Self> {
        let doc: CaseDocument =
            serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        Self::from_document(doc)
    }

    pub fn from_document(doc: CaseDocument) -> Result<Self> {
        finite("base_mva", doc.base_mva)?;
        if doc.base_mva <= 0.0 {
            return Err(Error::InvalidCase("base_mva must be positive".into()));
        }
        if doc.buses.is_empty() {
            return Err(Error::InvalidCase("case has no buses".into()));
        }

        let mut order: Vec<usize> = (0..doc.buses.len()).collect();
        order.sort_by_key(|&i| doc.buses[i].id);
        let mut index = HashMap::with_capacity(doc.buses.len());
        for (internal, &pos) in order.iter().enumerate() {
            let id = doc.buses[pos].id;
            if index.insert(id, internal).is_some() {
                return Err(Error::DuplicateBus(id));
            }
        }

        let mut buses = Vec::with_capacity(order.len());
        let mut original_ids = Vec::with_capacity(order.len());
        let mut slack = None;
        for (internal, &pos) in order.iter().enumerate() {
            let r = &doc.buses[pos];
            let label = format!("bus {}", r.id);
            for (field, v) in [
                ("active_load", r.active_load),
                ("reactive_load", r.reactive_load),
                ("shunt_conductance", r.shunt_conductance),
                ("shunt_susceptance", r.shunt_susceptance),
            ] {
                finite(&format!("{label} {field}"), v)?;
            }
            for (field, v) in [
                ("voltage_setpoint", r.voltage_setpoint),
                ("active_generation", r.active_generation),
                ("angle_setpoint", r.angle_setpoint),
            ] {
                if let Some(v) = v {
                    finite(&format!("{label} {field}"), v)?;
                }
            }
            match r.kind {
                BusKind::Slack => {
                    if slack.replace(internal).is_some() {
                        return Err(Error::InvalidCase("more than one slack bus".into()));
                    }
                    if r.voltage_setpoint.is_none() {
                        return Err(Error::InvalidCase(format!(
                            "{label}: slack bus needs voltage_setpoint"
                        )));
                    }
                }
                BusKind::Generator => {
                    if r.voltage_setpoint.is_none() || r.active_generation.is_none() {
                        return Err(Error::InvalidCase(format!(
                            "{label}: generator bus needs voltage_setpoint and active_generation"
                        )));
                    }
                }
                BusKind::Load => {}
            }
            if let Some(vm) = r.voltage_setpoint {
                if vm <= 0.0 {
                    return Err(Error::InvalidCase(format!(
                        "{label}: voltage_setpoint must be positive"
                    )));
                }
            }
            buses.push(Bus {
                id: internal,
                kind: r.kind,
                active_load: r.active_load,
                reactive_load: r.reactive_load,
                shunt_conductance: r.shunt_conductance,
                shunt_susceptance: r.shunt_susceptance,
                voltage_setpoint: r.voltage_setpoint,
                active_generation: r.active_generation,
                angle_setpoint: r.angle_setpoint,
            });
            original_ids.push(r.id);
        }
        let slack = slack.ok_or_else(|| Error::InvalidCase("no slack bus".into()))?;

        let mut branches = Vec::with_capacity(doc.branches.len());
        for (k, r) in doc.branches.iter().enumerate() {
            let from = *index.get(&r.from_bus).ok_or(Error::MissingBus {
                branch: k,
                bus: r.from_bus,
            })?;
            let to = *index.get(&r.to_bus).ok_or(Error::MissingBus {
                branch: k,
                bus: r.to_bus,
            })?;
            if from == to {
                return Err(Error::InvalidCase(format!(
                    "branch {k} connects bus {} to itself",
                    r.from_bus
                )));
            }
            for (field, v) in [
                ("series_resistance", r.series_resistance),
                ("series_reactance", r.series_reactance),
                ("total_charging_susceptance", r.total_charging_susceptance),
                ("tap_ratio", r.tap_ratio),
                ("phase_shift", r.phase_shift),
            ] {
                finite(&format!("branch {k} {field}"), v)?;
            }
            if r.series_resistance == 0.0 && r.series_reactance == 0.0 {
                return Err(Error::ZeroImpedance(k));
            }
            if r.tap_ratio <= 0.0 {
                return Err(Error::InvalidCase(format!(
                    "branch {k}: tap_ratio must be positive"
                )));
            }
            branches.push(Branch {
                from_bus: from,
                to_bus: to,
                series_resistance: r.series_resistance,
                series_reactance: r.series_reactance,
                total_charging_susceptance: r.total_charging_susceptance,
                tap_ratio: r.tap_ratio,
                phase_shift: r.phase_shift,
                in_service: r.in_service,
            });
        }

        Ok(PowerSystem {
            name: doc.name,
            source: doc.source,
            base_mva: doc.base_mva,
            buses,
            branches,
            original_ids,
            slack,
        })
    }

    /// One of the cases shipped with the crate (`ieee30`, `ieee118`).
    pub fn bundled(name: &str) -> Result<Self> {
        match name {
            "ieee30" => Self::load_case(IEEE30),
            "ieee118" => Self::load_case(IEEE118),
            other => Err(Error::Config(format!("unknown bundled case '{other}'"))),
        }
    }

    pub fn ieee30() -> Self {
        Self::bundled("ieee30").expect("bundled ieee30 case is valid")
    }

    pub fn ieee118() -> Self {
        Self::bundled("ieee118").expect("bundled ieee118 case is valid")
    }

    pub fn bus_count(&self) -> usize {
        self.buses.len()
    }

    pub fn to_document(&self) -> CaseDocument {
        CaseDocument {
            name: self.name.clone(),
            source: self.source.clone(),
            base_mva: self.base_mva,
            buses: self
                .buses
                .iter()
                .map(|b| BusRecord {
                    id: self.original_ids[b.id],
                    kind: b.kind,
                    active_load: b.active_load,
                    reactive_load: b.reactive_load,
                    shunt_conductance: b.shunt_conductance,
                    shunt_susceptance: b.shunt_susceptance,
                    voltage_setpoint: b.voltage_setpoint,
                    active_generation: b.active_generation,
                    angle_setpoint: b.angle_setpoint,
                })
                .collect(),
            branches: self
                .branches
                .iter()
                .map(|br| BranchRecord {
                    from_bus: self.original_ids[br.from_bus],
                    to_bus: self.original_ids[br.to_bus],
                    series_resistance: br.series_resistance,
                    series_reactance: br.series_reactance,
                    total_charging_susceptance: br.total_charging_susceptance,
                    tap_ratio: br.tap_ratio,
                    phase_shift: br.phase_shift,
                    in_service: br.in_service,
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("case documents always serialize")
    }

    /// Internal index of a document bus id.
    pub fn index_of(&self, original: i64) -> Option<usize> {
        self.original_ids.binary_search(&original).ok()
    }

    /// Sorted, de-duplicated neighbor lists over in-service branches.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.buses.len()];
        for br in self.branches.iter().filter(|b| b.in_service) {
            adj[br.from_bus].push(br.to_bus);
            adj[br.to_bus].push(br.from_bus);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    /// Indices of in-service branches incident to `bus`, in branch order.
    pub fn incident_branches(&self, bus: usize) -> impl Iterator<Item = usize> + '_ {
        self.branches
            .iter()
            .enumerate()
            .filter(move |(_, b)| b.in_service && (b.from_bus == bus || b.to_bus == bus))
            .map(|(k, _)| k)
    }

    pub fn is_connected(&self) -> bool {
        let adj = self.adjacency();
        let mut seen = vec![false; adj.len()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const TWO_BUS: &str = r#"{
        "base_mva": 100.0,
        "buses": [
            {"id": 1, "kind": "slack", "active_load": 0.0, "reactive_load": 0.0,
             "voltage_setpoint": 1.0, "active_generation": 0.0},
            {"id": 2, "kind": "load", "active_load": 0.5, "reactive_load": 0.2}
        ],
        "branches": [
            {"from_bus": 1, "to_bus": 2, "series_resistance": 0.01, "series_reactance": 0.1}
        ]
    }"#;

    #[test]
    fn two_bus_document_loads() {
        let sys = PowerSystem::load_case(TWO_BUS).unwrap();
        assert_eq!(sys.bus_count(), 2);
        assert_eq!(sys.branches.len(), 1);
        assert_eq!(sys.slack, 0);
        assert_eq!(sys.branches[0].tap_ratio, 1.0);
        assert!(sys.branches[0].in_service);
    }

    #[test]
    fn bundled_cases_have_published_sizes() {
        let s30 = PowerSystem::ieee30();
        assert_eq!((s30.bus_count(), s30.branches.len()), (30, 41));
        let s118 = PowerSystem::ieee118();
        assert_eq!((s118.bus_count(), s118.branches.len()), (118, 186));
        assert!(s30.is_connected() && s118.is_connected());
    }

    #[test]
    fn missing_bus_is_rejected() {
        let text = TWO_BUS.replace("\"to_bus\": 2", "\"to_bus\": 99");
        match PowerSystem::load_case(&text) {
            Err(Error::MissingBus { bus: 99, .. }) => {}
            other => panic!("expected missing bus, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_and_zero_impedance_are_rejected() {
        let dup = TWO_BUS.replace("{\"id\": 2", "{\"id\": 1");
        assert!(matches!(
            PowerSystem::load_case(&dup),
            Err(Error::DuplicateBus(1))
        ));
        let zero = TWO_BUS
            .replace("\"series_resistance\": 0.01", "\"series_resistance\": 0.0")
            .replace("\"series_reactance\": 0.1", "\"series_reactance\": 0.0");
        assert!(matches!(
            PowerSystem::load_case(&zero),
            Err(Error::ZeroImpedance(0))
        ));
    }

    #[test]
    fn schema_violations_are_reported() {
        assert!(matches!(
            PowerSystem::load_case(r#"{"buses": []}"#),
            Err(Error::Schema(_))
        ));
        let unknown = TWO_BUS.replace("\"base_mva\"", "\"bogus\": 1, \"base_mva\"");
        assert!(matches!(
            PowerSystem::load_case(&unknown),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn slack_rules() {
        let none = TWO_BUS.replace("\"slack\"", "\"load\"");
        assert!(matches!(
            PowerSystem::load_case(&none),
            Err(Error::InvalidCase(_))
        ));
    }

    #[test]
    fn ids_are_renumbered_in_ascending_order() {
        let text = TWO_BUS.replace("\"id\": 1", "\"id\": 40").replace("\"from_bus\": 1", "\"from_bus\": 40");
        let sys = PowerSystem::load_case(&text).unwrap();
        assert_eq!(sys.original_ids, vec![2, 40]);
        assert_eq!(sys.slack, 1);
        assert_eq!(sys.index_of(40), Some(1));
    }
}
