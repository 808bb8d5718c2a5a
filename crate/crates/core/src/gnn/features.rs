use serde::{Deserialize, Serialize};

use crate::measurement::{MeasurementInstance, PhasorKind};
use crate::power::PowerSystem;

/// `[V_re, V_im, v_flag, mean I_re, mean I_im, i_flag, degree / max degree]`
pub const FEATURE_DIM: usize = 7;

pub type FeatureRow = [f64; FEATURE_DIM];

/// Per-bus input vectors, indexed by internal bus index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeFeatures {
    pub rows: Vec<FeatureRow>,
}

impl NodeFeatures {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Masked measurement features. Buses without a reading keep zeros in the
/// measurement slots and a zero flag.
pub fn build_node_features(instance: &MeasurementInstance, system: &PowerSystem) -> NodeFeatures {
    let adjacency = system.adjacency();
    let max_degree = adjacency.iter().map(Vec::len).max().unwrap_or(0);
    let mut rows: Vec<FeatureRow> = adjacency
        .iter()
        .map(|nbrs| {
            let mut row = [0.0; FEATURE_DIM];
            if max_degree > 0 {
                row[6] = nbrs.len() as f64 / max_degree as f64;
            }
            row
        })
        .collect();
    let mut current_count = vec![0usize; rows.len()];

    for rec in &instance.records {
        let (re, im) = (rec.magnitude * rec.angle.cos(), rec.magnitude * rec.angle.sin());
        match rec.channel.kind {
            PhasorKind::BusVoltage => {
                let row = &mut rows[rec.channel.location];
                row[0] = re;
                row[1] = im;
                row[2] = 1.0;
            }
            PhasorKind::BranchCurrentFrom | PhasorKind::BranchCurrentTo => {
                let branch = &system.branches[rec.channel.location];
                let bus = if rec.channel.kind == PhasorKind::BranchCurrentFrom {
                    branch.from_bus
                } else {
                    branch.to_bus
                };
                rows[bus][3] += re;
                rows[bus][4] += im;
                current_count[bus] += 1;
            }
        }
    }
    for (row, &c) in rows.iter_mut().zip(&current_count) {
        if c > 0 {
            row[3] /= c as f64;
            row[4] /= c as f64;
            row[5] = 1.0;
        }
    }
    NodeFeatures { rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{synthesize_measurements, PmuPlacement, Provenance};
    use crate::power::{AdmittanceModel, StateVector};
    use num_complex::Complex64;

    fn star() -> PowerSystem {
        let mut branches = String::new();
        for leaf in 2..=5 {
            if leaf > 2 {
                branches.push(',');
            }
            branches.push_str(&format!(
                r#"{{"from_bus": 1, "to_bus": {leaf}, "series_resistance": 0.01, "series_reactance": 0.1}}"#
            ));
        }
        let mut buses = String::from(r#"{"id": 1, "kind": "slack", "active_load": 0.0, "reactive_load": 0.0, "voltage_setpoint": 1.0}"#);
        for leaf in 2..=5 {
            buses.push_str(&format!(r#", {{"id": {leaf}, "kind": "load", "active_load": 0.1, "reactive_load": 0.0}}"#));
        }
        PowerSystem::load_case(&format!(r#"{{"base_mva": 100.0, "buses": [{buses}], "branches": [{branches}]}}"#)).unwrap()
    }

    #[test]
    fn hub_reading_and_masked_leaves() {
        let sys = star();
        let x = StateVector::from_complex(&[
            Complex64::new(1.0, 0.0),
            Complex64::from_polar(0.99, -0.01),
            Complex64::from_polar(0.98, -0.02),
            Complex64::from_polar(0.99, -0.015),
            Complex64::from_polar(0.97, -0.03),
        ]);
        let ms = synthesize_measurements(&sys, std::slice::from_ref(&x), &PmuPlacement::new(vec![0], Provenance::User), 0.0, 0).unwrap();
        let f = build_node_features(&ms.instances[0], &sys);
        assert_eq!(f.len(), 5);
        let hub = f.rows[0];
        assert!((hub[0] - 1.0).abs() < 1e-15 && hub[1].abs() < 1e-15);
        assert_eq!((hub[2], hub[5], hub[6]), (1.0, 1.0, 1.0));

        let ybus = AdmittanceModel::build(&sys);
        let v = x.to_complex();
        let mean: Complex64 = ybus.branches.iter().map(|b| b.from_current(&v)).sum::<Complex64>() / 4.0;
        assert!((hub[3] - mean.re).abs() < 1e-12 && (hub[4] - mean.im).abs() < 1e-12);
        for leaf in &f.rows[1..] {
            assert_eq!(*leaf, [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.25]);
        }
    }
}
