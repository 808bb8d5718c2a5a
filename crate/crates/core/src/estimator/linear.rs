use crate::error::{Error, Result};
use crate::measurement::{CoefficientRow, MeasurementInstance};
use crate::power::{AdmittanceModel, StateVector};

/// Stacked linear measurement model `z = H·x + e`, `e_i ~ N(0, v_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    /// Sparse rows of `H`, each sorted by column.
    pub rows: Vec<CoefficientRow>,
    pub observations: Vec<f64>,
    pub variances: Vec<f64>,
    pub columns: usize,
    /// Bus hosting the PMU behind each row.
    pub home_buses: Vec<usize>,
}

impl LinearModel {
    pub fn new(rows: Vec<CoefficientRow>, observations: Vec<f64>, variances: Vec<f64>, columns: usize) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyMeasurements);
        }
        if rows.len() != observations.len() || rows.len() != variances.len() {
            return Err(Error::Dimension(format!(
                "{} rows, {} observations, {} variances",
                rows.len(),
                observations.len(),
                variances.len()
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.is_empty() || row.iter().any(|&(c, _)| c >= columns) {
                return Err(Error::Dimension(format!("row {i} is empty or exceeds {columns} columns")));
            }
            if !(variances[i] > 0.0) {
                return Err(Error::ZeroVariance(format!("row {i}")));
            }
        }
        // without channel information a row belongs to the bus of its first column
        let buses = (columns / 2).max(1);
        let home_buses = rows.iter().map(|r| r[0].0 % buses).collect();
        Ok(LinearModel {
            rows,
            observations,
            variances,
            columns,
            home_buses,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// `h_i · x`
    pub fn predict_row(&self, i: usize, x: &[f64]) -> f64 {
        self.rows[i].iter().map(|&(j, c)| c * x[j]).sum()
    }

    /// Reorders rows by `perm` (row `k` of the result is row `perm[k]`).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        LinearModel {
            rows: perm.iter().map(|&p| self.rows[p].clone()).collect(),
            observations: perm.iter().map(|&p| self.observations[p]).collect(),
            variances: perm.iter().map(|&p| self.variances[p]).collect(),
            columns: self.columns,
            home_buses: perm.iter().map(|&p| self.home_buses[p]).collect(),
        }
    }
}

/// Stacks the real and imaginary observations of every reading, in channel order.
pub fn build_linear_model(instance: &MeasurementInstance, ybus: &AdmittanceModel) -> Result<LinearModel> {
    if instance.records.is_empty() {
        return Err(Error::EmptyMeasurements);
    }
    let mut rect = instance.rectangular(ybus)?;
    rect.sort_by_key(|r| r.channel);
    let mut rows = Vec::with_capacity(2 * rect.len());
    let mut observations = Vec::with_capacity(2 * rect.len());
    let mut variances = Vec::with_capacity(2 * rect.len());
    let mut home_buses = Vec::with_capacity(2 * rect.len());
    for r in rect {
        let home = r.channel.pmu_bus(ybus);
        let [re, im] = r.rows;
        for (k, row) in [re, im].into_iter().enumerate() {
            rows.push(row);
            observations.push(r.value[k]);
            variances.push(r.variance[k]);
            home_buses.push(home);
        }
    }
    let mut lm = LinearModel::new(rows, observations, variances, 2 * ybus.size())?;
    lm.home_buses = home_buses;
    Ok(lm)
}

/// Weighted residual sum of squares `Σ (z_i - h_i·x)² / v_i`.
pub fn compute_wrss(lm: &LinearModel, x: &StateVector) -> f64 {
    assert_eq!(x.len(), lm.columns, "state dimension does not match model");
    (0..lm.len())
        .map(|i| {
            let r = lm.observations[i] - lm.predict_row(i, x.values());
            r * r / lm.variances[i]
        })
        .sum()
}

/// `method / wls`; undefined when the reference WRSS is zero.
pub fn normalized_wrss(method_wrss: f64, wls_wrss: f64) -> Result<f64> {
    if !(wls_wrss > 0.0) {
        return Err(Error::UndefinedRatio);
    }
    Ok(method_wrss / wls_wrss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{synthesize_measurements, PmuPlacement, Provenance};
    use crate::power::{solve_power_flow, PowerSystem};

    #[test]
    fn voltage_reading_gives_two_unit_rows() {
        let sys = PowerSystem::load_case(
            r#"{"base_mva": 100.0,
            "buses": [{"id": 1, "kind": "slack", "active_load": 0.0, "reactive_load": 0.0, "voltage_setpoint": 1.0},
                      {"id": 2, "kind": "load", "active_load": 0.0, "reactive_load": 0.0}],
            "branches": [{"from_bus": 1, "to_bus": 2, "series_resistance": 0.0, "series_reactance": 0.1}]}"#,
        )
        .unwrap();
        let ybus = AdmittanceModel::build(&sys);
        let x = StateVector::flat(2);
        let mut ms = synthesize_measurements(&sys, &[x], &PmuPlacement::new(vec![0], Provenance::User), 1e-5, 0).unwrap();
        ms.instances[0].records.retain(|r| r.channel.kind == crate::measurement::PhasorKind::BusVoltage);
        let lm = build_linear_model(&ms.instances[0], &ybus).unwrap();
        assert_eq!(lm.len(), 2);
        assert_eq!(lm.rows, vec![vec![(0, 1.0)], vec![(2, 1.0)]]);
    }

    #[test]
    fn ieee30_model_dimensions() {
        let sys = PowerSystem::ieee30();
        let ybus = AdmittanceModel::build(&sys);
        let x = solve_power_flow(&sys, 1e-10, 20).unwrap().state;
        let p = PmuPlacement::bundled("ieee30", &sys).unwrap();
        let ms = synthesize_measurements(&sys, &[x], &p, 1e-5, 0).unwrap();
        let lm = build_linear_model(&ms.instances[0], &ybus).unwrap();
        // incident in-service branches of buses 1,2,6,9,10,12,15,19,25,27:
        // 2 + 4 + 7 + 3 + 6 + 5 + 4 + 2 + 3 + 4 = 40
        assert_eq!(lm.len(), 2 * (10 + 40));
        assert_eq!(lm.columns, 60);
        let pmu: Vec<usize> = p.buses.clone();
        assert!(lm.home_buses.iter().all(|b| pmu.contains(b)));
        assert_eq!(lm, build_linear_model(&ms.instances[0], &ybus).unwrap());
    }

    #[test]
    fn empty_instance_is_an_error() {
        let ybus = AdmittanceModel::build(&PowerSystem::ieee30());
        let inst = MeasurementInstance { tau: 1, records: vec![] };
        assert!(matches!(build_linear_model(&inst, &ybus), Err(Error::EmptyMeasurements)));
    }

    #[test]
    fn wrss_arithmetic() {
        let lm = LinearModel::new(vec![vec![(0, 1.0)]], vec![1.0], vec![1e-5], 2).unwrap();
        let x = StateVector::from_values(vec![0.99, 0.0]);
        assert!((compute_wrss(&lm, &x) - 10.0).abs() < 1e-9);
        let exact = StateVector::from_values(vec![1.0, 0.0]);
        assert_eq!(compute_wrss(&lm, &exact), 0.0);
    }

    #[test]
    fn wrss_ignores_row_order() {
        let lm = LinearModel::new(
            vec![vec![(0, 1.0)], vec![(0, 2.0), (1, -1.0)], vec![(1, 0.5)]],
            vec![0.3, 1.1, -0.2],
            vec![1e-3, 2e-2, 5e-1],
            2,
        )
        .unwrap();
        let x = StateVector::from_values(vec![0.25, -0.4]);
        let a = compute_wrss(&lm, &x);
        for perm in [[2, 0, 1], [1, 2, 0], [2, 1, 0]] {
            assert!((compute_wrss(&lm.permuted(&perm), &x) - a).abs() <= 1e-12 * a);
        }
    }

    #[test]
    fn ratio_rules() {
        assert_eq!(normalized_wrss(3.0, 3.0).unwrap(), 1.0);
        assert!(matches!(normalized_wrss(1.0, 0.0), Err(Error::UndefinedRatio)));
    }
}
