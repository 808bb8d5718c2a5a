//! Pi-model admittances.

use num_complex::Complex64;

use super::case::PowerSystem;

/// Terminal admittance block of one branch:
/// `[I_from; I_to] = [[ff, ft], [tf, tt]] · [V_from; V_to]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchAdmittance {
    pub from_bus: usize,
    pub to_bus: usize,
    pub ff: Complex64,
    pub ft: Complex64,
    pub tf: Complex64,
    pub tt: Complex64,
}

impl BranchAdmittance {
    pub fn from_current(&self, v: &[Complex64]) -> Complex64 {
        self.ff * v[self.from_bus] + self.ft * v[self.to_bus]
    }

    pub fn to_current(&self, v: &[Complex64]) -> Complex64 {
        self.tf * v[self.from_bus] + self.tt * v[self.to_bus]
    }
}

/// Sparse node admittance matrix plus the per-branch blocks it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmittanceModel {
    /// Row `i` holds `(j, Y_ij)` sorted by `j`; structurally symmetric.
    pub rows: Vec<Vec<(usize, Complex64)>>,
    pub branches: Vec<BranchAdmittance>,
    /// Bus shunt admittances `G + jB`.
    pub shunts: Vec<Complex64>,
}

/// Series admittance `1 / (r + jx)`.
pub fn series_admittance(r: f64, x: f64) -> Complex64 {
    Complex64::new(r, x).inv()
}

fn add(row: &mut Vec<(usize, Complex64)>, col: usize, y: Complex64) {
    match row.binary_search_by_key(&col, |e| e.0) {
        Ok(p) => row[p].1 += y,
        Err(p) => row.insert(p, (col, y)),
    }
}

impl AdmittanceModel {
    pub fn build(system: &PowerSystem) -> Self {
        let n = system.bus_count();
        let mut rows: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); n];
        let shunts: Vec<Complex64> = system
            .buses
            .iter()
            .map(|b| Complex64::new(b.shunt_conductance, b.shunt_susceptance))
            .collect();
        for (i, &y) in shunts.iter().enumerate() {
            add(&mut rows[i], i, y);
        }

        let zero = Complex64::new(0.0, 0.0);
        let branches = system
            .branches
            .iter()
            .map(|br| {
                let (f, t) = (br.from_bus, br.to_bus);
                if !br.in_service {
                    return BranchAdmittance {
                        from_bus: f,
                        to_bus: t,
                        ff: zero,
                        ft: zero,
                        tf: zero,
                        tt: zero,
                    };
                }
                let ys = series_admittance(br.series_resistance, br.series_reactance);
                let tap = Complex64::from_polar(br.tap_ratio, br.phase_shift);
                let ytt = ys + Complex64::new(0.0, br.total_charging_susceptance / 2.0);
                let block = BranchAdmittance {
                    from_bus: f,
                    to_bus: t,
                    ff: ytt / (br.tap_ratio * br.tap_ratio),
                    ft: -ys / tap.conj(),
                    tf: -ys / tap,
                    tt: ytt,
                };
                add(&mut rows[f], f, block.ff);
                add(&mut rows[f], t, block.ft);
                add(&mut rows[t], f, block.tf);
                add(&mut rows[t], t, block.tt);
                block
            })
            .collect();

        AdmittanceModel {
            rows,
            branches,
            shunts,
        }
    }

    pub fn size(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.rows[i]
            .binary_search_by_key(&j, |e| e.0)
            .map(|p| self.rows[i][p].1)
            .unwrap_or_default()
    }

    /// Nodal current injections `I = Y·V`.
    pub fn currents(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(j, y)| y * v[j]).sum())
            .collect()
    }

    /// Complex power injections `S_i = V_i · conj(I_i)`.
    pub fn power_injections(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.currents(v)
            .into_iter()
            .zip(v)
            .map(|(i, &vi)| vi * i.conj())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::power::case::PowerSystem;

    fn line(extra: &str) -> PowerSystem {
        let text = format!(
            r#"{{"base_mva": 100.0,
            "buses": [
              {{"id": 1, "kind": "slack", "active_load": 0.0, "reactive_load": 0.0, "voltage_setpoint": 1.0}},
              {{"id": 2, "kind": "load", "active_load": 0.0, "reactive_load": 0.0}}
            ],
            "branches": [
              {{"from_bus": 1, "to_bus": 2, "series_resistance": 0.01, "series_reactance": 0.1}}
              {extra}
            ]}}"#
        );
        PowerSystem::load_case(&text).unwrap()
    }

    #[test]
    fn series_admittance_matches_reciprocal() {
        // 1/(0.01 + j0.1) = (0.01 - j0.1) / 0.0101
        let y = series_admittance(0.01, 0.1);
        assert!((y.re - 0.990_099_009_900_990_1).abs() < 1e-12);
        assert!((y.im + 9.900_990_099_009_901).abs() < 1e-12);
        let ym = AdmittanceModel::build(&line(""));
        assert!((ym.get(0, 1) + y).norm() < 1e-15);
        assert!((ym.get(0, 0) - y).norm() < 1e-15);
    }

    #[test]
    fn out_of_service_branch_contributes_nothing() {
        let sys = line(r#", {"from_bus": 1, "to_bus": 2, "series_resistance": 0.02, "series_reactance": 0.3, "in_service": false}"#);
        let single = AdmittanceModel::build(&line(""));
        let ym = AdmittanceModel::build(&sys);
        assert_eq!(ym.rows, single.rows);
        assert_eq!(ym.branches[1].ff, Complex64::default());
    }

    #[test]
    fn parallel_branches_superpose() {
        let single = AdmittanceModel::build(&line(""));
        let double = AdmittanceModel::build(&line(
            r#", {"from_bus": 1, "to_bus": 2, "series_resistance": 0.01, "series_reactance": 0.1}"#,
        ));
        assert!((double.get(0, 1) - 2.0 * single.get(0, 1)).norm() < 1e-14);
    }

    #[test]
    fn branch_blocks_sum_to_node_currents() {
        let sys = PowerSystem::ieee118();
        let ym = AdmittanceModel::build(&sys);
        let v: Vec<Complex64> = (0..sys.bus_count())
            .map(|i| Complex64::from_polar(1.0 + 0.001 * i as f64, -0.01 * i as f64))
            .collect();
        let mut acc: Vec<Complex64> = ym.shunts.iter().zip(&v).map(|(y, v)| y * v).collect();
        for b in &ym.branches {
            acc[b.from_bus] += b.from_current(&v);
            acc[b.to_bus] += b.to_current(&v);
        }
        for (a, i) in acc.iter().zip(ym.currents(&v)) {
            assert!((a - i).norm() < 1e-10);
        }
    }

    #[test]
    fn sparsity_pattern_is_symmetric() {
        let ym = AdmittanceModel::build(&PowerSystem::ieee30());
        for (i, row) in ym.rows.iter().enumerate() {
            for &(j, _) in row {
                assert!(ym.rows[j].iter().any(|&(k, _)| k == i));
            }
        }
    }
}
