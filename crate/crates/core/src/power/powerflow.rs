//! Newton-Raphson AC power flow in polar coordinates.
//!
//! Unknowns are the angles of every non-slack bus and the magnitudes of
//! load buses. Generator reactive limits are not enforced.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::admittance::AdmittanceModel;
use super::case::{BusKind, PowerSystem};
use super::state::StateVector;
use crate::error::{Error, Result};

pub const DEFAULT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_MAX_ITERATIONS: usize = 20;

#[derive(Debug, Clone)]
pub struct PowerFlowSolution {
    pub state: StateVector,
    pub iterations: usize,
    /// Largest absolute active/reactive mismatch over the equations solved.
    pub mismatch: f64,
}

/// Active mismatch at every non-slack bus and reactive mismatch at every load bus.
pub fn injection_mismatch(
    system: &PowerSystem,
    ybus: &AdmittanceModel,
    v: &[Complex64],
) -> Vec<f64> {
    let s = ybus.power_injections(v);
    let mut out = Vec::new();
    for b in &system.buses {
        if b.kind == BusKind::Slack {
            continue;
        }
        let (p, _) = b.scheduled_injection();
        out.push(s[b.id].re - p);
    }
    for b in &system.buses {
        if b.kind == BusKind::Load {
            let (_, q) = b.scheduled_injection();
            out.push(s[b.id].im - q);
        }
    }
    out
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn initial_voltages(system: &PowerSystem) -> Vec<Complex64> {
    system
        .buses
        .iter()
        .map(|b| match b.kind {
            BusKind::Slack => Complex64::from_polar(
                b.voltage_setpoint.unwrap_or(1.0),
                b.angle_setpoint.unwrap_or(0.0),
            ),
            BusKind::Generator => Complex64::new(b.voltage_setpoint.unwrap_or(1.0), 0.0),
            BusKind::Load => Complex64::new(1.0, 0.0),
        })
        .collect()
}

/// Solves the power flow from a flat start.
pub fn solve_power_flow(
    system: &PowerSystem,
    tolerance: f64,
    max_iterations: usize,
) -> Result<PowerFlowSolution> {
    if !(tolerance > 0.0) {
        return Err(Error::Config("power-flow tolerance must be positive".into()));
    }
    let ybus = AdmittanceModel::build(system);
    let n = system.bus_count();
    let non_slack: Vec<usize> = (0..n).filter(|&i| i != system.slack).collect();
    let pq: Vec<usize> = (0..n)
        .filter(|&i| system.buses[i].kind == BusKind::Load)
        .collect();
    // position of each bus in the angle / magnitude blocks of the unknown vector
    let mut angle_pos = vec![usize::MAX; n];
    for (k, &i) in non_slack.iter().enumerate() {
        angle_pos[i] = k;
    }
    let mut mag_pos = vec![usize::MAX; n];
    for (k, &i) in pq.iter().enumerate() {
        mag_pos[i] = non_slack.len() + k;
    }
    let dim = non_slack.len() + pq.len();

    let mut vm: Vec<f64>;
    let mut va: Vec<f64>;
    {
        let v0 = initial_voltages(system);
        vm = v0.iter().map(|c| c.norm()).collect();
        va = v0.iter().map(|c| c.arg()).collect();
    }
    let voltages =
        |vm: &[f64], va: &[f64]| -> Vec<Complex64> { vm.iter().zip(va).map(|(&m, &a)| Complex64::from_polar(m, a)).collect() };

    let mut iterations = 0;
    loop {
        let v = voltages(&vm, &va);
        let f = injection_mismatch(system, &ybus, &v);
        let mismatch = max_abs(&f);
        if mismatch <= tolerance {
            return Ok(PowerFlowSolution {
                state: StateVector::from_complex(&v),
                iterations,
                mismatch,
            });
        }
        if iterations >= max_iterations {
            return Err(Error::NotConverged {
                iterations,
                mismatch,
            });
        }

        // dS/dVa = j·diag(V)·conj(diag(I) - Y·diag(V))
        // dS/dVm = diag(V)·conj(Y·diag(V/|V|)) + conj(diag(I))·diag(V/|V|)
        let current = ybus.currents(&v);
        let mut jac = DMatrix::<f64>::zeros(dim, dim);
        for (row_p, &i) in non_slack.iter().enumerate() {
            let row_q = mag_pos[i];
            let vi = v[i];
            for &(j, y) in &ybus.rows[i] {
                let unit_j = v[j] / vm[j];
                let mut d_va = Complex64::i() * vi * (-(y * v[j])).conj();
                let mut d_vm = vi * (y * unit_j).conj();
                if i == j {
                    d_va += Complex64::i() * vi * current[i].conj();
                    d_vm += current[i].conj() * unit_j;
                }
                if angle_pos[j] != usize::MAX {
                    jac[(row_p, angle_pos[j])] = d_va.re;
                    if row_q != usize::MAX {
                        jac[(row_q, angle_pos[j])] = d_va.im;
                    }
                }
                if mag_pos[j] != usize::MAX {
                    jac[(row_p, mag_pos[j])] = d_vm.re;
                    if row_q != usize::MAX {
                        jac[(row_q, mag_pos[j])] = d_vm.im;
                    }
                }
            }
        }

        let rhs = DVector::from_iterator(dim, f.iter().map(|x| -x));
        let dx = jac
            .lu()
            .solve(&rhs)
            .filter(|dx| dx.iter().all(|x| x.is_finite()))
            .ok_or(Error::SingularJacobian(iterations))?;
        for &i in &non_slack {
            va[i] += dx[angle_pos[i]];
        }
        for &i in &pq {
            vm[i] += dx[mag_pos[i]];
        }
        iterations += 1;
    }
}
