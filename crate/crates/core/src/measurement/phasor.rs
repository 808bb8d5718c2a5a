//! Phasor channels and their rectangular (linear) form.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::placement::PmuPlacement;
use crate::error::{Error, Result};
use crate::power::{AdmittanceModel, PowerSystem, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhasorKind {
    BusVoltage,
    BranchCurrentFrom,
    BranchCurrentTo,
}

/// What a measurement observes: a bus voltage or one terminal current of a branch.
///
/// Ordering (kind, then location) is the canonical row order of every linear model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Channel {
    pub kind: PhasorKind,
    /// Bus index for voltages, branch index for currents.
    pub location: usize,
}

impl Channel {
    pub fn voltage(bus: usize) -> Self {
        Channel {
            kind: PhasorKind::BusVoltage,
            location: bus,
        }
    }

    /// Stable numeric key, used to address noise streams.
    pub fn key(&self) -> u64 {
        ((self.kind as u64) << 40) | self.location as u64
    }

    /// Bus hosting the PMU that produces this channel.
    pub fn pmu_bus(&self, ybus: &AdmittanceModel) -> usize {
        match self.kind {
            PhasorKind::BusVoltage => self.location,
            PhasorKind::BranchCurrentFrom => ybus.branches[self.location].from_bus,
            PhasorKind::BranchCurrentTo => ybus.branches[self.location].to_bus,
        }
    }

    /// Exact complex value of the channel at a voltage state.
    pub fn evaluate(&self, ybus: &AdmittanceModel, v: &[Complex64]) -> Complex64 {
        match self.kind {
            PhasorKind::BusVoltage => v[self.location],
            PhasorKind::BranchCurrentFrom => ybus.branches[self.location].from_current(v),
            PhasorKind::BranchCurrentTo => ybus.branches[self.location].to_current(v),
        }
    }
}

/// Channels reported by a placement: each PMU bus gives its voltage and the
/// current at its own terminal of every in-service incident branch.
pub fn channels_for(system: &PowerSystem, placement: &PmuPlacement) -> Vec<Channel> {
    let mut out = Vec::new();
    for &b in &placement.buses {
        out.push(Channel::voltage(b));
        for k in system.incident_branches(b) {
            let kind = if system.branches[k].from_bus == b {
                PhasorKind::BranchCurrentFrom
            } else {
                PhasorKind::BranchCurrentTo
            };
            out.push(Channel { kind, location: k });
        }
    }
    out.sort_unstable();
    out
}

/// A polar phasor reading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasorMeasurement {
    pub channel: Channel,
    pub magnitude: f64,
    pub angle: f64,
    /// Variance of both the magnitude and the angle reading.
    pub variance: f64,
    pub tau: usize,
}

/// Sparse coefficient row over the 2n state components.
pub type CoefficientRow = Vec<(usize, f64)>;

/// The two scalar observations (real, imaginary) of one phasor.
#[derive(Debug, Clone, PartialEq)]
pub struct RectangularMeasurement {
    pub channel: Channel,
    pub value: [f64; 2],
    pub variance: [f64; 2],
    pub rows: [CoefficientRow; 2],
}

fn push_nonzero(row: &mut CoefficientRow, col: usize, v: f64) {
    if v != 0.0 {
        row.push((col, v));
    }
}

fn current_rows(from: usize, to: usize, a: Complex64, b: Complex64, n: usize) -> [CoefficientRow; 2] {
    // I = a·V_from + b·V_to with V = e + jf:
    //   Re I = a.re e_from - a.im f_from + b.re e_to - b.im f_to
    //   Im I = a.im e_from + a.re f_from + b.im e_to + b.re f_to
    let (ef, ff) = (StateVector::re_index(n, from), StateVector::im_index(n, from));
    let (et, ft) = (StateVector::re_index(n, to), StateVector::im_index(n, to));
    let mut re = Vec::with_capacity(4);
    let mut im = Vec::with_capacity(4);
    push_nonzero(&mut re, ef, a.re);
    push_nonzero(&mut re, ff, -a.im);
    push_nonzero(&mut re, et, b.re);
    push_nonzero(&mut re, ft, -b.im);
    push_nonzero(&mut im, ef, a.im);
    push_nonzero(&mut im, ff, a.re);
    push_nonzero(&mut im, et, b.im);
    push_nonzero(&mut im, ft, b.re);
    re.sort_unstable_by_key(|e| e.0);
    im.sort_unstable_by_key(|e| e.0);
    [re, im]
}

/// Linear coefficient rows (real part, imaginary part) of a channel.
pub fn polar_to_rectangular_rows(channel: Channel, ybus: &AdmittanceModel, n: usize) -> [CoefficientRow; 2] {
    match channel.kind {
        PhasorKind::BusVoltage => {
            let b = channel.location;
            [
                vec![(StateVector::re_index(n, b), 1.0)],
                vec![(StateVector::im_index(n, b), 1.0)],
            ]
        }
        PhasorKind::BranchCurrentFrom => {
            let br = &ybus.branches[channel.location];
            current_rows(br.from_bus, br.to_bus, br.ff, br.ft, n)
        }
        PhasorKind::BranchCurrentTo => {
            let br = &ybus.branches[channel.location];
            current_rows(br.from_bus, br.to_bus, br.tf, br.tt, n)
        }
    }
}

/// Rectangular variances by first-order propagation of equal polar variances.
pub fn rectangular_variances(magnitude: f64, angle: f64, variance: f64) -> [f64; 2] {
    let (s, c) = angle.sin_cos();
    let m2 = magnitude * magnitude;
    let floor = variance * 1e-12;
    [
        (variance * (c * c + m2 * s * s)).max(floor),
        (variance * (s * s + m2 * c * c)).max(floor),
    ]
}

/// Converts a polar reading into two linear observations.
pub fn polar_to_rectangular(m: &PhasorMeasurement, ybus: &AdmittanceModel) -> Result<RectangularMeasurement> {
    if !(m.variance > 0.0) {
        return Err(Error::ZeroVariance(format!("{:?}", m.channel)));
    }
    let (s, c) = m.angle.sin_cos();
    Ok(RectangularMeasurement {
        channel: m.channel,
        value: [m.magnitude * c, m.magnitude * s],
        variance: rectangular_variances(m.magnitude, m.angle, m.variance),
        rows: polar_to_rectangular_rows(m.channel, ybus, ybus.size()),
    })
}
