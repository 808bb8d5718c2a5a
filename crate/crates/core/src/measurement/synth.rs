//! Noisy phasor synthesis and the measurement-set file.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::phasor::{channels_for, polar_to_rectangular, Channel, PhasorKind, PhasorMeasurement, RectangularMeasurement};
use super::placement::{PmuPlacement, Provenance};
use crate::error::{Error, Result};
use crate::power::{AdmittanceModel, PowerSystem, StateVector};
use crate::rng::{self, Domain};

/// Measurement variance used throughout the experiments.
pub const DEFAULT_VARIANCE: f64 = 1e-5;

/// Readings of one time instance, sorted by channel.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementInstance {
    pub tau: usize,
    pub records: Vec<PhasorMeasurement>,
}

impl MeasurementInstance {
    pub fn rectangular(&self, ybus: &AdmittanceModel) -> Result<Vec<RectangularMeasurement>> {
        self.records.iter().map(|m| polar_to_rectangular(m, ybus)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub system: Option<String>,
    pub placement: PmuPlacement,
    /// Variance of the injected noise; also the declared variance of every record.
    pub variance: f64,
    pub seed: u64,
    pub instances: Vec<MeasurementInstance>,
}

impl MeasurementSet {
    pub fn instance(&self, tau: usize) -> Option<&MeasurementInstance> {
        self.instances.iter().find(|i| i.tau == tau)
    }

    /// Same readings with a different declared variance (for weighting exact readings).
    pub fn with_declared_variance(&self, variance: f64) -> Self {
        let mut out = self.clone();
        for inst in &mut out.instances {
            for r in &mut inst.records {
                r.variance = variance;
            }
        }
        out
    }
}

/// Exact polar readings plus independent zero-mean Gaussian noise of variance
/// `variance` on magnitude and angle. `exact_states[k]` is the state at τ = k + 1.
pub fn synthesize_measurements(
    system: &PowerSystem,
    exact_states: &[StateVector],
    placement: &PmuPlacement,
    variance: f64,
    seed: u64,
) -> Result<MeasurementSet> {
    if !(variance >= 0.0) || !variance.is_finite() {
        return Err(Error::Config(format!("measurement variance must be >= 0, got {variance}")));
    }
    let n = system.bus_count();
    if let Some(bad) = exact_states.iter().position(|s| s.bus_count() != n) {
        return Err(Error::Dimension(format!(
            "state for tau={} has {} buses, system has {n}",
            bad + 1,
            exact_states[bad].bus_count()
        )));
    }
    let ybus = AdmittanceModel::build(system);
    let channels = channels_for(system, placement);
    let sigma = variance.sqrt();

    let instances = exact_states
        .iter()
        .enumerate()
        .map(|(k, state)| {
            let tau = k + 1;
            let v = state.to_complex();
            let records = channels
                .iter()
                .map(|ch| {
                    let exact = ch.evaluate(&ybus, &v);
                    let (mut magnitude, mut angle) = exact.to_polar();
                    if variance > 0.0 {
                        let mut g = rng::stream(seed, Domain::MeasurementNoise, &[tau as u64, ch.key()]);
                        let dm: f64 = StandardNormal.sample(&mut g);
                        let da: f64 = StandardNormal.sample(&mut g);
                        magnitude += sigma * dm;
                        angle += sigma * da;
                    }
                    PhasorMeasurement {
                        channel: *ch,
                        magnitude,
                        angle,
                        variance,
                        tau,
                    }
                })
                .collect();
            MeasurementInstance { tau, records }
        })
        .collect();

    Ok(MeasurementSet {
        system: system.name.clone(),
        placement: placement.clone(),
        variance,
        seed,
        instances,
    })
}

// ---- file format -------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordDoc {
    kind: PhasorKind,
    /// Document bus id for voltages, branch index for currents.
    location: i64,
    magnitude: f64,
    angle: f64,
    variance: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDoc {
    tau: usize,
    records: Vec<RecordDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasurementDoc {
    system: Option<String>,
    placement: Vec<i64>,
    placement_provenance: Provenance,
    variance: f64,
    seed: u64,
    instances: Vec<InstanceDoc>,
}

impl MeasurementSet {
    /// Polar records only; rectangular forms are recomputed on load.
    pub fn to_json(&self, system: &PowerSystem) -> String {
        let doc = MeasurementDoc {
            system: self.system.clone(),
            placement: self.placement.original_ids(system),
            placement_provenance: self.placement.provenance,
            variance: self.variance,
            seed: self.seed,
            instances: self
                .instances
                .iter()
                .map(|inst| InstanceDoc {
                    tau: inst.tau,
                    records: inst
                        .records
                        .iter()
                        .map(|r| RecordDoc {
                            kind: r.channel.kind,
                            location: match r.channel.kind {
                                PhasorKind::BusVoltage => system.original_ids[r.channel.location],
                                _ => r.channel.location as i64,
                            },
                            magnitude: r.magnitude,
                            angle: r.angle,
                            variance: r.variance,
                        })
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_string(&doc).expect("measurement documents always serialize")
    }

    pub fn from_json(text: &str, system: &PowerSystem) -> Result<Self> {
        let doc: MeasurementDoc = serde_json::from_str(text)?;
        let placement = PmuPlacement::from_original_ids(system, &doc.placement, doc.placement_provenance)?;
        let mut instances = Vec::with_capacity(doc.instances.len());
        for inst in doc.instances {
            let mut records = Vec::with_capacity(inst.records.len());
            for r in inst.records {
                let location = match r.kind {
                    PhasorKind::BusVoltage => system
                        .index_of(r.location)
                        .ok_or_else(|| Error::Config(format!("measurement at unknown bus {}", r.location)))?,
                    _ => usize::try_from(r.location)
                        .ok()
                        .filter(|&k| k < system.branches.len())
                        .ok_or_else(|| Error::Config(format!("measurement on unknown branch {}", r.location)))?,
                };
                records.push(PhasorMeasurement {
                    channel: Channel { kind: r.kind, location },
                    magnitude: r.magnitude,
                    angle: r.angle,
                    variance: r.variance,
                    tau: inst.tau,
                });
            }
            records.sort_by_key(|r| r.channel);
            instances.push(MeasurementInstance { tau: inst.tau, records });
        }
        Ok(MeasurementSet {
            system: doc.system,
            placement,
            variance: doc.variance,
            seed: doc.seed,
            instances,
        })
    }
}
