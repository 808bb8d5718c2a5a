//! PMU placement, phasor synthesis and the rectangular measurement model.

pub mod phasor;
pub mod placement;
pub mod synth;

pub use phasor::{
    channels_for, polar_to_rectangular, Channel, CoefficientRow, PhasorKind, PhasorMeasurement,
    RectangularMeasurement,
};
pub use placement::{greedy_placement, validate_observability, PmuPlacement, Provenance};
pub use synth::{synthesize_measurements, MeasurementInstance, MeasurementSet, DEFAULT_VARIANCE};
