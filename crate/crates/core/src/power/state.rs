use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Bus voltages in rectangular form.
///
/// Layout is `[re_0 .. re_{n-1}, im_0 .. im_{n-1}]`; the same ordering is used
/// for the state columns of every linear measurement model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    values: Vec<f64>,
}

impl StateVector {
    pub fn from_values(values: Vec<f64>) -> Self {
        assert!(values.len().is_multiple_of(2), "state vector length must be even");
        StateVector { values }
    }

    pub fn from_complex(v: &[Complex64]) -> Self {
        let mut values: Vec<f64> = v.iter().map(|c| c.re).collect();
        values.extend(v.iter().map(|c| c.im));
        StateVector { values }
    }

    pub fn flat(n: usize) -> Self {
        let mut values = vec![1.0; n];
        values.extend(std::iter::repeat_n(0.0, n));
        StateVector { values }
    }

    pub fn bus_count(&self) -> usize {
        self.values.len() / 2
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn voltage(&self, bus: usize) -> Complex64 {
        let n = self.bus_count();
        Complex64::new(self.values[bus], self.values[n + bus])
    }

    pub fn to_complex(&self) -> Vec<Complex64> {
        (0..self.bus_count()).map(|i| self.voltage(i)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Column index of the real part of a bus voltage.
    pub fn re_index(n: usize, bus: usize) -> usize {
        debug_assert!(bus < n);
        bus
    }

    /// Column index of the imaginary part of a bus voltage.
    pub fn im_index(n: usize, bus: usize) -> usize {
        n + bus
    }

    pub fn max_abs_diff(&self, other: &StateVector) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
