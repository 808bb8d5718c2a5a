//! Message-passing model and its portable weight file.
//!
//! The weight file is a JSON document:
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "k": 2,
//!   "input_dim": 7,
//!   "hidden_dim": 16,
//!   "activation": "tanh",
//!   "layers": [{"w_self": [...], "w_neigh": [...], "bias": [...]}, ...],
//!   "w_out": [...],
//!   "b_out": [0.0, 0.0]
//! }
//! ```
//!
//! Matrices are flattened row-major. Layer 0 maps `input_dim` to
//! `hidden_dim`, every later layer maps `hidden_dim` to `hidden_dim`, and
//! `w_out` is `2 × hidden_dim`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::features::FEATURE_DIM;
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
pub const OUTPUT_DIM: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    fn from_flat(name: &str, data: Vec<f64>, rows: usize, cols: usize) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{name} has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Accumulates `self · x` into `out`.
    pub fn mul_add(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            let mut acc = 0.0;
            for (w, v) in row.iter().zip(x) {
                acc += w * v;
            }
            *o += acc;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub w_self: Matrix,
    pub w_neigh: Matrix,
    pub bias: Vec<f64>,
}

impl Layer {
    /// `act(W_self·h + W_neigh·m + b)`
    pub fn forward(&self, activation: Activation, own: &[f64], neighbor_mean: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.bias.len()];
        self.w_self.mul_add(own, &mut out);
        self.w_neigh.mul_add(neighbor_mean, &mut out);
        for (o, b) in out.iter_mut().zip(&self.bias) {
            *o = activation.apply(*o + b);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GnnModel {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub activation: Activation,
    pub layers: Vec<Layer>,
    pub w_out: Matrix,
    pub b_out: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerRecord {
    pub w_self: Vec<f64>,
    pub w_neigh: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub format_version: u32,
    pub k: usize,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub activation: Activation,
    pub layers: Vec<LayerRecord>,
    pub w_out: Vec<f64>,
    pub b_out: Vec<f64>,
}

const IDENTITY_MODEL: &str = include_str!("../../data/identity_model.json");

impl GnnModel {
    /// Number of aggregation rounds.
    pub fn k(&self) -> usize {
        self.layers.len()
    }

    pub fn from_document(doc: ModelDocument) -> Result<Self> {
        if doc.format_version != FORMAT_VERSION {
            return Err(Error::ModelVersion {
                found: doc.format_version,
                expected: FORMAT_VERSION,
            });
        }
        if doc.k == 0 {
            return Err(Error::ModelFormat("k must be at least 1".into()));
        }
        if doc.layers.len() != doc.k {
            return Err(Error::Dimension(format!("k = {} but {} layers given", doc.k, doc.layers.len())));
        }
        if doc.input_dim != FEATURE_DIM {
            return Err(Error::Dimension(format!(
                "input_dim {} does not match the {FEATURE_DIM} node features",
                doc.input_dim
            )));
        }
        if doc.hidden_dim == 0 {
            return Err(Error::Dimension("hidden_dim must be positive".into()));
        }
        let finite = |name: &str, v: &[f64]| {
            if v.iter().all(|x| x.is_finite()) {
                Ok(())
            } else {
                Err(Error::ModelFormat(format!("{name} contains non-finite values")))
            }
        };
        let h = doc.hidden_dim;
        let mut layers = Vec::with_capacity(doc.k);
        for (l, rec) in doc.layers.into_iter().enumerate() {
            let width = if l == 0 { doc.input_dim } else { h };
            for (name, v) in [("w_self", &rec.w_self), ("w_neigh", &rec.w_neigh), ("bias", &rec.bias)] {
                finite(&format!("layer {l} {name}"), v)?;
            }
            if rec.bias.len() != h {
                return Err(Error::Dimension(format!("layer {l} bias has {} entries, expected {h}", rec.bias.len())));
            }
            layers.push(Layer {
                w_self: Matrix::from_flat(&format!("layer {l} w_self"), rec.w_self, h, width)?,
                w_neigh: Matrix::from_flat(&format!("layer {l} w_neigh"), rec.w_neigh, h, width)?,
                bias: rec.bias,
            });
        }
        finite("w_out", &doc.w_out)?;
        finite("b_out", &doc.b_out)?;
        if doc.b_out.len() != OUTPUT_DIM {
            return Err(Error::Dimension(format!("b_out has {} entries, expected {OUTPUT_DIM}", doc.b_out.len())));
        }
        Ok(GnnModel {
            input_dim: doc.input_dim,
            hidden_dim: h,
            activation: doc.activation,
            layers,
            w_out: Matrix::from_flat("w_out", doc.w_out, OUTPUT_DIM, h)?,
            b_out: doc.b_out,
        })
    }

    pub fn to_document(&self) -> ModelDocument {
        ModelDocument {
            format_version: FORMAT_VERSION,
            k: self.k(),
            input_dim: self.input_dim,
            hidden_dim: self.hidden_dim,
            activation: self.activation,
            layers: self
                .layers
                .iter()
                .map(|l| LayerRecord {
                    w_self: l.w_self.data.clone(),
                    w_neigh: l.w_neigh.data.clone(),
                    bias: l.bias.clone(),
                })
                .collect(),
            w_out: self.w_out.data.clone(),
            b_out: self.b_out.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("model serializes")
    }

    /// Reference model that passes the measured voltage straight through.
    pub fn identity() -> Self {
        load_model(IDENTITY_MODEL).expect("bundled identity model is valid")
    }

    pub fn readout(&self, h: &[f64]) -> [f64; 2] {
        let mut out = [self.b_out[0], self.b_out[1]];
        let mut acc = [0.0; 2];
        self.w_out.mul_add(h, &mut acc);
        out[0] += acc[0];
        out[1] += acc[1];
        out
    }
}

/// Parses and validates a weight file.
pub fn load_model(text: &str) -> Result<GnnModel> {
    let doc: ModelDocument = serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
    GnnModel::from_document(doc)
}

pub fn load_model_file(path: impl AsRef<Path>) -> Result<GnnModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    load_model(&text)
}
