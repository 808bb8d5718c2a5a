//! k-layer mean-aggregation GNN over the bus graph.

pub mod features;
pub mod infer;
pub mod model;

pub use features::{build_node_features, FeatureRow, NodeFeatures, FEATURE_DIM};
pub use infer::{infer_centralized, infer_khop, KhopNeighborhood};
pub use model::{load_model, load_model_file, Activation, GnnModel, Layer, LayerRecord, ModelDocument, FORMAT_VERSION};
