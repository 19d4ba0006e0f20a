//! Detector-encoder-classifier pipeline for street-view land-use scenes.
//!
//! Building detections (or ground-truth boxes) are encoded into fixed-length
//! sequences of semantic vectors, either as a plain co-occurrence set or as a
//! layout sequence ordered around the most salient building, and classified
//! into four land-use categories by a small two-layer recurrent network.
//!
//! The recurrent core and the heatmap grids are generic over the scalar type
//! (see [`Scalar`]); the aliases at the crate root pick `f64`, which is what
//! the command-line tool and the gradient checks use.

// `!(x > 0.0)` style checks deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod encoder;
pub mod error;
pub mod experiments;
pub mod heatmap;
pub mod metrics;
pub mod rnn;
pub mod scalar;
pub mod scene;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use encoder::{EncoderConfig, EncoderKind, SceneMetadata, SemanticVector};
pub use metrics::{ConfusionMatrix, MacroMetrics};
pub use rnn::{Architecture, CellKind, ModelConfig, TrainConfig};
pub use scene::{BBox, SceneRecord, Taxonomy};

/// Double-precision model parameters.
pub type ModelParams = rnn::ModelParams<f64>;
/// Single-precision model parameters.
pub type ModelParamsF32 = rnn::ModelParams<f32>;
/// Double-precision prediction.
pub type Prediction = rnn::Prediction<f64>;
/// Double-precision gradient set.
pub type Gradients = rnn::ModelParams<f64>;
/// Double-precision heat field.
pub type HeatField = heatmap::HeatField<f64>;
/// Single-precision heat field.
pub type HeatFieldF32 = heatmap::HeatField<f32>;
/// Double-precision trained model checkpoint.
pub type Checkpoint = rnn::Checkpoint;
