//! Two-layer recurrent classifier over scene metadata.
//!
//! Three cell types (simple tanh, GRU, LSTM) and two readouts:
//! [`Architecture::UniLastConcat`] concatenates the top layer's hidden state
//! at every timestep, [`Architecture::BiAllConcat`] concatenates the final
//! hidden state of each direction of every layer. Both feed one dense layer
//! and a softmax over the land-use categories.

mod cell;
mod checkpoint;
mod gradcheck;
mod network;
mod params;
mod train;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use checkpoint::{Checkpoint, NamedBlock, CHECKPOINT_FORMAT};
pub use gradcheck::{grad_check, grad_check_all, GradCheckReport, DENOMINATOR_FLOOR};
pub use network::{
    backward, backward_into, cross_entropy, forward, forward_inputs, predict, to_inputs, ForwardCache, Prediction,
};
pub use params::{init_params, DirectionParams, LayerParams, Matrix, ModelParams};
pub use train::{train, Adam, EpochRecord, LabeledSequence, TrainOutcome};

use crate::encoder::{reverse_for_unidirectional, SceneMetadata, SEMANTIC_DIM};
use crate::error::{Error, Result};
use crate::scene::Taxonomy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    #[value(name = "rnn")]
    #[serde(rename = "rnn")]
    Simple,
    Gru,
    Lstm,
}

impl CellKind {
    pub const ALL: [CellKind; 3] = [CellKind::Simple, CellKind::Gru, CellKind::Lstm];

    /// Number of `hidden x (hidden + input)` gate blocks.
    pub fn gates(self) -> usize {
        match self {
            CellKind::Simple => 1,
            CellKind::Gru => 3,
            CellKind::Lstm => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CellKind::Simple => "rnn",
            CellKind::Gru => "gru",
            CellKind::Lstm => "lstm",
        }
    }
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
pub enum Architecture {
    #[serde(rename = "uni")]
    #[value(name = "uni")]
    UniLastConcat,
    #[serde(rename = "bi")]
    #[value(name = "bi")]
    BiAllConcat,
}

impl Architecture {
    pub const ALL: [Architecture; 2] = [Architecture::UniLastConcat, Architecture::BiAllConcat];

    pub fn directions(self) -> usize {
        match self {
            Architecture::UniLastConcat => 1,
            Architecture::BiAllConcat => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Architecture::UniLastConcat => "uni",
            Architecture::BiAllConcat => "bi",
        }
    }

    /// Puts encoder output in the order this architecture consumes it: the
    /// unidirectional model reads the reversed sequence, the bidirectional
    /// one the forward order.
    pub fn orient(self, meta: &SceneMetadata) -> SceneMetadata {
        match (self, meta.reversed) {
            (Architecture::UniLastConcat, false) | (Architecture::BiAllConcat, true) => {
                reverse_for_unidirectional(meta)
            }
            _ => meta.clone(),
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub cell: CellKind,
    pub architecture: Architecture,
    pub input_size: usize,
    pub hidden_size: usize,
    pub num_layers: usize,
    pub num_classes: usize,
    pub sequence_length: usize,
}

impl ModelConfig {
    /// 8 inputs, 16 hidden units, 2 layers, 4 classes.
    pub fn new(cell: CellKind, architecture: Architecture, sequence_length: usize) -> Self {
        Self {
            cell,
            architecture,
            input_size: SEMANTIC_DIM,
            hidden_size: 16,
            num_layers: 2,
            num_classes: Taxonomy::NUM_LANDUSES,
            sequence_length,
        }
    }

    pub fn with_hidden(mut self, hidden: usize) -> Self {
        self.hidden_size = hidden;
        self
    }

    /// Width of the concatenated feature seen by the dense layer.
    pub fn feature_width(&self) -> usize {
        match self.architecture {
            Architecture::UniLastConcat => self.sequence_length * self.hidden_size,
            Architecture::BiAllConcat => 2 * self.num_layers * self.hidden_size,
        }
    }

    /// Input width of `layer`.
    pub fn layer_input(&self, layer: usize) -> usize {
        if layer == 0 {
            self.input_size
        } else {
            self.architecture.directions() * self.hidden_size
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_size == 0
            || self.hidden_size == 0
            || self.num_layers == 0
            || self.num_classes == 0
            || self.sequence_length == 0
        {
            return Err(Error::Config(format!("all model sizes must be positive: {self:?}")));
        }
        Ok(())
    }

    /// Additionally requires the sizes dictated by the taxonomy.
    pub fn validate_for_taxonomy(&self) -> Result<()> {
        self.validate()?;
        if self.input_size != SEMANTIC_DIM || self.num_classes != Taxonomy::NUM_LANDUSES {
            return Err(Error::Config(format!(
                "model must read {SEMANTIC_DIM} inputs and emit {} classes",
                Taxonomy::NUM_LANDUSES
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Learning rate multiplier applied every `decay_every` epochs.
    pub decay_factor: f64,
    pub decay_every: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Stop after this many epochs without a better validation score.
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            decay_factor: 0.1,
            decay_every: 10,
            epochs: 100,
            batch_size: 32,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            patience: None,
        }
    }
}

impl TrainConfig {
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        let steps = epoch.checked_div(self.decay_every).unwrap_or(0);
        self.learning_rate * self.decay_factor.powi(steps as i32)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || self.epochs == 0 || self.batch_size == 0 || !(self.decay_factor > 0.0) {
            return Err(Error::Config(format!(
                "learning rate, decay, epochs and batch size must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}
