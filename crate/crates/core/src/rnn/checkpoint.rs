use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::ModelParams;
use super::train::EpochRecord;
use super::{ModelConfig, TrainConfig};
use crate::encoder::{EncoderConfig, EncoderKind};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const CHECKPOINT_FORMAT: &str = "landuse-coding/checkpoint-v1";

/// One parameter block, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedBlock {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

/// Trained model as a single JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub model: ModelConfig,
    pub encoder: EncoderKind,
    pub encoder_config: EncoderConfig,
    pub train: TrainConfig,
    pub seed: u64,
    pub best_epoch: usize,
    pub params: Vec<NamedBlock>,
    pub history: Vec<EpochRecord>,
}

impl Checkpoint {
    pub fn new<T: Scalar>(
        params: &ModelParams<T>,
        encoder: EncoderKind,
        encoder_config: EncoderConfig,
        train: TrainConfig,
        best_epoch: usize,
        history: Vec<EpochRecord>,
    ) -> Self {
        let blocks = params
            .block_names()
            .into_iter()
            .zip(params.block_shapes())
            .zip(params.blocks())
            .map(|((name, (rows, cols)), data)| NamedBlock {
                name,
                rows,
                cols,
                data: data.iter().map(|v| v.to_f64_lossy()).collect(),
            })
            .collect();
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            model: params.config,
            encoder,
            encoder_config,
            train,
            seed: train.seed,
            best_epoch,
            params: blocks,
            history,
        }
    }

    /// Rebuilds the parameters, checking names and shapes against the config.
    pub fn to_params<T: Scalar>(&self) -> Result<ModelParams<T>> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unsupported format `{}`", self.format)));
        }
        self.model.validate()?;
        let mut params = ModelParams::<T>::zeros(&self.model);
        let names = params.block_names();
        let shapes = params.block_shapes();
        if names.len() != self.params.len() {
            return Err(Error::Checkpoint(format!("expected {} blocks, found {}", names.len(), self.params.len())));
        }
        for (((dst, name), shape), block) in params.blocks_mut().into_iter().zip(&names).zip(&shapes).zip(&self.params)
        {
            if &block.name != name || (block.rows, block.cols) != *shape || block.data.len() != dst.len() {
                return Err(Error::Checkpoint(format!(
                    "block `{}` {}x{} does not match expected `{name}` {}x{}",
                    block.name, block.rows, block.cols, shape.0, shape.1
                )));
            }
            for (d, s) in dst.iter_mut().zip(&block.data) {
                *d = T::of(*s);
            }
        }
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut w, self)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
    }
}
