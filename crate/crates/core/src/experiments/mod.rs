//! Experiment protocols on top of the library: encoder/cell/architecture
//! ablations, train/test detector mismatch, the perfect-detector upper bound,
//! tamper sequences and land-use map emission. Every command records a
//! [`RunManifest`] next to its outputs.

mod manifest;
mod map;
mod protocols;
mod table;
mod tamper;

pub use manifest::RunManifest;
pub use map::{land_use_map, landuse_color, MapOutcome};
pub use protocols::{
    cmd_ablation, cmd_mismatch, cmd_upper_bound, full_grid, AblationRow, ExperimentConfig, MismatchCell,
    MismatchReport, UpperBoundReport, UpperBoundRow,
};
pub use table::{
    write_ablation_csv, write_ap_csv, write_confusion_csv, write_metrics_csv, write_mismatch_csv, write_upper_csv,
};
pub use tamper::{cmd_tamper, write_tamper_csv, write_tamper_summary_csv, SceneTamper, TamperStep};

use crate::encoder::{encode, EncoderConfig, EncoderKind, SceneMetadata};
use crate::error::Result;
use crate::metrics::{confusion, macro_metrics, ConfusionMatrix, MacroMetrics};
use crate::rnn::{self, Checkpoint, LabeledSequence, ModelConfig, ModelParams, Prediction, TrainConfig};
use crate::scene::SceneRecord;

/// Encoder and model choices that turn a scene into a prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pipeline {
    pub encoder: EncoderKind,
    pub encoder_config: EncoderConfig,
    pub model: ModelConfig,
}

impl Pipeline {
    pub fn new(encoder: EncoderKind, encoder_config: EncoderConfig, model: ModelConfig) -> Self {
        Self { encoder, encoder_config, model }
    }

    /// Encodes and orients a box list for the model.
    pub fn sequence(&self, boxes: &[crate::scene::BBox]) -> SceneMetadata {
        self.model.architecture.orient(&encode(self.encoder, boxes, &self.encoder_config))
    }

    pub fn labeled(&self, records: &[SceneRecord]) -> Result<Vec<LabeledSequence>> {
        records.iter().map(|r| Ok(LabeledSequence { meta: self.sequence(&r.boxes), label: r.label()? })).collect()
    }
}

/// A trained classifier together with the encoder it expects.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub pipeline: Pipeline,
    pub params: ModelParams<f64>,
    pub checkpoint: Checkpoint,
}

impl TrainedModel {
    pub fn from_checkpoint(checkpoint: Checkpoint) -> Result<Self> {
        let params = checkpoint.to_params()?;
        let pipeline = Pipeline::new(checkpoint.encoder, checkpoint.encoder_config, checkpoint.model);
        Ok(Self { pipeline, params, checkpoint })
    }

    pub fn predict_boxes(&self, boxes: &[crate::scene::BBox]) -> Result<Prediction<f64>> {
        rnn::predict(&self.params, &self.pipeline.sequence(boxes))
    }

    pub fn predict_record(&self, record: &SceneRecord) -> Result<Prediction<f64>> {
        self.predict_boxes(&record.boxes)
    }

    /// Confusion matrix and macro metrics on labeled records.
    pub fn evaluate(&self, records: &[SceneRecord]) -> Result<(ConfusionMatrix, MacroMetrics)> {
        let mut preds = Vec::with_capacity(records.len());
        let mut labels = Vec::with_capacity(records.len());
        for r in records {
            labels.push(r.label()?);
            preds.push(self.predict_record(r)?.label);
        }
        let cm = confusion(&preds, &labels, self.pipeline.model.num_classes)?;
        let mm = macro_metrics(&cm);
        Ok((cm, mm))
    }
}

/// Trains a model on labeled records.
pub fn fit(
    pipeline: &Pipeline,
    train: &[SceneRecord],
    val: &[SceneRecord],
    train_cfg: &TrainConfig,
) -> Result<TrainedModel> {
    pipeline.model.validate_for_taxonomy()?;
    let train_set = pipeline.labeled(train)?;
    let val_set = pipeline.labeled(val)?;
    let outcome = rnn::train::<f64>(&train_set, &val_set, &pipeline.model, train_cfg)?;
    let checkpoint = Checkpoint::new(
        &outcome.params,
        pipeline.encoder,
        pipeline.encoder_config,
        *train_cfg,
        outcome.best_epoch,
        outcome.history,
    );
    Ok(TrainedModel { pipeline: *pipeline, params: outcome.params, checkpoint })
}
