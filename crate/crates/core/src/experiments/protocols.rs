use serde::{Deserialize, Serialize};

use super::{fit, Pipeline};
use crate::encoder::{EncoderConfig, EncoderKind};
use crate::error::Result;
use crate::metrics::MacroMetrics;
use crate::rnn::{Architecture, CellKind, ModelConfig, TrainConfig};
use crate::scene::SceneRecord;
use crate::synth::{perturb, NoiseModel};

/// Settings shared by every run of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub encoder_config: EncoderConfig,
    pub hidden_size: usize,
    pub train: TrainConfig,
    /// Independent training runs (seeds `train.seed + r`) averaged per result.
    pub repeats: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self { encoder_config: EncoderConfig::default(), hidden_size: 16, train: TrainConfig::default(), repeats: 1 }
    }
}

impl ExperimentConfig {
    pub fn pipeline(&self, encoder: EncoderKind, cell: CellKind, arch: Architecture) -> Pipeline {
        let model = ModelConfig::new(cell, arch, self.encoder_config.length).with_hidden(self.hidden_size);
        Pipeline::new(encoder, self.encoder_config, model)
    }
}

/// Mean and sample standard deviation.
fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (mean, sd)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub f1_sd: f64,
    pub runs: usize,
}

fn summarize(runs: &[MacroMetrics]) -> Summary {
    let p: Vec<f64> = runs.iter().map(|m| m.precision).collect();
    let r: Vec<f64> = runs.iter().map(|m| m.recall).collect();
    let f: Vec<f64> = runs.iter().map(|m| m.f1).collect();
    let (f1, f1_sd) = mean_sd(&f);
    Summary { precision: mean_sd(&p).0, recall: mean_sd(&r).0, f1, f1_sd, runs: runs.len() }
}

/// Trains `repeats` models and evaluates each on every test set.
/// Returns `[test set][repeat]` metrics.
fn train_and_test(
    pipeline: &Pipeline,
    train: &[SceneRecord],
    val: &[SceneRecord],
    tests: &[&[SceneRecord]],
    cfg: &ExperimentConfig,
) -> Result<Vec<Vec<MacroMetrics>>> {
    let mut out = vec![Vec::new(); tests.len()];
    for r in 0..cfg.repeats.max(1) {
        let train_cfg = TrainConfig { seed: cfg.train.seed.wrapping_add(r as u64), ..cfg.train };
        let model = fit(pipeline, train, val, &train_cfg)?;
        for (slot, test) in out.iter_mut().zip(tests) {
            slot.push(model.evaluate(test)?.1);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub encoder: EncoderKind,
    pub cell: CellKind,
    pub architecture: Architecture,
    /// `None` when every run succeeded, otherwise the first error.
    pub failure: Option<String>,
    pub summary: Option<Summary>,
}

/// All 2 x 3 x 2 encoder/cell/architecture combinations.
pub fn full_grid() -> Vec<(EncoderKind, CellKind, Architecture)> {
    let mut grid = Vec::new();
    for e in EncoderKind::ALL {
        for c in CellKind::ALL {
            for a in Architecture::ALL {
                grid.push((e, c, a));
            }
        }
    }
    grid
}

/// Trains every grid combination with the same seeds and reports test macro
/// metrics. Failed combinations keep their row with the error recorded.
pub fn cmd_ablation(
    train: &[SceneRecord],
    val: &[SceneRecord],
    test: &[SceneRecord],
    grid: &[(EncoderKind, CellKind, Architecture)],
    cfg: &ExperimentConfig,
) -> Vec<AblationRow> {
    grid.iter()
        .map(|&(encoder, cell, architecture)| {
            let pipeline = cfg.pipeline(encoder, cell, architecture);
            match train_and_test(&pipeline, train, val, &[test], cfg) {
                Ok(mut runs) => AblationRow {
                    encoder,
                    cell,
                    architecture,
                    failure: None,
                    summary: Some(summarize(&runs.remove(0))),
                },
                Err(e) => AblationRow { encoder, cell, architecture, failure: Some(e.to_string()), summary: None },
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MismatchCell {
    pub train_on: &'static str,
    pub test_on: &'static str,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MismatchReport {
    /// gt/gt, gt/perturbed, perturbed/gt, perturbed/perturbed.
    pub cells: Vec<MismatchCell>,
    /// Whether train-gt/test-perturbed scored no higher than
    /// train-perturbed/test-perturbed.
    pub direction_holds: bool,
}

impl MismatchReport {
    pub fn f1(&self, train_on: &str, test_on: &str) -> Option<f64> {
        self.cells.iter().find(|c| c.train_on == train_on && c.test_on == test_on).map(|c| c.summary.f1)
    }
}

/// Simulated detector outputs for train, val and test, each from its own
/// noise stream derived from `noise_seed`.
fn perturb_splits(
    train: &[SceneRecord],
    val: &[SceneRecord],
    test: &[SceneRecord],
    noise: &NoiseModel,
    noise_seed: u64,
) -> Result<[Vec<SceneRecord>; 3]> {
    Ok([
        perturb(train, noise, noise_seed)?,
        perturb(val, noise, noise_seed.wrapping_add(1))?,
        perturb(test, noise, noise_seed.wrapping_add(2))?,
    ])
}

/// Train on {ground truth, simulated detections} x test on both.
#[allow(clippy::too_many_arguments)]
pub fn cmd_mismatch(
    train: &[SceneRecord],
    val: &[SceneRecord],
    test: &[SceneRecord],
    noise: &NoiseModel,
    noise_seed: u64,
    pipeline: &Pipeline,
    cfg: &ExperimentConfig,
) -> Result<MismatchReport> {
    let [p_train, p_val, p_test] = perturb_splits(train, val, test, noise, noise_seed)?;
    let tests: [&[SceneRecord]; 2] = [test, &p_test];
    let from_gt = train_and_test(pipeline, train, val, &tests, cfg)?;
    let from_pert = train_and_test(pipeline, &p_train, &p_val, &tests, cfg)?;
    let names = ["gt", "perturbed"];
    let mut cells = Vec::with_capacity(4);
    for (train_on, runs) in names.iter().zip([from_gt, from_pert]) {
        for (test_on, r) in names.iter().zip(runs) {
            cells.push(MismatchCell { train_on, test_on, summary: summarize(&r) });
        }
    }
    let mut report = MismatchReport { cells, direction_holds: false };
    report.direction_holds = report.f1("gt", "perturbed") <= report.f1("perturbed", "perturbed");
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpperBoundRow {
    pub name: &'static str,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpperBoundReport {
    /// `upper`, `noisy`, `delta`.
    pub rows: Vec<UpperBoundRow>,
}

/// Perfect detector (ground truth at train and test) against simulated
/// detections at train and test.
#[allow(clippy::too_many_arguments)]
pub fn cmd_upper_bound(
    train: &[SceneRecord],
    val: &[SceneRecord],
    test: &[SceneRecord],
    noise: &NoiseModel,
    noise_seed: u64,
    pipeline: &Pipeline,
    cfg: &ExperimentConfig,
) -> Result<UpperBoundReport> {
    let [p_train, p_val, p_test] = perturb_splits(train, val, test, noise, noise_seed)?;
    let upper = summarize(&train_and_test(pipeline, train, val, &[test], cfg)?.remove(0));
    let noisy = summarize(&train_and_test(pipeline, &p_train, &p_val, &[&p_test], cfg)?.remove(0));
    let row = |name, s: &Summary| UpperBoundRow { name, precision: s.precision, recall: s.recall, f1: s.f1 };
    Ok(UpperBoundReport {
        rows: vec![
            row("upper", &upper),
            row("noisy", &noisy),
            UpperBoundRow {
                name: "delta",
                precision: upper.precision - noisy.precision,
                recall: upper.recall - noisy.recall,
                f1: upper.f1 - noisy.f1,
            },
        ],
    })
}
