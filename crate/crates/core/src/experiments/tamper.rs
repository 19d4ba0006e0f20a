use std::io::Write;

use serde::Serialize;

use super::TrainedModel;
use crate::error::Result;
use crate::scene::{SceneRecord, Taxonomy};
use crate::synth::tamper;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TamperStep {
    pub step: usize,
    pub label: usize,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SceneTamper {
    pub scene_id: String,
    pub true_label: Option<usize>,
    /// Requested depth when it exceeded the box count and was clamped.
    pub clamped_from: Option<usize>,
    pub steps: Vec<TamperStep>,
    /// First step whose prediction differs from step 0.
    pub flip_step: Option<usize>,
    /// Largest L-infinity change of the probability vector between
    /// consecutive steps, and the step where it occurred.
    pub max_jump: f64,
    pub max_jump_step: Option<usize>,
}

/// Predicts every scene at tamper steps `0..=k` (`None`: all boxes). Depths
/// beyond a scene's box count are clamped and flagged in `clamped_from`.
pub fn cmd_tamper(model: &TrainedModel, scenes: &[SceneRecord], k: Option<usize>) -> Result<Vec<SceneTamper>> {
    scenes
        .iter()
        .map(|rec| {
            let n = rec.boxes.len();
            let depth = k.unwrap_or(n).min(n);
            let clamped_from = k.filter(|&k| k > n);
            let mut steps = Vec::with_capacity(depth + 1);
            for (step, boxes) in tamper(&rec.boxes, depth)?.iter().enumerate() {
                let p = model.predict_boxes(boxes)?;
                steps.push(TamperStep { step, label: p.label, probs: p.probs });
            }
            let flip_step = steps.iter().find(|s| s.label != steps[0].label).map(|s| s.step);
            let mut max_jump = 0.0;
            let mut max_jump_step = None;
            for w in steps.windows(2) {
                let jump = w[0].probs.iter().zip(&w[1].probs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                if jump > max_jump {
                    max_jump = jump;
                    max_jump_step = Some(w[1].step);
                }
            }
            Ok(SceneTamper {
                scene_id: rec.scene_id.clone(),
                true_label: rec.landuse,
                clamped_from,
                steps,
                flip_step,
                max_jump,
                max_jump_step,
            })
        })
        .collect()
}

fn prob_header(first: &[&str]) -> Vec<String> {
    let mut h: Vec<String> = first.iter().map(|s| s.to_string()).collect();
    h.extend(Taxonomy::LANDUSES.iter().map(|l| format!("p_{l}")));
    h
}

/// One row per (scene, step).
pub fn write_tamper_csv<W: Write>(results: &[SceneTamper], w: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(prob_header(&["scene_id", "step", "label"]))?;
    for r in results {
        for s in &r.steps {
            let mut rec = vec![r.scene_id.clone(), s.step.to_string(), Taxonomy::landuse_name(s.label).to_string()];
            rec.extend(s.probs.iter().map(|p| p.to_string()));
            csv.write_record(&rec)?;
        }
    }
    csv.flush()?;
    Ok(())
}

/// One row per scene: flip point and largest single-step jump.
pub fn write_tamper_summary_csv<W: Write>(results: &[SceneTamper], w: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record([
        "scene_id",
        "true_label",
        "steps",
        "step0_label",
        "flip_step",
        "flip_label",
        "max_jump",
        "max_jump_step",
        "clamped_from",
    ])?;
    let name = |l: Option<usize>| l.map(|l| Taxonomy::landuse_name(l).to_string()).unwrap_or_default();
    let num = |v: Option<usize>| v.map(|v| v.to_string()).unwrap_or_default();
    for r in results {
        csv.write_record([
            r.scene_id.clone(),
            name(r.true_label),
            (r.steps.len() - 1).to_string(),
            name(Some(r.steps[0].label)),
            num(r.flip_step),
            name(r.flip_step.map(|j| r.steps[j].label)),
            r.max_jump.to_string(),
            num(r.max_jump_step),
            num(r.clamped_from),
        ])?;
    }
    csv.flush()?;
    Ok(())
}
