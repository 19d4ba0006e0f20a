use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scene::{BBox, SceneRecord, Taxonomy};

/// IoU thresholds of the sweep table: the category-only column, then .50 to .95.
pub const SWEEP_THRESHOLDS: [f64; 11] = [0.0, 0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95];

/// Intersection over union of two boxes (0 for disjoint boxes).
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let ix = ((a.x + a.w).min(b.x + b.w) - a.x.max(b.x)).max(0.0);
    let iy = ((a.y + a.h).min(b.y + b.h) - a.y.max(b.y)).max(0.0);
    let inter = ix * iy;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneDetections {
    pub scene_id: String,
    pub detections: Vec<BBox>,
    pub ground_truth: Vec<BBox>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DetectionSet {
    pub scenes: Vec<SceneDetections>,
}

impl DetectionSet {
    /// Pairs detection and ground-truth records by `scene_id`.
    ///
    /// Ground-truth order defines scene order. A scene missing on the
    /// detection side has no detections; a detection scene without ground
    /// truth is an error.
    pub fn from_records(detections: &[SceneRecord], ground_truth: &[SceneRecord]) -> Result<Self> {
        let mut dets: HashMap<&str, &SceneRecord> = detections.iter().map(|r| (r.scene_id.as_str(), r)).collect();
        let mut scenes = Vec::with_capacity(ground_truth.len());
        for gt in ground_truth {
            let d = dets.remove(gt.scene_id.as_str());
            scenes.push(SceneDetections {
                scene_id: gt.scene_id.clone(),
                detections: d.map(|r| r.boxes.clone()).unwrap_or_default(),
                ground_truth: gt.boxes.clone(),
            });
        }
        if let Some(extra) = dets.keys().min() {
            return Err(Error::DimensionMismatch(format!("detections for scene `{extra}` have no ground truth")));
        }
        Ok(Self { scenes })
    }
}

/// How a detection may claim a ground-truth box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Matching {
    /// Same category and IoU at least the threshold; the best-overlapping
    /// unmatched box is claimed.
    Iou(f64),
    /// Same category only; the first unmatched box is claimed.
    CategoryOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApResult {
    /// Per building category; `None` when the category has no ground truth.
    pub per_category: Vec<Option<f64>>,
    /// Mean over categories with ground truth (0 when there are none).
    pub mean: f64,
}

/// 101-point interpolated AP from `(recall, precision)` operating points.
pub fn average_precision_101(points: &[(f64, f64)]) -> f64 {
    let mut total = 0.0;
    for k in 0..=100 {
        let r = k as f64 / 100.0;
        let p = points.iter().filter(|(rec, _)| *rec >= r).map(|(_, p)| *p).fold(0.0, f64::max);
        total += p;
    }
    total / 101.0
}

fn category_ap(set: &DetectionSet, category: usize, matching: Matching) -> Option<f64> {
    let n_gt: usize = set.scenes.iter().map(|s| s.ground_truth.iter().filter(|g| g.category == category).count()).sum();
    if n_gt == 0 {
        return None;
    }
    // (score, scene, detection)
    let mut dets: Vec<(f64, usize, usize)> = set
        .scenes
        .iter()
        .enumerate()
        .flat_map(|(si, s)| {
            s.detections
                .iter()
                .enumerate()
                .filter(|(_, d)| d.category == category)
                .map(move |(di, d)| (d.score, si, di))
        })
        .collect();
    dets.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut matched: Vec<Vec<bool>> = set.scenes.iter().map(|s| vec![false; s.ground_truth.len()]).collect();
    let mut tp = 0usize;
    let mut points = Vec::new();
    for (k, &(score, si, di)) in dets.iter().enumerate() {
        let scene = &set.scenes[si];
        let det = &scene.detections[di];
        let candidates =
            scene.ground_truth.iter().enumerate().filter(|(gi, g)| g.category == category && !matched[si][*gi]);
        let claim = match matching {
            Matching::CategoryOnly => candidates.map(|(gi, _)| gi).next(),
            Matching::Iou(t) => {
                let mut best: Option<(usize, f64)> = None;
                for (gi, g) in candidates {
                    let o = iou(det, g);
                    if o >= t && best.is_none_or(|(_, bo)| o > bo) {
                        best = Some((gi, o));
                    }
                }
                best.map(|(gi, _)| gi)
            }
        };
        if let Some(gi) = claim {
            matched[si][gi] = true;
            tp += 1;
        }
        // Operating points only where the score changes, so tied scores
        // act as one threshold.
        let last_of_tie = dets.get(k + 1).is_none_or(|next| next.0 != score);
        if last_of_tie {
            points.push((tp as f64 / n_gt as f64, tp as f64 / (k + 1) as f64));
        }
    }
    Some(average_precision_101(&points))
}

fn ap_with(set: &DetectionSet, matching: Matching) -> ApResult {
    let per_category: Vec<Option<f64>> = (0..Taxonomy::NUM_BUILDINGS).map(|c| category_ap(set, c, matching)).collect();
    let present: Vec<f64> = per_category.iter().flatten().copied().collect();
    let mean = if present.is_empty() { 0.0 } else { present.iter().sum::<f64>() / present.len() as f64 };
    ApResult { per_category, mean }
}

/// AP with detections matched to same-category ground truth at IoU >= `threshold`.
pub fn ap_at_iou(set: &DetectionSet, threshold: f64) -> ApResult {
    ap_with(set, Matching::Iou(threshold))
}

/// AP where only the category matters, box geometry is ignored.
pub fn ap_iou_zero(set: &DetectionSet) -> ApResult {
    ap_with(set, Matching::CategoryOnly)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApSweep {
    /// `(threshold, result)` for each of [`SWEEP_THRESHOLDS`].
    pub columns: Vec<(f64, ApResult)>,
    /// Mean AP over the ten thresholds .50:.05:.95.
    pub mean_50_95: f64,
}

pub fn ap_sweep(set: &DetectionSet) -> ApSweep {
    let columns: Vec<(f64, ApResult)> =
        SWEEP_THRESHOLDS.iter().map(|&t| (t, if t == 0.0 { ap_iou_zero(set) } else { ap_at_iou(set, t) })).collect();
    let mean_50_95 = columns[1..].iter().map(|(_, r)| r.mean).sum::<f64>() / (columns.len() - 1) as f64;
    ApSweep { columns, mean_50_95 }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene(id: &str, dets: Vec<BBox>, gts: Vec<BBox>) -> SceneDetections {
        SceneDetections { scene_id: id.into(), detections: dets, ground_truth: gts }
    }

    #[test]
    fn iou_examples() {
        let a = BBox::new(0, 1.0, 0.1, 0.1, 0.3, 0.3);
        assert!((iou(&a, &a) - 1.0).abs() < 1e-15);
        assert_eq!(iou(&a, &BBox::new(0, 1.0, 0.6, 0.6, 0.2, 0.2)), 0.0);
        let unit = BBox::new(0, 1.0, 0.0, 0.0, 1.0, 1.0);
        let shifted = BBox::new(0, 1.0, 0.5, 0.0, 1.0, 1.0);
        assert!((iou(&unit, &shifted) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_detector_everywhere() {
        let gts = vec![BBox::new(2, 1.0, 0.1, 0.1, 0.2, 0.2), BBox::new(5, 1.0, 0.5, 0.5, 0.3, 0.2)];
        let set = DetectionSet { scenes: vec![scene("a", gts.clone(), gts.clone()), scene("b", gts.clone(), gts)] };
        let sweep = ap_sweep(&set);
        assert_eq!(sweep.columns.len(), 11);
        for (_, r) in &sweep.columns {
            assert_eq!(r.mean, 1.0);
            assert_eq!(r.per_category[0], None);
        }
        assert_eq!(sweep.mean_50_95, 1.0);
    }

    #[test]
    fn no_detections() {
        let set = DetectionSet { scenes: vec![scene("a", vec![], vec![BBox::new(2, 1.0, 0.1, 0.1, 0.2, 0.2)])] };
        assert_eq!(ap_at_iou(&set, 0.5).mean, 0.0);
        assert_eq!(ap_iou_zero(&set).mean, 0.0);
    }

    #[test]
    fn spurious_lower_score_detection() {
        let gt = BBox::new(1, 1.0, 0.1, 0.1, 0.3, 0.3);
        let good = BBox { score: 0.9, ..gt };
        let spurious = BBox::new(1, 0.8, 0.6, 0.6, 0.2, 0.2);
        let set = DetectionSet { scenes: vec![scene("a", vec![spurious, good], vec![gt])] };
        assert_eq!(ap_at_iou(&set, 0.5).per_category[1], Some(1.0));
    }

    #[test]
    fn category_only_ignores_geometry() {
        let gts = vec![BBox::new(2, 1.0, 0.1, 0.1, 0.2, 0.2), BBox::new(4, 1.0, 0.5, 0.5, 0.3, 0.2)];
        let moved = vec![BBox::new(2, 0.7, 0.7, 0.7, 0.1, 0.1), BBox::new(4, 0.6, 0.0, 0.0, 0.1, 0.1)];
        let set = DetectionSet { scenes: vec![scene("a", moved, gts.clone())] };
        assert_eq!(ap_iou_zero(&set).mean, 1.0);
        assert_eq!(ap_at_iou(&set, 0.5).mean, 0.0);

        let wrong = vec![BBox::new(3, 0.7, 0.1, 0.1, 0.2, 0.2), BBox::new(5, 0.6, 0.5, 0.5, 0.3, 0.2)];
        let set = DetectionSet { scenes: vec![scene("a", wrong, gts)] };
        assert_eq!(ap_iou_zero(&set).mean, 0.0);
    }

    #[test]
    fn tied_scores_form_one_operating_point() {
        // One TP and one FP at the same score: precision 0.5 at recall 1.
        let gt = BBox::new(0, 1.0, 0.1, 0.1, 0.2, 0.2);
        let fp = BBox::new(0, 1.0, 0.6, 0.6, 0.2, 0.2);
        let a = DetectionSet { scenes: vec![scene("a", vec![fp, gt], vec![gt])] };
        let b = DetectionSet { scenes: vec![scene("a", vec![gt, fp], vec![gt])] };
        assert_eq!(ap_at_iou(&a, 0.5).mean, 0.5);
        assert_eq!(ap_at_iou(&b, 0.5).mean, 0.5);
    }

    #[test]
    fn pairs_records_by_id() {
        let rec = |id: &str| SceneRecord {
            scene_id: id.into(),
            landuse: None,
            width: 1,
            height: 1,
            lat: None,
            lon: None,
            boxes: vec![],
        };
        let set = DetectionSet::from_records(&[rec("b")], &[rec("a"), rec("b")]).unwrap();
        assert_eq!(set.scenes.len(), 2);
        assert!(DetectionSet::from_records(&[rec("z")], &[rec("a")]).is_err());
    }
}
