//! Classification metrics (confusion matrix, macro precision/recall/F1) and
//! detection metrics (IoU, 101-point interpolated AP at IoU thresholds, and a
//! category-only AP that ignores box geometry).

mod classification;
mod detection;

pub use classification::{confusion, macro_metrics, ClassMetrics, ConfusionMatrix, MacroMetrics};
pub use detection::{
    ap_at_iou, ap_iou_zero, ap_sweep, average_precision_101, iou, ApResult, ApSweep, DetectionSet, Matching,
    SceneDetections, SWEEP_THRESHOLDS,
};
