//! Jaccard metrics with global accumulation, result tables and prediction
//! panels.

mod metrics;
mod panels;
mod report;

pub use metrics::{
    accumulate_confusion, argmax_masks, confusion_counts, dataset_iou, delta_iou, iou, predict_masks,
    ConfusionMatrix, EVAL_BATCH,
};
pub use panels::{render_panels, render_predictions, PALETTE};
pub use report::{
    render_report, IouUnit, MetricsRecord, Report, LONG_CSV_HEADER, ROW_ADAPTED, ROW_DELTA, ROW_SOURCE_ONLY,
};
