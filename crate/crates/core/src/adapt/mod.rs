//! Source-only and adversarial (entropy-map) training, the overfitting and
//! divergence monitor, and experiment orchestration.

mod config;
mod experiment;
mod losses;
mod monitor;
mod optim;
mod train;

pub use config::{AdaptiveSettings, AugSettings, Mode, MonitorThresholds, TrainConfig};
pub use experiment::{
    run_experiment, ExperimentData, ExperimentOptions, ExperimentOutcome, LogLine, BEST_CHECKPOINT, BUILDING,
    FINAL_CHECKPOINT, METRICS_FILE, RECORD_FILE,
};
pub use losses::{adversarial_losses, bce_mean_with_grad, bce_with_logits, seg_loss, seg_loss_with_grad};
pub use monitor::{divergence_monitor, EvalPoint, Evidence, History, MonitorState, MonitorStatus};
pub use optim::{lr_schedule, Adam, Sgd};
pub use train::{train_step, train_step_advent, train_step_source_only, StepStats, TrainState};
