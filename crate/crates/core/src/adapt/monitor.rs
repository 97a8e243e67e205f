use serde::{Deserialize, Serialize};

use super::config::MonitorThresholds;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub iter: u64,
    pub val_iou_target: f64,
}

/// Per-iteration training log. Discriminator columns stay empty in
/// source-only runs; `r_t` and `p` are NaN when not applicable.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub seg_loss: Vec<f64>,
    pub adv_loss: Vec<f64>,
    pub disc_loss: Vec<f64>,
    pub disc_acc: Vec<f64>,
    pub r_t: Vec<f64>,
    pub p: Vec<f64>,
    pub evals: Vec<EvalPoint>,
}

impl History {
    pub fn len(&self) -> usize {
        self.seg_loss.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seg_loss.is_empty() && self.evals.is_empty()
    }

    /// Mean of `col[from..]`, ignoring NaN entries.
    pub fn mean_since(col: &[f64], from: usize) -> Option<f64> {
        let vals: Vec<f64> = col.get(from..)?.iter().copied().filter(|v| !v.is_nan()).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonitorState {
    Healthy,
    DiscriminatorOverfit,
    Diverged,
}

impl MonitorState {
    pub fn as_str(self) -> &'static str {
        match self {
            MonitorState::Healthy => "healthy",
            MonitorState::DiscriminatorOverfit => "discriminator_overfit",
            MonitorState::Diverged => "diverged",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    /// Longest run of iterations with accuracy above the threshold.
    pub longest_high_acc_run: usize,
    /// Iteration at which the first qualifying run completed.
    pub overfit_at: Option<u64>,
    pub recent_disc_acc: Option<f64>,
    pub nonfinite_at: Option<u64>,
    pub peak_iou: Option<f64>,
    pub last_iou: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorStatus {
    pub state: MonitorState,
    pub evidence: Evidence,
}

impl MonitorStatus {
    pub fn overfit_detected(&self) -> bool {
        self.evidence.overfit_at.is_some()
    }
}

/// Classify a run from its log alone. Divergence (a non-finite loss at any
/// point, or the latest target IoU below `collapse_fraction` of the peak so
/// far) takes precedence over overfitting (accuracy, averaged over the last
/// `accuracy_smoothing` steps, above `overfit_accuracy` for `overfit_window`
/// consecutive iterations at any point).
pub fn divergence_monitor(history: &History, thresholds: &MonitorThresholds) -> Result<MonitorStatus> {
    if history.is_empty() {
        return Err(Error::invalid("monitor needs a nonempty history"));
    }
    let nonfinite_at = [&history.seg_loss, &history.adv_loss, &history.disc_loss]
        .iter()
        .filter_map(|col| col.iter().position(|v| !v.is_finite()))
        .min()
        .map(|i| i as u64);

    let mut run = 0usize;
    let mut longest = 0usize;
    let mut overfit_at = None;
    let k = thresholds.accuracy_smoothing.max(1);
    let mut sum = 0.0;
    for (i, &a) in history.disc_acc.iter().enumerate() {
        sum += a;
        if i >= k {
            sum -= history.disc_acc[i - k];
        }
        if sum / (i + 1).min(k) as f64 > thresholds.overfit_accuracy {
            run += 1;
        } else {
            run = 0;
        }
        longest = longest.max(run);
        if run >= thresholds.overfit_window && overfit_at.is_none() {
            overfit_at = Some(i as u64);
        }
    }
    let recent_from = history.disc_acc.len().saturating_sub(thresholds.overfit_window);
    let recent_disc_acc = History::mean_since(&history.disc_acc, recent_from);

    let peak_iou = history
        .evals
        .iter()
        .map(|e| e.val_iou_target)
        .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));
    let last_iou = history.evals.last().map(|e| e.val_iou_target);
    let collapsed = match (peak_iou, last_iou) {
        (Some(peak), Some(last)) => !last.is_finite() || last < thresholds.collapse_fraction * peak,
        _ => false,
    };

    let state = if nonfinite_at.is_some() || collapsed {
        MonitorState::Diverged
    } else if overfit_at.is_some() {
        MonitorState::DiscriminatorOverfit
    } else {
        MonitorState::Healthy
    };
    Ok(MonitorStatus {
        state,
        evidence: Evidence {
            longest_high_acc_run: longest,
            overfit_at,
            recent_disc_acc,
            nonfinite_at,
            peak_iou,
            last_iou,
        },
    })
}
