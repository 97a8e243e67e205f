use serde::{Deserialize, Serialize};

use crate::augment::{AdaptiveState, AugmentationConfig, OpKind};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    SourceOnly,
    Advent,
    AdventAug,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::SourceOnly => "source_only",
            Mode::Advent => "advent",
            Mode::AdventAug => "advent_aug",
        }
    }

    pub fn is_adversarial(self) -> bool {
        self != Mode::SourceOnly
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "source_only" => Ok(Mode::SourceOnly),
            "advent" => Ok(Mode::Advent),
            "advent_aug" => Ok(Mode::AdventAug),
            other => Err(Error::invalid(format!("unknown mode {other:?}"))),
        }
    }
}

/// Controller settings for an adaptive discriminator-input probability.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdaptiveSettings {
    pub initial_p: f64,
    pub target_r: f64,
    pub step: f64,
    pub p_max: f64,
    /// Discriminator steps between controller updates.
    pub interval: u64,
}

impl Default for AdaptiveSettings {
    fn default() -> Self {
        let s = AdaptiveState::default();
        Self {
            initial_p: s.p,
            target_r: s.target_r,
            step: s.step,
            p_max: s.p_max,
            interval: 4,
        }
    }
}

impl AdaptiveSettings {
    pub fn initial_state(&self) -> Result<AdaptiveState> {
        AdaptiveState::new(self.initial_p, self.target_r, self.step, self.p_max)
    }
}

/// Where augmentation applies. Segmenter-input augmentation is used in any
/// mode when enabled; discriminator-input augmentation only in `advent_aug`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugSettings {
    pub p: f64,
    pub segmenter_inputs: bool,
    pub segmenter_ops: Vec<OpKind>,
    pub discriminator_inputs: bool,
    pub discriminator_ops: Vec<OpKind>,
    /// Replace the fixed discriminator-input `p` with the controller.
    pub adaptive: Option<AdaptiveSettings>,
}

impl Default for AugSettings {
    fn default() -> Self {
        Self {
            p: 0.6,
            segmenter_inputs: true,
            segmenter_ops: OpKind::ALL.to_vec(),
            discriminator_inputs: true,
            discriminator_ops: OpKind::MAP_SAFE.to_vec(),
            adaptive: None,
        }
    }
}

impl AugSettings {
    pub fn segmenter_config(&self) -> Result<Option<AugmentationConfig>> {
        if !self.segmenter_inputs {
            return Ok(None);
        }
        AugmentationConfig::new(self.segmenter_ops.clone(), self.p, false).map(Some)
    }

    /// Map-safe config at probability `p`.
    pub fn discriminator_config(&self, p: f64) -> Result<AugmentationConfig> {
        AugmentationConfig::new(self.discriminator_ops.clone(), p, true)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonitorThresholds {
    pub overfit_accuracy: f64,
    pub overfit_window: usize,
    /// Discriminator steps averaged into each iteration's accuracy. A batch
    /// of two 64 px tiles yields only 16 patch decisions per step, too coarse
    /// to compare against `overfit_accuracy` one step at a time.
    pub accuracy_smoothing: usize,
    /// Divergence when target-val IoU falls below this fraction of its peak.
    pub collapse_fraction: f64,
}

impl Default for MonitorThresholds {
    fn default() -> Self {
        Self {
            overfit_accuracy: 0.95,
            overfit_window: 200,
            accuracy_smoothing: 16,
            collapse_fraction: 0.25,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub mode: Mode,
    pub iterations: u64,
    pub batch_size: usize,
    pub seg_lr: f64,
    pub disc_lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub poly_power: f64,
    pub adam_betas: (f64, f64),
    pub lambda_adv: f64,
    pub lambda_ent: f64,
    pub entropy_min_enabled: bool,
    pub aug: Option<AugSettings>,
    pub seed: u64,
    pub eval_every: u64,
    pub monitor: MonitorThresholds,
    /// Train/val fractions for source and target splits.
    pub split: (f64, f64),
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: Mode::AdventAug,
            iterations: 5000,
            batch_size: 4,
            seg_lr: 2.5e-4,
            disc_lr: 1e-4,
            momentum: 0.9,
            weight_decay: 5e-4,
            poly_power: 0.9,
            adam_betas: (0.9, 0.99),
            lambda_adv: 1e-3,
            lambda_ent: 1e-3,
            entropy_min_enabled: false,
            aug: Some(AugSettings::default()),
            seed: 0,
            eval_every: 250,
            monitor: MonitorThresholds::default(),
            split: (0.8, 0.2),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::invalid(msg));
        if self.iterations == 0 {
            return bad("iterations must be positive".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if self.eval_every == 0 {
            return bad("eval_every must be positive".into());
        }
        for (name, v) in [
            ("seg_lr", self.seg_lr),
            ("disc_lr", self.disc_lr),
            ("momentum", self.momentum),
            ("weight_decay", self.weight_decay),
            ("poly_power", self.poly_power),
            ("lambda_adv", self.lambda_adv),
            ("lambda_ent", self.lambda_ent),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        let (b1, b2) = self.adam_betas;
        if !((0.0..1.0).contains(&b1) && (0.0..1.0).contains(&b2)) {
            return bad(format!("adam betas must lie in [0,1), got ({b1}, {b2})"));
        }
        let (tr, va) = self.split;
        if !(tr > 0.0 && va > 0.0 && ((tr + va) - 1.0).abs() <= 1e-9) {
            return bad(format!("split fractions ({tr}, {va}) must be positive and sum to 1"));
        }
        let m = &self.monitor;
        if !(0.0..=1.0).contains(&m.overfit_accuracy) || m.overfit_window == 0 || m.accuracy_smoothing == 0 || !(0.0..=1.0).contains(&m.collapse_fraction) {
            return bad("monitor thresholds out of range".into());
        }
        if let Some(aug) = &self.aug {
            aug.segmenter_config()?;
            aug.discriminator_config(aug.p)?;
            if let Some(a) = &aug.adaptive {
                a.initial_state()?;
                if a.interval == 0 {
                    return bad("adaptive interval must be positive".into());
                }
            }
        }
        if self.mode == Mode::AdventAug && !self.aug.as_ref().is_some_and(|a| a.discriminator_inputs) {
            return bad("advent_aug needs aug.discriminator_inputs enabled".into());
        }
        Ok(())
    }

    /// Augmentation of segmenter input batches, if active.
    pub fn segmenter_augmentation(&self) -> Result<Option<AugmentationConfig>> {
        match &self.aug {
            Some(a) => a.segmenter_config(),
            None => Ok(None),
        }
    }

    /// Discriminator-input augmentation settings, active only in `advent_aug`.
    pub fn discriminator_augmentation(&self) -> Option<&AugSettings> {
        match (&self.aug, self.mode) {
            (Some(a), Mode::AdventAug) if a.discriminator_inputs => Some(a),
            _ => None,
        }
    }
}
