use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const WINDOW_CAPACITY: usize = 256;

/// Controller for the shared augmentation probability, driven by the sign of
/// the discriminator's logits on non-augmented real (source) inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveState {
    pub p: f64,
    pub target_r: f64,
    pub step: f64,
    pub p_max: f64,
    window: VecDeque<f64>,
}

impl Default for AdaptiveState {
    fn default() -> Self {
        Self {
            p: 0.0,
            target_r: 0.6,
            step: 0.005,
            p_max: 0.85,
            window: VecDeque::with_capacity(WINDOW_CAPACITY),
        }
    }
}

impl AdaptiveState {
    pub fn new(p: f64, target_r: f64, step: f64, p_max: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_max) || !(0.0..=p_max).contains(&p) || !(step >= 0.0) {
            return Err(Error::invalid(format!(
                "adaptive state needs 0 <= p ({p}) <= p_max ({p_max}) <= 1 and step >= 0"
            )));
        }
        Ok(Self {
            p,
            target_r,
            step,
            p_max,
            window: VecDeque::with_capacity(WINDOW_CAPACITY),
        })
    }

    /// Mean of the recorded signs, if any.
    pub fn r_t(&self) -> Option<f64> {
        if self.window.is_empty() {
            None
        } else {
            Some(self.window.iter().sum::<f64>() / self.window.len() as f64)
        }
    }

    pub fn window_len(&self) -> usize {
        self.window.len()
    }

    /// Push `sign(logit)` for every logit, then step `p` toward keeping the
    /// sign mean at `target_r`. An empty batch is a no-op.
    pub fn update(&mut self, real_logits: &[f32]) -> Result<()> {
        if real_logits.is_empty() {
            return Ok(());
        }
        if real_logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite discriminator logits"));
        }
        for &l in real_logits {
            if self.window.len() == WINDOW_CAPACITY {
                self.window.pop_front();
            }
            let s = if l > 0.0 {
                1.0
            } else if l < 0.0 {
                -1.0
            } else {
                0.0
            };
            self.window.push_back(s);
        }
        let r = self.r_t().expect("window nonempty");
        self.p += if r > self.target_r { self.step } else { -self.step };
        self.p = self.p.clamp(0.0, self.p_max);
        Ok(())
    }
}

/// Functional form of [`AdaptiveState::update`].
pub fn update_probability(state: &AdaptiveState, real_logits: &[f32]) -> Result<AdaptiveState> {
    let mut next = state.clone();
    next.update(real_logits)?;
    Ok(next)
}
