use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Augmentation operations, in the order they may appear in a pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Hflip,
    Vflip,
    Rot90,
    TranslateInt,
    RotateArbitrary,
    ScaleIso,
    Brightness,
    Contrast,
    HueShift,
    Cutout,
}

impl OpKind {
    pub const ALL: [OpKind; 10] = [
        OpKind::Hflip,
        OpKind::Vflip,
        OpKind::Rot90,
        OpKind::TranslateInt,
        OpKind::RotateArbitrary,
        OpKind::ScaleIso,
        OpKind::Brightness,
        OpKind::Contrast,
        OpKind::HueShift,
        OpKind::Cutout,
    ];

    /// Ops allowed on discriminator inputs: geometric resamplings plus cutout.
    pub const MAP_SAFE: [OpKind; 7] = [
        OpKind::Hflip,
        OpKind::Vflip,
        OpKind::Rot90,
        OpKind::TranslateInt,
        OpKind::RotateArbitrary,
        OpKind::ScaleIso,
        OpKind::Cutout,
    ];

    pub fn is_photometric(self) -> bool {
        matches!(self, OpKind::Brightness | OpKind::Contrast | OpKind::HueShift)
    }
}

pub const TRANSLATE_MAX_PX: i32 = 8;
pub const ROTATE_MAX_DEG: f64 = 30.0;
pub const SCALE_RANGE: (f64, f64) = (0.8, 1.25);
pub const BRIGHTNESS_MAX: f64 = 0.2;
pub const CONTRAST_RANGE: (f64, f64) = (0.75, 1.33);
pub const HUE_MAX_TURNS: f64 = 0.1;
/// Cutout square side as a fraction of the image height.
pub const CUTOUT_FRACTION: f64 = 0.25;

/// Ordered op list with one shared firing probability.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentationConfig {
    pub ops: Vec<OpKind>,
    pub p: f64,
    /// Skip photometric ops when sampling.
    #[serde(default)]
    pub geometric_only: bool,
}

impl AugmentationConfig {
    pub fn new(ops: Vec<OpKind>, p: f64, geometric_only: bool) -> Result<Self> {
        let c = Self {
            ops,
            p,
            geometric_only,
        };
        c.validate()?;
        Ok(c)
    }

    /// Every op at probability `p`.
    pub fn full(p: f64) -> Result<Self> {
        Self::new(OpKind::ALL.to_vec(), p, false)
    }

    /// Geometric ops and cutout at probability `p`, for discriminator inputs.
    pub fn for_maps(p: f64) -> Result<Self> {
        Self::new(OpKind::MAP_SAFE.to_vec(), p, true)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::invalid(format!("augmentation p {} outside [0,1]", self.p)));
        }
        if self.ops.is_empty() {
            return Err(Error::invalid("augmentation op list is empty"));
        }
        Ok(())
    }

    pub fn with_p(&self, p: f64) -> Self {
        Self { p, ..self.clone() }
    }
}

/// One sampled operation with its parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Transform {
    Hflip,
    Vflip,
    /// Counter-clockwise quarter turns.
    Rot90 { k: u8 },
    TranslateInt { dx: i32, dy: i32 },
    RotateArbitrary { degrees: f64 },
    ScaleIso { factor: f64 },
    Brightness { delta: f64 },
    Contrast { factor: f64 },
    /// Rotation of RGB about the gray axis by `turns` of a full turn.
    HueShift { turns: f64 },
    /// Center as fractions of height and width.
    Cutout { cx: f64, cy: f64 },
}

impl Transform {
    pub fn kind(&self) -> OpKind {
        match self {
            Transform::Hflip => OpKind::Hflip,
            Transform::Vflip => OpKind::Vflip,
            Transform::Rot90 { .. } => OpKind::Rot90,
            Transform::TranslateInt { .. } => OpKind::TranslateInt,
            Transform::RotateArbitrary { .. } => OpKind::RotateArbitrary,
            Transform::ScaleIso { .. } => OpKind::ScaleIso,
            Transform::Brightness { .. } => OpKind::Brightness,
            Transform::Contrast { .. } => OpKind::Contrast,
            Transform::HueShift { .. } => OpKind::HueShift,
            Transform::Cutout { .. } => OpKind::Cutout,
        }
    }
}

/// Sampled transforms, applied in order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TransformPlan(pub Vec<Transform>);

impl TransformPlan {
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plan serializes")
    }
}

fn log_uniform(rng: &mut Rng, (lo, hi): (f64, f64)) -> f64 {
    rng.random_range(lo.ln()..=hi.ln()).exp()
}

fn draw_params(kind: OpKind, rng: &mut Rng) -> Transform {
    match kind {
        OpKind::Hflip => Transform::Hflip,
        OpKind::Vflip => Transform::Vflip,
        OpKind::Rot90 => Transform::Rot90 {
            k: rng.random_range(1..=3),
        },
        OpKind::TranslateInt => Transform::TranslateInt {
            dx: rng.random_range(-TRANSLATE_MAX_PX..=TRANSLATE_MAX_PX),
            dy: rng.random_range(-TRANSLATE_MAX_PX..=TRANSLATE_MAX_PX),
        },
        OpKind::RotateArbitrary => Transform::RotateArbitrary {
            degrees: rng.random_range(-ROTATE_MAX_DEG..=ROTATE_MAX_DEG),
        },
        OpKind::ScaleIso => Transform::ScaleIso {
            factor: log_uniform(rng, SCALE_RANGE),
        },
        OpKind::Brightness => Transform::Brightness {
            delta: rng.random_range(-BRIGHTNESS_MAX..=BRIGHTNESS_MAX),
        },
        OpKind::Contrast => Transform::Contrast {
            factor: log_uniform(rng, CONTRAST_RANGE),
        },
        OpKind::HueShift => Transform::HueShift {
            turns: rng.random_range(-HUE_MAX_TURNS..=HUE_MAX_TURNS),
        },
        OpKind::Cutout => Transform::Cutout {
            cx: rng.random_range(0.0..1.0),
            cy: rng.random_range(0.0..1.0),
        },
    }
}

/// Draw one independent Bernoulli(p) per op, then parameters for the ops
/// that fired, in pipeline order.
pub fn sample_pipeline(config: &AugmentationConfig, rng: &mut Rng) -> TransformPlan {
    let fired: Vec<OpKind> = config
        .ops
        .iter()
        .copied()
        .filter(|op| {
            // Keep one draw per listed op so the stream layout does not
            // depend on `geometric_only`.
            let hit = rng.random_bool(config.p);
            hit && !(config.geometric_only && op.is_photometric())
        })
        .collect();
    TransformPlan(fired.into_iter().map(|k| draw_params(k, rng)).collect())
}
