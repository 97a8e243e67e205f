//! Fixed city styles and the benchmark pairings built from them.
//!
//! | style            | ground / roof          | layout    | sizes | density | L-shapes | shear | blur |
//! |------------------|------------------------|-----------|-------|---------|----------|-------|------|
//! | `vegas`          | beige / slate grey     | grid      | 6–12  | 8       | 0.10     | 0°    | 0    |
//! | `paris`          | grey / pale mauve      | grid      | 8–16  | 9       | 0.40     | 0°    | 0    |
//! | `shanghai`       | green-grey / blue-white| scattered | 8–18  | 6       | 0.20     | 10°   | 0    |
//! | `khartoum`       | dim ochre / dark grey  | scattered | 5–10  | 12      | 0.50     | 0°    | 0.5  |
//! | `on_nadir`       | grey / light grey      | grid      | 6–14  | 8       | 0.30     | 0°    | 0    |
//! | `very_off_nadir` | as `on_nadir`          | grid      | 6–14  | 8       | 0.30     | 38°   | 1.2  |
//!
//! Khartoum is darker and warmer overall than Vegas, but roofs stay less
//! saturated than the ground in both, so brightness and hue jitter on Vegas
//! covers most of the colour shift.
//!
//! `very_off_nadir` differs from `on_nadir` only in shear angle and blur.

use super::style::{CityStyle, OrientationMode};
use crate::error::{Error, Result};

pub const PRESET_NAMES: [&str; 5] = ["v2k", "vp2k", "ps2k", "vsp2k", "on2voff"];
pub const STYLE_NAMES: [&str; 6] = ["vegas", "paris", "shanghai", "khartoum", "on_nadir", "very_off_nadir"];

/// Source styles and target style of one benchmark.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkPreset {
    pub name: String,
    pub sources: Vec<CityStyle>,
    pub target: CityStyle,
}

pub fn style_by_name(name: &str) -> Result<CityStyle> {
    let s = match name {
        "vegas" => CityStyle {
            name: "vegas".into(),
            palette: [[0.80, 0.74, 0.64], [0.42, 0.43, 0.47], [0.30, 0.28, 0.27]],
            texture_noise_amp: 0.04,
            building_density: 8.0,
            size_range: (6, 12),
            orientation_mode: OrientationMode::Grid,
            shape_mix: 0.1,
            shear_angle_deg: 0.0,
            facade_height_px: 4,
            blur_sigma_px: 0.0,
            rng_seed_base: 0x5645_4741,
        },
        "paris" => CityStyle {
            name: "paris".into(),
            palette: [[0.46, 0.46, 0.44], [0.68, 0.64, 0.70], [0.28, 0.27, 0.28]],
            texture_noise_amp: 0.06,
            building_density: 9.0,
            size_range: (8, 16),
            orientation_mode: OrientationMode::Grid,
            shape_mix: 0.4,
            shear_angle_deg: 0.0,
            facade_height_px: 6,
            blur_sigma_px: 0.0,
            rng_seed_base: 0x5041_5249,
        },
        "shanghai" => CityStyle {
            name: "shanghai".into(),
            palette: [[0.40, 0.47, 0.41], [0.72, 0.76, 0.82], [0.33, 0.35, 0.38]],
            texture_noise_amp: 0.05,
            building_density: 6.0,
            size_range: (8, 18),
            orientation_mode: OrientationMode::Scattered,
            shape_mix: 0.2,
            shear_angle_deg: 10.0,
            facade_height_px: 8,
            blur_sigma_px: 0.0,
            rng_seed_base: 0x5348_4147,
        },
        "khartoum" => CityStyle {
            name: "khartoum".into(),
            palette: [[0.66, 0.50, 0.38], [0.27, 0.25, 0.27], [0.20, 0.17, 0.15]],
            texture_noise_amp: 0.09,
            building_density: 12.0,
            size_range: (5, 10),
            orientation_mode: OrientationMode::Scattered,
            shape_mix: 0.5,
            shear_angle_deg: 0.0,
            facade_height_px: 3,
            blur_sigma_px: 0.5,
            rng_seed_base: 0x4b48_4152,
        },
        "on_nadir" => on_nadir(),
        "very_off_nadir" => CityStyle {
            name: "very_off_nadir".into(),
            shear_angle_deg: 38.0,
            blur_sigma_px: 1.2,
            ..on_nadir()
        },
        other => return Err(Error::invalid(format!("unknown city style {other:?}"))),
    };
    Ok(s)
}

fn on_nadir() -> CityStyle {
    CityStyle {
        name: "on_nadir".into(),
        palette: [[0.50, 0.52, 0.48], [0.78, 0.76, 0.72], [0.30, 0.29, 0.30]],
        texture_noise_amp: 0.05,
        building_density: 8.0,
        size_range: (6, 14),
        orientation_mode: OrientationMode::Grid,
        shape_mix: 0.3,
        shear_angle_deg: 0.0,
        facade_height_px: 6,
        blur_sigma_px: 0.0,
        rng_seed_base: 0x4e41_4449,
    }
}

/// Benchmark pairing by name: `v2k`, `vp2k`, `ps2k`, `vsp2k`, `on2voff`.
pub fn benchmark_preset(name: &str) -> Result<BenchmarkPreset> {
    let (sources, target): (&[&str], &str) = match name {
        "v2k" => (&["vegas"], "khartoum"),
        "vp2k" => (&["vegas", "paris"], "khartoum"),
        "ps2k" => (&["paris", "shanghai"], "khartoum"),
        "vsp2k" => (&["vegas", "shanghai", "paris"], "khartoum"),
        "on2voff" => (&["on_nadir"], "very_off_nadir"),
        other => {
            return Err(Error::invalid(format!(
                "unknown benchmark preset {other:?} (expected one of {PRESET_NAMES:?})"
            )))
        }
    };
    Ok(BenchmarkPreset {
        name: name.to_string(),
        sources: sources.iter().map(|s| style_by_name(s)).collect::<Result<_>>()?,
        target: style_by_name(target)?,
    })
}
