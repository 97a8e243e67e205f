use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Source,
    Target,
}

/// Named domain and its role in one experiment.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DomainTag {
    pub name: String,
    pub role: Role,
}

impl DomainTag {
    pub fn new(name: impl Into<String>, role: Role) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::invalid("domain name must be nonempty"));
        }
        Ok(Self { name, role })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrientationMode {
    /// Axis-aligned footprints on a coarse lattice.
    Grid,
    /// Arbitrary rotation, free placement.
    Scattered,
}

/// Rendering parameters of one synthetic "city".
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CityStyle {
    pub name: String,
    /// Ground, roof and facade base colors.
    pub palette: [[f32; 3]; 3],
    pub texture_noise_amp: f32,
    /// Expected building count per tile.
    pub building_density: f64,
    /// Inclusive side-length range of building footprints, in pixels.
    pub size_range: (u32, u32),
    pub orientation_mode: OrientationMode,
    /// Fraction of L-shaped footprints.
    pub shape_mix: f64,
    /// Off-nadir tilt; roofs shift by `facade_height_px * tan(shear_angle_deg)`.
    pub shear_angle_deg: f64,
    pub facade_height_px: u32,
    pub blur_sigma_px: f64,
    pub rng_seed_base: u64,
}

impl CityStyle {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(format!("style {}: {m}", self.name)));
        if self.palette.iter().flatten().any(|c| !(0.0..=1.0).contains(c)) {
            return bad("palette colors must lie in [0,1]".into());
        }
        if !(0.0..=0.5).contains(&self.texture_noise_amp) {
            return bad(format!("texture_noise_amp {} outside [0,0.5]", self.texture_noise_amp));
        }
        if !(self.building_density >= 0.0 && self.building_density.is_finite()) {
            return bad(format!("building_density {} must be >= 0", self.building_density));
        }
        let (lo, hi) = self.size_range;
        if lo == 0 || lo > hi {
            return bad(format!("size_range ({lo}, {hi}) must satisfy 0 < min <= max"));
        }
        if !(0.0..=1.0).contains(&self.shape_mix) {
            return bad(format!("shape_mix {} outside [0,1]", self.shape_mix));
        }
        if !(0.0..=45.0).contains(&self.shear_angle_deg) {
            return bad(format!("shear_angle_deg {} outside [0,45]", self.shear_angle_deg));
        }
        if !(self.blur_sigma_px >= 0.0 && self.blur_sigma_px.is_finite()) {
            return bad(format!("blur_sigma_px {} must be >= 0", self.blur_sigma_px));
        }
        Ok(())
    }

    /// Horizontal roof displacement in whole pixels.
    pub fn roof_shift_px(&self) -> i64 {
        (self.facade_height_px as f64 * self.shear_angle_deg.to_radians().tan()).round() as i64
    }
}
