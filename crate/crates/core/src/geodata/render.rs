//! Procedural tile renderer.
//!
//! Footprints (rectangles and L-shapes, optionally rotated) are rasterized by
//! pixel-center inclusion and unioned into the label mask. The image paints a
//! facade band and a roof displaced horizontally by the off-nadir shift, then
//! applies Gaussian blur and finally additive texture noise. Output colors are
//! quantized to 1/255 steps so PNG storage is lossless.

use rand::Rng as _;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::style::{CityStyle, DomainTag, OrientationMode, Role};
use crate::error::{Error, Result};
use crate::models::Tensor;
use crate::rng::{substream, tag, Rng};

pub const MIN_TILE_SIZE: usize = 32;

/// Per-pixel class indices, row-major.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Mask {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl Mask {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![0; height * width],
        }
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::shape(format!(
                "{} mask values for {height}x{width}",
                data.len()
            )));
        }
        Ok(Self { height, width, data })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }

    pub fn max_class(&self) -> u8 {
        self.data.iter().copied().max().unwrap_or(0)
    }

    /// Fraction of pixels with a nonzero class.
    pub fn foreground_fraction(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().filter(|&&v| v != 0).count() as f64 / self.data.len() as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TileMeta {
    pub style: String,
    pub seed: u64,
}

/// One image tile with its registered label mask.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    /// `1 x H x W x 3`, values in [0, 1].
    pub image: Tensor<f32>,
    pub mask: Mask,
    pub domain: DomainTag,
    pub meta: TileMeta,
}

impl Sample {
    pub fn new(image: Tensor<f32>, mask: Mask, domain: DomainTag, meta: TileMeta) -> Result<Self> {
        let [b, h, w, c] = image.shape();
        if b != 1 || c != 3 || h != mask.height() || w != mask.width() {
            return Err(Error::shape(format!(
                "image {:?} does not register with {}x{} mask",
                image.shape(),
                mask.height(),
                mask.width()
            )));
        }
        Ok(Self {
            image,
            mask,
            domain,
            meta,
        })
    }
}

/// A building footprint in tile coordinates.
#[derive(Clone, Debug)]
struct Footprint {
    cx: f64,
    cy: f64,
    w: f64,
    h: f64,
    angle: f64,
    l_shape: bool,
}

impl Footprint {
    fn contains(&self, px: f64, py: f64) -> bool {
        let (s, c) = self.angle.sin_cos();
        let dx = px - self.cx;
        let dy = py - self.cy;
        let u = c * dx + s * dy;
        let v = -s * dx + c * dy;
        let (hw, hh) = (self.w / 2.0, self.h / 2.0);
        if u < -hw || u >= hw || v < -hh || v >= hh {
            return false;
        }
        // L-shapes drop the (+u, -v) quarter.
        !(self.l_shape && u >= 0.0 && v < 0.0)
    }

    /// Half extents of the rotated bounding box.
    fn half_extents(&self) -> (f64, f64) {
        let (s, c) = self.angle.sin_cos();
        let (hw, hh) = (self.w / 2.0, self.h / 2.0);
        (hw * c.abs() + hh * s.abs(), hw * s.abs() + hh * c.abs())
    }
}

fn sample_footprints(style: &CityStyle, size: usize, rng: &mut Rng) -> Vec<Footprint> {
    let count = if style.building_density > 0.0 {
        Poisson::new(style.building_density)
            .expect("positive rate")
            .sample(rng) as usize
    } else {
        0
    };
    let (lo, hi) = style.size_range;
    let cap = (size - 2) as u32;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let w = rng.random_range(lo..=hi).min(cap) as f64;
        let h = rng.random_range(lo..=hi).min(cap) as f64;
        let l_shape = rng.random_bool(style.shape_mix);
        let angle = match style.orientation_mode {
            OrientationMode::Grid => 0.0,
            OrientationMode::Scattered => rng.random_range(0.0..std::f64::consts::FRAC_PI_2),
        };
        let mut fp = Footprint {
            cx: 0.0,
            cy: 0.0,
            w,
            h,
            angle,
            l_shape,
        };
        let (ex, ey) = fp.half_extents();
        let span = |e: f64| (e, (size as f64 - e).max(e));
        let (x0, x1) = span(ex);
        let (y0, y1) = span(ey);
        fp.cx = if x1 > x0 { rng.random_range(x0..x1) } else { x0 };
        fp.cy = if y1 > y0 { rng.random_range(y0..y1) } else { y0 };
        if style.orientation_mode == OrientationMode::Grid {
            // Snap to a 4 px lattice while staying inside the tile.
            fp.cx = ((fp.cx / 4.0).round() * 4.0).clamp(x0, x1);
            fp.cy = ((fp.cy / 4.0).round() * 4.0).clamp(y0, y1);
        }
        out.push(fp);
    }
    out
}

fn rasterize(fp: &Footprint, size: usize) -> Vec<(usize, usize)> {
    let (ex, ey) = fp.half_extents();
    let ylo = ((fp.cy - ey).floor().max(0.0)) as usize;
    let yhi = ((fp.cy + ey).ceil() as usize).min(size);
    let xlo = ((fp.cx - ex).floor().max(0.0)) as usize;
    let xhi = ((fp.cx + ex).ceil() as usize).min(size);
    let mut px = Vec::new();
    for y in ylo..yhi {
        for x in xlo..xhi {
            if fp.contains(x as f64 + 0.5, y as f64 + 0.5) {
                px.push((y, x));
            }
        }
    }
    px
}

fn gaussian_blur(img: &mut [f32], size: usize, sigma: f64) {
    if sigma <= 0.0 {
        return;
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= norm);
    let clamp = |v: isize| v.clamp(0, size as isize - 1) as usize;
    let mut tmp = vec![0f32; img.len()];
    for y in 0..size {
        for x in 0..size {
            for c in 0..3 {
                let mut acc = 0.0f64;
                for (k, &wt) in kernel.iter().enumerate() {
                    let xx = clamp(x as isize + k as isize - radius);
                    acc += wt * img[(y * size + xx) * 3 + c] as f64;
                }
                tmp[(y * size + x) * 3 + c] = acc as f32;
            }
        }
    }
    for y in 0..size {
        for x in 0..size {
            for c in 0..3 {
                let mut acc = 0.0f64;
                for (k, &wt) in kernel.iter().enumerate() {
                    let yy = clamp(y as isize + k as isize - radius);
                    acc += wt * tmp[(yy * size + x) * 3 + c] as f64;
                }
                img[(y * size + x) * 3 + c] = acc as f32;
            }
        }
    }
}

/// Smooth value noise (8 px lattice, bilinear) blended with per-pixel grain, in [-1, 1].
fn texture_field(size: usize, rng: &mut Rng) -> Vec<f32> {
    const CELL: usize = 8;
    let n = size / CELL + 2;
    let lattice: Vec<f32> = (0..n * n).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    let mut out = Vec::with_capacity(size * size);
    for y in 0..size {
        let fy = y as f32 / CELL as f32;
        let (iy, ty) = (fy.floor() as usize, fy.fract());
        for x in 0..size {
            let fx = x as f32 / CELL as f32;
            let (ix, tx) = (fx.floor() as usize, fx.fract());
            let v00 = lattice[iy * n + ix];
            let v01 = lattice[iy * n + ix + 1];
            let v10 = lattice[(iy + 1) * n + ix];
            let v11 = lattice[(iy + 1) * n + ix + 1];
            let smooth = (v00 * (1.0 - tx) + v01 * tx) * (1.0 - ty) + (v10 * (1.0 - tx) + v11 * tx) * ty;
            let grain = rng.random_range(-1.0f32..1.0);
            out.push(0.7 * smooth + 0.3 * grain);
        }
    }
    out
}

/// Quantize to the 8-bit level grid used on disk.
pub(crate) fn quantize(v: f32) -> f32 {
    (v.clamp(0.0, 1.0) * 255.0).round() / 255.0
}

/// Render one tile. Pure in `(style, tile_seed, size_px)`.
pub fn generate_tile(style: &CityStyle, tile_seed: u64, size_px: usize) -> Result<Sample> {
    if size_px < MIN_TILE_SIZE {
        return Err(Error::invalid(format!(
            "tile size {size_px} below minimum {MIN_TILE_SIZE}"
        )));
    }
    style.validate()?;
    let mut rng = substream(style.rng_seed_base, &[tag::TILE, tile_seed, size_px as u64]);
    let footprints = sample_footprints(style, size_px, &mut rng);
    let shades: Vec<f32> = footprints
        .iter()
        .map(|_| rng.random_range(0.92f32..1.08))
        .collect();

    let mut mask = Mask::zeros(size_px, size_px);
    let cells: Vec<Vec<(usize, usize)>> = footprints.iter().map(|f| rasterize(f, size_px)).collect();
    for px in &cells {
        for &(y, x) in px {
            mask.set(y, x, 1);
        }
    }

    let [ground, roof, facade] = style.palette;
    let mut img = Vec::with_capacity(size_px * size_px * 3);
    for _ in 0..size_px * size_px {
        img.extend_from_slice(&ground);
    }
    let paint = |img: &mut Vec<f32>, y: usize, x: i64, color: [f32; 3]| {
        if (0..size_px as i64).contains(&x) {
            let i = (y * size_px + x as usize) * 3;
            img[i..i + 3].copy_from_slice(&color);
        }
    };
    let shift = style.roof_shift_px();
    if shift != 0 {
        let (step, n) = (shift.signum(), shift.abs());
        for px in &cells {
            for &(y, x) in px {
                for t in 0..n {
                    paint(&mut img, y, x as i64 + t * step, facade);
                }
            }
        }
    }
    for (px, &shade) in cells.iter().zip(&shades) {
        let color = roof.map(|c| (c * shade).clamp(0.0, 1.0));
        for &(y, x) in px {
            paint(&mut img, y, x as i64 + shift, color);
        }
    }

    gaussian_blur(&mut img, size_px, style.blur_sigma_px);
    if style.texture_noise_amp > 0.0 {
        let field = texture_field(size_px, &mut rng);
        for (p, &n) in img.chunks_exact_mut(3).zip(&field) {
            for v in p {
                *v += style.texture_noise_amp * n;
            }
        }
    }
    img.iter_mut().for_each(|v| *v = quantize(*v));

    let image = Tensor::from_vec([1, size_px, size_px, 3], img)?;
    let domain = DomainTag::new(style.name.clone(), Role::Source)?;
    Sample::new(
        image,
        mask,
        domain,
        TileMeta {
            style: style.name.clone(),
            seed: tile_seed,
        },
    )
}
