use std::path::Path;

use image::RgbImage;

use crate::error::{Error, Result};
use crate::geodata::{Mask, Sample};
use crate::models::Segmenter;

use super::metrics::predict_masks;

/// Background, building.
pub const PALETTE: [[u8; 3]; 2] = [[24, 24, 24], [255, 196, 0]];

fn paint_mask(canvas: &mut RgbImage, mask: &Mask, x0: u32, y0: u32) -> Result<()> {
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            let c = *PALETTE
                .get(mask.get(y, x) as usize)
                .ok_or_else(|| Error::invalid("prediction panels support two classes"))?;
            canvas.put_pixel(x0 + x as u32, y0 + y as u32, image::Rgb(c));
        }
    }
    Ok(())
}

/// One row per sample: input, ground truth, then one panel per prediction set.
pub fn render_panels(samples: &[Sample], predictions: &[Vec<Mask>]) -> Result<RgbImage> {
    let first = samples.first().ok_or_else(|| Error::invalid("no samples to render"))?;
    let (h, w) = (first.mask.height(), first.mask.width());
    if samples.iter().any(|s| (s.mask.height(), s.mask.width()) != (h, w)) {
        return Err(Error::shape("panel samples must share a tile size"));
    }
    if predictions.iter().any(|p| p.len() != samples.len()) {
        return Err(Error::shape("one prediction per sample required"));
    }
    let cols = 2 + predictions.len() as u32;
    let (h32, w32) = (h as u32, w as u32);
    let mut canvas = RgbImage::new(cols * w32, samples.len() as u32 * h32);
    for (row, s) in samples.iter().enumerate() {
        let y0 = row as u32 * h32;
        for (i, px) in s.image.item(0).chunks_exact(3).enumerate() {
            let rgb = [0, 1, 2].map(|c| (px[c].clamp(0.0, 1.0) * 255.0).round() as u8);
            canvas.put_pixel((i % w) as u32, y0 + (i / w) as u32, image::Rgb(rgb));
        }
        paint_mask(&mut canvas, &s.mask, w32, y0)?;
        for (k, preds) in predictions.iter().enumerate() {
            if (preds[row].height(), preds[row].width()) != (h, w) {
                return Err(Error::shape("prediction does not match its tile"));
            }
            paint_mask(&mut canvas, &preds[row], (2 + k as u32) * w32, y0)?;
        }
    }
    Ok(canvas)
}

/// Predict with each model and write the panel grid as a PNG.
pub fn render_predictions(models: &[&Segmenter<f32>], samples: &[Sample], out_path: &Path) -> Result<RgbImage> {
    let preds = models
        .iter()
        .map(|m| predict_masks(m, samples))
        .collect::<Result<Vec<_>>>()?;
    let canvas = render_panels(samples, &preds)?;
    canvas
        .save_with_format(out_path, image::ImageFormat::Png)
        .map_err(|source| Error::Image {
            path: out_path.to_path_buf(),
            source,
        })?;
    Ok(canvas)
}
