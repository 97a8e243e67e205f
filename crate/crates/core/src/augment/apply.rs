use super::geometry::{Interp, Resampler};
use super::plan::{Transform, TransformPlan};
use crate::error::{Error, Result};
use crate::geodata::Mask;
use crate::models::{Real, Tensor};

fn mean_color(img: &[f32]) -> [f32; 3] {
    let n = (img.len() / 3).max(1) as f64;
    let mut acc = [0.0f64; 3];
    for px in img.chunks_exact(3) {
        for c in 0..3 {
            acc[c] += px[c] as f64;
        }
    }
    acc.map(|v| (v / n) as f32)
}

/// Rotation of RGB about the gray axis (Rodrigues formula).
fn hue_matrix(turns: f64) -> [[f64; 3]; 3] {
    let theta = turns * std::f64::consts::TAU;
    let (s, c) = theta.sin_cos();
    let u = 1.0 / 3f64.sqrt();
    let t = (1.0 - c) * u * u;
    let (su, a) = (s * u, t + c);
    [[a, t - su, t + su], [t + su, a, t - su], [t - su, t + su, a]]
}

fn photometric(img: &mut [f32], t: &Transform) {
    match *t {
        Transform::Brightness { delta } => {
            for v in img.iter_mut() {
                *v = (*v + delta as f32).clamp(0.0, 1.0);
            }
        }
        Transform::Contrast { factor } => {
            let mean = img.iter().map(|&v| v as f64).sum::<f64>() / img.len().max(1) as f64;
            for v in img.iter_mut() {
                *v = ((*v as f64 - mean) * factor + mean).clamp(0.0, 1.0) as f32;
            }
        }
        Transform::HueShift { turns } => {
            let m = hue_matrix(turns);
            for px in img.chunks_exact_mut(3) {
                let rgb = [px[0] as f64, px[1] as f64, px[2] as f64];
                for (o, row) in px.iter_mut().zip(&m) {
                    *o = (row[0] * rgb[0] + row[1] * rgb[1] + row[2] * rgb[2]).clamp(0.0, 1.0) as f32;
                }
            }
        }
        _ => unreachable!("geometric op routed to photometric path"),
    }
}

/// Apply a plan to a registered image/mask pair. Geometric ops move both
/// (bilinear for the image, nearest for the mask; out-of-frame pixels take
/// the image's mean color and class 0). Photometric ops and cutout touch
/// the image only.
pub fn augment_pair(image: &Tensor<f32>, mask: &Mask, plan: &TransformPlan) -> Result<(Tensor<f32>, Mask)> {
    let [b, h, w, c] = image.shape();
    if b != 1 || c != 3 || h != mask.height() || w != mask.width() {
        return Err(Error::shape(format!(
            "image {:?} and mask {}x{} are not a registered pair",
            image.shape(),
            mask.height(),
            mask.width()
        )));
    }
    let (mut h, mut w) = (h, w);
    let mut img = image.item(0).to_vec();
    let mut labels = mask.data().to_vec();
    for t in &plan.0 {
        if let Transform::Cutout { .. } = t {
            let r = Resampler::for_transform(t, h, w, Interp::Nearest).expect("cutout resampler");
            img = r.apply(&img, 3, &[0.0; 3]);
            continue;
        }
        match Resampler::for_transform(t, h, w, Interp::Bilinear) {
            Some(r) => {
                let fill = mean_color(&img);
                img = r.apply(&img, 3, &fill);
                let rn = Resampler::for_transform(t, h, w, Interp::Nearest).expect("geometric");
                labels = rn.apply_labels(&labels, 0);
                h = r.out_h;
                w = r.out_w;
            }
            None => photometric(&mut img, t),
        }
    }
    Ok((Tensor::from_vec([1, h, w, 3], img)?, Mask::from_vec(h, w, labels)?))
}

/// Per-item linear resampling of discriminator input maps, with its exact
/// transpose for backpropagation.
#[derive(Clone, Debug)]
pub struct MapAugmentation {
    shape: [usize; 4],
    chains: Vec<Vec<Resampler>>,
}

impl MapAugmentation {
    /// Errors on photometric ops (undefined on self-information maps) and on
    /// quarter turns of non-square maps (items would no longer stack).
    pub fn new(plans: &[TransformPlan], shape: [usize; 4]) -> Result<Self> {
        let [b, h, w, _] = shape;
        if plans.len() != b {
            return Err(Error::shape(format!("{} plans for a batch of {b}", plans.len())));
        }
        let mut chains = Vec::with_capacity(b);
        for plan in plans {
            let mut chain = Vec::with_capacity(plan.0.len());
            for t in &plan.0 {
                if t.kind().is_photometric() {
                    return Err(Error::invalid(format!(
                        "photometric op {:?} cannot be applied to discriminator maps",
                        t.kind()
                    )));
                }
                let r = Resampler::for_transform(t, h, w, Interp::Bilinear).expect("geometric op");
                if (r.out_h, r.out_w) != (h, w) {
                    return Err(Error::shape("quarter turns of non-square maps change the batch shape"));
                }
                chain.push(r);
            }
            chains.push(chain);
        }
        Ok(Self { shape, chains })
    }

    pub fn forward<T: Real>(&self, maps: &Tensor<T>) -> Tensor<T> {
        assert_eq!(maps.shape(), self.shape, "map augmentation input shape");
        let c = self.shape[3];
        let fill = vec![T::zero(); c];
        let mut out = maps.clone();
        for (i, chain) in self.chains.iter().enumerate() {
            let mut v = maps.item(i).to_vec();
            for r in chain {
                v = r.apply(&v, c, &fill);
            }
            out.item_mut(i).copy_from_slice(&v);
        }
        out
    }

    pub fn backward<T: Real>(&self, dy: &Tensor<T>) -> Tensor<T> {
        assert_eq!(dy.shape(), self.shape, "map augmentation gradient shape");
        let c = self.shape[3];
        let mut out = dy.clone();
        for (i, chain) in self.chains.iter().enumerate() {
            let mut g = dy.item(i).to_vec();
            for r in chain.iter().rev() {
                g = r.apply_transpose(&g, c);
            }
            out.item_mut(i).copy_from_slice(&g);
        }
        out
    }
}

/// Augment a batch of maps, one plan per item.
pub fn augment_maps<T: Real>(maps: &Tensor<T>, plans: &[TransformPlan]) -> Result<Tensor<T>> {
    Ok(MapAugmentation::new(plans, maps.shape())?.forward(maps))
}
