//! Geometric transforms as sparse linear resamplings.
//!
//! Every geometric op (and cutout) becomes a [`Resampler`]: for each output
//! pixel, a short list of `(source pixel, weight)` taps. Pixels with no taps
//! fall outside the source frame and take a fill value. Applying the taps is
//! linear in the input, so the transpose (scatter of the taps) is the exact
//! backward pass used for discriminator-side augmentation.

use super::plan::{Transform, CUTOUT_FRACTION};
use crate::models::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Interp {
    Nearest,
    Bilinear,
}

#[derive(Clone, Debug)]
pub struct Resampler {
    pub in_h: usize,
    pub in_w: usize,
    pub out_h: usize,
    pub out_w: usize,
    offsets: Vec<usize>,
    taps: Vec<(usize, f64)>,
}

impl Resampler {
    fn from_fn(
        in_h: usize,
        in_w: usize,
        out_h: usize,
        out_w: usize,
        mut f: impl FnMut(usize, usize, &mut Vec<(usize, f64)>),
    ) -> Self {
        let mut offsets = Vec::with_capacity(out_h * out_w + 1);
        let mut taps = Vec::with_capacity(out_h * out_w);
        offsets.push(0);
        for y in 0..out_h {
            for x in 0..out_w {
                f(y, x, &mut taps);
                offsets.push(taps.len());
            }
        }
        Self {
            in_h,
            in_w,
            out_h,
            out_w,
            offsets,
            taps,
        }
    }

    /// Exact index mapping: `src(y, x)` returns the source pixel or `None`.
    fn permutation(
        in_h: usize,
        in_w: usize,
        out_h: usize,
        out_w: usize,
        src: impl Fn(isize, isize) -> (isize, isize),
    ) -> Self {
        Self::from_fn(in_h, in_w, out_h, out_w, |y, x, taps| {
            let (sy, sx) = src(y as isize, x as isize);
            if sy >= 0 && sx >= 0 && (sy as usize) < in_h && (sx as usize) < in_w {
                taps.push((sy as usize * in_w + sx as usize, 1.0));
            }
        })
    }

    /// Continuous inverse warp about the image center. `inv` maps an output
    /// offset from the center to a source offset (pixel-center coordinates).
    fn warp(h: usize, w: usize, interp: Interp, inv: impl Fn(f64, f64) -> (f64, f64)) -> Self {
        let (cy, cx) = (h as f64 / 2.0, w as f64 / 2.0);
        Self::from_fn(h, w, h, w, |y, x, taps| {
            let (dy, dx) = inv(y as f64 + 0.5 - cy, x as f64 + 0.5 - cx);
            // Continuous pixel-index coordinates of the source point.
            let sy = cy + dy - 0.5;
            let sx = cx + dx - 0.5;
            if !(sy >= -0.5 && sy < h as f64 - 0.5 && sx >= -0.5 && sx < w as f64 - 0.5) {
                return;
            }
            match interp {
                Interp::Nearest => {
                    let iy = (sy + 0.5).floor() as usize;
                    let ix = (sx + 0.5).floor() as usize;
                    taps.push((iy.min(h - 1) * w + ix.min(w - 1), 1.0));
                }
                Interp::Bilinear => {
                    let y0 = sy.floor();
                    let x0 = sx.floor();
                    let (ty, tx) = (sy - y0, sx - x0);
                    let clampy = |v: f64| (v.max(0.0) as usize).min(h - 1);
                    let clampx = |v: f64| (v.max(0.0) as usize).min(w - 1);
                    let (ya, yb) = (clampy(y0), clampy(y0 + 1.0));
                    let (xa, xb) = (clampx(x0), clampx(x0 + 1.0));
                    for (yy, xx, wt) in [
                        (ya, xa, (1.0 - ty) * (1.0 - tx)),
                        (ya, xb, (1.0 - ty) * tx),
                        (yb, xa, ty * (1.0 - tx)),
                        (yb, xb, ty * tx),
                    ] {
                        if wt != 0.0 {
                            taps.push((yy * w + xx, wt));
                        }
                    }
                }
            }
        })
    }

    /// Resampler for one transform, or `None` for photometric ops.
    pub fn for_transform(t: &Transform, h: usize, w: usize, interp: Interp) -> Option<Self> {
        let (hi, wi) = (h as isize, w as isize);
        let r = match *t {
            Transform::Hflip => Self::permutation(h, w, h, w, |y, x| (y, wi - 1 - x)),
            Transform::Vflip => Self::permutation(h, w, h, w, |y, x| (hi - 1 - y, x)),
            Transform::Rot90 { k } => match k % 4 {
                0 => Self::permutation(h, w, h, w, |y, x| (y, x)),
                1 => Self::permutation(h, w, w, h, |y, x| (x, wi - 1 - y)),
                2 => Self::permutation(h, w, h, w, |y, x| (hi - 1 - y, wi - 1 - x)),
                _ => Self::permutation(h, w, w, h, |y, x| (hi - 1 - x, y)),
            },
            Transform::TranslateInt { dx, dy } => {
                Self::permutation(h, w, h, w, |y, x| (y - dy as isize, x - dx as isize))
            }
            Transform::RotateArbitrary { degrees } => {
                let (s, c) = degrees.to_radians().sin_cos();
                // Counter-clockwise on screen (y down): inverse rotates by -theta.
                Self::warp(h, w, interp, move |dy, dx| (c * dy + s * dx, -s * dy + c * dx))
            }
            Transform::ScaleIso { factor } => Self::warp(h, w, interp, move |dy, dx| (dy / factor, dx / factor)),
            Transform::Cutout { cx, cy } => {
                let (y0, y1, x0, x1) = cutout_box(h, w, cx, cy);
                Self::from_fn(h, w, h, w, |y, x, taps| {
                    if !(y >= y0 && y < y1 && x >= x0 && x < x1) {
                        taps.push((y * w + x, 1.0));
                    }
                })
            }
            Transform::Brightness { .. } | Transform::Contrast { .. } | Transform::HueShift { .. } => {
                return None
            }
        };
        Some(r)
    }

    /// `out[p] = sum_taps w * in[src]`, or `fill` for pixels without taps.
    pub fn apply<T: Real>(&self, input: &[T], channels: usize, fill: &[T]) -> Vec<T> {
        assert_eq!(input.len(), self.in_h * self.in_w * channels);
        assert_eq!(fill.len(), channels);
        let mut out = vec![T::zero(); self.out_h * self.out_w * channels];
        for p in 0..self.out_h * self.out_w {
            let taps = &self.taps[self.offsets[p]..self.offsets[p + 1]];
            let dst = &mut out[p * channels..(p + 1) * channels];
            if taps.is_empty() {
                dst.copy_from_slice(fill);
                continue;
            }
            for &(s, wt) in taps {
                let wt = T::lit(wt);
                for (o, &v) in dst.iter_mut().zip(&input[s * channels..(s + 1) * channels]) {
                    *o = *o + wt * v;
                }
            }
        }
        out
    }

    /// Transpose of [`Resampler::apply`] with zero fill.
    pub fn apply_transpose<T: Real>(&self, dy: &[T], channels: usize) -> Vec<T> {
        assert_eq!(dy.len(), self.out_h * self.out_w * channels);
        let mut dx = vec![T::zero(); self.in_h * self.in_w * channels];
        for p in 0..self.out_h * self.out_w {
            let g = &dy[p * channels..(p + 1) * channels];
            for &(s, wt) in &self.taps[self.offsets[p]..self.offsets[p + 1]] {
                let wt = T::lit(wt);
                for (o, &v) in dx[s * channels..(s + 1) * channels].iter_mut().zip(g) {
                    *o = *o + wt * v;
                }
            }
        }
        dx
    }

    /// Nearest-neighbor style gather for label masks (single tap per pixel).
    pub fn apply_labels(&self, input: &[u8], fill: u8) -> Vec<u8> {
        (0..self.out_h * self.out_w)
            .map(|p| {
                let taps = &self.taps[self.offsets[p]..self.offsets[p + 1]];
                match taps {
                    [] => fill,
                    [(s, _)] => input[*s],
                    _ => {
                        // Multi-tap resamplers are never used on labels; take the heaviest.
                        let (s, _) = taps
                            .iter()
                            .copied()
                            .fold((0, f64::MIN), |a, b| if b.1 > a.1 { b } else { a });
                        input[s]
                    }
                }
            })
            .collect()
    }
}

/// Clipped cutout square `[y0, y1) x [x0, x1)` of side `round(0.25 * h)`.
pub fn cutout_box(h: usize, w: usize, cx: f64, cy: f64) -> (usize, usize, usize, usize) {
    let side = (CUTOUT_FRACTION * h as f64).round() as isize;
    let y_c = (cy * h as f64).floor() as isize;
    let x_c = (cx * w as f64).floor() as isize;
    let y0 = (y_c - side / 2).clamp(0, h as isize) as usize;
    let x0 = (x_c - side / 2).clamp(0, w as isize) as usize;
    let y1 = (y_c - side / 2 + side).clamp(0, h as isize) as usize;
    let x1 = (x_c - side / 2 + side).clamp(0, w as isize) as usize;
    (y0, y1, x0, x1)
}
