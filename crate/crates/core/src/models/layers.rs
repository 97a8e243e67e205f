//! Layer primitives with hand-written backward passes.
//!
//! Convolutions use "same" padding: the output has `ceil(in / stride)` rows
//! and columns and the padding deficit is split with the smaller half in
//! front. Weights are laid out `[ky][kx][cin][cout]` so an im2col row times
//! the weight matrix yields an NHWC output row directly.

use super::tensor::{Real, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub kernel: usize,
    pub stride: usize,
    pub cin: usize,
    pub cout: usize,
}

impl ConvGeometry {
    pub const fn new(kernel: usize, stride: usize, cin: usize, cout: usize) -> Self {
        Self {
            kernel,
            stride,
            cin,
            cout,
        }
    }

    pub fn weight_len(&self) -> usize {
        self.kernel * self.kernel * self.cin * self.cout
    }

    pub fn fan_in(&self) -> usize {
        self.kernel * self.kernel * self.cin
    }

    /// Output extent and leading padding along one axis.
    pub fn out_extent(&self, input: usize) -> (usize, usize) {
        let out = input.div_ceil(self.stride);
        let total = ((out - 1) * self.stride + self.kernel).saturating_sub(input);
        (out, total / 2)
    }

    fn is_pointwise(&self) -> bool {
        self.kernel == 1 && self.stride == 1
    }
}

/// Saved forward state of one convolution.
pub struct ConvCache<T> {
    input_shape: [usize; 4],
    out_shape: [usize; 4],
    /// im2col matrix, or the input itself for pointwise convolutions.
    cols: Vec<T>,
}

fn im2col<T: Real>(x: &Tensor<T>, g: &ConvGeometry, out_shape: [usize; 4]) -> Vec<T> {
    let [b, h, w, cin] = x.shape();
    let [_, ho, wo, _] = out_shape;
    let (_, pt) = g.out_extent(h);
    let (_, pl) = g.out_extent(w);
    let k = g.kernel;
    let row_len = k * k * cin;
    let mut cols = vec![T::zero(); b * ho * wo * row_len];
    let src = x.data();
    for bi in 0..b {
        for oy in 0..ho {
            for ox in 0..wo {
                let row = ((bi * ho + oy) * wo + ox) * row_len;
                for ky in 0..k {
                    let iy = (oy * g.stride + ky) as isize - pt as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..k {
                        let ix = (ox * g.stride + kx) as isize - pl as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let s = ((bi * h + iy as usize) * w + ix as usize) * cin;
                        let d = row + (ky * k + kx) * cin;
                        cols[d..d + cin].copy_from_slice(&src[s..s + cin]);
                    }
                }
            }
        }
    }
    cols
}

fn col2im<T: Real>(dcols: &[T], g: &ConvGeometry, in_shape: [usize; 4], out_shape: [usize; 4]) -> Tensor<T> {
    let [b, h, w, cin] = in_shape;
    let [_, ho, wo, _] = out_shape;
    let (_, pt) = g.out_extent(h);
    let (_, pl) = g.out_extent(w);
    let k = g.kernel;
    let row_len = k * k * cin;
    let mut dx = Tensor::zeros(in_shape);
    let dst = dx.data_mut();
    for bi in 0..b {
        for oy in 0..ho {
            for ox in 0..wo {
                let row = ((bi * ho + oy) * wo + ox) * row_len;
                for ky in 0..k {
                    let iy = (oy * g.stride + ky) as isize - pt as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..k {
                        let ix = (ox * g.stride + kx) as isize - pl as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let d = ((bi * h + iy as usize) * w + ix as usize) * cin;
                        let s = row + (ky * k + kx) * cin;
                        for (o, &v) in dst[d..d + cin].iter_mut().zip(&dcols[s..s + cin]) {
                            *o = *o + v;
                        }
                    }
                }
            }
        }
    }
    dx
}

/// Convolution forward pass. Returns the output and the state needed by
/// [`conv2d_backward`].
pub fn conv2d_forward<T: Real>(
    x: &Tensor<T>,
    weight: &[T],
    bias: &[T],
    g: &ConvGeometry,
) -> (Tensor<T>, ConvCache<T>) {
    let [b, h, w, cin] = x.shape();
    assert_eq!(cin, g.cin, "conv input channels");
    assert_eq!(weight.len(), g.weight_len());
    assert_eq!(bias.len(), g.cout);
    let (ho, _) = g.out_extent(h);
    let (wo, _) = g.out_extent(w);
    let out_shape = [b, ho, wo, g.cout];
    let cols = if g.is_pointwise() {
        x.data().to_vec()
    } else {
        im2col(x, g, out_shape)
    };
    let rows = b * ho * wo;
    let mut out = Tensor::zeros(out_shape);
    {
        let od = out.data_mut();
        for r in 0..rows {
            od[r * g.cout..(r + 1) * g.cout].copy_from_slice(bias);
        }
        T::gemm(rows, g.fan_in(), g.cout, &cols, false, weight, false, T::one(), od);
    }
    let cache = ConvCache {
        input_shape: x.shape(),
        out_shape,
        cols,
    };
    (out, cache)
}

/// Inference-only convolution (drops the cache).
pub fn conv2d<T: Real>(x: &Tensor<T>, weight: &[T], bias: &[T], g: &ConvGeometry) -> Tensor<T> {
    conv2d_forward(x, weight, bias, g).0
}

/// Gradient buffers a backward pass accumulates into.
pub struct ConvGrads<'a, T> {
    pub weight: &'a mut [T],
    pub bias: &'a mut [T],
}

/// Convolution backward pass. Parameter gradients are accumulated into
/// `grads` when given; the input gradient is returned when `need_input_grad`.
pub fn conv2d_backward<T: Real>(
    cache: &ConvCache<T>,
    dy: &Tensor<T>,
    weight: &[T],
    g: &ConvGeometry,
    grads: Option<ConvGrads<'_, T>>,
    need_input_grad: bool,
) -> Option<Tensor<T>> {
    assert_eq!(dy.shape(), cache.out_shape, "conv output gradient shape");
    let [b, ho, wo, cout] = cache.out_shape;
    let rows = b * ho * wo;
    let dyd = dy.data();
    if let Some(gr) = grads {
        T::gemm(g.fan_in(), rows, cout, &cache.cols, true, dyd, false, T::one(), gr.weight);
        for r in 0..rows {
            for (acc, &v) in gr.bias.iter_mut().zip(&dyd[r * cout..(r + 1) * cout]) {
                *acc = *acc + v;
            }
        }
    }
    if !need_input_grad {
        return None;
    }
    let mut dcols = vec![T::zero(); rows * g.fan_in()];
    T::gemm(rows, cout, g.fan_in(), dyd, false, weight, true, T::zero(), &mut dcols);
    if g.is_pointwise() {
        return Some(Tensor::from_vec(cache.input_shape, dcols).expect("pointwise shape"));
    }
    Some(col2im(&dcols, g, cache.input_shape, cache.out_shape))
}

pub fn relu_inplace<T: Real>(x: &mut Tensor<T>) {
    for v in x.data_mut() {
        if !(*v > T::zero()) {
            *v = T::zero();
        }
    }
}

/// Backward of ReLU given its output.
pub fn relu_backward<T: Real>(y: &Tensor<T>, dy: &mut Tensor<T>) {
    for (d, &o) in dy.data_mut().iter_mut().zip(y.data()) {
        if !(o > T::zero()) {
            *d = T::zero();
        }
    }
}

pub fn leaky_relu_inplace<T: Real>(x: &mut Tensor<T>, slope: T) {
    for v in x.data_mut() {
        if *v < T::zero() {
            *v = *v * slope;
        }
    }
}

/// Backward of leaky ReLU given its output (sign is preserved for positive slopes).
pub fn leaky_relu_backward<T: Real>(y: &Tensor<T>, dy: &mut Tensor<T>, slope: T) {
    for (d, &o) in dy.data_mut().iter_mut().zip(y.data()) {
        if o < T::zero() {
            *d = *d * slope;
        }
    }
}

/// Two-tap interpolation weights for a x2 bilinear upsample
/// (half-pixel centers, edges clamped).
fn upsample_taps(n: usize) -> Vec<(usize, usize, f64, f64)> {
    (0..2 * n)
        .map(|o| {
            let src = ((o as f64 + 0.5) * 0.5 - 0.5).max(0.0);
            let i0 = (src.floor() as usize).min(n - 1);
            let i1 = (i0 + 1).min(n - 1);
            let l1 = src - i0 as f64;
            (i0, i1, 1.0 - l1, l1)
        })
        .collect()
}

pub fn upsample2x<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    let [b, h, w, c] = x.shape();
    let ty = upsample_taps(h);
    let tx = upsample_taps(w);
    let mut out = Tensor::zeros([b, 2 * h, 2 * w, c]);
    let src = x.data();
    let dst = out.data_mut();
    for bi in 0..b {
        for (oy, &(y0, y1, wy0, wy1)) in ty.iter().enumerate() {
            for (ox, &(x0, x1, wx0, wx1)) in tx.iter().enumerate() {
                let d = ((bi * 2 * h + oy) * 2 * w + ox) * c;
                let taps = [
                    (y0, x0, wy0 * wx0),
                    (y0, x1, wy0 * wx1),
                    (y1, x0, wy1 * wx0),
                    (y1, x1, wy1 * wx1),
                ];
                for (yy, xx, wt) in taps {
                    if wt == 0.0 {
                        continue;
                    }
                    let wt = T::lit(wt);
                    let s = ((bi * h + yy) * w + xx) * c;
                    for ch in 0..c {
                        dst[d + ch] = dst[d + ch] + wt * src[s + ch];
                    }
                }
            }
        }
    }
    out
}

/// Transpose of [`upsample2x`].
pub fn upsample2x_backward<T: Real>(dy: &Tensor<T>) -> Tensor<T> {
    let [b, h2, w2, c] = dy.shape();
    let (h, w) = (h2 / 2, w2 / 2);
    let ty = upsample_taps(h);
    let tx = upsample_taps(w);
    let mut dx = Tensor::zeros([b, h, w, c]);
    let src = dy.data();
    let dst = dx.data_mut();
    for bi in 0..b {
        for (oy, &(y0, y1, wy0, wy1)) in ty.iter().enumerate() {
            for (ox, &(x0, x1, wx0, wx1)) in tx.iter().enumerate() {
                let s = ((bi * h2 + oy) * w2 + ox) * c;
                let taps = [
                    (y0, x0, wy0 * wx0),
                    (y0, x1, wy0 * wx1),
                    (y1, x0, wy1 * wx0),
                    (y1, x1, wy1 * wx1),
                ];
                for (yy, xx, wt) in taps {
                    if wt == 0.0 {
                        continue;
                    }
                    let wt = T::lit(wt);
                    let d = ((bi * h + yy) * w + xx) * c;
                    for ch in 0..c {
                        dst[d + ch] = dst[d + ch] + wt * src[s + ch];
                    }
                }
            }
        }
    }
    dx
}
