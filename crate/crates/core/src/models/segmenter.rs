//! Compact encoder–decoder segmenter.
//!
//! Four stride-2 3x3 encoder stages, a stride-1 bottleneck convolution, and a
//! decoder that, at each scale, projects the deeper feature with a 1x1
//! convolution, upsamples it bilinearly by 2 and adds the encoder skip before
//! a 3x3 convolution. The final 1x1 class projection is applied at half
//! resolution and the logits are then upsampled; a 1x1 projection commutes
//! with bilinear upsampling (taps sum to one), so this equals projecting at
//! input resolution.

use serde::{Deserialize, Serialize};

use super::layers::{
    conv2d_backward, conv2d_forward, relu_backward, relu_inplace, upsample2x, upsample2x_backward,
    ConvCache, ConvGeometry,
};
use super::params::{conv_grads, push_conv, ConvSlot, ParamSet};
use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};
use crate::rng::tag;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmenterDescriptor {
    pub in_channels: usize,
    pub classes: usize,
    pub widths: [usize; 4],
}

impl SegmenterDescriptor {
    pub fn new(classes: usize) -> Self {
        Self {
            in_channels: 3,
            classes,
            widths: [32, 64, 128, 256],
        }
    }

    /// Input height and width must be multiples of this.
    pub const SPATIAL_MULTIPLE: usize = 16;
}

#[derive(Clone, Debug)]
struct Layers {
    enc: [(ConvGeometry, ConvSlot); 4],
    mid: (ConvGeometry, ConvSlot),
    /// Decoder stages ordered coarse to fine (scales 2, 1, 0).
    lat: [(ConvGeometry, ConvSlot); 3],
    dec: [(ConvGeometry, ConvSlot); 3],
    head: (ConvGeometry, ConvSlot),
}

/// Multiplier on the He standard deviation of the final projection.
pub const HEAD_INIT_SCALE: f64 = 0.05;

fn build<T: Real>(desc: &SegmenterDescriptor, seed: u64) -> (Layers, ParamSet<T>) {
    let mut p = ParamSet::new();
    let w = desc.widths;
    let mut stream = 0u64;
    let mut conv = |p: &mut ParamSet<T>, name: &str, g: ConvGeometry| {
        stream += 1;
        (g, push_conv(p, name, &g, seed, tag::SEGMENTER_INIT, stream))
    };
    let enc = [
        conv(&mut p, "enc0", ConvGeometry::new(3, 2, desc.in_channels, w[0])),
        conv(&mut p, "enc1", ConvGeometry::new(3, 2, w[0], w[1])),
        conv(&mut p, "enc2", ConvGeometry::new(3, 2, w[1], w[2])),
        conv(&mut p, "enc3", ConvGeometry::new(3, 2, w[2], w[3])),
    ];
    let mid = conv(&mut p, "mid", ConvGeometry::new(3, 1, w[3], w[3]));
    let mut lat = Vec::new();
    let mut dec = Vec::new();
    for s in [2usize, 1, 0] {
        lat.push(conv(&mut p, &format!("lat{s}"), ConvGeometry::new(1, 1, w[s + 1], w[s])));
        dec.push(conv(&mut p, &format!("dec{s}"), ConvGeometry::new(3, 1, w[s], w[s])));
    }
    let head = conv(&mut p, "head", ConvGeometry::new(1, 1, w[0], desc.classes));
    // Near-zero initial logits: a full-scale He head starts far from the class
    // prior and the first momentum steps can silence the decoder for good.
    for v in &mut p.get_mut(head.1.weight).data {
        *v = *v * T::lit(HEAD_INIT_SCALE);
    }
    let layers = Layers {
        enc,
        mid,
        lat: [lat[0], lat[1], lat[2]],
        dec: [dec[0], dec[1], dec[2]],
        head,
    };
    (layers, p)
}

/// Segmenter weights plus the fixed layer wiring.
#[derive(Clone, Debug)]
pub struct Segmenter<T: Real = f32> {
    desc: SegmenterDescriptor,
    layers: Layers,
    params: ParamSet<T>,
}

/// Activations saved by [`Segmenter::forward_train`].
pub struct SegmenterCache<T> {
    enc: Vec<(ConvCache<T>, Tensor<T>)>,
    mid: (ConvCache<T>, Tensor<T>),
    lat: Vec<ConvCache<T>>,
    dec: Vec<(ConvCache<T>, Tensor<T>)>,
    head: ConvCache<T>,
}

impl<T: Real> Segmenter<T> {
    /// He-initialized segmenter for `desc`, seeded.
    pub fn new(desc: SegmenterDescriptor, seed: u64) -> Self {
        let (layers, params) = build(&desc, seed);
        Self {
            desc,
            layers,
            params,
        }
    }

    /// Rebuild from stored weights; names and shapes must match the descriptor.
    pub fn from_params(desc: SegmenterDescriptor, params: ParamSet<T>) -> Result<Self> {
        let (layers, template) = build::<T>(&desc, 0);
        if !template.same_layout(&params) {
            return Err(Error::Checkpoint(
                "segmenter weights do not match descriptor".into(),
            ));
        }
        Ok(Self {
            desc,
            layers,
            params,
        })
    }

    pub fn descriptor(&self) -> &SegmenterDescriptor {
        &self.desc
    }

    pub fn params(&self) -> &ParamSet<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<T> {
        &mut self.params
    }

    pub fn classes(&self) -> usize {
        self.desc.classes
    }

    pub fn cast<U: Real>(&self) -> Segmenter<U> {
        Segmenter {
            desc: self.desc.clone(),
            layers: self.layers.clone(),
            params: self.params.cast(),
        }
    }

    fn check_input(&self, images: &Tensor<T>) -> Result<()> {
        let [_, h, w, c] = images.shape();
        let m = SegmenterDescriptor::SPATIAL_MULTIPLE;
        if c != self.desc.in_channels {
            return Err(Error::shape(format!(
                "segmenter expects {} input channels, got {c}",
                self.desc.in_channels
            )));
        }
        if h == 0 || w == 0 || h % m != 0 || w % m != 0 {
            return Err(Error::shape(format!(
                "segmenter input {h}x{w} is not a positive multiple of {m}"
            )));
        }
        Ok(())
    }

    fn conv(&self, x: &Tensor<T>, layer: &(ConvGeometry, ConvSlot)) -> (Tensor<T>, ConvCache<T>) {
        let (g, s) = layer;
        conv2d_forward(x, &self.params.get(s.weight).data, &self.params.get(s.bias).data, g)
    }

    /// Logits `B x H x W x C` for images `B x H x W x 3`.
    pub fn forward(&self, images: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.forward_train(images)?.0)
    }

    /// Forward pass keeping every activation needed by [`Segmenter::backward`].
    pub fn forward_train(&self, images: &Tensor<T>) -> Result<(Tensor<T>, SegmenterCache<T>)> {
        self.check_input(images)?;
        let l = &self.layers;
        let mut enc = Vec::with_capacity(4);
        let mut x = images.clone();
        for layer in &l.enc {
            let (mut y, c) = self.conv(&x, layer);
            relu_inplace(&mut y);
            x = y.clone();
            enc.push((c, y));
        }
        let (mut m, mc) = self.conv(&x, &l.mid);
        relu_inplace(&mut m);
        let mid = (mc, m.clone());
        let mut f = m;
        let mut lat = Vec::with_capacity(3);
        let mut dec = Vec::with_capacity(3);
        for (i, scale) in [2usize, 1, 0].into_iter().enumerate() {
            let (p, pc) = self.conv(&f, &l.lat[i]);
            let mut u = upsample2x(&p);
            u.add_assign(&enc[scale].1);
            let (mut d, dc) = self.conv(&u, &l.dec[i]);
            relu_inplace(&mut d);
            lat.push(pc);
            f = d.clone();
            dec.push((dc, d));
        }
        let (z, hc) = self.conv(&f, &l.head);
        let logits = upsample2x(&z);
        Ok((
            logits,
            SegmenterCache {
                enc,
                mid,
                lat,
                dec,
                head: hc,
            },
        ))
    }

    /// Accumulate parameter gradients of a loss with logit gradient `dlogits`.
    pub fn backward(&self, cache: &SegmenterCache<T>, dlogits: &Tensor<T>, grads: &mut ParamSet<T>) {
        let l = &self.layers;
        let w = |slot: ConvSlot| &self.params.get(slot.weight).data;
        let dz = upsample2x_backward(dlogits);
        let mut df = conv2d_backward(&cache.head, &dz, w(l.head.1), &l.head.0, Some(conv_grads(grads, l.head.1)), true)
            .expect("input grad");
        let mut denc: [Option<Tensor<T>>; 4] = [None, None, None, None];
        for (i, scale) in [2usize, 1, 0].into_iter().enumerate().rev() {
            let (dc, d) = &cache.dec[i];
            relu_backward(d, &mut df);
            let du = conv2d_backward(dc, &df, w(l.dec[i].1), &l.dec[i].0, Some(conv_grads(grads, l.dec[i].1)), true)
                .expect("input grad");
            denc[scale] = Some(du.clone());
            let dp = upsample2x_backward(&du);
            df = conv2d_backward(&cache.lat[i], &dp, w(l.lat[i].1), &l.lat[i].0, Some(conv_grads(grads, l.lat[i].1)), true)
                .expect("input grad");
        }
        // df is now the gradient w.r.t. the bottleneck output.
        relu_backward(&cache.mid.1, &mut df);
        let mut dx = conv2d_backward(&cache.mid.0, &df, w(l.mid.1), &l.mid.0, Some(conv_grads(grads, l.mid.1)), true)
            .expect("input grad");
        for s in (0..4).rev() {
            if let Some(skip) = denc[s].take() {
                dx.add_assign(&skip);
            }
            let (c, y) = &cache.enc[s];
            relu_backward(y, &mut dx);
            let need = s > 0;
            match conv2d_backward(c, &dx, w(l.enc[s].1), &l.enc[s].0, Some(conv_grads(grads, l.enc[s].1)), need) {
                Some(next) => dx = next,
                None => break,
            }
        }
    }
}
