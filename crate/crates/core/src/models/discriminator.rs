//! Fully convolutional patch discriminator: four stride-2 4x4 convolutions with
//! leaky ReLU, then a stride-2 4x4 head producing one logit per patch. The
//! patch map is `ceil(H/32) x ceil(W/32)`.

use serde::{Deserialize, Serialize};

use super::layers::{
    conv2d_backward, conv2d_forward, leaky_relu_backward, leaky_relu_inplace, ConvCache, ConvGeometry,
};
use super::params::{conv_grads, push_conv, ConvSlot, ParamSet};
use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};
use crate::rng::tag;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorDescriptor {
    pub classes: usize,
    pub widths: [usize; 4],
    pub kernel: usize,
    pub leaky_slope: f64,
}

impl DiscriminatorDescriptor {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            widths: [64, 128, 256, 512],
            kernel: 4,
            leaky_slope: 0.2,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Discriminator<T: Real = f32> {
    desc: DiscriminatorDescriptor,
    layers: Vec<(ConvGeometry, ConvSlot)>,
    params: ParamSet<T>,
}

pub struct DiscriminatorCache<T> {
    stages: Vec<(ConvCache<T>, Option<Tensor<T>>)>,
}

fn build<T: Real>(desc: &DiscriminatorDescriptor, seed: u64) -> (Vec<(ConvGeometry, ConvSlot)>, ParamSet<T>) {
    let mut p = ParamSet::new();
    let mut layers = Vec::with_capacity(5);
    let mut cin = desc.classes;
    for (i, &cout) in desc.widths.iter().chain(std::iter::once(&1)).enumerate() {
        let g = ConvGeometry::new(desc.kernel, 2, cin, cout);
        let name = if i < 4 { format!("conv{i}") } else { "head".to_string() };
        layers.push((g, push_conv(&mut p, &name, &g, seed, tag::DISCRIMINATOR_INIT, i as u64 + 1)));
        cin = cout;
    }
    (layers, p)
}

impl<T: Real> Discriminator<T> {
    pub fn new(desc: DiscriminatorDescriptor, seed: u64) -> Self {
        let (layers, params) = build(&desc, seed);
        Self {
            desc,
            layers,
            params,
        }
    }

    pub fn from_params(desc: DiscriminatorDescriptor, params: ParamSet<T>) -> Result<Self> {
        let (layers, template) = build::<T>(&desc, 0);
        if !template.same_layout(&params) {
            return Err(Error::Checkpoint(
                "discriminator weights do not match descriptor".into(),
            ));
        }
        Ok(Self {
            desc,
            layers,
            params,
        })
    }

    pub fn descriptor(&self) -> &DiscriminatorDescriptor {
        &self.desc
    }

    pub fn params(&self) -> &ParamSet<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<T> {
        &mut self.params
    }

    pub fn cast<U: Real>(&self) -> Discriminator<U> {
        Discriminator {
            desc: self.desc.clone(),
            layers: self.layers.clone(),
            params: self.params.cast(),
        }
    }

    /// Patch logits `B x h x w x 1`.
    pub fn forward(&self, maps: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.forward_train(maps)?.0)
    }

    pub fn forward_train(&self, maps: &Tensor<T>) -> Result<(Tensor<T>, DiscriminatorCache<T>)> {
        if maps.channels() != self.desc.classes {
            return Err(Error::shape(format!(
                "discriminator expects {} channels, got {}",
                self.desc.classes,
                maps.channels()
            )));
        }
        if maps.height() == 0 || maps.width() == 0 {
            return Err(Error::shape("empty discriminator input"));
        }
        let slope = T::lit(self.desc.leaky_slope);
        let mut stages = Vec::with_capacity(self.layers.len());
        let mut x = maps.clone();
        let last = self.layers.len() - 1;
        for (i, (g, s)) in self.layers.iter().enumerate() {
            let (mut y, c) = conv2d_forward(&x, &self.params.get(s.weight).data, &self.params.get(s.bias).data, g);
            if i < last {
                leaky_relu_inplace(&mut y, slope);
                stages.push((c, Some(y.clone())));
            } else {
                stages.push((c, None));
            }
            x = y;
        }
        Ok((x, DiscriminatorCache { stages }))
    }

    /// Backpropagate `dlogits`. Parameter gradients go into `grads` when given;
    /// the gradient with respect to the input maps is returned when requested.
    pub fn backward(
        &self,
        cache: &DiscriminatorCache<T>,
        dlogits: &Tensor<T>,
        mut grads: Option<&mut ParamSet<T>>,
        need_input_grad: bool,
    ) -> Option<Tensor<T>> {
        let slope = T::lit(self.desc.leaky_slope);
        let mut dy = dlogits.clone();
        for (i, ((g, s), (c, out))) in self.layers.iter().zip(&cache.stages).enumerate().rev() {
            if let Some(y) = out {
                leaky_relu_backward(y, &mut dy, slope);
            }
            let need = need_input_grad || i > 0;
            let gr = grads.as_deref_mut().map(|p| conv_grads(p, *s));
            dy = conv2d_backward(c, &dy, &self.params.get(s.weight).data, g, gr, need)?;
        }
        Some(dy)
    }
}
