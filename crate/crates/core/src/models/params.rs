//! Named parameter arrays shared by the networks, optimizers and checkpoints.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::layers::ConvGeometry;
use super::tensor::Real;
use crate::rng::substream;

#[derive(Clone, Debug, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

/// Ordered collection of parameter arrays.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ParamSet<T = f32> {
    params: Vec<Param<T>>,
}

impl<T: Real> ParamSet<T> {
    pub fn new() -> Self {
        Self { params: Vec::new() }
    }

    pub fn push(&mut self, name: impl Into<String>, shape: Vec<usize>, data: Vec<T>) -> usize {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.params.push(Param {
            name: name.into(),
            shape,
            data,
        });
        self.params.len() - 1
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, i: usize) -> &Param<T> {
        &self.params[i]
    }

    pub fn get_mut(&mut self, i: usize) -> &mut Param<T> {
        &mut self.params[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param<T>> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param<T>> {
        self.params.iter_mut()
    }

    /// Same names and shapes, all zeros.
    pub fn zeros_like(&self) -> Self {
        Self {
            params: self
                .params
                .iter()
                .map(|p| Param {
                    name: p.name.clone(),
                    shape: p.shape.clone(),
                    data: vec![T::zero(); p.data.len()],
                })
                .collect(),
        }
    }

    pub fn fill_zero(&mut self) {
        for p in &mut self.params {
            p.data.iter_mut().for_each(|v| *v = T::zero());
        }
    }

    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(|p| p.data.len()).sum()
    }

    /// `self += other`, elementwise.
    pub fn add_assign(&mut self, other: &ParamSet<T>) {
        assert_eq!(self.params.len(), other.params.len());
        for (a, b) in self.params.iter_mut().zip(&other.params) {
            for (x, &y) in a.data.iter_mut().zip(&b.data) {
                *x = *x + y;
            }
        }
    }

    pub fn same_layout(&self, other: &ParamSet<T>) -> bool {
        self.params.len() == other.params.len()
            && self
                .params
                .iter()
                .zip(&other.params)
                .all(|(a, b)| a.name == b.name && a.shape == b.shape)
    }

    pub fn cast<U: Real>(&self) -> ParamSet<U> {
        ParamSet {
            params: self
                .params
                .iter()
                .map(|p| Param {
                    name: p.name.clone(),
                    shape: p.shape.clone(),
                    data: p
                        .data
                        .iter()
                        .map(|v| U::from_f64(v.to_f64().unwrap_or(f64::NAN)).unwrap_or_else(U::nan))
                        .collect(),
                })
                .collect(),
        }
    }
}

/// Indices of one convolution's weight and bias inside a [`ParamSet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSlot {
    pub weight: usize,
    pub bias: usize,
}

/// Append a He-initialized convolution: weights ~ N(0, 2 / fan_in), zero bias.
/// Each layer draws from its own substream of `seed`.
pub(crate) fn push_conv<T: Real>(
    params: &mut ParamSet<T>,
    name: &str,
    g: &ConvGeometry,
    seed: u64,
    net: u64,
    stream: u64,
) -> ConvSlot {
    let std = (2.0 / g.fan_in() as f64).sqrt();
    let normal = Normal::new(0.0, std).expect("positive std");
    let mut rng = substream(seed, &[net, stream]);
    let w: Vec<T> = (0..g.weight_len())
        .map(|_| T::lit(normal.sample(&mut rng)))
        .collect();
    let weight = params.push(
        format!("{name}.weight"),
        vec![g.kernel, g.kernel, g.cin, g.cout],
        w,
    );
    let bias = params.push(format!("{name}.bias"), vec![g.cout], vec![T::zero(); g.cout]);
    ConvSlot { weight, bias }
}

/// Mutable views of one convolution's gradient buffers.
pub(crate) fn conv_grads<'a, T: Real>(
    grads: &'a mut ParamSet<T>,
    slot: ConvSlot,
) -> super::layers::ConvGrads<'a, T> {
    assert!(slot.weight < slot.bias);
    let (lo, hi) = grads.params.split_at_mut(slot.bias);
    super::layers::ConvGrads {
        weight: &mut lo[slot.weight].data,
        bias: &mut hi[0].data,
    }
}
