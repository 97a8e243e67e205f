use crate::error::{Error, Result};
use crate::models::ParamSet;

/// Polynomial decay `base · (1 − iter/max_iter)^power`.
pub fn lr_schedule(base_lr: f64, iter: u64, max_iter: u64, power: f64) -> Result<f64> {
    if max_iter == 0 || iter > max_iter {
        return Err(Error::invalid(format!("lr_schedule needs 0 <= iter ({iter}) <= max_iter ({max_iter}), max_iter > 0")));
    }
    Ok(base_lr * (1.0 - iter as f64 / max_iter as f64).powf(power))
}

/// SGD with momentum and coupled weight decay.
#[derive(Clone, Debug, PartialEq)]
pub struct Sgd {
    pub momentum: f32,
    pub weight_decay: f32,
    pub velocity: ParamSet<f32>,
}

impl Sgd {
    pub fn new(params: &ParamSet<f32>, momentum: f64, weight_decay: f64) -> Self {
        Self {
            momentum: momentum as f32,
            weight_decay: weight_decay as f32,
            velocity: params.zeros_like(),
        }
    }

    pub fn step(&mut self, params: &mut ParamSet<f32>, grads: &ParamSet<f32>, lr: f64) {
        let lr = lr as f32;
        for ((p, g), v) in params.iter_mut().zip(grads.iter()).zip(self.velocity.iter_mut()) {
            for ((w, &dw), m) in p.data.iter_mut().zip(&g.data).zip(v.data.iter_mut()) {
                let d = dw + self.weight_decay * *w;
                *m = self.momentum * *m + d;
                *w -= lr * *m;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    pub m: ParamSet<f32>,
    pub v: ParamSet<f32>,
}

impl Adam {
    pub fn new(params: &ParamSet<f32>, (beta1, beta2): (f64, f64)) -> Self {
        Self {
            beta1,
            beta2,
            eps: 1e-8,
            t: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    pub fn step(&mut self, params: &mut ParamSet<f32>, grads: &ParamSet<f32>, lr: f64) {
        self.t += 1;
        let (b1, b2) = (self.beta1 as f32, self.beta2 as f32);
        let c1 = (1.0 - self.beta1.powi(self.t as i32)) as f32;
        let c2 = (1.0 - self.beta2.powi(self.t as i32)) as f32;
        let (lr, eps) = (lr as f32, self.eps as f32);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads.iter())
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            for (((w, &dw), mi), vi) in p.data.iter_mut().zip(&g.data).zip(m.data.iter_mut()).zip(v.data.iter_mut()) {
                *mi = b1 * *mi + (1.0 - b1) * dw;
                *vi = b2 * *vi + (1.0 - b2) * dw * dw;
                *w -= lr * (*mi / c1) / ((*vi / c2).sqrt() + eps);
            }
        }
    }
}
