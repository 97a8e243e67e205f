use crate::error::{Error, Result};
use crate::geodata::Mask;
use crate::models::{Real, Tensor};

/// Mean per-pixel cross-entropy.
pub fn seg_loss<T: Real>(logits: &Tensor<T>, masks: &[Mask]) -> Result<f64> {
    seg_loss_with_grad(logits, masks).map(|(l, _)| l)
}

/// Mean per-pixel cross-entropy and its gradient with respect to the logits.
pub fn seg_loss_with_grad<T: Real>(logits: &Tensor<T>, masks: &[Mask]) -> Result<(f64, Tensor<T>)> {
    let [b, h, w, c] = logits.shape();
    if masks.len() != b || masks.iter().any(|m| (m.height(), m.width()) != (h, w)) {
        return Err(Error::shape(format!("{} masks do not match logits {:?}", masks.len(), logits.shape())));
    }
    let n = (b * h * w) as f64;
    let inv_n = T::lit(1.0 / n);
    let mut grad = Tensor::zeros(logits.shape());
    let mut total = 0.0f64;
    let labels = masks.iter().flat_map(|m| m.data().iter());
    for ((z, g), &y) in logits
        .data()
        .chunks_exact(c)
        .zip(grad.data_mut().chunks_exact_mut(c))
        .zip(labels)
    {
        let y = y as usize;
        if y >= c {
            return Err(Error::invalid(format!("label {y} out of range for {c} classes")));
        }
        let m = z.iter().copied().fold(T::neg_infinity(), T::max);
        let mut s = T::zero();
        for (gk, &zk) in g.iter_mut().zip(z) {
            *gk = (zk - m).exp();
            s = s + *gk;
        }
        let lse = m + s.ln();
        total += (lse - z[y]).to_f64().unwrap_or(f64::NAN);
        for gk in g.iter_mut() {
            *gk = *gk / s * inv_n;
        }
        g[y] = g[y] - inv_n;
    }
    Ok((total / n, grad))
}

/// `-[y log σ(x) + (1-y) log(1-σ(x))]` without overflow.
pub fn bce_with_logits(x: f64, y: f64) -> f64 {
    x.max(0.0) - x * y + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Mean BCE of every logit against a constant target, and its gradient.
pub fn bce_mean_with_grad<T: Real>(logits: &Tensor<T>, target: f64) -> (f64, Tensor<T>) {
    let n = logits.data().len().max(1) as f64;
    let mut loss = 0.0;
    let grad = logits.map(|x| {
        let x = x.to_f64().unwrap_or(f64::NAN);
        T::lit((sigmoid(x) - target) / n)
    });
    for &x in logits.data() {
        loss += bce_with_logits(x.to_f64().unwrap_or(f64::NAN), target);
    }
    (loss / n, grad)
}

fn check_finite<T: Real>(t: &Tensor<T>, what: &str) -> Result<()> {
    if t.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("non-finite {what} logits")))
    }
}

/// `(L_D, L_adv)`: source maps are real (1), target maps fake (0); the
/// segmenter's adversarial loss labels target maps as real.
pub fn adversarial_losses<T: Real>(disc_src: &Tensor<T>, disc_tgt: &Tensor<T>) -> Result<(f64, f64)> {
    check_finite(disc_src, "source")?;
    check_finite(disc_tgt, "target")?;
    let (real, _) = bce_mean_with_grad(disc_src, 1.0);
    let (fake, _) = bce_mean_with_grad(disc_tgt, 0.0);
    let (adv, _) = bce_mean_with_grad(disc_tgt, 1.0);
    Ok((real + fake, adv))
}
