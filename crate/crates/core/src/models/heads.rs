//! Softmax, normalized entropy and weighted self-information maps, with the
//! backward passes needed to push adversarial and entropy gradients into the
//! segmenter logits.

use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

/// Offset inside every logarithm.
pub const LOG_EPS: f64 = 1e-12;

/// Per-pixel class probabilities, `B x H x W x C`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbMap<T: Real = f32>(Tensor<T>);

impl<T: Real> ProbMap<T> {
    /// Wrap probabilities, checking range and per-pixel normalization.
    pub fn new(values: Tensor<T>) -> Result<Self> {
        let c = values.channels();
        if c < 2 {
            return Err(Error::shape("probability maps need at least two classes"));
        }
        let tol = 1e-5;
        for px in values.data().chunks_exact(c) {
            let mut sum = 0.0;
            for &p in px {
                let p = p.to_f64().unwrap_or(f64::NAN);
                if !(-tol..=1.0 + tol).contains(&p) {
                    return Err(Error::invalid(format!("probability {p} out of range")));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > tol {
                return Err(Error::invalid(format!("probabilities sum to {sum}")));
            }
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &Tensor<T> {
        &self.0
    }

    pub fn classes(&self) -> usize {
        self.0.channels()
    }
}

/// Weighted self-information `-P log(P) / log C` (log floored at `eps`), the
/// discriminator input.
#[derive(Clone, Debug, PartialEq)]
pub struct SelfInfoMap<T: Real = f32> {
    pub values: Tensor<T>,
    pub normalizer: T,
}

/// Numerically stable channel softmax (max-subtracted).
pub fn softmax_probs<T: Real>(logits: &Tensor<T>) -> Result<ProbMap<T>> {
    let c = logits.channels();
    if c < 2 {
        return Err(Error::shape("softmax needs at least two classes"));
    }
    if !logits.is_finite() {
        return Err(Error::invalid("non-finite logits"));
    }
    let mut out = logits.clone();
    for px in out.data_mut().chunks_exact_mut(c) {
        let m = px.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
        let mut sum = T::zero();
        for v in px.iter_mut() {
            *v = (*v - m).exp();
            sum = sum + *v;
        }
        for v in px.iter_mut() {
            *v = *v / sum;
        }
    }
    Ok(ProbMap(out))
}

// log(max(p, eps)) rather than log(p + eps): identical to within eps/p, but
// exactly zero at p = 1 so terms stay nonnegative.
#[inline]
fn info_term<T: Real>(p: T, inv_norm: T, eps: T) -> T {
    -(p * p.max(eps).ln()) * inv_norm
}

#[inline]
fn info_slope<T: Real>(p: T, inv_norm: T, eps: T) -> T {
    if p > eps {
        -(p.ln() + T::one()) * inv_norm
    } else {
        -eps.ln() * inv_norm
    }
}

/// Weighted self-information per class.
pub fn self_information_map<T: Real>(probs: &ProbMap<T>) -> SelfInfoMap<T> {
    let c = probs.classes();
    let normalizer = T::lit((c as f64).ln());
    let inv = T::one() / normalizer;
    let eps = T::lit(LOG_EPS);
    SelfInfoMap {
        values: probs.0.map(|p| info_term(p, inv, eps)),
        normalizer,
    }
}

/// Normalized per-pixel entropy `B x H x W x 1`, in [0, 1]. Computed as the
/// channel sum of the self-information terms, so the two maps agree exactly.
pub fn entropy_map<T: Real>(probs: &ProbMap<T>) -> Tensor<T> {
    let [b, h, w, c] = probs.0.shape();
    let inv = T::one() / T::lit((c as f64).ln());
    let eps = T::lit(LOG_EPS);
    let data = probs
        .0
        .data()
        .chunks_exact(c)
        .map(|px| px.iter().fold(T::zero(), |acc, &p| acc + info_term(p, inv, eps)))
        .collect();
    Tensor::from_vec([b, h, w, 1], data).expect("entropy shape")
}

/// Gradient with respect to the logits given a gradient on the
/// self-information map.
pub fn self_information_backward<T: Real>(probs: &ProbMap<T>, d_info: &Tensor<T>) -> Tensor<T> {
    let p = &probs.0;
    assert_eq!(p.shape(), d_info.shape(), "self-information gradient shape");
    let c = p.channels();
    let inv = T::one() / T::lit((c as f64).ln());
    let eps = T::lit(LOG_EPS);
    let mut out = Tensor::zeros(p.shape());
    let mut dp = vec![T::zero(); c];
    for ((px, g), o) in p
        .data()
        .chunks_exact(c)
        .zip(d_info.data().chunks_exact(c))
        .zip(out.data_mut().chunks_exact_mut(c))
    {
        let mut dot = T::zero();
        for k in 0..c {
            let q = px[k];
            dp[k] = g[k] * info_slope(q, inv, eps);
            dot = dot + dp[k] * q;
        }
        for k in 0..c {
            o[k] = px[k] * (dp[k] - dot);
        }
    }
    out
}

/// Gradient with respect to the logits given a gradient on the entropy map.
pub fn entropy_backward<T: Real>(probs: &ProbMap<T>, d_entropy: &Tensor<T>) -> Tensor<T> {
    let [b, h, w, c] = probs.0.shape();
    assert_eq!(d_entropy.shape(), [b, h, w, 1], "entropy gradient shape");
    let mut spread = Tensor::zeros([b, h, w, c]);
    for (px, &g) in spread.data_mut().chunks_exact_mut(c).zip(d_entropy.data()) {
        px.iter_mut().for_each(|v| *v = g);
    }
    self_information_backward(probs, &spread)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pixel(p: &[f64]) -> ProbMap<f64> {
        ProbMap::new(Tensor::from_vec([1, 1, 1, p.len()], p.to_vec()).unwrap()).unwrap()
    }

    #[test]
    fn softmax_examples() {
        let z = Tensor::from_vec([1, 1, 1, 2], vec![0.0f64, 0.0]).unwrap();
        assert_eq!(softmax_probs(&z).unwrap().values().data(), &[0.5, 0.5]);
        let z = Tensor::from_vec([1, 1, 1, 2], vec![1000.0f32, 0.0]).unwrap();
        let p = softmax_probs(&z).unwrap();
        assert!(p.values().is_finite());
        assert!((p.values().data()[0] - 1.0).abs() < 1e-6 && p.values().data()[1] < 1e-6);
        let z = Tensor::from_vec([1, 1, 1, 2], vec![9f64.ln(), 0.0]).unwrap();
        let p = softmax_probs(&z).unwrap();
        assert!((p.values().data()[0] - 0.9).abs() < 1e-12);
        assert!((p.values().data()[1] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn softmax_rejects_nonfinite() {
        let z = Tensor::from_vec([1, 1, 1, 2], vec![f64::NAN, 0.0]).unwrap();
        assert!(softmax_probs(&z).is_err());
    }

    #[test]
    fn entropy_examples() {
        assert!((entropy_map(&pixel(&[0.5, 0.5])).data()[0] - 1.0).abs() < 1e-6);
        assert!(entropy_map(&pixel(&[1.0, 0.0])).data()[0].abs() < 1e-6);
        // -(0.9 ln 0.9 + 0.1 ln 0.1) / ln 2
        assert!((entropy_map(&pixel(&[0.9, 0.1])).data()[0] - 0.46900).abs() < 1e-4);
    }

    #[test]
    fn self_information_examples() {
        assert_eq!(self_information_map(&pixel(&[1.0, 0.0])).values.data(), &[0.0, 0.0]);
        let half = self_information_map(&pixel(&[0.5, 0.5]));
        for &v in half.values.data() {
            assert!((v - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn probmap_validation() {
        assert!(ProbMap::new(Tensor::from_vec([1, 1, 1, 2], vec![0.7f64, 0.7]).unwrap()).is_err());
        assert!(ProbMap::new(Tensor::from_vec([1, 1, 1, 1], vec![1.0f64]).unwrap()).is_err());
    }
}
