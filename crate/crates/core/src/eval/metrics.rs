use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodata::{Mask, Sample};
use crate::models::{Real, Segmenter, Tensor};

/// `counts[gt][pred]` pixel counts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.classes + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn add(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.classes != self.classes {
            return Err(Error::shape(format!(
                "confusion matrices for {} and {} classes",
                self.classes, other.classes
            )));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    fn record(&mut self, pred: &Mask, gt: &Mask) -> Result<()> {
        if (pred.height(), pred.width()) != (gt.height(), gt.width()) {
            return Err(Error::shape(format!(
                "prediction {}x{} vs ground truth {}x{}",
                pred.height(),
                pred.width(),
                gt.height(),
                gt.width()
            )));
        }
        let c = self.classes;
        for (&p, &g) in pred.data().iter().zip(gt.data()) {
            let (p, g) = (p as usize, g as usize);
            if p >= c || g >= c {
                return Err(Error::invalid(format!("class index {} out of range for {c} classes", p.max(g))));
            }
            self.counts[g * c + p] += 1;
        }
        Ok(())
    }

    /// Jaccard index of class `c`; 1.0 when the class is absent from both.
    pub fn iou(&self, c: usize) -> f64 {
        let tp = self.get(c, c);
        let fn_: u64 = (0..self.classes).map(|j| self.get(c, j)).sum::<u64>() - tp;
        let fp: u64 = (0..self.classes).map(|i| self.get(i, c)).sum::<u64>() - tp;
        let union = tp + fp + fn_;
        if union == 0 {
            1.0
        } else {
            tp as f64 / union as f64
        }
    }

    pub fn per_class_iou(&self) -> Vec<f64> {
        (0..self.classes).map(|c| self.iou(c)).collect()
    }
}

pub fn confusion_counts(pred: &Mask, gt: &Mask, classes: usize) -> Result<ConfusionMatrix> {
    if classes < 2 {
        return Err(Error::invalid("need at least 2 classes"));
    }
    let mut m = ConfusionMatrix::new(classes);
    m.record(pred, gt)?;
    Ok(m)
}

pub fn iou(counts: &ConfusionMatrix, class: usize) -> Result<f64> {
    if class >= counts.classes() {
        return Err(Error::invalid(format!("class {class} out of range")));
    }
    Ok(counts.iou(class))
}

/// One global confusion matrix over all `(pred, gt)` pairs.
pub fn accumulate_confusion<'a>(
    pairs: impl IntoIterator<Item = (&'a Mask, &'a Mask)>,
    classes: usize,
) -> Result<ConfusionMatrix> {
    let mut m = ConfusionMatrix::new(classes);
    let mut any = false;
    for (p, g) in pairs {
        m.record(p, g)?;
        any = true;
    }
    if !any {
        return Err(Error::invalid("no tiles to evaluate"));
    }
    Ok(m)
}

/// Per-pixel argmax of `B×H×W×C` logits; ties go to the lower class.
pub fn argmax_masks<T: Real>(logits: &Tensor<T>) -> Vec<Mask> {
    let [b, h, w, c] = logits.shape();
    (0..b)
        .map(|i| {
            let data = logits
                .item(i)
                .chunks_exact(c)
                .map(|px| {
                    let mut best = 0;
                    for k in 1..c {
                        if px[k] > px[best] {
                            best = k;
                        }
                    }
                    best as u8
                })
                .collect();
            Mask::from_vec(h, w, data).expect("argmax shape")
        })
        .collect()
}

pub const EVAL_BATCH: usize = 8;

pub fn predict_masks(model: &Segmenter<f32>, samples: &[Sample]) -> Result<Vec<Mask>> {
    let mut out = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(EVAL_BATCH) {
        let images: Vec<Tensor<f32>> = chunk.iter().map(|s| s.image.clone()).collect();
        out.extend(argmax_masks(&model.forward(&Tensor::stack(&images)?)?));
    }
    Ok(out)
}

/// Global-accumulation IoU of a model over a set of tiles.
pub fn dataset_iou(model: &Segmenter<f32>, samples: &[Sample], classes: usize) -> Result<ConfusionMatrix> {
    if samples.is_empty() {
        return Err(Error::invalid("dataset_iou needs at least one tile"));
    }
    let preds = predict_masks(model, samples)?;
    accumulate_confusion(preds.iter().zip(samples.iter().map(|s| &s.mask)), classes)
}

/// Adapted minus source-only IoU, in whatever unit the inputs carry.
pub fn delta_iou(adapted: f64, source_only: f64) -> f64 {
    adapted - source_only
}
