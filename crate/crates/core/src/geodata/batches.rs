use std::sync::Arc;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::manifest::{Dataset, Manifest};
use super::render::Mask;
use super::style::Role;
use crate::augment::{augment_pair, sample_pipeline, AugmentationConfig};
use crate::error::{Error, Result};
use crate::models::Tensor;
use crate::rng::{substream, tag};

/// Position of an iterator inside its epoch sequence.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cursor {
    pub epoch: u64,
    pub position: usize,
}

#[derive(Clone, Debug)]
pub struct Batch {
    /// `B x H x W x 3`.
    pub images: Tensor<f32>,
    pub masks: Vec<Mask>,
    /// Dataset indices of the batch items.
    pub indices: Vec<usize>,
}

/// Endless stream of batches. Each epoch visits every tile once in a
/// seeded permutation and ends with a short batch when the size does not
/// divide evenly.
#[derive(Clone, Debug)]
pub struct BatchIterator {
    data: Arc<Dataset>,
    batch_size: usize,
    seed: u64,
    augmentation: Option<AugmentationConfig>,
    cursor: Cursor,
    order: Vec<usize>,
}

impl BatchIterator {
    pub fn new(data: Arc<Dataset>, batch_size: usize, shuffle_seed: u64) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::invalid("batch_size must be >= 1"));
        }
        if data.is_empty() {
            return Err(Error::invalid("cannot iterate an empty dataset"));
        }
        let mut it = Self {
            data,
            batch_size,
            seed: shuffle_seed,
            augmentation: None,
            cursor: Cursor::default(),
            order: Vec::new(),
        };
        it.reshuffle();
        Ok(it)
    }

    /// Apply `augment_pair` to every sample, each with its own substream.
    pub fn with_augmentation(mut self, config: Option<AugmentationConfig>) -> Self {
        self.augmentation = config;
        self
    }

    pub fn cursor(&self) -> Cursor {
        self.cursor
    }

    /// Resume from a saved cursor.
    pub fn seek(&mut self, cursor: Cursor) {
        self.cursor = cursor;
        self.reshuffle();
    }

    fn reshuffle(&mut self) {
        self.order = (0..self.data.len()).collect();
        self.order
            .shuffle(&mut substream(self.seed, &[tag::EPOCH_ORDER, self.cursor.epoch]));
    }

    pub fn next_batch(&mut self) -> Result<Batch> {
        let n = self.data.len();
        if self.cursor.position >= n {
            self.cursor.epoch += 1;
            self.cursor.position = 0;
            self.reshuffle();
        }
        let start = self.cursor.position;
        let end = (start + self.batch_size).min(n);
        let mut images = Vec::with_capacity(end - start);
        let mut masks = Vec::with_capacity(end - start);
        let mut indices = Vec::with_capacity(end - start);
        for pos in start..end {
            let idx = self.order[pos];
            let s = &self.data.samples[idx];
            match &self.augmentation {
                Some(cfg) => {
                    let mut rng = substream(self.seed, &[tag::SAMPLE_AUG, self.cursor.epoch, pos as u64]);
                    let plan = sample_pipeline(cfg, &mut rng);
                    let (img, m) = augment_pair(&s.image, &s.mask, &plan)?;
                    images.push(img);
                    masks.push(m);
                }
                None => {
                    images.push(s.image.clone());
                    masks.push(s.mask.clone());
                }
            }
            indices.push(idx);
        }
        self.cursor.position = end;
        Ok(Batch {
            images: Tensor::stack(&images)?,
            masks,
            indices,
        })
    }
}

impl Iterator for BatchIterator {
    type Item = Result<Batch>;

    fn next(&mut self) -> Option<Self::Item> {
        Some(self.next_batch())
    }
}

/// Load `manifest` and iterate it.
pub fn batch_iterator(
    manifest: &Manifest,
    batch_size: usize,
    shuffle_seed: u64,
    augmentation: Option<AugmentationConfig>,
) -> Result<BatchIterator> {
    if manifest.is_empty() {
        return Err(Error::invalid("cannot iterate an empty manifest"));
    }
    let data = Arc::new(Dataset::load(manifest, Role::Source)?);
    Ok(BatchIterator::new(data, batch_size, shuffle_seed)?.with_augmentation(augmentation))
}
