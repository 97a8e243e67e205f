//! On-disk tile datasets: PNG tiles plus one JSON manifest.
//!
//! Images are 8-bit RGB PNG (generator output is already quantized to 1/255
//! steps, so storage is lossless); masks are 8-bit grayscale PNG whose pixel
//! value is the class index.

use std::fs;
use std::path::{Path, PathBuf};

use image::{GrayImage, RgbImage};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::render::{generate_tile, Mask, Sample, TileMeta};
use super::style::{CityStyle, DomainTag, Role};
use crate::error::{Error, Result};
use crate::models::Tensor;
use crate::rng::{derive_seed, substream, tag};

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    /// Image path relative to the manifest directory.
    pub image: String,
    pub mask: String,
    pub domain: String,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestFile {
    version: u32,
    class_count: usize,
    tile_size: usize,
    entries: Vec<ManifestEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub class_count: usize,
    pub tile_size: usize,
    pub entries: Vec<ManifestEntry>,
    /// Directory relative entry paths resolve against.
    pub root: PathBuf,
}

impl Manifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn resolve(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// Parse a manifest and check that every referenced file exists.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ManifestFile = serde_json::from_str(&text)?;
        if file.version != MANIFEST_VERSION {
            return Err(Error::invalid(format!(
                "{}: unsupported manifest version {}",
                path.display(),
                file.version
            )));
        }
        if file.class_count < 2 {
            return Err(Error::invalid(format!(
                "{}: class_count must be >= 2",
                path.display()
            )));
        }
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let m = Manifest {
            class_count: file.class_count,
            tile_size: file.tile_size,
            entries: file.entries,
            root,
        };
        for e in &m.entries {
            for rel in [&e.image, &e.mask] {
                let p = m.resolve(rel);
                if !p.is_file() {
                    return Err(Error::MissingData(format!(
                        "{} references missing file {}",
                        path.display(),
                        p.display()
                    )));
                }
            }
        }
        Ok(m)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ManifestFile {
            version: MANIFEST_VERSION,
            class_count: self.class_count,
            tile_size: self.tile_size,
            entries: self.entries.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file)?;
        s.push('\n');
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    /// Read one entry's tile from disk.
    pub fn load_sample(&self, index: usize, role: Role) -> Result<Sample> {
        let e = &self.entries[index];
        let ipath = self.resolve(&e.image);
        let mpath = self.resolve(&e.mask);
        let img = image::open(&ipath)
            .map_err(|source| Error::Image {
                path: ipath.clone(),
                source,
            })?
            .into_rgb8();
        let mask = image::open(&mpath)
            .map_err(|source| Error::Image {
                path: mpath.clone(),
                source,
            })?
            .into_luma8();
        if img.dimensions() != mask.dimensions() {
            return Err(Error::shape(format!(
                "{} and {} differ in size",
                ipath.display(),
                mpath.display()
            )));
        }
        let (w, h) = img.dimensions();
        let data: Vec<f32> = img.into_raw().into_iter().map(|v| v as f32 / 255.0).collect();
        let mask = Mask::from_vec(h as usize, w as usize, mask.into_raw())?;
        if mask.max_class() as usize >= self.class_count {
            return Err(Error::invalid(format!(
                "{} has class {} >= class_count {}",
                mpath.display(),
                mask.max_class(),
                self.class_count
            )));
        }
        Sample::new(
            Tensor::from_vec([1, h as usize, w as usize, 3], data)?,
            mask,
            DomainTag::new(e.domain.clone(), role)?,
            TileMeta {
                style: e.domain.clone(),
                seed: e.seed,
            },
        )
    }
}

pub fn save_image_png(image: &Tensor<f32>, path: &Path) -> Result<()> {
    let [_, h, w, c] = image.shape();
    if c != 3 {
        return Err(Error::shape("PNG export expects 3 channels"));
    }
    let bytes: Vec<u8> = image
        .item(0)
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let img = RgbImage::from_raw(w as u32, h as u32, bytes).expect("buffer size");
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
}

pub fn save_mask_png(mask: &Mask, path: &Path) -> Result<()> {
    let img = GrayImage::from_raw(mask.width() as u32, mask.height() as u32, mask.data().to_vec())
        .expect("buffer size");
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
}

/// Tile seed of entry `index` in a dataset generated with `seed`.
pub fn tile_seed(seed: u64, index: usize) -> u64 {
    derive_seed(seed, &[tag::TILE, index as u64])
}

/// Render `n` tiles into `out_dir` (`images/`, `masks/`, `manifest.json`).
/// Identical arguments produce byte-identical files.
pub fn generate_dataset(
    style: &CityStyle,
    n: usize,
    seed: u64,
    tile_size: usize,
    out_dir: &Path,
) -> Result<Manifest> {
    if n == 0 {
        return Err(Error::invalid("dataset size must be >= 1"));
    }
    style.validate()?;
    for sub in ["images", "masks"] {
        let d = out_dir.join(sub);
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let mut entries = Vec::with_capacity(n);
    for i in 0..n {
        let ts = tile_seed(seed, i);
        let sample = generate_tile(style, ts, tile_size)?;
        let image = format!("images/{i:05}.png");
        let mask = format!("masks/{i:05}.png");
        save_image_png(&sample.image, &out_dir.join(&image))?;
        save_mask_png(&sample.mask, &out_dir.join(&mask))?;
        entries.push(ManifestEntry {
            image,
            mask,
            domain: style.name.clone(),
            seed: ts,
        });
    }
    let manifest = Manifest {
        class_count: 2,
        tile_size,
        entries,
        root: out_dir.to_path_buf(),
    };
    manifest.save(&out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

fn split_order(n: usize, fractions: (f64, f64), seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let (tr, va) = fractions;
    if !(tr >= 0.0 && va >= 0.0) || (tr + va - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "split fractions ({tr}, {va}) must be nonnegative and sum to 1"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut substream(seed, &[tag::SPLIT]));
    let n_train = ((tr * n as f64).round() as usize).min(n);
    let val = order.split_off(n_train);
    Ok((order, val))
}

/// Seeded disjoint split into (train, val). Fractions must be nonnegative and
/// sum to 1 within 1e-9; the train share is `round(train * n)`.
pub fn split(manifest: &Manifest, fractions: (f64, f64), seed: u64) -> Result<(Manifest, Manifest)> {
    let (train, val) = split_order(manifest.len(), fractions, seed)?;
    let pick = |idx: &[usize]| Manifest {
        class_count: manifest.class_count,
        tile_size: manifest.tile_size,
        entries: idx.iter().map(|&i| manifest.entries[i].clone()).collect(),
        root: manifest.root.clone(),
    };
    Ok((pick(&train), pick(&val)))
}

/// In-memory counterpart of [`split`]; the same seed picks the same tiles.
pub fn split_dataset(data: &Dataset, fractions: (f64, f64), seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, val) = split_order(data.len(), fractions, seed)?;
    let pick = |idx: &[usize]| Dataset::from_samples(idx.iter().map(|&i| data.samples[i].clone()).collect(), data.class_count);
    Ok((pick(&train), pick(&val)))
}

/// Tiles held in memory.
#[derive(Clone, Debug, Default)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub class_count: usize,
}

impl Dataset {
    pub fn load(manifest: &Manifest, role: Role) -> Result<Self> {
        let samples = (0..manifest.len())
            .map(|i| manifest.load_sample(i, role))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            samples,
            class_count: manifest.class_count,
        })
    }

    pub fn from_samples(samples: Vec<Sample>, class_count: usize) -> Self {
        Self {
            samples,
            class_count,
        }
    }

    /// Concatenate datasets; tiles are sampled uniformly regardless of origin.
    pub fn concat(parts: Vec<Dataset>) -> Result<Self> {
        let class_count = parts.first().map(|d| d.class_count).unwrap_or(2);
        if parts.iter().any(|d| d.class_count != class_count) {
            return Err(Error::invalid("datasets disagree on class_count"));
        }
        Ok(Self {
            samples: parts.into_iter().flat_map(|d| d.samples).collect(),
            class_count,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}
