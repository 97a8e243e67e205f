use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodata::{Mask, Role};

pub const DEFAULT_GRID: usize = 32;
pub const ORIENTATION_BINS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Featurization {
    /// Average-pooled building indicator on a `g × g` grid.
    Grid { g: usize },
    /// Grid features followed by footprint statistics.
    Stats { g: usize },
}

impl Default for Featurization {
    fn default() -> Self {
        Featurization::Grid { g: DEFAULT_GRID }
    }
}

impl Featurization {
    pub fn grid(self) -> usize {
        match self {
            Featurization::Grid { g } | Featurization::Stats { g } => g,
        }
    }
}

/// One featurized label mask.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelFeature {
    pub vector: Vec<f64>,
    pub origin: Role,
    pub id: u64,
}

/// Pool `mask > 0` to `g × g` cells; pixel `(y, x)` lands in cell
/// `(y·g/H, x·g/W)`.
fn pool(mask: &Mask, g: usize) -> Vec<f64> {
    let (h, w) = (mask.height(), mask.width());
    let mut sum = vec![0.0; g * g];
    let mut count = vec![0.0; g * g];
    for y in 0..h {
        let cy = y * g / h;
        for x in 0..w {
            let cell = cy * g + x * g / w;
            count[cell] += 1.0;
            if mask.get(y, x) > 0 {
                sum[cell] += 1.0;
            }
        }
    }
    sum.iter().zip(&count).map(|(s, c)| s / c).collect()
}

/// 4-connected building components as pixel lists.
fn components(mask: &Mask) -> Vec<Vec<(usize, usize)>> {
    let (h, w) = (mask.height(), mask.width());
    let mut seen = vec![false; h * w];
    let mut out = Vec::new();
    for start in 0..h * w {
        if seen[start] || mask.data()[start] == 0 {
            continue;
        }
        seen[start] = true;
        let mut stack = vec![start];
        let mut comp = Vec::new();
        while let Some(i) = stack.pop() {
            let (y, x) = (i / w, i % w);
            comp.push((y, x));
            let mut visit = |j: usize| {
                if !seen[j] && mask.data()[j] > 0 {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
        }
        out.push(comp);
    }
    out
}

/// Principal-axis angle in `[0, π)` from second moments.
fn orientation(comp: &[(usize, usize)]) -> f64 {
    let n = comp.len() as f64;
    let (my, mx) = comp
        .iter()
        .fold((0.0, 0.0), |(a, b), &(y, x)| (a + y as f64 / n, b + x as f64 / n));
    let (mut syy, mut sxx, mut sxy) = (0.0, 0.0, 0.0);
    for &(y, x) in comp {
        let (dy, dx) = (y as f64 - my, x as f64 - mx);
        syy += dy * dy;
        sxx += dx * dx;
        sxy += dx * dy;
    }
    let a = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    a.rem_euclid(std::f64::consts::PI)
}

fn stats(mask: &Mask) -> Vec<f64> {
    let comps = components(mask);
    let area = (mask.height() * mask.width()) as f64;
    let building: usize = comps.iter().map(|c| c.len()).sum();
    let mean_area = if comps.is_empty() {
        0.0
    } else {
        building as f64 / comps.len() as f64 / area
    };
    let mut hist = vec![0.0; ORIENTATION_BINS];
    for c in &comps {
        let bin = (orientation(c) / std::f64::consts::PI * ORIENTATION_BINS as f64) as usize;
        hist[bin.min(ORIENTATION_BINS - 1)] += 1.0 / comps.len() as f64;
    }
    let mut out = vec![building as f64 / area, comps.len() as f64 / 100.0, mean_area];
    out.extend(hist);
    out
}

pub fn featurize_mask(mask: &Mask, featurization: Featurization) -> Result<Vec<f64>> {
    let g = featurization.grid();
    if g == 0 || mask.height() < g || mask.width() < g {
        return Err(Error::invalid(format!(
            "grid {g} needs a mask of at least {g}x{g}, got {}x{}",
            mask.height(),
            mask.width()
        )));
    }
    let mut v = pool(mask, g);
    if let Featurization::Stats { .. } = featurization {
        v.extend(stats(mask));
    }
    Ok(v)
}
