use std::collections::HashMap;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::features::LabelFeature;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Embedding {
    Identity,
    Pca { k: usize },
    /// CSV with header `id,x1..xk`, one row per feature id.
    External { path: PathBuf },
}

fn check_dims(features: &[LabelFeature]) -> Result<usize> {
    if features.len() < 2 {
        return Err(Error::invalid("embedding needs at least two features"));
    }
    let d = features[0].vector.len();
    if d == 0 || features.iter().any(|f| f.vector.len() != d) {
        return Err(Error::shape("feature vectors must share a nonzero dimension"));
    }
    if features.iter().any(|f| f.vector.iter().any(|v| !v.is_finite())) {
        return Err(Error::invalid("non-finite feature entry"));
    }
    Ok(d)
}

/// Centre and project onto the top `k` principal directions. Each direction
/// is signed so its largest-magnitude coefficient is positive.
pub fn pca(features: &[LabelFeature], k: usize) -> Result<Vec<LabelFeature>> {
    let d = check_dims(features)?;
    if k == 0 || k > d {
        return Err(Error::invalid(format!("pca k = {k} must lie in 1..={d}")));
    }
    let n = features.len();
    let mut mean = vec![0.0; d];
    for f in features {
        for (m, v) in mean.iter_mut().zip(&f.vector) {
            *m += v / n as f64;
        }
    }
    let x = DMatrix::from_fn(n, d, |i, j| features[i].vector[j] - mean[j]);
    let svd = x.clone().svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));
    let mut dirs: Vec<Vec<f64>> = order
        .iter()
        .take(k)
        .map(|&r| {
            let mut v: Vec<f64> = v_t.row(r).iter().copied().collect();
            let lead = v.iter().copied().fold(0.0f64, |m, c| if c.abs() > m.abs() { c } else { m });
            if lead < 0.0 {
                v.iter_mut().for_each(|c| *c = -*c);
            }
            v
        })
        .collect();
    // fewer samples than requested components: the rest carry no variance
    while dirs.len() < k {
        dirs.push(vec![0.0; d]);
    }
    Ok(features
        .iter()
        .enumerate()
        .map(|(i, f)| LabelFeature {
            vector: dirs
                .iter()
                .map(|dir| dir.iter().enumerate().map(|(j, c)| c * x[(i, j)]).sum())
                .collect(),
            origin: f.origin,
            id: f.id,
        })
        .collect())
}

/// Coordinates keyed by id from a CSV file with header `id,x1..xk`.
pub fn load_external(path: &Path) -> Result<HashMap<u64, Vec<f64>>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::invalid(format!("{}: {other:?}", path.display())),
    })?;
    let header = rdr.headers()?.clone();
    let k = header.len().saturating_sub(1);
    let expected = (1..=k).map(|i| format!("x{i}"));
    if header.get(0) != Some("id") || k == 0 || !header.iter().skip(1).eq(expected) {
        return Err(Error::invalid(format!(
            "{}: header must be id,x1..xk",
            path.display()
        )));
    }
    let mut out = HashMap::new();
    for row in rdr.records() {
        let row = row?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::invalid(format!("{}: bad number {s:?}: {e}", path.display())))
        };
        let id = row[0]
            .trim()
            .parse::<u64>()
            .map_err(|e| Error::invalid(format!("{}: bad id {:?}: {e}", path.display(), &row[0])))?;
        let coords = row.iter().skip(1).map(parse).collect::<Result<Vec<_>>>()?;
        if out.insert(id, coords).is_some() {
            return Err(Error::invalid(format!("{}: duplicate id {id}", path.display())));
        }
    }
    Ok(out)
}

pub fn embed(features: &[LabelFeature], method: &Embedding) -> Result<Vec<LabelFeature>> {
    match method {
        Embedding::Identity => {
            check_dims(features)?;
            Ok(features.to_vec())
        }
        Embedding::Pca { k } => pca(features, *k),
        Embedding::External { path } => {
            if features.len() < 2 {
                return Err(Error::invalid("embedding needs at least two features"));
            }
            let coords = load_external(path)?;
            features
                .iter()
                .map(|f| {
                    let v = coords.get(&f.id).ok_or_else(|| {
                        Error::MissingData(format!("{} has no coordinates for id {}", path.display(), f.id))
                    })?;
                    Ok(LabelFeature {
                        vector: v.clone(),
                        origin: f.origin,
                        id: f.id,
                    })
                })
                .collect()
        }
    }
}
