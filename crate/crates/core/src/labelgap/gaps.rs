use serde::{Deserialize, Serialize};

use super::embed::{embed, Embedding};
use super::features::{featurize_mask, Featurization, LabelFeature};
use super::purity::{purity_curve, PurityCurve};
use crate::error::{Error, Result};
use crate::geodata::{Mask, Role};

/// Named source/target collections of label masks.
#[derive(Clone, Debug)]
pub struct GapPair {
    pub name: String,
    pub source: Vec<Mask>,
    pub target: Vec<Mask>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapSummary {
    pub pair: String,
    pub n_source: usize,
    pub n_target: usize,
    pub auc: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GapResult {
    pub summary: GapSummary,
    pub curve: PurityCurve,
}

/// Features for a pair; ids run over sources first, then targets.
pub fn pair_features(pair: &GapPair, featurization: Featurization) -> Result<Vec<LabelFeature>> {
    pair.source
        .iter()
        .map(|m| (m, Role::Source))
        .chain(pair.target.iter().map(|m| (m, Role::Target)))
        .enumerate()
        .map(|(i, (m, origin))| {
            Ok(LabelFeature {
                vector: featurize_mask(m, featurization)?,
                origin,
                id: i as u64,
            })
        })
        .collect()
}

/// Score every pair and rank by descending AUC (more separable label
/// distributions first), ties by name.
pub fn compare_gaps(pairs: &[GapPair], featurization: Featurization, embedding: &Embedding) -> Result<Vec<GapResult>> {
    if pairs.is_empty() {
        return Err(Error::invalid("compare_gaps needs at least one pair"));
    }
    let mut out = pairs
        .iter()
        .map(|p| {
            let feats = embed(&pair_features(p, featurization)?, embedding)?;
            let curve = purity_curve(&feats)?;
            Ok(GapResult {
                summary: GapSummary {
                    pair: p.name.clone(),
                    n_source: p.source.len(),
                    n_target: p.target.len(),
                    auc: curve.auc,
                },
                curve,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| {
        b.summary
            .auc
            .total_cmp(&a.summary.auc)
            .then_with(|| a.summary.pair.cmp(&b.summary.pair))
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blocks(n: usize, fill: impl Fn(usize, usize, usize) -> bool) -> Vec<Mask> {
        (0..n)
            .map(|i| {
                let mut m = Mask::zeros(8, 8);
                for y in 0..8 {
                    for x in 0..8 {
                        if fill(i, y, x) {
                            m.set(y, x, 1);
                        }
                    }
                }
                m
            })
            .collect()
    }

    #[test]
    fn ranks_by_auc_then_name() {
        let sep = GapPair {
            name: "sep".into(),
            source: blocks(4, |i, y, _| y < 2 + i % 2),
            target: blocks(4, |i, _, x| x >= 5 - i % 2),
        };
        let same = GapPair {
            name: "same".into(),
            source: blocks(4, |i, y, _| y < 1 + i),
            target: blocks(4, |i, y, _| y < 1 + i),
        };
        let r = compare_gaps(&[same.clone(), sep], Featurization::Grid { g: 4 }, &Embedding::Identity).unwrap();
        assert_eq!(r[0].summary.pair, "sep");
        assert!(r[0].summary.auc > r[1].summary.auc);
        let tie = GapPair { name: "a".into(), ..same.clone() };
        let r = compare_gaps(&[same, tie], Featurization::Grid { g: 4 }, &Embedding::Identity).unwrap();
        assert_eq!(r[0].summary.pair, "a");
        assert!(compare_gaps(&[], Featurization::default(), &Embedding::Identity).is_err());
    }
}
