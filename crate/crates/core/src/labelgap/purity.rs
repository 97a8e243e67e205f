use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::features::LabelFeature;
use crate::error::{Error, Result};
use crate::geodata::Role;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PurityCurve {
    /// `k / (n − 1)` after merge `k`.
    pub merge_fraction: Vec<f64>,
    /// Size-weighted majority-origin fraction after each merge.
    pub purity: Vec<f64>,
    /// Mean purity over the merges.
    pub auc: f64,
}

impl PurityCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("merge_fraction,purity\n");
        for (f, p) in self.merge_fraction.iter().zip(&self.purity) {
            writeln!(s, "{f},{p}").unwrap();
        }
        s
    }
}

/// Spanning-tree edge between feature indices `a` and `b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MergeEdge {
    pub a: usize,
    pub b: usize,
    pub length: f64,
}

/// Edge order: length, then the smaller id, then the larger id.
#[derive(Clone, Copy, Debug, PartialEq)]
struct EdgeKey {
    length: f64,
    lo: u64,
    hi: u64,
}

impl EdgeKey {
    fn new(length: f64, id_a: u64, id_b: u64) -> Self {
        Self {
            length,
            lo: id_a.min(id_b),
            hi: id_a.max(id_b),
        }
    }

    fn cmp(&self, other: &Self) -> Ordering {
        self.length
            .total_cmp(&other.length)
            .then(self.lo.cmp(&other.lo))
            .then(self.hi.cmp(&other.hi))
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn validate(features: &[LabelFeature]) -> Result<()> {
    if features.len() < 2 {
        return Err(Error::invalid("purity curve needs at least two features"));
    }
    let d = features[0].vector.len();
    if features.iter().any(|f| f.vector.len() != d) {
        return Err(Error::shape("feature vectors differ in dimension"));
    }
    if features.iter().any(|f| f.vector.iter().any(|v| !v.is_finite())) {
        return Err(Error::invalid("non-finite feature entry"));
    }
    let mut ids = HashSet::new();
    if !features.iter().all(|f| ids.insert(f.id)) {
        return Err(Error::invalid("feature ids must be unique"));
    }
    let sources = features.iter().filter(|f| f.origin == Role::Source).count();
    if sources == 0 || sources == features.len() {
        return Err(Error::invalid("purity curve needs features of both origins"));
    }
    Ok(())
}

/// Euclidean minimum spanning tree (Prim, dense), edges returned in
/// ascending `(length, min id, max id)` order. That order is strict, so the
/// tree and the merge sequence are unique.
pub fn mst_edges(features: &[LabelFeature]) -> Vec<MergeEdge> {
    let n = features.len();
    let mut in_tree = vec![false; n];
    let mut best: Vec<Option<(EdgeKey, usize)>> = vec![None; n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        for j in 0..n {
            if in_tree[j] {
                continue;
            }
            let len = euclidean(&features[current].vector, &features[j].vector);
            let key = EdgeKey::new(len, features[current].id, features[j].id);
            if best[j].is_none_or(|(k, _)| key.cmp(&k) == Ordering::Less) {
                best[j] = Some((key, current));
            }
        }
        let next = (0..n)
            .filter(|&j| !in_tree[j])
            .min_by(|&a, &b| best[a].unwrap().0.cmp(&best[b].unwrap().0))
            .expect("a vertex remains");
        let (key, parent) = best[next].unwrap();
        edges.push((key, MergeEdge {
            a: parent,
            b: next,
            length: key.length,
        }));
        in_tree[next] = true;
        current = next;
    }
    edges.sort_by(|x, y| x.0.cmp(&y.0));
    edges.into_iter().map(|(_, e)| e).collect()
}

struct Clusters {
    parent: Vec<usize>,
    counts: Vec<[usize; 2]>,
}

impl Clusters {
    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }
}

/// Purity after each merge of `merges`, applied in order.
pub fn purity_after_merges(origins: &[Role], merges: &[MergeEdge]) -> Vec<f64> {
    let n = origins.len();
    let mut c = Clusters {
        parent: (0..n).collect(),
        counts: origins
            .iter()
            .map(|o| if *o == Role::Source { [1, 0] } else { [0, 1] })
            .collect(),
    };
    let majority = |k: [usize; 2]| k[0].max(k[1]);
    let mut total: usize = n;
    let mut out = Vec::with_capacity(merges.len());
    for e in merges {
        let (ra, rb) = (c.find(e.a), c.find(e.b));
        if ra != rb {
            let (ka, kb) = (c.counts[ra], c.counts[rb]);
            let merged = [ka[0] + kb[0], ka[1] + kb[1]];
            total = total - majority(ka) - majority(kb) + majority(merged);
            c.parent[rb] = ra;
            c.counts[ra] = merged;
        }
        out.push(total as f64 / n as f64);
    }
    out
}

/// Single-linkage purity curve of a mixed source/target collection.
pub fn purity_curve(features: &[LabelFeature]) -> Result<PurityCurve> {
    validate(features)?;
    let merges = mst_edges(features);
    let origins: Vec<Role> = features.iter().map(|f| f.origin).collect();
    let purity = purity_after_merges(&origins, &merges);
    let m = merges.len();
    let merge_fraction = (1..=m).map(|k| k as f64 / m as f64).collect();
    let auc = purity.iter().sum::<f64>() / m as f64;
    Ok(PurityCurve {
        merge_fraction,
        purity,
        auc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn line(src: &[f64], tgt: &[f64]) -> Vec<LabelFeature> {
        src.iter()
            .map(|&x| (x, Role::Source))
            .chain(tgt.iter().map(|&x| (x, Role::Target)))
            .enumerate()
            .map(|(i, (x, origin))| LabelFeature {
                vector: vec![x],
                origin,
                id: i as u64,
            })
            .collect()
    }

    #[test]
    fn separated_pairs() {
        let c = purity_curve(&line(&[0.0, 1.0], &[10.0, 11.0])).unwrap();
        assert_eq!(c.purity, vec![1.0, 1.0, 0.5]);
        assert_eq!(c.merge_fraction, vec![1.0 / 3.0, 2.0 / 3.0, 1.0]);
        assert!((c.auc - 2.5 / 3.0).abs() < 1e-12);
    }

    /// Source {0, 2}, target {1, 3}, ids assigned in that order. All three
    /// unit edges tie on length and join ids {0,2}, {1,2}, {1,3}: the first
    /// merge pairs a source with a target and the second adds the other
    /// source, so purity holds at 0.75 for two merges.
    #[test]
    fn interleaved_line_follows_id_tie_break() {
        let c = purity_curve(&line(&[0.0, 2.0], &[1.0, 3.0])).unwrap();
        assert_eq!(c.purity, vec![0.75, 0.75, 0.5]);
        assert!((c.auc - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn final_merge_of_balanced_set_is_half() {
        let c = purity_curve(&line(&[0.3, 5.0, 2.2], &[1.1, 4.0, 9.0])).unwrap();
        assert_eq!(*c.purity.last().unwrap(), 0.5);
    }

    #[test]
    fn rejects_single_origin_and_duplicates() {
        assert!(purity_curve(&line(&[0.0, 1.0], &[])).is_err());
        let mut f = line(&[0.0], &[1.0]);
        f[1].id = 0;
        assert!(purity_curve(&f).is_err());
        assert!(purity_curve(&line(&[0.0], &[])).is_err());
    }

    #[test]
    fn csv_layout() {
        let c = purity_curve(&line(&[0.0], &[1.0])).unwrap();
        assert_eq!(c.to_csv(), "merge_fraction,purity\n1,0.5\n");
    }
}
