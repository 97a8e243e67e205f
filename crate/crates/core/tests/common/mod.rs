//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::VecDeque;

use geoadapt::augment::Transform;
use geoadapt::geodata::Role;
use geoadapt::labelgap::{euclidean, LabelFeature};

/// Brute-force index mapping for the permutation-type ops on a label grid.
pub fn permute_labels(src: &[u8], h: usize, w: usize, t: &Transform) -> (Vec<u8>, usize, usize) {
    match *t {
        Transform::Hflip => {
            let mut out = vec![0; h * w];
            for y in 0..h {
                for x in 0..w {
                    out[y * w + x] = src[y * w + (w - 1 - x)];
                }
            }
            (out, h, w)
        }
        Transform::Vflip => {
            let mut out = vec![0; h * w];
            for y in 0..h {
                for x in 0..w {
                    out[y * w + x] = src[(h - 1 - y) * w + x];
                }
            }
            (out, h, w)
        }
        Transform::Rot90 { k } => {
            let (mut cur, mut ch, mut cw) = (src.to_vec(), h, w);
            for _ in 0..k {
                // one counter-clockwise quarter turn: the last column becomes the first row
                let (nh, nw) = (cw, ch);
                let mut out = vec![0; nh * nw];
                for y in 0..nh {
                    for x in 0..nw {
                        out[y * nw + x] = cur[x * cw + (cw - 1 - y)];
                    }
                }
                cur = out;
                ch = nh;
                cw = nw;
            }
            (cur, ch, cw)
        }
        Transform::TranslateInt { dx, dy } => {
            let mut out = vec![0; h * w];
            for y in 0..h as i64 {
                for x in 0..w as i64 {
                    let (sy, sx) = (y - dy as i64, x - dx as i64);
                    if (0..h as i64).contains(&sy) && (0..w as i64).contains(&sx) {
                        out[(y as usize) * w + x as usize] = src[sy as usize * w + sx as usize];
                    }
                }
            }
            (out, h, w)
        }
        _ => panic!("not a permutation op: {t:?}"),
    }
}

pub fn permute_plan(src: &[u8], h: usize, w: usize, plan: &[Transform]) -> (Vec<u8>, usize, usize) {
    plan.iter()
        .fold((src.to_vec(), h, w), |(m, h, w), t| permute_labels(&m, h, w, t))
}

/// `||a - b|| / max(||b||, tiny)`.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(1e-300)
}

/// Three-sigma binomial window around `n * p`.
pub fn binomial_3sigma(n: usize, p: f64) -> (f64, f64) {
    let mean = n as f64 * p;
    let sd = (n as f64 * p * (1.0 - p)).sqrt();
    (mean - 3.0 * sd, mean + 3.0 * sd)
}

/// Components of the graph with every edge no longer than `threshold`.
fn components(f: &[LabelFeature], threshold: f64) -> Vec<Vec<usize>> {
    let n = f.len();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut comp = vec![s];
        let mut queue = VecDeque::from([s]);
        while let Some(i) = queue.pop_front() {
            for j in 0..n {
                if !seen[j] && euclidean(&f[i].vector, &f[j].vector) <= threshold {
                    seen[j] = true;
                    comp.push(j);
                    queue.push_back(j);
                }
            }
        }
        out.push(comp);
    }
    out
}

/// Purity after each merge, recomputed from scratch by thresholding the
/// complete graph at the k-th smallest merge distance.
pub fn threshold_purity(f: &[LabelFeature]) -> Vec<f64> {
    let n = f.len();
    let mut dists: Vec<f64> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| euclidean(&f[i].vector, &f[j].vector))
        .collect();
    dists.sort_by(f64::total_cmp);
    // merge distances are the thresholds at which the component count drops
    let mut out = Vec::new();
    let mut last = n;
    for &t in &dists {
        let comps = components(f, t);
        if comps.len() < last {
            let pure: usize = comps
                .iter()
                .map(|c| {
                    let s = c.iter().filter(|&&i| f[i].origin == Role::Source).count();
                    s.max(c.len() - s)
                })
                .sum();
            for _ in comps.len()..last {
                out.push(pure as f64 / n as f64);
            }
            last = comps.len();
        }
        if last == 1 {
            break;
        }
    }
    out
}
