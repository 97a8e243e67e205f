//! Separability of source and target label distributions: mask features,
//! optional embedding, single-linkage merge trees and origin-purity curves.

mod embed;
mod features;
mod gaps;
mod purity;

pub use embed::{embed, load_external, pca, Embedding};
pub use features::{featurize_mask, Featurization, LabelFeature, DEFAULT_GRID, ORIENTATION_BINS};
pub use gaps::{compare_gaps, pair_features, GapPair, GapResult, GapSummary};
pub use purity::{euclidean, mst_edges, purity_after_merges, purity_curve, MergeEdge, PurityCurve};
