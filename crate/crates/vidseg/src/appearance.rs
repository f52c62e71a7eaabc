//! Long-term nonlocal appearance fusion.
//!
//! Each superpixel searches the previous `F` frames for its
//! appearance-nearest counterpart per frame (KD-tree over the 6-D feature
//! vectors, exact or leaf-budgeted), then blends the softmax-weighted
//! combination of those counterparts into its own appearance.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::{Error, Result};

const LEAF_SIZE: usize = 8;

/// Nearest-neighbor search strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMode {
    /// Full branch-and-bound; results equal a linear scan.
    Exact,
    /// Best-first search that stops after visiting this many leaves.
    Approximate { leaf_visits: usize },
}

enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        dim: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Static KD-tree over 6-D appearance vectors.
pub struct KdTree {
    points: Vec<[f64; 6]>,
    perm: Vec<usize>,
    nodes: Vec<Node>,
    root: usize,
}

impl KdTree {
    pub fn build(points: Vec<[f64; 6]>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("cannot build KD-tree over an empty set"));
        }
        let mut perm: Vec<usize> = (0..points.len()).collect();
        let mut tree = Self {
            points,
            perm: Vec::new(),
            nodes: Vec::new(),
            root: 0,
        };
        let n = tree.points.len();
        let root = tree.build_node(&mut perm, 0, n);
        tree.perm = perm;
        tree.root = root;
        Ok(tree)
    }

    fn build_node(&mut self, perm: &mut [usize], start: usize, end: usize) -> usize {
        let slice = &perm[start..end];
        let mut lo = [f64::INFINITY; 6];
        let mut hi = [f64::NEG_INFINITY; 6];
        for &i in slice {
            for d in 0..6 {
                lo[d] = lo[d].min(self.points[i][d]);
                hi[d] = hi[d].max(self.points[i][d]);
            }
        }
        let (dim, spread) = (0..6)
            .map(|d| (d, hi[d] - lo[d]))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if end - start <= LEAF_SIZE || spread == 0.0 {
            self.nodes.push(Node::Leaf { start, end });
            return self.nodes.len() - 1;
        }
        let mid = (end - start) / 2;
        perm[start..end]
            .select_nth_unstable_by(mid, |a, b| self.points[*a][dim].total_cmp(&self.points[*b][dim]));
        let value = self.points[perm[start + mid]][dim];
        let left = self.build_node(perm, start, start + mid);
        let right = self.build_node(perm, start + mid, end);
        self.nodes.push(Node::Split {
            dim,
            value,
            left,
            right,
        });
        self.nodes.len() - 1
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Nearest stored point: `(index, Euclidean distance)`.
    pub fn nearest(&self, query: &[f64; 6], mode: SearchMode) -> (usize, f64) {
        let (idx, d2) = match mode {
            SearchMode::Exact => {
                let mut best = (f64::INFINITY, usize::MAX);
                self.search_exact(self.root, query, &mut best);
                (best.1, best.0)
            }
            SearchMode::Approximate { leaf_visits } => self.search_budgeted(query, leaf_visits),
        };
        (idx, d2.sqrt())
    }

    fn scan_leaf(&self, start: usize, end: usize, query: &[f64; 6], best: &mut (f64, usize)) {
        for &i in &self.perm[start..end] {
            let d2 = sq_dist(&self.points[i], query);
            if d2 < best.0 {
                *best = (d2, i);
            }
        }
    }

    fn search_exact(&self, node: usize, query: &[f64; 6], best: &mut (f64, usize)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => self.scan_leaf(start, end, query, best),
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let delta = query[dim] - value;
                let (near, far) = if delta < 0.0 { (left, right) } else { (right, left) };
                self.search_exact(near, query, best);
                if delta * delta < best.0 {
                    self.search_exact(far, query, best);
                }
            }
        }
    }

    fn search_budgeted(&self, query: &[f64; 6], leaf_budget: usize) -> (usize, f64) {
        #[derive(PartialEq)]
        struct Entry(f64, usize);
        impl Eq for Entry {}
        impl PartialOrd for Entry {
            fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
                Some(self.cmp(other))
            }
        }
        impl Ord for Entry {
            fn cmp(&self, other: &Self) -> std::cmp::Ordering {
                self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
            }
        }

        let mut best = (f64::INFINITY, usize::MAX);
        let mut visited = 0usize;
        let mut heap = BinaryHeap::new();
        heap.push(Reverse(Entry(0.0, self.root)));
        while let Some(Reverse(Entry(bound, node))) = heap.pop() {
            if bound >= best.0 {
                break;
            }
            match self.nodes[node] {
                Node::Leaf { start, end } => {
                    self.scan_leaf(start, end, query, &mut best);
                    visited += 1;
                    if visited >= leaf_budget {
                        break;
                    }
                }
                Node::Split {
                    dim,
                    value,
                    left,
                    right,
                } => {
                    let delta = query[dim] - value;
                    let (near, far) = if delta < 0.0 { (left, right) } else { (right, left) };
                    heap.push(Reverse(Entry(bound, near)));
                    heap.push(Reverse(Entry(bound.max(delta * delta), far)));
                }
            }
        }
        best.1 = if best.1 == usize::MAX { 0 } else { best.1 };
        (best.1, best.0)
    }
}

#[inline]
fn sq_dist(a: &[f64; 6], b: &[f64; 6]) -> f64 {
    let mut acc = 0.0;
    for d in 0..6 {
        let diff = a[d] - b[d];
        acc += diff * diff;
    }
    acc
}

/// Euclidean distance between two appearance vectors.
pub fn appearance_distance(a: &[f64; 6], b: &[f64; 6]) -> f64 {
    sq_dist(a, b).sqrt()
}

/// One nearest counterpart from a former frame.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlocalMatch {
    pub frame_index: usize,
    pub superpixel: usize,
    pub distance: f64,
}

/// Per-frame KD-trees over the appearances of a frame window.
pub struct AppearanceIndex {
    frames: Vec<(usize, KdTree)>,
}

impl AppearanceIndex {
    /// `window` holds `(frame_index, appearances)` pairs in ascending frame
    /// order; the superpixel id of an entry is its position in the slice.
    pub fn build(window: &[(usize, &[[f64; 6]])]) -> Result<Self> {
        if window.is_empty() || window.iter().all(|(_, a)| a.is_empty()) {
            return Err(Error::invalid("appearance index window is empty"));
        }
        let mut frames = Vec::with_capacity(window.len());
        for (frame_index, appearances) in window {
            if appearances.is_empty() {
                continue;
            }
            frames.push((*frame_index, KdTree::build(appearances.to_vec())?));
        }
        Ok(Self { frames })
    }

    /// The appearance-nearest superpixel of every window frame, ascending
    /// by frame index.
    pub fn query_counterparts(&self, appearance: &[f64; 6], mode: SearchMode) -> Vec<NonlocalMatch> {
        self.frames
            .iter()
            .map(|(frame_index, tree)| {
                let (superpixel, distance) = tree.nearest(appearance, mode);
                NonlocalMatch {
                    frame_index: *frame_index,
                    superpixel,
                    distance,
                }
            })
            .collect()
    }
}

/// Softmax weights over negative match distances: strictly positive,
/// summing to one.
pub fn fusion_weights(distances: &[f64]) -> Result<Vec<f64>> {
    if distances.is_empty() {
        return Err(Error::invalid("fusion weights need at least one match"));
    }
    let exps: Vec<f64> = distances.iter().map(|d| (-d).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Convex combination of matched appearances.
pub fn fuse_appearance(appearances: &[[f64; 6]], weights: &[f64]) -> [f64; 6] {
    assert_eq!(appearances.len(), weights.len());
    let mut out = [0.0; 6];
    for (a, w) in appearances.iter().zip(weights) {
        for d in 0..6 {
            out[d] += w * a[d];
        }
    }
    out
}

/// Blend of the original appearance (weight `blend`) with the fused
/// nonlocal appearance.
pub fn update_appearance(appearance: &[f64; 6], fused: &[f64; 6], blend: f64) -> [f64; 6] {
    let mut out = [0.0; 6];
    for d in 0..6 {
        out[d] = blend * appearance[d] + (1.0 - blend) * fused[d];
    }
    out
}

/// Applies the nonlocal update across a whole video.
///
/// Matching and fusion always read the ORIGINAL appearances of the window
/// frames; updated values are committed per frame afterwards, so no frame's
/// update can feed another's within the pass. Frames with no former frames
/// keep their appearance unchanged.
pub fn nonlocal_appearance_update(
    appearances: &[Vec<[f64; 6]>],
    window: usize,
    blend: f64,
    mode: SearchMode,
) -> Result<Vec<Vec<[f64; 6]>>> {
    let mut updated = appearances.to_vec();
    for t in 1..appearances.len() {
        let lo = t.saturating_sub(window);
        let window_slices: Vec<(usize, &[[f64; 6]])> = (lo..t)
            .map(|f| (f, appearances[f].as_slice()))
            .collect();
        if window_slices.iter().all(|(_, a)| a.is_empty()) {
            continue;
        }
        let index = AppearanceIndex::build(&window_slices)?;
        for (i, appearance) in appearances[t].iter().enumerate() {
            let matches = index.query_counterparts(appearance, mode);
            if matches.is_empty() {
                continue;
            }
            let distances: Vec<f64> = matches.iter().map(|m| m.distance).collect();
            let weights = fusion_weights(&distances)?;
            let matched: Vec<[f64; 6]> = matches
                .iter()
                .map(|m| appearances[m.frame_index][m.superpixel])
                .collect();
            let fused = fuse_appearance(&matched, &weights);
            updated[t][i] = update_appearance(appearance, &fused, blend);
        }
    }
    Ok(updated)
}
