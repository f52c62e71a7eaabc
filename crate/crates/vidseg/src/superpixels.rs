//! Superpixel oversegmentation and the graph structure built on top of it:
//! SLIC-style clustering, per-region appearance records, same-frame
//! adjacency and flow-based links between consecutive frames.

use std::collections::BTreeMap;

use crate::types::{BinaryMask, FlowField, Frame};
use crate::{Error, Result};

/// Color distances inside SLIC are measured on a 0-100 scale (CIELAB-like
/// magnitude) so the conventional compactness range of roughly 1-40 keeps
/// its usual meaning on `[0, 1]` inputs.
const SLIC_COLOR_SCALE: f64 = 100.0;

/// Dense per-pixel region labels forming a partition of the frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuperpixelLabelMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    region_count: usize,
}

impl SuperpixelLabelMap {
    pub fn new(width: usize, height: usize, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::invalid("label map size mismatch"));
        }
        let max = *labels.iter().max().ok_or_else(|| Error::invalid("empty label map"))?;
        let count = max as usize + 1;
        let mut seen = vec![false; count];
        for l in &labels {
            seen[*l as usize] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::invalid("label ids are not dense"));
        }
        Ok(Self {
            width,
            height,
            labels,
            region_count: count,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn label(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn region_count(&self) -> usize {
        self.region_count
    }

    pub fn region_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.region_count];
        for l in &self.labels {
            sizes[*l as usize] += 1;
        }
        sizes
    }
}

/// One superpixel: mean H,S,V,R,G,B appearance (all in `[0, 1]`), centroid
/// in pixel coordinates, a binary segmentation label and bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct Superpixel {
    pub appearance: [f64; 6],
    pub centroid: (f64, f64),
    pub label: bool,
    pub frame_index: usize,
    pub pixel_count: usize,
}

/// Flow-induced link between a region at `t-1` and a region at `t`. `psi`
/// is the fraction of the source region's pixels that land in the target;
/// links with zero overlap are never materialized.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalLink {
    pub from: u32,
    pub to: u32,
    pub psi: f64,
}

/// RGB in `[0, 1]` to HSV with hue normalized from degrees to `[0, 1)`.
pub fn rgb_to_hsv([r, g, b]: [f64; 3]) -> [f64; 3] {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let v = max;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    let h = if delta <= 0.0 {
        0.0
    } else if max == r {
        (((g - b) / delta).rem_euclid(6.0)) / 6.0
    } else if max == g {
        ((b - r) / delta + 2.0) / 6.0
    } else {
        ((r - g) / delta + 4.0) / 6.0
    };
    [h, s, v]
}

struct Cluster {
    x: f64,
    y: f64,
    color: [f64; 3],
}

/// SLIC oversegmentation into roughly `k` regions.
///
/// Seeds start on a uniform grid (perturbed to the lowest-gradient position
/// in a 3x3 neighborhood), assignment minimizes
/// `(scale*d_rgb)^2 + compactness^2 * (d_xy/S)^2` inside a 2Sx2S window,
/// and a final pass enforces 4-connectivity by merging every non-largest
/// fragment of a cluster into the adjacent region with the nearest mean
/// color. Label ids are dense in `[0, n)`. Deterministic.
pub fn slic_segment(
    frame: &Frame,
    k: usize,
    compactness: f64,
    iterations: usize,
) -> Result<SuperpixelLabelMap> {
    let (w, h) = (frame.width(), frame.height());
    if k < 4 || k > w * h / 16 {
        return Err(Error::invalid(format!(
            "superpixel target k={k} out of range [4, {}]",
            w * h / 16
        )));
    }
    if !(compactness > 0.0) {
        return Err(Error::invalid("slic compactness must be > 0"));
    }
    let spacing = ((w * h) as f64 / k as f64).sqrt();
    let cols = ((w as f64 / spacing).round() as usize).max(1);
    let rows = ((h as f64 / spacing).round() as usize).max(1);

    let grad = gradient_magnitude(frame);
    let mut clusters = Vec::with_capacity(cols * rows);
    for gy in 0..rows {
        for gx in 0..cols {
            let cx = ((gx as f64 + 0.5) * w as f64 / cols as f64).floor() as usize;
            let cy = ((gy as f64 + 0.5) * h as f64 / rows as f64).floor() as usize;
            let (sx, sy) = lowest_gradient_3x3(&grad, w, h, cx.min(w - 1), cy.min(h - 1));
            clusters.push(Cluster {
                x: sx as f64,
                y: sy as f64,
                color: frame.pixel(sx, sy),
            });
        }
    }

    let color_w = SLIC_COLOR_SCALE * SLIC_COLOR_SCALE;
    let spatial_w = compactness * compactness / (spacing * spacing);
    let mut assignment = vec![0u32; w * h];
    let mut best_dist = vec![f64::INFINITY; w * h];
    let window = spacing.ceil() as isize;
    for _ in 0..iterations {
        best_dist.fill(f64::INFINITY);
        for (ci, cluster) in clusters.iter().enumerate() {
            let cx = cluster.x.round() as isize;
            let cy = cluster.y.round() as isize;
            let x0 = (cx - window).max(0) as usize;
            let x1 = ((cx + window) as usize).min(w - 1);
            let y0 = (cy - window).max(0) as usize;
            let y1 = ((cy + window) as usize).min(h - 1);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let px = frame.pixel(x, y);
                    let dc = (px[0] - cluster.color[0]).powi(2)
                        + (px[1] - cluster.color[1]).powi(2)
                        + (px[2] - cluster.color[2]).powi(2);
                    let ds = (x as f64 - cluster.x).powi(2) + (y as f64 - cluster.y).powi(2);
                    let dist = color_w * dc + spatial_w * ds;
                    let i = y * w + x;
                    if dist < best_dist[i] {
                        best_dist[i] = dist;
                        assignment[i] = ci as u32;
                    }
                }
            }
        }
        // Pixels outside every window (possible on elongated frames) attach
        // to the nearest cluster center.
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                if best_dist[i].is_infinite() {
                    let mut best = (f64::INFINITY, 0u32);
                    for (ci, c) in clusters.iter().enumerate() {
                        let ds = (x as f64 - c.x).powi(2) + (y as f64 - c.y).powi(2);
                        if ds < best.0 {
                            best = (ds, ci as u32);
                        }
                    }
                    assignment[i] = best.1;
                }
            }
        }
        // Update step: move each cluster to the mean of its pixels.
        let mut acc = vec![(0.0f64, 0.0f64, [0.0f64; 3], 0usize); clusters.len()];
        for y in 0..h {
            for x in 0..w {
                let ci = assignment[y * w + x] as usize;
                let e = &mut acc[ci];
                e.0 += x as f64;
                e.1 += y as f64;
                let px = frame.pixel(x, y);
                for c in 0..3 {
                    e.2[c] += px[c];
                }
                e.3 += 1;
            }
        }
        for (cluster, (sx, sy, scol, n)) in clusters.iter_mut().zip(acc) {
            if n > 0 {
                let inv = 1.0 / n as f64;
                cluster.x = sx * inv;
                cluster.y = sy * inv;
                cluster.color = [scol[0] * inv, scol[1] * inv, scol[2] * inv];
            }
        }
    }

    let labels = enforce_connectivity(&assignment, w, h, frame);
    let map = SuperpixelLabelMap::new(w, h, labels)?;
    debug_assert!(map.region_count() >= k / 2 && map.region_count() <= 2 * k);
    Ok(map)
}

fn gradient_magnitude(frame: &Frame) -> Vec<f64> {
    let (w, h) = (frame.width(), frame.height());
    let px = |x: isize, y: isize| -> [f64; 3] {
        frame.pixel(
            x.clamp(0, w as isize - 1) as usize,
            y.clamp(0, h as isize - 1) as usize,
        )
    };
    let mut out = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut g = 0.0;
            for c in 0..3 {
                let dx = px(x + 1, y)[c] - px(x - 1, y)[c];
                let dy = px(x, y + 1)[c] - px(x, y - 1)[c];
                g += dx * dx + dy * dy;
            }
            out[y as usize * w + x as usize] = g;
        }
    }
    out
}

fn lowest_gradient_3x3(grad: &[f64], w: usize, h: usize, cx: usize, cy: usize) -> (usize, usize) {
    let mut best = (cx, cy);
    let mut best_g = grad[cy * w + cx];
    for dy in -1isize..=1 {
        for dx in -1isize..=1 {
            let x = cx as isize + dx;
            let y = cy as isize + dy;
            if x < 0 || y < 0 || x as usize >= w || y as usize >= h {
                continue;
            }
            let g = grad[y as usize * w + x as usize];
            if g < best_g {
                best_g = g;
                best = (x as usize, y as usize);
            }
        }
    }
    best
}

/// Splits the raw assignment into 4-connected components, keeps the largest
/// component of every cluster and merges each remaining fragment into the
/// adjacent kept region whose mean color is nearest. Returns dense labels.
fn enforce_connectivity(assignment: &[u32], w: usize, h: usize, frame: &Frame) -> Vec<u32> {
    let n = w * h;
    let mut comp = vec![usize::MAX; n];
    let mut comp_cluster = Vec::new();
    let mut comp_size = Vec::new();
    let mut comp_color = Vec::new();
    let mut stack = Vec::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = comp_cluster.len();
        let cluster = assignment[start];
        comp_cluster.push(cluster);
        comp_size.push(0usize);
        comp_color.push([0.0f64; 3]);
        stack.push(start);
        comp[start] = id;
        while let Some(i) = stack.pop() {
            comp_size[id] += 1;
            let (x, y) = (i % w, i / w);
            let px = frame.pixel(x, y);
            for c in 0..3 {
                comp_color[id][c] += px[c];
            }
            let mut visit = |j: usize| {
                if comp[j] == usize::MAX && assignment[j] == cluster {
                    comp[j] = id;
                    stack.push(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        for c in 0..3 {
            comp_color[id][c] /= comp_size[id] as f64;
        }
    }

    let comp_count = comp_cluster.len();
    // Largest component per cluster is retained.
    let mut largest: BTreeMap<u32, usize> = BTreeMap::new();
    for id in 0..comp_count {
        let entry = largest.entry(comp_cluster[id]).or_insert(id);
        if comp_size[id] > comp_size[*entry] {
            *entry = id;
        }
    }
    let retained: Vec<bool> = (0..comp_count)
        .map(|id| largest.get(&comp_cluster[id]) == Some(&id))
        .collect();

    // Resolve every orphan component to a retained target, expanding from
    // already-resolved neighbors until the whole grid is covered.
    let mut target: Vec<Option<usize>> = (0..comp_count)
        .map(|id| retained[id].then_some(id))
        .collect();
    loop {
        let mut progressed = false;
        let mut pending = false;
        for id in 0..comp_count {
            if target[id].is_some() {
                continue;
            }
            // Nearest-color resolved neighbor of this fragment.
            let mut best: Option<(f64, usize)> = None;
            for i in 0..n {
                if comp[i] != id {
                    continue;
                }
                let (x, y) = (i % w, i / w);
                let mut consider = |j: usize| {
                    let other = comp[j];
                    if other == id {
                        return;
                    }
                    if let Some(t) = target[other] {
                        let dc: f64 = (0..3)
                            .map(|c| (comp_color[id][c] - comp_color[t][c]).powi(2))
                            .sum();
                        if best.map_or(true, |(bd, bt)| dc < bd || (dc == bd && t < bt)) {
                            best = Some((dc, t));
                        }
                    }
                };
                if x > 0 {
                    consider(i - 1);
                }
                if x + 1 < w {
                    consider(i + 1);
                }
                if y > 0 {
                    consider(i - w);
                }
                if y + 1 < h {
                    consider(i + w);
                }
            }
            match best {
                Some((_, t)) => {
                    target[id] = Some(t);
                    progressed = true;
                }
                None => pending = true,
            }
        }
        if !pending {
            break;
        }
        assert!(progressed, "orphan superpixel fragment has no resolvable neighbor");
    }

    // Dense relabeling in raster order of first appearance.
    let mut dense: BTreeMap<usize, u32> = BTreeMap::new();
    let mut labels = vec![0u32; n];
    let mut next = 0u32;
    for i in 0..n {
        let t = target[comp[i]].unwrap();
        let label = *dense.entry(t).or_insert_with(|| {
            let l = next;
            next += 1;
            l
        });
        labels[i] = label;
    }
    labels
}

/// Per-region mean appearance (H,S,V,R,G,B), centroid and size. Hue is the
/// arithmetic mean of per-pixel hues on `[0, 1)`; it is not wrapped, which
/// is acceptable inside color-coherent regions. Labels start as background.
pub fn extract_superpixels(
    frame: &Frame,
    label_map: &SuperpixelLabelMap,
    frame_index: usize,
) -> Vec<Superpixel> {
    let n = label_map.region_count();
    let mut acc = vec![([0.0f64; 6], 0.0f64, 0.0f64, 0usize); n];
    for y in 0..frame.height() {
        for x in 0..frame.width() {
            let rgb = frame.pixel(x, y);
            let hsv = rgb_to_hsv(rgb);
            let e = &mut acc[label_map.label(x, y) as usize];
            for c in 0..3 {
                e.0[c] += hsv[c];
                e.0[c + 3] += rgb[c];
            }
            e.1 += x as f64;
            e.2 += y as f64;
            e.3 += 1;
        }
    }
    acc.into_iter()
        .map(|(sum, sx, sy, count)| {
            let inv = 1.0 / count as f64;
            Superpixel {
                appearance: [
                    sum[0] * inv,
                    sum[1] * inv,
                    sum[2] * inv,
                    sum[3] * inv,
                    sum[4] * inv,
                    sum[5] * inv,
                ],
                centroid: (sx * inv, sy * inv),
                label: false,
                frame_index,
                pixel_count: count,
            }
        })
        .collect()
}

/// Undirected edges between regions sharing at least one 4-adjacent pixel
/// pair, without self-edges or duplicates, sorted.
pub fn spatial_adjacency(label_map: &SuperpixelLabelMap) -> Vec<(u32, u32)> {
    let (w, h) = (label_map.width(), label_map.height());
    let mut edges = std::collections::BTreeSet::new();
    for y in 0..h {
        for x in 0..w {
            let a = label_map.label(x, y);
            if x + 1 < w {
                let b = label_map.label(x + 1, y);
                if a != b {
                    edges.insert((a.min(b), a.max(b)));
                }
            }
            if y + 1 < h {
                let b = label_map.label(x, y + 1);
                if a != b {
                    edges.insert((a.min(b), a.max(b)));
                }
            }
        }
    }
    edges.into_iter().collect()
}

/// Flow-weighted links from regions at `t-1` to regions at `t`.
///
/// Every source pixel is displaced by its flow vector, rounded to the
/// nearest pixel and clamped to the frame, and lands in exactly one target
/// region, so the outgoing `psi` of every source region sums to 1.
pub fn temporal_links(
    labels_prev: &SuperpixelLabelMap,
    labels_cur: &SuperpixelLabelMap,
    flow_prev_to_cur: &FlowField,
) -> Result<Vec<TemporalLink>> {
    let (w, h) = (labels_prev.width(), labels_prev.height());
    if labels_cur.width() != w
        || labels_cur.height() != h
        || flow_prev_to_cur.width() != w
        || flow_prev_to_cur.height() != h
    {
        return Err(Error::invalid("temporal link inputs disagree on dimensions"));
    }
    let prev_sizes = labels_prev.region_sizes();
    let mut counts: BTreeMap<(u32, u32), usize> = BTreeMap::new();
    for y in 0..h {
        for x in 0..w {
            let from = labels_prev.label(x, y);
            let [u, v] = flow_prev_to_cur.vector(x, y);
            let tx = (x as f64 + u as f64).round().clamp(0.0, (w - 1) as f64) as usize;
            let ty = (y as f64 + v as f64).round().clamp(0.0, (h - 1) as f64) as usize;
            let to = labels_cur.label(tx, ty);
            *counts.entry((from, to)).or_insert(0) += 1;
        }
    }
    Ok(counts
        .into_iter()
        .map(|((from, to), count)| TemporalLink {
            from,
            to,
            psi: count as f64 / prev_sizes[from as usize] as f64,
        })
        .collect())
}

/// Renders per-region binary labels back to a pixel mask.
pub fn superpixel_labels_to_mask(
    label_map: &SuperpixelLabelMap,
    labels: &[bool],
) -> Result<BinaryMask> {
    if labels.len() < label_map.region_count() {
        return Err(Error::invalid(format!(
            "missing region label: {} regions, {} labels",
            label_map.region_count(),
            labels.len()
        )));
    }
    Ok(BinaryMask::from_fn(
        label_map.width(),
        label_map.height(),
        |x, y| labels[label_map.label(x, y) as usize],
    ))
}
