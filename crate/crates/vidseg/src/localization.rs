//! Foreground localization from a flow field: motion-boundary probability,
//! binarization, the ray-parity inside-outside map and the exact Euclidean
//! distance transform that feeds the location prior.

use crate::types::{BinaryMask, FlowField};
use crate::{Error, Result};

/// Flow magnitude below which a vector counts as static and contributes a
/// zero angle to the direction term.
const STATIC_FLOW_EPS: f64 = 1e-6;

/// Per-pixel boundary responses: `b_m` from the flow gradient, `b_theta`
/// from direction differences, and the combined probability `p`.
#[derive(Debug, Clone)]
pub struct MotionBoundaryMap {
    pub width: usize,
    pub height: usize,
    pub b_m: Vec<f64>,
    pub b_theta: Vec<f64>,
    pub p: Vec<f64>,
}

/// Per-pixel exact Euclidean distance (in pixels) to the nearest mask pixel.
#[derive(Debug, Clone)]
pub struct DistanceField {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl DistanceField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Boundary strength `1 - exp(-steepness * |J|)` where `|J|` is the
/// Frobenius norm of the 2x2 flow Jacobian from central differences with
/// replicated borders.
pub fn boundary_strength(flow: &FlowField, steepness: f64) -> Vec<f64> {
    let (w, h) = (flow.width(), flow.height());
    let comp = |x: isize, y: isize| -> [f64; 2] {
        let x = x.clamp(0, w as isize - 1) as usize;
        let y = y.clamp(0, h as isize - 1) as usize;
        let [u, v] = flow.vector(x, y);
        [u as f64, v as f64]
    };
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let dx = [
                (comp(x + 1, y)[0] - comp(x - 1, y)[0]) / 2.0,
                (comp(x + 1, y)[1] - comp(x - 1, y)[1]) / 2.0,
            ];
            let dy = [
                (comp(x, y + 1)[0] - comp(x, y - 1)[0]) / 2.0,
                (comp(x, y + 1)[1] - comp(x, y - 1)[1]) / 2.0,
            ];
            let frob = (dx[0] * dx[0] + dx[1] * dx[1] + dy[0] * dy[0] + dy[1] * dy[1]).sqrt();
            out.push(1.0 - (-steepness * frob).exp());
        }
    }
    out
}

/// Direction difference `1 - exp(-steepness * max_j angle^2)` over the
/// 8-connected neighborhood; the angle is the unsigned angle in radians
/// between the two flow vectors and is defined as 0 when either vector is
/// shorter than the static threshold.
pub fn direction_difference(flow: &FlowField, steepness: f64) -> Vec<f64> {
    let (w, h) = (flow.width(), flow.height());
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let [ui, vi] = flow.vector(x as usize, y as usize);
            let (ui, vi) = (ui as f64, vi as f64);
            let mag_i = (ui * ui + vi * vi).sqrt();
            let mut max_sq = 0.0f64;
            if mag_i >= STATIC_FLOW_EPS {
                for dy in -1isize..=1 {
                    for dx in -1isize..=1 {
                        if dx == 0 && dy == 0 {
                            continue;
                        }
                        let (nx, ny) = (x + dx, y + dy);
                        if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                            continue;
                        }
                        let [uj, vj] = flow.vector(nx as usize, ny as usize);
                        let (uj, vj) = (uj as f64, vj as f64);
                        let mag_j = (uj * uj + vj * vj).sqrt();
                        if mag_j < STATIC_FLOW_EPS {
                            continue;
                        }
                        let cos = ((ui * uj + vi * vj) / (mag_i * mag_j)).clamp(-1.0, 1.0);
                        let angle = cos.acos();
                        max_sq = max_sq.max(angle * angle);
                    }
                }
            }
            out.push(1.0 - (-steepness * max_sq).exp());
        }
    }
    out
}

/// Combined boundary probability: the gradient response alone where it
/// exceeds `rho`, otherwise the product of both responses.
pub fn boundary_probability(b_m: &[f64], b_theta: &[f64], rho: f64) -> Vec<f64> {
    assert_eq!(b_m.len(), b_theta.len());
    b_m.iter()
        .zip(b_theta)
        .map(|(m, t)| if *m > rho { *m } else { m * t })
        .collect()
}

/// Convenience bundle of all three boundary grids for one flow field.
pub fn motion_boundary_map(
    flow: &FlowField,
    lambda_m: f64,
    lambda_theta: f64,
    rho: f64,
) -> MotionBoundaryMap {
    let b_m = boundary_strength(flow, lambda_m);
    let b_theta = direction_difference(flow, lambda_theta);
    let p = boundary_probability(&b_m, &b_theta, rho);
    MotionBoundaryMap {
        width: flow.width(),
        height: flow.height(),
        b_m,
        b_theta,
        p,
    }
}

/// Marks pixels with probability strictly above `threshold`.
pub fn binarize_boundary(p: &[f64], width: usize, height: usize, threshold: f64) -> BinaryMask {
    assert_eq!(p.len(), width * height);
    BinaryMask::from_fn(width, height, |x, y| p[y * width + x] > threshold)
}

const RAY_DIRS: [(isize, isize); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
];

/// Ray-parity interior estimate of a binary boundary map.
///
/// Casts 8 rays (axis and diagonal) from every non-boundary pixel to the
/// image border. A ray's crossing count is the number of maximal runs of
/// consecutive boundary pixels it traverses, so a thick rasterized
/// boundary counts once. A pixel is inside when at least 5 of 8 rays see an
/// odd count; boundary pixels are always inside. The per-direction run
/// counts are shared prefix tables, one sweep per direction.
pub fn inside_outside_map(boundary: &BinaryMask) -> BinaryMask {
    let (w, h) = (boundary.width(), boundary.height());
    let mut votes = vec![0u8; w * h];
    let mut runs = vec![0u32; w * h];
    for (dx, dy) in RAY_DIRS {
        // Visit pixels so that p + d is always processed before p.
        let xs: Vec<usize> = if dx > 0 {
            (0..w).rev().collect()
        } else {
            (0..w).collect()
        };
        let ys: Vec<usize> = if dy > 0 {
            (0..h).rev().collect()
        } else {
            (0..h).collect()
        };
        for &y in &ys {
            for &x in &xs {
                let i = y * w + x;
                let qx = x as isize + dx;
                let qy = y as isize + dy;
                let (q_runs, q_boundary) =
                    if qx >= 0 && qy >= 0 && (qx as usize) < w && (qy as usize) < h {
                        let qi = qy as usize * w + qx as usize;
                        (runs[qi], boundary.get(qx as usize, qy as usize))
                    } else {
                        (0, false)
                    };
                let here = boundary.get(x, y);
                runs[i] = if here {
                    if q_boundary {
                        q_runs
                    } else {
                        q_runs + 1
                    }
                } else {
                    q_runs
                };
                if !here && runs[i] % 2 == 1 {
                    votes[i] += 1;
                }
            }
        }
    }
    BinaryMask::from_fn(w, h, |x, y| boundary.get(x, y) || votes[y * w + x] >= 5)
}

/// Exact Euclidean distance transform (two-pass lower-envelope algorithm
/// on squared distances, then a square root).
pub fn distance_transform(mask: &BinaryMask) -> Result<DistanceField> {
    if mask.count_ones() == 0 {
        return Err(Error::invalid("distance transform of empty mask"));
    }
    let (w, h) = (mask.width(), mask.height());
    const FAR: f64 = 1e20;
    let mut grid: Vec<f64> = mask
        .values()
        .iter()
        .map(|v| if *v { 0.0 } else { FAR })
        .collect();

    let max_dim = w.max(h);
    let mut f = vec![0.0; max_dim];
    let mut d = vec![0.0; max_dim];
    let mut v_idx = vec![0usize; max_dim];
    let mut z = vec![0.0; max_dim + 1];

    // Columns then rows.
    for x in 0..w {
        for y in 0..h {
            f[y] = grid[y * w + x];
        }
        dt_one_dim(&f[..h], &mut d, &mut v_idx, &mut z);
        for y in 0..h {
            grid[y * w + x] = d[y];
        }
    }
    for y in 0..h {
        f[..w].copy_from_slice(&grid[y * w..y * w + w]);
        dt_one_dim(&f[..w], &mut d, &mut v_idx, &mut z);
        for x in 0..w {
            grid[y * w + x] = d[x].sqrt();
        }
    }
    Ok(DistanceField {
        width: w,
        height: h,
        values: grid,
    })
}

/// One-dimensional squared-distance transform of a sampled function.
fn dt_one_dim(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2 * q - 2 * p) as f64;
            if s <= z[k] {
                k -= 1;
            } else {
                v[k + 1] = q;
                z[k + 1] = s;
                z[k + 2] = f64::INFINITY;
                k += 1;
                break;
            }
        }
    }
    k = 0;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let dq = q as f64 - v[k] as f64;
        d[q] = dq * dq + f[v[k]];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_flow_has_zero_boundary_strength() {
        let flow = FlowField::from_fn(9, 7, |_, _| [2.5, -1.0]).unwrap();
        let b = boundary_strength(&flow, 2.0);
        assert!(b.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn boundary_strength_analytic_point() {
        // Single row where the Jacobian norm is ln 2 at one pixel gives 0.5
        // with unit steepness. A u-step of 2*ln 2 across x makes the central
        // difference ln 2 at the two pixels beside the step.
        let h_step = 2.0 * std::f64::consts::LN_2;
        let flow = FlowField::from_fn(8, 8, |x, _| {
            if x >= 4 {
                [h_step as f32, 0.0]
            } else {
                [0.0, 0.0]
            }
        })
        .unwrap();
        let b = boundary_strength(&flow, 1.0);
        let expected = 1.0 - (-(h_step as f32 as f64) / 2.0).exp(); // 0.5 up to f32 storage
        assert!((expected - 0.5).abs() < 1e-7);
        let at = |x: usize, y: usize| b[y * 8 + x];
        assert!((at(3, 4) - expected).abs() < 1e-12);
        assert!((at(4, 4) - expected).abs() < 1e-12);
        assert_eq!(at(1, 4), 0.0);
        assert_eq!(at(6, 4), 0.0);
    }

    #[test]
    fn boundary_strength_step_edge_matches_stencil() {
        let h = 1.7;
        let flow = FlowField::from_fn(10, 6, |x, _| {
            if x >= 5 {
                [h as f32, 0.0]
            } else {
                [0.0, 0.0]
            }
        })
        .unwrap();
        let lambda = 2.0;
        let b = boundary_strength(&flow, lambda);
        let expected = 1.0 - (-lambda * (h as f32 as f64) / 2.0).exp();
        assert!((b[3 * 10 + 4] - expected).abs() < 1e-12);
        assert!((b[3 * 10 + 5] - expected).abs() < 1e-12);
    }

    #[test]
    fn direction_difference_zero_for_parallel_flow() {
        let flow = FlowField::from_fn(8, 8, |_, _| [1.0, 1.0]).unwrap();
        let b = direction_difference(&flow, 2.0);
        assert!(b.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn direction_difference_right_angle_analytic() {
        // Two half-planes moving at right angles; with
        // steepness ln2 / (pi/2)^2 the pixels at the seam read 0.5.
        let flow = FlowField::from_fn(8, 8, |x, _| {
            if x < 4 {
                [1.0, 0.0]
            } else {
                [0.0, 1.0]
            }
        })
        .unwrap();
        let quarter = std::f64::consts::FRAC_PI_2;
        let steep = std::f64::consts::LN_2 / (quarter * quarter);
        let b = direction_difference(&flow, steep);
        assert!((b[4 * 8 + 3] - 0.5).abs() < 1e-12);
        assert!((b[4 * 8 + 4] - 0.5).abs() < 1e-12);
        assert_eq!(b[4 * 8 + 1], 0.0);
    }

    #[test]
    fn direction_difference_reversed_vector() {
        let mut vectors = vec![[1.0f32, 0.0]; 25];
        vectors[2 * 5 + 2] = [-1.0, 0.0];
        let flow = FlowField::new(5, 5, vectors).unwrap();
        let steep = 0.3;
        let b = direction_difference(&flow, steep);
        let pi = std::f64::consts::PI;
        let expected = 1.0 - (-steep * pi * pi).exp();
        assert!((b[2 * 5 + 2] - expected).abs() < 1e-9);
    }

    #[test]
    fn direction_difference_ignores_static_vectors() {
        let mut vectors = vec![[0.0f32, 0.0]; 25];
        vectors[12] = [1.0, 0.0];
        let flow = FlowField::new(5, 5, vectors).unwrap();
        let b = direction_difference(&flow, 10.0);
        assert!(b.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn boundary_probability_branches() {
        let p = boundary_probability(&[0.8, 0.4, 0.5], &[0.9, 0.5, 0.6], 0.5);
        assert_eq!(p[0], 0.8); // above rho: gradient response alone
        assert!((p[1] - 0.2).abs() < 1e-15); // product branch
        assert!((p[2] - 0.3).abs() < 1e-15); // exactly rho takes the product
    }

    #[test]
    fn binarize_is_strict() {
        let mask = binarize_boundary(&[0.4, 0.6, 0.5], 3, 1, 0.5);
        assert_eq!(mask.values(), &[false, true, false]);
    }

    fn hollow_rect(w: usize, h: usize, x0: usize, y0: usize, x1: usize, y1: usize) -> BinaryMask {
        BinaryMask::from_fn(w, h, |x, y| {
            let on_edge = (x == x0 || x == x1) && (y0..=y1).contains(&y)
                || (y == y0 || y == y1) && (x0..=x1).contains(&x);
            on_edge
        })
    }

    #[test]
    fn inside_outside_rectangle() {
        let boundary = hollow_rect(32, 32, 8, 8, 24, 24);
        let inside = inside_outside_map(&boundary);
        assert!(inside.get(16, 16), "center must be inside");
        assert!(inside.get(8, 16), "boundary pixels count as inside");
        assert!(!inside.get(2, 2), "far corner is outside");
        assert!(!inside.get(30, 3), "outside the box");
    }

    #[test]
    fn inside_outside_empty_boundary_is_all_zero() {
        let boundary = BinaryMask::filled(16, 16, false);
        let inside = inside_outside_map(&boundary);
        assert_eq!(inside.count_ones(), 0);
    }

    #[test]
    fn inside_outside_thick_boundary_counts_runs_once() {
        // Two-pixel thick walls still enclose the interior.
        let boundary = BinaryMask::from_fn(32, 32, |x, y| {
            let in_outer = (6..=25).contains(&x) && (6..=25).contains(&y);
            let in_inner = (8..=23).contains(&x) && (8..=23).contains(&y);
            in_outer && !in_inner
        });
        let inside = inside_outside_map(&boundary);
        assert!(inside.get(16, 16));
        assert!(!inside.get(2, 16));
    }

    /// Even-odd point-in-polygon test at integer pixel coordinates.
    fn polygon_contains(poly: &[(f64, f64)], px: f64, py: f64) -> bool {
        let mut inside = false;
        let n = poly.len();
        for i in 0..n {
            let (x1, y1) = poly[i];
            let (x2, y2) = poly[(i + 1) % n];
            if (y1 > py) != (y2 > py) {
                let t = (py - y1) / (y2 - y1);
                let xc = x1 + t * (x2 - x1);
                if px < xc {
                    inside = !inside;
                }
            }
        }
        inside
    }

    fn draw_segment(mask: &mut BinaryMask, a: (f64, f64), b: (f64, f64)) {
        let steps = ((b.0 - a.0).abs().max((b.1 - a.1).abs()).ceil() as usize).max(1) * 2;
        for s in 0..=steps {
            let t = s as f64 / steps as f64;
            let x = (a.0 + t * (b.0 - a.0)).round() as isize;
            let y = (a.1 + t * (b.1 - a.1)).round() as isize;
            if x >= 0 && y >= 0 && (x as usize) < mask.width() && (y as usize) < mask.height() {
                mask.set(x as usize, y as usize, true);
            }
        }
    }

    fn rasterize_polygon(poly: &[(f64, f64)], w: usize, h: usize) -> BinaryMask {
        let mut mask = BinaryMask::filled(w, h, false);
        for i in 0..poly.len() {
            draw_segment(&mut mask, poly[i], poly[(i + 1) % poly.len()]);
        }
        mask
    }

    #[test]
    fn inside_outside_concave_shape_matches_fill_oracle() {
        // U shape: concave polygon.
        let poly: Vec<(f64, f64)> = vec![
            (8.0, 8.0),
            (40.0, 8.0),
            (40.0, 40.0),
            (30.0, 40.0),
            (30.0, 18.0),
            (18.0, 18.0),
            (18.0, 40.0),
            (8.0, 40.0),
        ];
        let boundary = rasterize_polygon(&poly, 48, 48);
        let inside = inside_outside_map(&boundary);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut agree = 0;
        let total = 100;
        for _ in 0..total {
            let x = rng.random_range(0..48usize);
            let y = rng.random_range(0..48usize);
            let oracle = boundary.get(x, y) || polygon_contains(&poly, x as f64, y as f64);
            if oracle == inside.get(x, y) {
                agree += 1;
            }
        }
        assert!(agree * 100 >= total * 99, "agreement {agree}/{total}");
    }

    fn brute_force_distance(mask: &BinaryMask, x: usize, y: usize) -> f64 {
        let mut best = f64::INFINITY;
        for my in 0..mask.height() {
            for mx in 0..mask.width() {
                if mask.get(mx, my) {
                    let dx = mx as f64 - x as f64;
                    let dy = my as f64 - y as f64;
                    best = best.min((dx * dx + dy * dy).sqrt());
                }
            }
        }
        best
    }

    #[test]
    fn distance_transform_geometry() {
        let mut mask = BinaryMask::filled(9, 9, false);
        mask.set(4, 4, true);
        let dt = distance_transform(&mask).unwrap();
        assert_eq!(dt.at(4, 4), 0.0);
        assert_eq!(dt.at(5, 4), 1.0);
        assert!((dt.at(5, 5) - 2.0f64.sqrt()).abs() < 1e-12);
        assert!((dt.at(0, 0) - 32.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn distance_transform_rejects_empty_mask() {
        assert!(distance_transform(&BinaryMask::filled(8, 8, false)).is_err());
    }

    #[test]
    fn distance_transform_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..50 {
            let density = rng.random_range(0.01..0.3);
            let mut mask = BinaryMask::from_fn(32, 32, |_, _| rng.random_bool(density));
            if mask.count_ones() == 0 {
                mask.set(rng.random_range(0..32), rng.random_range(0..32), true);
            }
            let dt = distance_transform(&mask).unwrap();
            for y in 0..32 {
                for x in 0..32 {
                    let brute = brute_force_distance(&mask, x, y);
                    assert!(
                        (dt.at(x, y) - brute).abs() <= 1e-9,
                        "mismatch at ({x},{y}): {} vs {}",
                        dt.at(x, y),
                        brute
                    );
                }
            }
        }
    }

    proptest! {
        #[test]
        fn boundary_grids_stay_in_unit_interval(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let flow = FlowField::from_fn(12, 12, |_, _| {
                [rng.random_range(-30.0f32..30.0), rng.random_range(-30.0f32..30.0)]
            }).unwrap();
            let map = motion_boundary_map(&flow, 2.0, 2.0, 0.5);
            for v in map.b_m.iter().chain(&map.b_theta).chain(&map.p) {
                prop_assert!((0.0..=1.0).contains(v));
            }
        }

        #[test]
        fn distance_transform_is_lipschitz(seed in 0u64..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut mask = BinaryMask::from_fn(16, 16, |_, _| rng.random_bool(0.1));
            if mask.count_ones() == 0 {
                mask.set(3, 3, true);
            }
            let dt = distance_transform(&mask).unwrap();
            let root2 = 2.0f64.sqrt();
            for y in 0..16usize {
                for x in 0..16usize {
                    if x + 1 < 16 {
                        prop_assert!((dt.at(x, y) - dt.at(x + 1, y)).abs() <= 1.0 + 1e-12);
                    }
                    if y + 1 < 16 && x + 1 < 16 {
                        prop_assert!((dt.at(x, y) - dt.at(x + 1, y + 1)).abs() <= root2 + 1e-12);
                    }
                }
            }
        }
    }
}
