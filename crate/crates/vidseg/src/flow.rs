//! Dense optical flow between consecutive frames.
//!
//! Coarse-to-fine Horn–Schunck with bilinear warping and replicate-edge
//! sampling. The solver runs on 0–255 luma so conventional smoothness
//! weights keep their usual meaning. It is deterministic: identical inputs
//! and parameters produce identical flow bit for bit.

use std::path::Path;

use crate::io;
use crate::types::{FlowField, Frame};
use crate::{Error, Result};

/// Re-linearize (re-warp) after this many relaxation sweeps.
const RELINEARIZE_EVERY: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowParams {
    pub smoothness_weight: f64,
    pub iterations: usize,
    pub pyramid_levels: usize,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            smoothness_weight: 15.0,
            iterations: 100,
            pyramid_levels: 3,
        }
    }
}

impl FlowParams {
    fn validate(&self) -> Result<()> {
        if !(self.smoothness_weight > 0.0) {
            return Err(Error::invalid("flow smoothness_weight must be > 0"));
        }
        if self.iterations < 1 || self.pyramid_levels < 1 {
            return Err(Error::invalid(
                "flow iterations and pyramid_levels must be >= 1",
            ));
        }
        Ok(())
    }
}

#[derive(Clone)]
struct Buf {
    w: usize,
    h: usize,
    d: Vec<f64>,
}

impl Buf {
    fn zeros(w: usize, h: usize) -> Self {
        Self {
            w,
            h,
            d: vec![0.0; w * h],
        }
    }

    #[inline]
    fn at(&self, x: usize, y: usize) -> f64 {
        self.d[y * self.w + x]
    }

    #[inline]
    fn at_clamped(&self, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.w as isize - 1) as usize;
        let y = y.clamp(0, self.h as isize - 1) as usize;
        self.at(x, y)
    }

    /// Bilinear sample with replicate-edge behavior outside the grid.
    fn sample(&self, x: f64, y: f64) -> f64 {
        let x = x.clamp(0.0, (self.w - 1) as f64);
        let y = y.clamp(0.0, (self.h - 1) as f64);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.w - 1);
        let y1 = (y0 + 1).min(self.h - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let top = self.at(x0, y0) * (1.0 - fx) + self.at(x1, y0) * fx;
        let bot = self.at(x0, y1) * (1.0 - fx) + self.at(x1, y1) * fx;
        top * (1.0 - fy) + bot * fy
    }
}

/// 0–255 luma (0.299 R + 0.587 G + 0.114 B).
fn luminance(frame: &Frame) -> Buf {
    let mut buf = Buf::zeros(frame.width(), frame.height());
    for (i, [r, g, b]) in frame.pixels().iter().enumerate() {
        buf.d[i] = 255.0 * (0.299 * r + 0.587 * g + 0.114 * b);
    }
    buf
}

/// 3x3 binomial smoothing followed by factor-2 decimation.
fn downsample(src: &Buf) -> Buf {
    let mut smooth = Buf::zeros(src.w, src.h);
    for y in 0..src.h {
        for x in 0..src.w {
            let mut acc = 0.0;
            for (dy, wy) in [(-1i64, 1.0), (0, 2.0), (1, 1.0)] {
                for (dx, wx) in [(-1i64, 1.0), (0, 2.0), (1, 1.0)] {
                    acc += wy * wx * src.at_clamped(x as isize + dx as isize, y as isize + dy as isize);
                }
            }
            smooth.d[y * src.w + x] = acc / 16.0;
        }
    }
    let w2 = (src.w / 2).max(1);
    let h2 = (src.h / 2).max(1);
    let mut out = Buf::zeros(w2, h2);
    for y in 0..h2 {
        for x in 0..w2 {
            out.d[y * w2 + x] = smooth.at(x * 2, y * 2);
        }
    }
    out
}

/// Bilinear resize of a flow component to a finer grid, doubling magnitudes.
fn upsample_flow(src: &Buf, w: usize, h: usize) -> Buf {
    let mut out = Buf::zeros(w, h);
    let sx = if w > 1 { (src.w - 1) as f64 / (w - 1) as f64 } else { 0.0 };
    let sy = if h > 1 { (src.h - 1) as f64 / (h - 1) as f64 } else { 0.0 };
    for y in 0..h {
        for x in 0..w {
            out.d[y * w + x] = 2.0 * src.sample(x as f64 * sx, y as f64 * sy);
        }
    }
    out
}

/// Classic Horn–Schunck neighbor average: 1/6 on the 4-neighbors, 1/12 on
/// the diagonals, replicate borders.
fn neighbor_average(f: &Buf, x: usize, y: usize) -> f64 {
    let (xi, yi) = (x as isize, y as isize);
    let edge = f.at_clamped(xi - 1, yi)
        + f.at_clamped(xi + 1, yi)
        + f.at_clamped(xi, yi - 1)
        + f.at_clamped(xi, yi + 1);
    let diag = f.at_clamped(xi - 1, yi - 1)
        + f.at_clamped(xi + 1, yi - 1)
        + f.at_clamped(xi - 1, yi + 1)
        + f.at_clamped(xi + 1, yi + 1);
    edge / 6.0 + diag / 12.0
}

fn refine_level(a: &Buf, b: &Buf, u: &mut Buf, v: &mut Buf, alpha2: f64, sweeps: usize) {
    let (w, h) = (a.w, a.h);
    let n = w * h;
    let mut remaining = sweeps;
    let mut ix = vec![0.0; n];
    let mut iy = vec![0.0; n];
    let mut cterm = vec![0.0; n];
    let mut nu = Buf::zeros(w, h);
    let mut nv = Buf::zeros(w, h);
    while remaining > 0 {
        let block = remaining.min(RELINEARIZE_EVERY);
        remaining -= block;
        // Warp b by the current flow and linearize around it.
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let warped = |xx: isize, yy: isize| -> f64 {
                    let xx = xx.clamp(0, w as isize - 1) as usize;
                    let yy = yy.clamp(0, h as isize - 1) as usize;
                    let j = yy * w + xx;
                    b.sample(xx as f64 + u.d[j], yy as f64 + v.d[j])
                };
                let here = warped(x as isize, y as isize);
                let gx = 0.5
                    * ((warped(x as isize + 1, y as isize) + a.at_clamped(x as isize + 1, y as isize))
                        - (warped(x as isize - 1, y as isize)
                            + a.at_clamped(x as isize - 1, y as isize)))
                    / 2.0;
                let gy = 0.5
                    * ((warped(x as isize, y as isize + 1) + a.at_clamped(x as isize, y as isize + 1))
                        - (warped(x as isize, y as isize - 1)
                            + a.at_clamped(x as isize, y as isize - 1)))
                    / 2.0;
                let it = here - a.at(x, y);
                ix[i] = gx;
                iy[i] = gy;
                // Residual is Ix*u' + Iy*v' + c for the full flow (u', v').
                cterm[i] = it - gx * u.d[i] - gy * v.d[i];
            }
        }
        for _ in 0..block {
            for y in 0..h {
                for x in 0..w {
                    let i = y * w + x;
                    let ubar = neighbor_average(u, x, y);
                    let vbar = neighbor_average(v, x, y);
                    let denom = alpha2 + ix[i] * ix[i] + iy[i] * iy[i];
                    let shared = (ix[i] * ubar + iy[i] * vbar + cterm[i]) / denom;
                    nu.d[i] = ubar - ix[i] * shared;
                    nv.d[i] = vbar - iy[i] * shared;
                }
            }
            std::mem::swap(u, &mut nu);
            std::mem::swap(v, &mut nv);
        }
    }
}

/// Estimates dense flow from `frame_a` to `frame_b`.
pub fn estimate_flow(frame_a: &Frame, frame_b: &Frame, params: &FlowParams) -> Result<FlowField> {
    params.validate()?;
    if frame_a.width() != frame_b.width() || frame_a.height() != frame_b.height() {
        return Err(Error::invalid(format!(
            "flow frame dimension mismatch: {}x{} vs {}x{}",
            frame_a.width(),
            frame_a.height(),
            frame_b.width(),
            frame_b.height()
        )));
    }
    let alpha2 = params.smoothness_weight * params.smoothness_weight;
    let mut pyr_a = vec![luminance(frame_a)];
    let mut pyr_b = vec![luminance(frame_b)];
    for _ in 1..params.pyramid_levels {
        let next_a = downsample(pyr_a.last().unwrap());
        if next_a.w < 8 || next_a.h < 8 {
            break;
        }
        pyr_b.push(downsample(pyr_b.last().unwrap()));
        pyr_a.push(next_a);
    }

    let coarsest = pyr_a.len() - 1;
    let mut u = Buf::zeros(pyr_a[coarsest].w, pyr_a[coarsest].h);
    let mut v = Buf::zeros(pyr_a[coarsest].w, pyr_a[coarsest].h);
    for level in (0..pyr_a.len()).rev() {
        if level != coarsest {
            u = upsample_flow(&u, pyr_a[level].w, pyr_a[level].h);
            v = upsample_flow(&v, pyr_a[level].w, pyr_a[level].h);
        }
        refine_level(
            &pyr_a[level],
            &pyr_b[level],
            &mut u,
            &mut v,
            alpha2,
            params.iterations,
        );
    }

    FlowField::from_fn(frame_a.width(), frame_a.height(), |x, y| {
        [u.at(x, y) as f32, v.at(x, y) as f32]
    })
}

/// Returns one flow field per consecutive frame pair. Precomputed `.flo`
/// files are used verbatim when `flow_dir` is given; a partially populated
/// directory is an error, never a silent fallback to estimation.
pub fn resolve_flows(
    frames: &[Frame],
    flow_dir: Option<&Path>,
    params: &FlowParams,
) -> Result<Vec<FlowField>> {
    if frames.len() < 2 {
        return Err(Error::invalid("need >= 2 frames to resolve flows"));
    }
    let needed = frames.len() - 1;
    match flow_dir {
        Some(dir) => {
            let files = io::numbered_files(dir, &["flo"])?;
            if files.len() < needed {
                let k = files.len();
                return Err(Error::invalid(format!(
                    "missing flow for pair ({}, {}): {} has {} of {} files",
                    k + 1,
                    k + 2,
                    dir.display(),
                    k,
                    needed
                )));
            }
            if files.len() > needed {
                return Err(Error::invalid(format!(
                    "expected {needed} flow files in {}, found {}",
                    dir.display(),
                    files.len()
                )));
            }
            let mut flows = Vec::with_capacity(needed);
            for (i, (_, path)) in files.iter().enumerate() {
                let flow = io::read_flo(path)?;
                if flow.width() != frames[i].width() || flow.height() != frames[i].height() {
                    return Err(Error::invalid(format!(
                        "{}: flow is {}x{} but frame pair ({}, {}) is {}x{}",
                        path.display(),
                        flow.width(),
                        flow.height(),
                        i + 1,
                        i + 2,
                        frames[i].width(),
                        frames[i].height()
                    )));
                }
                flows.push(flow);
            }
            Ok(flows)
        }
        None => (0..needed)
            .map(|i| estimate_flow(&frames[i], &frames[i + 1], params))
            .collect(),
    }
}
