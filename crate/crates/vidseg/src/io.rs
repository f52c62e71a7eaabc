//! Sequence, flow-file and mask IO plus run configuration.
//!
//! Frames are 8-bit PNG or binary PPM, converted to `[0, 1]` reals by
//! dividing by 255. Flow files use the common little-endian `.flo` layout:
//! a 4-byte float sentinel `202021.25`, 32-bit width and height, then
//! `width*height` interleaved `(u, v)` 32-bit floats in row order. Masks
//! are written as 8-bit single-channel PNG with 0 = background and
//! 255 = foreground.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::types::{BinaryMask, FlowField, Frame};
use crate::{Error, Result};

const FLO_MAGIC: f32 = 202021.25;
const MAX_FLO_DIM: usize = 1 << 16;

/// Lists files in `dir` whose extension matches one of `extensions`
/// (case-insensitive) and whose stem contains digits, sorted by the numeric
/// value of the last digit run in the stem (then by name). Lexicographic
/// ordering alone would put 10 before 2, so it is never used.
pub(crate) fn numbered_files(dir: &Path, extensions: &[&str]) -> Result<Vec<(u64, PathBuf)>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if !path.is_file() {
            continue;
        }
        let ext_ok = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| extensions.iter().any(|x| e.eq_ignore_ascii_case(x)))
            .unwrap_or(false);
        if !ext_ok {
            continue;
        }
        let stem = match path.file_stem().and_then(|s| s.to_str()) {
            Some(s) => s.to_string(),
            None => continue,
        };
        if let Some(index) = last_digit_run(&stem) {
            files.push((index, path));
        }
    }
    files.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    Ok(files)
}

fn last_digit_run(stem: &str) -> Option<u64> {
    let bytes = stem.as_bytes();
    let end = bytes.iter().rposition(|b| b.is_ascii_digit())? + 1;
    let start = bytes[..end]
        .iter()
        .rposition(|b| !b.is_ascii_digit())
        .map(|p| p + 1)
        .unwrap_or(0);
    stem[start..end].parse().ok()
}

/// Loads every numbered PNG/PPM in `dir` in ascending numeric order.
///
/// Needs at least two frames of identical dimensions.
pub fn load_frame_sequence(dir: &Path) -> Result<Vec<Frame>> {
    let files = numbered_files(dir, &["png", "ppm", "pnm"])?;
    if files.len() < 2 {
        return Err(Error::invalid(format!(
            "need >= 2 frames, found {} in {}",
            files.len(),
            dir.display()
        )));
    }
    let mut frames = Vec::with_capacity(files.len());
    let mut first_path: Option<&PathBuf> = None;
    for (_, path) in &files {
        let frame = load_frame(path)?;
        if let Some(prev) = frames.last() {
            let prev: &Frame = prev;
            if prev.width() != frame.width() || prev.height() != frame.height() {
                return Err(Error::invalid(format!(
                    "dimension mismatch: {} is {}x{} but {} is {}x{}",
                    first_path.unwrap().display(),
                    prev.width(),
                    prev.height(),
                    path.display(),
                    frame.width(),
                    frame.height()
                )));
            }
        } else {
            first_path = Some(path);
        }
        frames.push(frame);
    }
    Ok(frames)
}

pub fn load_frame(path: &Path) -> Result<Frame> {
    let img = image::open(path).map_err(|e| Error::image(path, e))?;
    let rgb = img.to_rgb8();
    let (w, h) = rgb.dimensions();
    let pixels = rgb
        .pixels()
        .map(|p| {
            [
                p.0[0] as f64 / 255.0,
                p.0[1] as f64 / 255.0,
                p.0[2] as f64 / 255.0,
            ]
        })
        .collect();
    Frame::new(w as usize, h as usize, pixels)
}

pub fn write_frame(frame: &Frame, path: &Path) -> Result<()> {
    let (w, h) = (frame.width(), frame.height());
    let raw: Vec<u8> = frame
        .pixels()
        .iter()
        .flat_map(|p| p.iter().map(|c| (c * 255.0).round() as u8))
        .collect();
    let buf = image::RgbImage::from_raw(w as u32, h as u32, raw)
        .expect("raw buffer sized from frame dimensions");
    buf.save(path).map_err(|e| Error::image(path, e))
}

/// Reads a Middlebury-layout `.flo` file.
pub fn read_flo(path: &Path) -> Result<FlowField> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let magic = reader
        .read_f32::<LittleEndian>()
        .map_err(|e| Error::io(path, e))?;
    if magic != FLO_MAGIC {
        return Err(Error::invalid(format!(
            "{}: bad magic {magic}, expected {FLO_MAGIC}",
            path.display()
        )));
    }
    let width = reader
        .read_i32::<LittleEndian>()
        .map_err(|e| Error::io(path, e))?;
    let height = reader
        .read_i32::<LittleEndian>()
        .map_err(|e| Error::io(path, e))?;
    if width <= 0 || height <= 0 || width as usize > MAX_FLO_DIM || height as usize > MAX_FLO_DIM {
        return Err(Error::invalid(format!(
            "{}: implausible flow dimensions {width}x{height}",
            path.display()
        )));
    }
    let (width, height) = (width as usize, height as usize);
    let mut raw = vec![0u8; width * height * 2 * 4];
    reader.read_exact(&mut raw).map_err(|_| {
        Error::invalid(format!(
            "{}: truncated payload, expected {} flow vectors",
            path.display(),
            width * height
        ))
    })?;
    let mut vectors = Vec::with_capacity(width * height);
    for chunk in raw.chunks_exact(8) {
        let u = f32::from_le_bytes(chunk[0..4].try_into().unwrap());
        let v = f32::from_le_bytes(chunk[4..8].try_into().unwrap());
        if !u.is_finite() || !v.is_finite() {
            return Err(Error::invalid(format!(
                "{}: non-finite flow component",
                path.display()
            )));
        }
        vectors.push([u, v]);
    }
    FlowField::new(width, height, vectors)
}

pub fn write_flo(flow: &FlowField, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    writer
        .write_f32::<LittleEndian>(FLO_MAGIC)
        .and_then(|_| writer.write_i32::<LittleEndian>(flow.width() as i32))
        .and_then(|_| writer.write_i32::<LittleEndian>(flow.height() as i32))
        .map_err(|e| Error::io(path, e))?;
    for [u, v] in flow.vectors() {
        writer
            .write_f32::<LittleEndian>(*u)
            .and_then(|_| writer.write_f32::<LittleEndian>(*v))
            .map_err(|e| Error::io(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Writes a mask as 8-bit single-channel PNG, 0 background / 255 foreground.
pub fn write_mask(mask: &BinaryMask, path: &Path) -> Result<()> {
    let raw: Vec<u8> = mask.values().iter().map(|v| if *v { 255 } else { 0 }).collect();
    let buf = image::GrayImage::from_raw(mask.width() as u32, mask.height() as u32, raw)
        .expect("raw buffer sized from mask dimensions");
    buf.save(path).map_err(|e| Error::image(path, e))
}

/// Reads a mask written by [`write_mask`]; any luma above 127 counts as
/// foreground.
pub fn read_mask(path: &Path) -> Result<BinaryMask> {
    let img = image::open(path).map_err(|e| Error::image(path, e))?;
    let gray = img.to_luma8();
    let (w, h) = gray.dimensions();
    let values = gray.pixels().map(|p| p.0[0] > 127).collect();
    BinaryMask::new(w as usize, h as usize, values)
}

/// Reads every numbered mask PNG in a directory, returning `(number, mask)`
/// pairs in ascending numeric order.
pub fn load_mask_sequence(dir: &Path) -> Result<Vec<(u64, BinaryMask)>> {
    let files = numbered_files(dir, &["png"])?;
    if files.is_empty() {
        return Err(Error::invalid(format!(
            "no mask files found in {}",
            dir.display()
        )));
    }
    files
        .into_iter()
        .map(|(n, path)| read_mask(&path).map(|m| (n, m)))
        .collect()
}

/// Grayscale debug dump of values in `[0, 1]`.
pub fn write_grayscale(values: &[f64], width: usize, height: usize, path: &Path) -> Result<()> {
    assert_eq!(values.len(), width * height);
    let raw: Vec<u8> = values
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let buf = image::GrayImage::from_raw(width as u32, height as u32, raw)
        .expect("raw buffer sized from dimensions");
    buf.save(path).map_err(|e| Error::image(path, e))
}

/// 16-bit label-map debug dump.
pub fn write_labels(labels: &[u32], width: usize, height: usize, path: &Path) -> Result<()> {
    assert_eq!(labels.len(), width * height);
    let raw: Vec<u16> = labels.iter().map(|l| (*l).min(u16::MAX as u32) as u16).collect();
    let buf =
        image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::from_raw(width as u32, height as u32, raw)
            .expect("raw buffer sized from dimensions");
    buf.save(path).map_err(|e| Error::image(path, e))
}

/// Nearest-neighbor search strategy for the nonlocal appearance stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnnMode {
    Exact,
    Approximate,
}

/// Every tunable of the pipeline with its validated range.
///
/// This table is the single source of truth for defaults; tests and the
/// CLI both read from here.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineParams {
    /// Motion-boundary branch threshold, in (0, 1).
    pub rho: f64,
    /// Steepness of the flow-gradient boundary response, > 0.
    pub lambda_m: f64,
    /// Steepness of the flow-direction boundary response, > 0.
    pub lambda_theta: f64,
    /// Binarization threshold for the boundary probability, in (0, 1).
    pub boundary_threshold: f64,
    /// Temporal search window in frames (the config key is `F`), >= 1.
    pub temporal_window: usize,
    /// Blend between a superpixel's own appearance (weight `beta`) and its
    /// fused nonlocal appearance, in [0, 1].
    pub beta: f64,
    /// Appearance-distance falloff in the pairwise potentials, > 0.
    pub alpha: f64,
    /// Spatial smoothness weight, >= 0.
    pub gamma1: f64,
    /// Temporal smoothness weight, >= 0.
    pub gamma2: f64,
    /// Weight of the location term inside the unary potential, >= 0.
    pub eta: f64,
    /// Location falloff scale as a fraction of max(width, height), > 0.
    pub sigma_l_factor: f64,
    /// Mixture components per color model, >= 1.
    pub gmm_components: usize,
    /// Target superpixels per frame; `None` picks 100 for frames under
    /// 200x200 px and 1500 otherwise.
    pub superpixels_per_frame: Option<usize>,
    /// SLIC compactness on the [0, 1] color scale, > 0.
    pub slic_compactness: f64,
    /// SLIC assignment/update iterations, >= 1.
    pub slic_iterations: usize,
    /// Outer GMM-refit/min-cut iterations, >= 1.
    pub outer_iterations: usize,
    /// Seed for every randomized stage.
    pub random_seed: u64,
    /// Flow solver regularization, > 0.
    pub flow_smoothness: f64,
    /// Flow relaxation sweeps per pyramid level, >= 1.
    pub flow_iterations: usize,
    /// Flow pyramid levels, >= 1.
    pub flow_pyramid_levels: usize,
    /// Exact or budgeted nearest-neighbor search.
    pub ann_mode: AnnMode,
    /// Leaf-visit budget in approximate mode, >= 1.
    pub ann_leaf_visits: usize,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            rho: 0.5,
            lambda_m: 2.0,
            lambda_theta: 2.0,
            boundary_threshold: 0.5,
            temporal_window: 5,
            beta: 0.7,
            alpha: 5.0,
            gamma1: 2.0,
            gamma2: 2.0,
            eta: 1.0,
            sigma_l_factor: 0.2,
            gmm_components: 5,
            superpixels_per_frame: None,
            slic_compactness: 10.0,
            slic_iterations: 10,
            outer_iterations: 4,
            random_seed: 42,
            flow_smoothness: 15.0,
            flow_iterations: 100,
            flow_pyramid_levels: 3,
            ann_mode: AnnMode::Exact,
            ann_leaf_visits: 64,
        }
    }
}

impl PipelineParams {
    /// Superpixel target for a frame of the given size.
    pub fn superpixel_target(&self, width: usize, height: usize) -> usize {
        self.superpixels_per_frame
            .unwrap_or(if width * height < 200 * 200 { 100 } else { 1500 })
    }

    /// Location falloff in pixels for a frame of the given size.
    pub fn sigma_l(&self, width: usize, height: usize) -> f64 {
        self.sigma_l_factor * width.max(height) as f64
    }

    pub fn validate(&self) -> Result<()> {
        fn open01(key: &str, v: f64) -> Result<()> {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::config(format!("{key} = {v} outside (0, 1)")))
            }
        }
        fn positive(key: &str, v: f64) -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("{key} = {v} must be > 0")))
            }
        }
        fn non_negative(key: &str, v: f64) -> Result<()> {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("{key} = {v} must be >= 0")))
            }
        }
        fn at_least_one(key: &str, v: usize) -> Result<()> {
            if v >= 1 {
                Ok(())
            } else {
                Err(Error::config(format!("{key} = {v} must be >= 1")))
            }
        }

        open01("rho", self.rho)?;
        positive("lambda_m", self.lambda_m)?;
        positive("lambda_theta", self.lambda_theta)?;
        open01("boundary_threshold", self.boundary_threshold)?;
        at_least_one("F", self.temporal_window)?;
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::config(format!(
                "beta = {} outside [0, 1]",
                self.beta
            )));
        }
        positive("alpha", self.alpha)?;
        non_negative("gamma1", self.gamma1)?;
        non_negative("gamma2", self.gamma2)?;
        non_negative("eta", self.eta)?;
        positive("sigma_l_factor", self.sigma_l_factor)?;
        at_least_one("gmm_components", self.gmm_components)?;
        if let Some(k) = self.superpixels_per_frame {
            at_least_one("superpixels_per_frame", k)?;
        }
        positive("slic_compactness", self.slic_compactness)?;
        at_least_one("slic_iterations", self.slic_iterations)?;
        at_least_one("outer_iterations", self.outer_iterations)?;
        positive("flow_smoothness", self.flow_smoothness)?;
        at_least_one("flow_iterations", self.flow_iterations)?;
        at_least_one("flow_pyramid_levels", self.flow_pyramid_levels)?;
        at_least_one("ann_leaf_visits", self.ann_leaf_visits)?;
        Ok(())
    }
}

/// Parses a flat `key = value` configuration file. `#` starts a comment,
/// missing keys keep their defaults, unknown keys are rejected.
pub fn load_config(path: &Path) -> Result<PipelineParams> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<PipelineParams> {
    let mut params = PipelineParams::default();
    for (line_no, raw_line) in text.lines().enumerate() {
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::config(format!("line {}: expected `key = value`", line_no + 1))
        })?;
        let (key, value) = (key.trim(), value.trim());
        apply_key(&mut params, key, value)?;
    }
    params.validate()?;
    Ok(params)
}

fn apply_key(params: &mut PipelineParams, key: &str, value: &str) -> Result<()> {
    fn real(key: &str, value: &str) -> Result<f64> {
        value
            .parse()
            .map_err(|_| Error::config(format!("{key} = {value} is not a number")))
    }
    fn integer(key: &str, value: &str) -> Result<usize> {
        value
            .parse()
            .map_err(|_| Error::config(format!("{key} = {value} is not a non-negative integer")))
    }

    match key {
        "rho" => params.rho = real(key, value)?,
        "lambda_m" => params.lambda_m = real(key, value)?,
        "lambda_theta" => params.lambda_theta = real(key, value)?,
        "boundary_threshold" => params.boundary_threshold = real(key, value)?,
        "F" => params.temporal_window = integer(key, value)?,
        "beta" => params.beta = real(key, value)?,
        "alpha" => params.alpha = real(key, value)?,
        "gamma1" => params.gamma1 = real(key, value)?,
        "gamma2" => params.gamma2 = real(key, value)?,
        "eta" => params.eta = real(key, value)?,
        "sigma_l_factor" => params.sigma_l_factor = real(key, value)?,
        "gmm_components" => params.gmm_components = integer(key, value)?,
        "superpixels_per_frame" => {
            params.superpixels_per_frame = if value.eq_ignore_ascii_case("auto") {
                None
            } else {
                Some(integer(key, value)?)
            }
        }
        "slic_compactness" => params.slic_compactness = real(key, value)?,
        "slic_iterations" => params.slic_iterations = integer(key, value)?,
        "outer_iterations" => params.outer_iterations = integer(key, value)?,
        "random_seed" => {
            params.random_seed = value
                .parse::<i64>()
                .map(|v| v as u64)
                .or_else(|_| value.parse::<u64>())
                .map_err(|_| Error::config(format!("random_seed = {value} is not an integer")))?
        }
        "flow_smoothness" => params.flow_smoothness = real(key, value)?,
        "flow_iterations" => params.flow_iterations = integer(key, value)?,
        "flow_pyramid_levels" => params.flow_pyramid_levels = integer(key, value)?,
        "ann_mode" => {
            params.ann_mode = match value.to_ascii_lowercase().as_str() {
                "exact" => AnnMode::Exact,
                "approx" | "approximate" => AnnMode::Approximate,
                _ => {
                    return Err(Error::config(format!(
                        "ann_mode = {value}, expected `exact` or `approx`"
                    )))
                }
            }
        }
        "ann_leaf_visits" => params.ann_leaf_visits = integer(key, value)?,
        _ => return Err(Error::config(format!("unknown key `{key}`"))),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_config_gives_defaults() {
        let params = parse_config("").unwrap();
        assert_eq!(params, PipelineParams::default());
        assert_eq!(params.rho, 0.5);
        assert_eq!(params.temporal_window, 5);
        assert_eq!(params.boundary_threshold, 0.5);
    }

    #[test]
    fn config_single_override() {
        let params = parse_config("F = 3\n").unwrap();
        assert_eq!(params.temporal_window, 3);
        let defaults = PipelineParams::default();
        assert_eq!(params.beta, defaults.beta);
        assert_eq!(params.rho, defaults.rho);
    }

    #[test]
    fn config_rejects_out_of_range_beta() {
        let err = parse_config("beta = 1.5\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("beta"), "message should name the key: {msg}");
        assert!(msg.contains("[0, 1]"), "message should name the range: {msg}");
    }

    #[test]
    fn config_rejects_unknown_key() {
        let err = parse_config("bogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("bogus"));
    }

    #[test]
    fn config_comments_and_auto() {
        let params = parse_config(
            "# full-line comment\nsuperpixels_per_frame = auto # trailing\nalpha = 3.5\n",
        )
        .unwrap();
        assert_eq!(params.superpixels_per_frame, None);
        assert_eq!(params.alpha, 3.5);
    }

    #[test]
    fn superpixel_target_tracks_frame_size() {
        let params = PipelineParams::default();
        assert_eq!(params.superpixel_target(64, 64), 100);
        assert_eq!(params.superpixel_target(320, 240), 1500);
        let fixed = PipelineParams {
            superpixels_per_frame: Some(42),
            ..PipelineParams::default()
        };
        assert_eq!(fixed.superpixel_target(320, 240), 42);
    }

    #[test]
    fn flo_rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.flo");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&0.0f32.to_le_bytes());
        bytes.extend_from_slice(&1i32.to_le_bytes());
        bytes.extend_from_slice(&1i32.to_le_bytes());
        bytes.extend_from_slice(&[0u8; 8]);
        std::fs::write(&path, bytes).unwrap();
        let err = read_flo(&path).unwrap_err();
        assert!(err.to_string().contains("bad magic"));
    }

    #[test]
    fn flo_rejects_truncated_payload() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("short.flo");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&202021.25f32.to_le_bytes());
        bytes.extend_from_slice(&2i32.to_le_bytes());
        bytes.extend_from_slice(&2i32.to_le_bytes());
        bytes.extend_from_slice(&[0u8; 12]); // needs 32
        std::fs::write(&path, bytes).unwrap();
        let err = read_flo(&path).unwrap_err();
        assert!(err.to_string().contains("truncated"));
    }

    #[test]
    fn flo_known_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("two.flo");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&202021.25f32.to_le_bytes());
        bytes.extend_from_slice(&2i32.to_le_bytes());
        bytes.extend_from_slice(&1i32.to_le_bytes());
        for v in [1.0f32, 0.0, 0.0, -1.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(&path, bytes).unwrap();
        let flow = read_flo(&path).unwrap();
        assert_eq!(flow.vector(0, 0), [1.0, 0.0]);
        assert_eq!(flow.vector(1, 0), [0.0, -1.0]);
    }

    #[test]
    fn mask_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for fill in [false, true] {
            let mask = BinaryMask::filled(9, 5, fill);
            let path = dir.path().join(format!("m{fill}.png"));
            write_mask(&mask, &path).unwrap();
            assert_eq!(read_mask(&path).unwrap(), mask);
        }
        let mut mask = BinaryMask::filled(16, 11, false);
        mask.set(3, 4, true);
        mask.set(15, 10, true);
        let path = dir.path().join("sparse.png");
        write_mask(&mask, &path).unwrap();
        assert_eq!(read_mask(&path).unwrap(), mask);
    }

    #[test]
    fn frame_sequence_orders_numerically() {
        let dir = tempfile::tempdir().unwrap();
        // 10 would sort before 2 lexicographically
        for n in [1u32, 2, 10] {
            let frame = Frame::from_fn(8, 8, |x, _| [(n as f64 / 10.0), x as f64 / 8.0, 0.0])
                .unwrap();
            write_frame(&frame, &dir.path().join(format!("{n:04}.png"))).unwrap();
        }
        std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let frames = load_frame_sequence(dir.path()).unwrap();
        assert_eq!(frames.len(), 3);
        let reds: Vec<u8> = frames
            .iter()
            .map(|f| (f.pixel(0, 0)[0] * 255.0).round() as u8)
            .collect();
        assert_eq!(
            reds,
            vec![
                (255.0 / 10.0_f64).round() as u8,
                (2.0 * 255.0 / 10.0_f64).round() as u8,
                255
            ]
        );
    }

    #[test]
    fn frame_sequence_needs_two() {
        let dir = tempfile::tempdir().unwrap();
        let frame = Frame::from_fn(8, 8, |_, _| [0.5; 3]).unwrap();
        write_frame(&frame, &dir.path().join("0001.png")).unwrap();
        let err = load_frame_sequence(dir.path()).unwrap_err();
        assert!(err.to_string().contains(">= 2 frames"));
    }

    #[test]
    fn frame_sequence_rejects_mixed_dimensions() {
        let dir = tempfile::tempdir().unwrap();
        write_frame(
            &Frame::from_fn(8, 8, |_, _| [0.5; 3]).unwrap(),
            &dir.path().join("0001.png"),
        )
        .unwrap();
        write_frame(
            &Frame::from_fn(16, 8, |_, _| [0.5; 3]).unwrap(),
            &dir.path().join("0002.png"),
        )
        .unwrap();
        let err = load_frame_sequence(dir.path()).unwrap_err();
        assert!(err.to_string().contains("dimension mismatch"));
    }

    proptest! {
        #[test]
        fn flo_round_trip_is_bit_exact(
            w in 1usize..12,
            h in 1usize..12,
            seed in 0u64..1000,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let flow = FlowField::from_fn(w, h, |_, _| {
                [rng.random_range(-50.0f32..50.0), rng.random_range(-50.0f32..50.0)]
            }).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("rt.flo");
            write_flo(&flow, &path).unwrap();
            let back = read_flo(&path).unwrap();
            prop_assert_eq!(flow, back);
        }
    }
}
