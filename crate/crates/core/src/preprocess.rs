//! Depth frame → normalised network input, label normalisation, and online
//! augmentation.

use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::camera::{cube_pixel_bounds, project, unproject, CubeCrop, Intrinsics, PixelBounds, Point3};
use crate::camera::DEFAULT_HALF_EXTENT_MM;
use crate::error::{Error, Result};
use crate::topology::JointSet;

/// Side length of the network input patch.
pub const PATCH_SIZE: usize = 96;

/// Depth band behind the nearest pixel that counts as hand.
pub const DEFAULT_FOREGROUND_BAND_MM: f64 = 200.0;

/// Normalised labels are clamped to this magnitude.
pub const LABEL_CLAMP: f64 = 1.5;

#[derive(Clone, Debug, PartialEq)]
pub struct DepthFrame {
    pub width: usize,
    pub height: usize,
    /// Row-major depth in mm; 0 marks a missing reading.
    pub depth: Vec<f32>,
    pub intrinsics: Intrinsics,
}

impl DepthFrame {
    pub fn new(width: usize, height: usize, depth: Vec<f32>, intrinsics: Intrinsics) -> Result<Self> {
        if depth.len() != width * height {
            return Err(Error::Contract(format!(
                "{} depth values for a {width}x{height} frame",
                depth.len()
            )));
        }
        if let Some(d) = depth.iter().find(|d| !d.is_finite() || **d < 0.0) {
            return Err(Error::InvalidDepth(f64::from(*d)));
        }
        intrinsics.validate()?;
        Ok(Self { width, height, depth, intrinsics })
    }

    pub fn blank(width: usize, height: usize, intrinsics: Intrinsics) -> Self {
        Self { width, height, depth: vec![0.0; width * height], intrinsics }
    }

    pub fn at(&self, u: usize, v: usize) -> f32 {
        self.depth[v * self.width + u]
    }

    /// Depth at the pixel nearest to `(u, v)`, `None` outside the image.
    pub fn nearest(&self, u: f64, v: f64) -> Option<f32> {
        let (ui, vi) = (u.round(), v.round());
        if ui < 0.0 || vi < 0.0 || ui >= self.width as f64 || vi >= self.height as f64 {
            return None;
        }
        Some(self.at(ui as usize, vi as usize))
    }
}

/// Centre of mass of the nearest depth band, wrapped in a default-size cube.
pub fn compute_com(frame: &DepthFrame) -> Result<CubeCrop> {
    compute_com_with(frame, DEFAULT_FOREGROUND_BAND_MM, DEFAULT_HALF_EXTENT_MM)
}

pub fn compute_com_with(frame: &DepthFrame, band_mm: f64, half_extent: f64) -> Result<CubeCrop> {
    let d_min = frame
        .depth
        .iter()
        .filter(|&&d| d > 0.0)
        .fold(f32::INFINITY, |a, &b| a.min(b));
    if !d_min.is_finite() {
        return Err(Error::NoHand);
    }
    let limit = f64::from(d_min) + band_mm;
    let mut sum = [0.0f64; 3];
    let mut n = 0usize;
    for v in 0..frame.height {
        for u in 0..frame.width {
            let d = f64::from(frame.at(u, v));
            if d > 0.0 && d <= limit {
                let p = unproject(u as f64, v as f64, d, &frame.intrinsics)?;
                for a in 0..3 {
                    sum[a] += p[a];
                }
                n += 1;
            }
        }
    }
    let center = sum.map(|s| s / n as f64);
    CubeCrop::new(center, [half_extent; 3])
}

/// 96x96 depth patch with values in `[-1, 1]`, background `+1`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedPatch {
    pub values: Vec<f64>,
    pub crop: CubeCrop,
}

impl NormalizedPatch {
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * PATCH_SIZE + col]
    }

    /// Writes the debug dump: centre and half extent as six `f64`, then the
    /// patch as `f32`, all little-endian.
    pub fn write_dump<W: Write>(&self, mut w: W) -> Result<()> {
        for x in self.crop.center.iter().chain(&self.crop.half_extent) {
            w.write_all(&x.to_le_bytes())?;
        }
        for &v in &self.values {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_dump<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0.0f64; 6];
        let mut b8 = [0u8; 8];
        for h in &mut header {
            r.read_exact(&mut b8)?;
            *h = f64::from_le_bytes(b8);
        }
        let mut values = Vec::with_capacity(PATCH_SIZE * PATCH_SIZE);
        let mut b4 = [0u8; 4];
        for _ in 0..PATCH_SIZE * PATCH_SIZE {
            r.read_exact(&mut b4)?;
            values.push(f64::from(f32::from_le_bytes(b4)));
        }
        let crop = CubeCrop::new([header[0], header[1], header[2]], [header[3], header[4], header[5]])?;
        Ok(Self { values, crop })
    }
}

/// Image coordinate sampled by patch cell `index` along an axis spanning
/// `[lo, hi]`.
fn cell_center(lo: f64, hi: f64, index: usize) -> f64 {
    lo + (index as f64 + 0.5) * (hi - lo) / PATCH_SIZE as f64
}

pub fn crop_normalize(frame: &DepthFrame, crop: &CubeCrop) -> Result<NormalizedPatch> {
    let b = cube_pixel_bounds(crop, &frame.intrinsics)?;
    let (w, h) = (frame.width as f64, frame.height as f64);
    if b.u_max < -0.5 || b.u_min >= w - 0.5 || b.v_max < -0.5 || b.v_min >= h - 0.5 {
        return Err(Error::EmptyCrop);
    }
    let cz = crop.center[2];
    let hz = crop.half_extent[2];
    let mut values = vec![1.0; PATCH_SIZE * PATCH_SIZE];
    for row in 0..PATCH_SIZE {
        let v = cell_center(b.v_min, b.v_max, row);
        for col in 0..PATCH_SIZE {
            let u = cell_center(b.u_min, b.u_max, col);
            let Some(d) = frame.nearest(u, v) else { continue };
            let d = f64::from(d);
            if d > 0.0 && d >= b.d_min && d <= b.d_max {
                values[row * PATCH_SIZE + col] = ((d - cz) / hz).clamp(-1.0, 1.0);
            }
        }
    }
    Ok(NormalizedPatch { values, crop: *crop })
}

/// Camera-space points recovered from the non-background cells of a patch.
/// Each cell is unprojected at its sampling position with its decoded depth.
pub fn reconstruct_points(patch: &NormalizedPatch, k: &Intrinsics) -> Result<Vec<(usize, Point3)>> {
    let b = cube_pixel_bounds(&patch.crop, k)?;
    let mut out = Vec::new();
    for (i, &val) in patch.values.iter().enumerate() {
        if val >= 1.0 {
            continue;
        }
        let (row, col) = (i / PATCH_SIZE, i % PATCH_SIZE);
        let d = patch.crop.center[2] + val * patch.crop.half_extent[2];
        let p = unproject(cell_center(b.u_min, b.u_max, col), cell_center(b.v_min, b.v_max, row), d, k)?;
        out.push((i, p));
    }
    Ok(out)
}

/// Per-axis `(p − center) / half_extent`, flattened to `3J` values.
/// Components beyond ±1.5 are clamped, with a warning.
pub fn normalize_labels(joints: &JointSet, crop: &CubeCrop) -> Vec<f64> {
    let mut clamped = 0usize;
    let out = joints
        .joints
        .iter()
        .flat_map(|p| (0..3).map(move |a| (p[a] - crop.center[a]) / crop.half_extent[a]))
        .map(|x| {
            if x.abs() > LABEL_CLAMP {
                clamped += 1;
            }
            x.clamp(-LABEL_CLAMP, LABEL_CLAMP)
        })
        .collect();
    if clamped > 0 {
        log::warn!("{clamped} label components outside 1.5x the crop cube were clamped");
    }
    out
}

pub fn denormalize_prediction(values: &[f64], crop: &CubeCrop, joint_count: usize) -> Result<JointSet> {
    if values.len() != 3 * joint_count {
        return Err(Error::Contract(format!(
            "prediction has {} values, expected 3 x {joint_count}",
            values.len()
        )));
    }
    JointSet::new(
        values
            .chunks_exact(3)
            .map(|c| std::array::from_fn(|a| crop.center[a] + c[a] * crop.half_extent[a]))
            .collect(),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentParams {
    /// Degrees about the camera axis through the crop centre.
    pub rotation: f64,
    /// Cube size multiplier.
    pub scale: f64,
    /// Offset applied to the crop centre, mm.
    pub translation: [f64; 3],
}

impl AugmentParams {
    pub fn identity() -> Self {
        Self { rotation: 0.0, scale: 1.0, translation: [0.0; 3] }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentRanges {
    /// Rotation is uniform in `[-rotation_deg, rotation_deg]`.
    pub rotation_deg: f64,
    pub scale_min: f64,
    pub scale_max: f64,
    /// Per-axis translation is uniform in `[-translation_mm, translation_mm]`.
    pub translation_mm: f64,
}

impl Default for AugmentRanges {
    fn default() -> Self {
        Self { rotation_deg: 180.0, scale_min: 0.9, scale_max: 1.1, translation_mm: 10.0 }
    }
}

impl AugmentRanges {
    pub fn validate(&self) -> Result<()> {
        let ok = self.rotation_deg >= 0.0
            && self.scale_min > 0.0
            && self.scale_min <= self.scale_max
            && self.translation_mm >= 0.0;
        if !ok {
            return Err(Error::Config(format!("invalid augmentation ranges {self:?}")));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> AugmentParams {
        let sym = |rng: &mut R, r: f64| if r > 0.0 { rng.random_range(-r..=r) } else { 0.0 };
        let rotation = sym(rng, self.rotation_deg);
        let scale = if self.scale_max > self.scale_min {
            rng.random_range(self.scale_min..=self.scale_max)
        } else {
            self.scale_min
        };
        let translation = [(); 3].map(|_| sym(rng, self.translation_mm));
        AugmentParams { rotation, scale, translation }
    }
}

/// Rotates a square image about its centre by `degrees` (nearest neighbour);
/// cells that sample outside the source take `fill`.
///
/// A feature at offset `(dx, dy)` from the centre (x along columns, y along
/// rows) moves to `R(θ)·(dx, dy)`, the same map [`rotate_labels`] applies.
pub fn rotate_image(values: &[f64], size: usize, degrees: f64, fill: f64) -> Vec<f64> {
    if degrees == 0.0 {
        return values.to_vec();
    }
    let (s, c) = degrees.to_radians().sin_cos();
    let mid = (size as f64 - 1.0) / 2.0;
    let mut out = vec![fill; size * size];
    for row in 0..size {
        let dy = row as f64 - mid;
        for col in 0..size {
            let dx = col as f64 - mid;
            // inverse rotation
            let sx = (c * dx + s * dy + mid).round();
            let sy = (-s * dx + c * dy + mid).round();
            if sx >= 0.0 && sy >= 0.0 && sx < size as f64 && sy < size as f64 {
                out[row * size + col] = values[sy as usize * size + sx as usize];
            }
        }
    }
    out
}

/// Rotates the `(x, y)` part of every normalised joint by `degrees`.
pub fn rotate_labels(labels: &mut [f64], degrees: f64) {
    if degrees == 0.0 {
        return;
    }
    let (s, c) = degrees.to_radians().sin_cos();
    for j in labels.chunks_exact_mut(3) {
        let (x, y) = (j[0], j[1]);
        j[0] = c * x - s * y;
        j[1] = s * x + c * y;
    }
}

/// The crop a set of augmentation parameters selects.
pub fn augmented_crop(crop: &CubeCrop, params: &AugmentParams) -> Result<CubeCrop> {
    if !(params.scale > 0.0) {
        return Err(Error::Config(format!("augmentation scale must be positive, got {}", params.scale)));
    }
    CubeCrop::new(
        std::array::from_fn(|a| crop.center[a] + params.translation[a]),
        crop.half_extent.map(|h| h * params.scale),
    )
}

/// Re-crops `frame` with translated/scaled cube, then rotates patch and
/// labels together. Returns the patch and its `3J` normalised labels.
pub fn augment(
    frame: &DepthFrame,
    crop: &CubeCrop,
    joints: &JointSet,
    params: &AugmentParams,
) -> Result<(NormalizedPatch, Vec<f64>)> {
    let crop = augmented_crop(crop, params)?;
    let mut patch = crop_normalize(frame, &crop)?;
    let mut labels = normalize_labels(joints, &crop);
    patch.values = rotate_image(&patch.values, PATCH_SIZE, params.rotation, 1.0);
    rotate_labels(&mut labels, params.rotation);
    Ok((patch, labels))
}

/// Continuous patch coordinates `(col, row)` at which a camera-space point
/// appears after cropping with `crop` and rotating by `degrees`.
pub fn patch_position(p: Point3, crop: &CubeCrop, k: &Intrinsics, degrees: f64) -> Result<[f64; 2]> {
    let b: PixelBounds = cube_pixel_bounds(crop, k)?;
    let [u, v, _] = project(p, k)?;
    let col = (u - b.u_min) / b.width() * PATCH_SIZE as f64 - 0.5;
    let row = (v - b.v_min) / b.height() * PATCH_SIZE as f64 - 0.5;
    let mid = (PATCH_SIZE as f64 - 1.0) / 2.0;
    let (s, c) = degrees.to_radians().sin_cos();
    let (dx, dy) = (col - mid, row - mid);
    Ok([c * dx - s * dy + mid, s * dx + c * dy + mid])
}
