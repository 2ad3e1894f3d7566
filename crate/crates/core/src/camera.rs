//! Pinhole camera model linking depth pixels, camera-space millimetres and
//! the cube crop frame.
//!
//! Image coordinates have their origin at the top-left pixel, `u` grows to
//! the right and `v` downward. Pixel `i` is centred on coordinate `i`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in camera space, millimetres.
pub type Point3 = [f64; 3];

/// Default cube half extent per axis (a 250 mm cube).
pub const DEFAULT_HALF_EXTENT_MM: f64 = 125.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        let k = Self { fx, fy, cx, cy };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) || !self.cx.is_finite() || !self.cy.is_finite() {
            return Err(Error::Config(format!(
                "focal lengths must be positive and finite, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        Ok(())
    }

    /// Creative time-of-flight sensor, 320x240.
    pub fn icvl() -> Self {
        Self { fx: 241.42, fy: 241.42, cx: 160.0, cy: 120.0 }
    }

    /// Kinect, 640x480.
    pub fn nyu() -> Self {
        Self { fx: 588.03, fy: 587.07, cx: 320.0, cy: 240.0 }
    }

    /// SR300, 320x240.
    pub fn msra() -> Self {
        Self { fx: 241.42, fy: 241.42, cx: 160.0, cy: 120.0 }
    }
}

/// Pixel `(u, v)` at depth `d` to camera space.
pub fn unproject(u: f64, v: f64, d: f64, k: &Intrinsics) -> Result<Point3> {
    if !(d > 0.0) {
        return Err(Error::InvalidDepth(d));
    }
    Ok([(u - k.cx) * d / k.fx, (v - k.cy) * d / k.fy, d])
}

/// Camera-space point to `[u, v, d]`.
pub fn project(p: Point3, k: &Intrinsics) -> Result<[f64; 3]> {
    if !(p[2] > 0.0) {
        return Err(Error::BehindCamera(p[2]));
    }
    Ok([k.fx * p[0] / p[2] + k.cx, k.fy * p[1] / p[2] + k.cy, p[2]])
}

/// Axis-aligned cube around a hand centre.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubeCrop {
    pub center: Point3,
    pub half_extent: [f64; 3],
}

impl CubeCrop {
    pub fn new(center: Point3, half_extent: [f64; 3]) -> Result<Self> {
        let crop = Self { center, half_extent };
        crop.validate()?;
        Ok(crop)
    }

    /// A 250 mm cube centred on `center`.
    pub fn around(center: Point3) -> Result<Self> {
        Self::new(center, [DEFAULT_HALF_EXTENT_MM; 3])
    }

    pub fn validate(&self) -> Result<()> {
        if self.half_extent.iter().any(|&h| !(h > 0.0) || !h.is_finite()) {
            return Err(Error::InvalidCrop(format!("half extents must be positive, got {:?}", self.half_extent)));
        }
        if !(self.center[2] > 0.0) || self.center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidCrop(format!("center depth must be positive, got {:?}", self.center)));
        }
        Ok(())
    }

    pub fn near_depth(&self) -> f64 {
        self.center[2] - self.half_extent[2]
    }

    pub fn far_depth(&self) -> f64 {
        self.center[2] + self.half_extent[2]
    }
}

/// Image rectangle covered by a crop, plus its depth range.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PixelBounds {
    pub u_min: f64,
    pub u_max: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub d_min: f64,
    pub d_max: f64,
}

impl PixelBounds {
    pub fn width(&self) -> f64 {
        self.u_max - self.u_min
    }

    pub fn height(&self) -> f64 {
        self.v_max - self.v_min
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= self.u_min && u <= self.u_max && v >= self.v_min && v <= self.v_max
    }
}

/// Projection of the cube's front face (the face nearest the camera).
pub fn cube_pixel_bounds(crop: &CubeCrop, k: &Intrinsics) -> Result<PixelBounds> {
    crop.validate()?;
    let front = crop.near_depth();
    if !(front > 0.0) {
        return Err(Error::InvalidCrop(format!("front face depth {front} mm is not in front of the camera")));
    }
    let [cx, cy, _] = crop.center;
    let [hx, hy, _] = crop.half_extent;
    Ok(PixelBounds {
        u_min: k.fx * (cx - hx) / front + k.cx,
        u_max: k.fx * (cx + hx) / front + k.cx,
        v_min: k.fy * (cy - hy) / front + k.cy,
        v_max: k.fy * (cy + hy) / front + k.cy,
        d_min: front,
        d_max: crop.far_depth(),
    })
}
