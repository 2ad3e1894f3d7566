//! Gaussian joint heatmaps on the 24x24 supervision grid.

use std::path::Path;

use crate::error::{Error, Result};

pub const HEATMAP_SIZE: usize = 24;
pub const DEFAULT_SIGMA: f64 = 1.5;

#[derive(Clone, Debug, PartialEq)]
pub struct Heatmap {
    pub size: usize,
    pub joint_index: usize,
    /// Row-major, `values[v * size + u]`.
    pub values: Vec<f64>,
}

impl Heatmap {
    pub fn from_values(size: usize, joint_index: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != size * size {
            return Err(Error::Contract(format!("{} values for a {size}x{size} heatmap", values.len())));
        }
        Ok(Self { size, joint_index, values })
    }

    pub fn at(&self, u: usize, v: usize) -> f64 {
        self.values[v * self.size + u]
    }

    /// Grayscale PNG, values clamped to `[0, 1]` and scaled to 0..255.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let pixels: Vec<u8> = self
            .values
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        let img = image::GrayImage::from_raw(self.size as u32, self.size as u32, pixels)
            .expect("buffer matches dimensions");
        img.save(path)?;
        Ok(())
    }
}

/// Writes `value(u, v) = exp(-((u - ju)² + (v - jv)²) / (2σ²))` into `out`.
pub fn render_into(out: &mut [f64], size: usize, center: [f64; 2], sigma: f64) {
    let denom = 2.0 * sigma * sigma;
    for v in 0..size {
        let dv = v as f64 - center[1];
        for u in 0..size {
            let du = u as f64 - center[0];
            out[v * size + u] = (-(du * du + dv * dv) / denom).exp();
        }
    }
}

/// Amplitude-1 Gaussian centred on continuous grid coordinates `(u, v)`.
pub fn render(center: [f64; 2], sigma: f64, size: usize, joint_index: usize) -> Result<Heatmap> {
    if !(sigma > 0.0) {
        return Err(Error::Config(format!("heatmap sigma must be positive, got {sigma}")));
    }
    let mut values = vec![0.0; size * size];
    render_into(&mut values, size, center, sigma);
    Ok(Heatmap { size, joint_index, values })
}

/// Integer `(u, v)` of the maximal cell; ties go to the smallest `(v, u)`.
pub fn decode_argmax(h: &Heatmap) -> [usize; 2] {
    let mut best = 0;
    for (i, &x) in h.values.iter().enumerate() {
        if x > h.values[best] {
            best = i;
        }
    }
    [best % h.size, best / h.size]
}

/// Normalised `(x, y)` in `[-1, 1]` to grid coordinates in `[0, size-1]`.
pub fn patch_to_grid(xy: [f64; 2], size: usize) -> [f64; 2] {
    let span = (size - 1) as f64;
    xy.map(|c| (c + 1.0) / 2.0 * span)
}

/// Target maps for every joint of a `3J` normalised label vector, as one
/// flat `J x size x size` buffer.
pub fn render_targets(labels: &[f64], size: usize, sigma: f64) -> Vec<f64> {
    let mut out = vec![0.0; labels.len() / 3 * size * size];
    for (j, chunk) in labels.chunks_exact(3).enumerate() {
        let c = patch_to_grid([chunk[0], chunk[1]], size);
        render_into(&mut out[j * size * size..(j + 1) * size * size], size, c, sigma);
    }
    out
}
