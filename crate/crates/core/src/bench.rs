//! Inference throughput on synthetic patches.

use std::fmt;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::Network;
use crate::preprocess::PATCH_SIZE;

/// Published single-GPU throughput, shown next to local numbers for scale.
pub const REFERENCE_FPS: f64 = 220.7;

pub const MIN_BENCH_FRAMES: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub frames: usize,
    pub batch_size: usize,
    /// Per-frame latency, ms (batch wall time divided by batch size).
    pub latencies_ms: Vec<f64>,
    pub mean_fps: f64,
    pub median_fps: f64,
    pub reference_fps: f64,
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "frames      {}", self.frames)?;
        writeln!(f, "batch size  {}", self.batch_size)?;
        writeln!(f, "mean fps    {:.2}", self.mean_fps)?;
        writeln!(f, "median fps  {:.2}", self.median_fps)?;
        write!(f, "reference   {:.1} fps (published single-GPU figure; hardware-specific, not a target)", self.reference_fps)
    }
}

/// Times eval-mode forward passes over `n_frames` random patches, after one
/// untimed warm-up batch.
pub fn bench_inference(net: &Network, n_frames: usize, batch_size: usize, seed: u64) -> Result<BenchReport> {
    if n_frames < MIN_BENCH_FRAMES {
        return Err(Error::Config(format!("benchmark needs at least {MIN_BENCH_FRAMES} frames, got {n_frames}")));
    }
    if batch_size == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    let px = PATCH_SIZE * PATCH_SIZE;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool: Vec<f64> = (0..batch_size * px).map(|_| rng.random_range(-1.0..=1.0)).collect();
    net.predict(&pool)?;

    let mut latencies_ms = Vec::with_capacity(n_frames);
    let start = Instant::now();
    while latencies_ms.len() < n_frames {
        let b = batch_size.min(n_frames - latencies_ms.len());
        let t = Instant::now();
        net.predict(&pool[..b * px])?;
        let per = t.elapsed().as_secs_f64() * 1e3 / b as f64;
        latencies_ms.extend(std::iter::repeat_n(per, b));
    }
    let total = start.elapsed().as_secs_f64();
    let mut sorted = latencies_ms.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median_ms = if n % 2 == 1 { sorted[n / 2] } else { 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]) };
    Ok(BenchReport {
        frames: n_frames,
        batch_size,
        latencies_ms,
        mean_fps: n_frames as f64 / total,
        median_fps: 1e3 / median_ms,
        reference_fps: REFERENCE_FPS,
    })
}
