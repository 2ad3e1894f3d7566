//! Mean 3D joint error and success-rate curves, in world millimetres.

use std::path::Path;

use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::network::Network;
use crate::preprocess::{compute_com, crop_normalize, denormalize_prediction};
use crate::topology::JointSet;

/// Thresholds 0, 1, ..., 80 mm.
pub fn default_thresholds() -> Vec<f64> {
    (0..=80).map(f64::from).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub frames: usize,
    pub mean_error_mm: f64,
    pub per_joint_mean_mm: Vec<f64>,
    /// `(threshold mm, fraction of frames whose worst joint error ≤ threshold)`.
    pub success_curve: Vec<(f64, f64)>,
    /// `(threshold mm, fraction of individual joints within threshold)`.
    pub per_joint_success_curve: Vec<(f64, f64)>,
    /// Worst joint error of each frame.
    pub frame_max_error_mm: Vec<f64>,
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Fraction of `values` at or below each threshold.
pub fn fraction_within(values: &[f64], thresholds: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    thresholds
        .iter()
        .map(|&t| {
            let n = sorted.partition_point(|&v| v <= t);
            (t, n as f64 / sorted.len() as f64)
        })
        .collect()
}

pub fn evaluate_predictions(pred: &[JointSet], gt: &[JointSet]) -> Result<EvalReport> {
    evaluate_predictions_at(pred, gt, &default_thresholds())
}

pub fn evaluate_predictions_at(pred: &[JointSet], gt: &[JointSet], thresholds: &[f64]) -> Result<EvalReport> {
    if gt.is_empty() {
        return Err(Error::Contract("evaluation needs at least one frame".into()));
    }
    if pred.len() != gt.len() {
        return Err(Error::Contract(format!("{} predictions for {} frames", pred.len(), gt.len())));
    }
    let j = gt[0].len();
    let mut per_joint = vec![0.0; j];
    let mut all = Vec::with_capacity(gt.len() * j);
    let mut frame_max = Vec::with_capacity(gt.len());
    for (p, g) in pred.iter().zip(gt) {
        if p.len() != j || g.len() != j {
            return Err(Error::Contract(format!("joint counts differ: {} vs {} (expected {j})", p.len(), g.len())));
        }
        let mut worst: f64 = 0.0;
        for (k, (a, b)) in p.joints.iter().zip(&g.joints).enumerate() {
            let e = dist(*a, *b);
            per_joint[k] += e;
            all.push(e);
            worst = worst.max(e);
        }
        frame_max.push(worst);
    }
    let n = gt.len() as f64;
    let per_joint_mean_mm: Vec<f64> = per_joint.iter().map(|s| s / n).collect();
    Ok(EvalReport {
        frames: gt.len(),
        mean_error_mm: all.iter().sum::<f64>() / all.len() as f64,
        per_joint_mean_mm,
        success_curve: fraction_within(&frame_max, thresholds),
        per_joint_success_curve: fraction_within(&all, thresholds),
        frame_max_error_mm: frame_max,
    })
}

/// World-mm predictions for every frame, cropping at the computed centre of
/// mass and running the network in eval mode `batch` frames at a time.
pub fn predict_dataset(net: &Network, data: &Dataset, batch: usize) -> Result<Vec<JointSet>> {
    let batch = batch.max(1);
    let mut out = Vec::with_capacity(data.len());
    for frames in data.frames.chunks(batch) {
        let mut crops = Vec::with_capacity(frames.len());
        let mut patches = Vec::new();
        for f in frames {
            let crop = compute_com(f)?;
            patches.extend(crop_normalize(f, &crop)?.values);
            crops.push(crop);
        }
        let pred = net.predict(&patches)?;
        let per = pred.len() / frames.len();
        for (chunk, crop) in pred.chunks_exact(per).zip(&crops) {
            out.push(denormalize_prediction(chunk, crop, net.joint_count())?);
        }
    }
    Ok(out)
}

pub fn evaluate(net: &Network, data: &Dataset) -> Result<EvalReport> {
    if data.is_empty() {
        return Err(Error::Contract("test set is empty".into()));
    }
    let pred = predict_dataset(net, data, 16)?;
    evaluate_predictions(&pred, &data.labels)
}

/// `threshold_mm,success_fraction` rows.
pub fn write_success_curve(path: impl AsRef<Path>, curve: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["threshold_mm", "success_fraction"])?;
    for (t, f) in curve {
        w.write_record([t.to_string(), f.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
