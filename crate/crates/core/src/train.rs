//! Minibatch training with per-epoch learning-rate decay, CSV logging and
//! checkpointing.

use std::fs;
use std::path::{Path, PathBuf};

use handpose_autodiff::{Adam, Sgd, Tape, Tensor};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::camera::{CubeCrop, DEFAULT_HALF_EXTENT_MM};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::heatmap::{render_targets, DEFAULT_SIGMA};
use crate::loss::{record_loss, LossBreakdown, LossInputs, LossWeights};
use crate::network::{ForwardOptions, Network};
use crate::preprocess::{augment, compute_com, crop_normalize, normalize_labels, AugmentRanges, PATCH_SIZE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

/// Units in which the joint regression term is measured during training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegressionUnits {
    /// Normalised cube coordinates.
    Normalized,
    /// Normalised coordinates times the nominal cube half extent (125 mm).
    Millimetres,
}

impl RegressionUnits {
    pub fn factor(self) -> f64 {
        match self {
            RegressionUnits::Normalized => 1.0,
            RegressionUnits::Millimetres => DEFAULT_HALF_EXTENT_MM,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub lr0: f64,
    /// Multiplier applied once per epoch.
    pub lr_decay: f64,
    pub weights: LossWeights,
    pub augment: bool,
    pub augmentation: AugmentRanges,
    pub optimizer: OptimizerKind,
    /// Gaussian width of target heatmaps, grid cells.
    pub sigma: f64,
    pub regression_units: RegressionUnits,
    pub seed: u64,
    /// Write a checkpoint every this many epochs (0: only at the end).
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            epochs: 110,
            lr0: 0.002,
            lr_decay: 0.96,
            weights: LossWeights::default(),
            augment: true,
            augmentation: AugmentRanges::default(),
            optimizer: OptimizerKind::Adam,
            sigma: DEFAULT_SIGMA,
            regression_units: RegressionUnits::Normalized,
            seed: 0,
            checkpoint_every: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::Config(format!("lr_decay must be in (0, 1], got {}", self.lr_decay)));
        }
        if !(self.lr0 > 0.0) || !(self.sigma > 0.0) {
            return Err(Error::Config("lr0 and sigma must be positive".into()));
        }
        self.weights.validate()?;
        self.augmentation.validate()
    }
}

/// `lr0 · decay^epoch`.
pub fn lr_at(epoch: usize, cfg: &TrainConfig) -> f64 {
    cfg.lr0 * cfg.lr_decay.powi(epoch as i32)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub step: usize,
    pub epoch: usize,
    pub lr: f64,
    pub l_ht_f: f64,
    pub l_r: f64,
    pub l_ht_hmt: f64,
    pub r_w: f64,
    pub total: f64,
}

impl LogRow {
    fn new(step: usize, epoch: usize, lr: f64, b: &LossBreakdown) -> Self {
        Self { step, epoch, lr, l_ht_f: b.l_ht_f, l_r: b.l_r, l_ht_hmt: b.l_ht_hmt, r_w: b.r_w, total: b.total }
    }
}

/// Where training writes its artefacts.
#[derive(Clone, Debug, Default)]
pub struct TrainOutputs {
    /// CSV log path.
    pub log: Option<PathBuf>,
    /// Directory for `epoch_NNNN.ckpt`, `final.ckpt` and `last_good.ckpt`.
    pub checkpoint_dir: Option<PathBuf>,
}

impl TrainOutputs {
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        Self { log: Some(dir.join("train_log.csv")), checkpoint_dir: Some(dir.to_path_buf()) }
    }
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub rows: Vec<LogRow>,
    pub steps: usize,
}

impl TrainReport {
    pub fn first_total(&self) -> Option<f64> {
        self.rows.first().map(|r| r.total)
    }

    pub fn last_total(&self) -> Option<f64> {
        self.rows.last().map(|r| r.total)
    }
}

/// Unaugmented training material for one frame.
#[derive(Clone, Debug)]
pub struct PreparedSample {
    pub crop: CubeCrop,
    pub patch: Vec<f64>,
    pub labels: Vec<f64>,
}

/// Crops every frame at its computed centre of mass.
pub fn prepare(data: &Dataset) -> Result<Vec<PreparedSample>> {
    data.frames
        .iter()
        .zip(&data.labels)
        .map(|(f, l)| {
            let crop = compute_com(f)?;
            let patch = crop_normalize(f, &crop)?;
            Ok(PreparedSample { crop, patch: patch.values, labels: normalize_labels(l, &crop) })
        })
        .collect()
}

pub fn write_log(path: &Path, rows: &[LogRow]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

enum Optimizer {
    Adam(Adam),
    Sgd(Sgd),
}

/// Seed for the augmentation of one sample in one epoch.
fn sample_seed(seed: u64, epoch: usize, index: usize) -> u64 {
    seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (index as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
}

/// Saves the current parameters as `last_good.ckpt` and flushes the log.
fn halt(net: &Network, rows: &[LogRow], outputs: &TrainOutputs, msg: String) -> Error {
    let saved = (|| {
        if let Some(dir) = &outputs.checkpoint_dir {
            net.save(dir.join("last_good.ckpt"))?;
        }
        if let Some(log) = &outputs.log {
            write_log(log, rows)?;
        }
        Ok::<_, Error>(())
    })();
    match saved {
        Ok(()) => Error::NumericFault(msg),
        Err(e) => Error::NumericFault(format!("{msg}; saving state also failed: {e}")),
    }
}

/// Trains `net` in place. Deterministic for a given config and dataset.
///
/// On a non-finite loss, gradient or update the current parameters (the
/// faulting update is not applied) are written to `last_good.ckpt` (when a
/// checkpoint directory is set) and a numeric fault is returned.
pub fn train(net: &mut Network, data: &Dataset, cfg: &TrainConfig, outputs: &TrainOutputs) -> Result<TrainReport> {
    cfg.validate()?;
    if data.descriptor.topology != net.config().dataset {
        return Err(Error::Config(format!(
            "dataset topology {} does not match network topology {}",
            data.descriptor.topology,
            net.config().dataset
        )));
    }
    if data.is_empty() {
        return Err(Error::Contract("training set is empty".into()));
    }
    if let Some(dir) = &outputs.checkpoint_dir {
        fs::create_dir_all(dir)?;
    }
    let prepared = prepare(data)?;
    let hs = net.config().heatmap_size;
    let j = net.joint_count();
    let px = PATCH_SIZE * PATCH_SIZE;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut optimizer = match cfg.optimizer {
        OptimizerKind::Adam => Optimizer::Adam(Adam::default()),
        OptimizerKind::Sgd => Optimizer::Sgd(Sgd),
    };
    let mut rows = Vec::new();
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut step = 0;

    for epoch in 0..cfg.epochs {
        let lr = lr_at(epoch, cfg);
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let b = batch.len();
            let mut patches = Vec::with_capacity(b * px);
            let mut labels = Vec::with_capacity(b * 3 * j);
            for &i in batch {
                let s = &prepared[i];
                if cfg.augment {
                    let mut arng = ChaCha8Rng::seed_from_u64(sample_seed(cfg.seed, epoch, i));
                    let params = cfg.augmentation.sample(&mut arng);
                    let (p, l) = augment(&data.frames[i], &s.crop, &data.labels[i], &params)?;
                    patches.extend_from_slice(&p.values);
                    labels.extend_from_slice(&l);
                } else {
                    patches.extend_from_slice(&s.patch);
                    labels.extend_from_slice(&s.labels);
                }
            }
            let targets = render_targets(&labels, hs, cfg.sigma);

            let mut tape = Tape::new();
            let bound = net.store().bind(&mut tape);
            let x = tape.constant(Tensor::new(vec![b, 1, PATCH_SIZE, PATCH_SIZE], patches)?);
            let out = net.forward(&mut tape, &bound, x, ForwardOptions::train(), &mut rng)?;
            let factor = cfg.regression_units.factor();
            let joints = if factor == 1.0 { out.joints } else { tape.scale(out.joints, factor) };
            let labels = labels.into_iter().map(|v| v * factor).collect();
            let inputs = LossInputs {
                feature_heatmaps: out.feature_heatmaps,
                hmt_heatmaps: out.hmt_heatmaps,
                joints,
                target_heatmaps: tape.constant(Tensor::new(vec![b, j, hs, hs], targets)?),
                target_joints: tape.constant(Tensor::new(vec![b, 3 * j], labels)?),
                regularized: net.store().regularized_vars(&bound),
            };
            let loss = record_loss(&mut tape, &inputs, &cfg.weights)?;
            let breakdown = loss.breakdown(&tape);
            rows.push(LogRow::new(step, epoch, lr, &breakdown));

            let fault = if !breakdown.total.is_finite() {
                Some(format!("total loss {} at step {step}", breakdown.total))
            } else {
                tape.backward(loss.total)?;
                net.store_mut().collect_grads(&tape, &bound);
                net.store()
                    .params()
                    .iter()
                    .find(|p| p.tensor.grad().is_some_and(|g| g.iter().any(|v| !v.is_finite())))
                    .map(|p| format!("non-finite gradient for {} at step {step}", p.name))
            };
            if let Some(msg) = fault {
                return Err(halt(net, &rows, outputs, msg));
            }
            let before: Vec<Tensor> = net.store().params().iter().map(|p| p.tensor.clone()).collect();
            match &mut optimizer {
                Optimizer::Adam(a) => a.step(net.store_mut().params_mut(), lr)?,
                Optimizer::Sgd(s) => s.step(net.store_mut().params_mut(), lr)?,
            }
            if let Some(p) = net.store().params().iter().find(|p| p.tensor.data().iter().any(|v| !v.is_finite())) {
                let msg = format!("update made {} non-finite at step {step}", p.name);
                for (p, t) in net.store_mut().params_mut().iter_mut().zip(before) {
                    p.tensor = t;
                }
                return Err(halt(net, &rows, outputs, msg));
            }
            step += 1;
        }
        if let Some(dir) = &outputs.checkpoint_dir {
            if cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0 {
                net.save(dir.join(format!("epoch_{:04}.ckpt", epoch + 1)))?;
            }
        }
        log::debug!("epoch {epoch}: lr {lr:.3e}, last total {:.5}", rows.last().map_or(f64::NAN, |r| r.total));
    }
    if let Some(dir) = &outputs.checkpoint_dir {
        net.save(dir.join("final.ckpt"))?;
    }
    if let Some(log) = &outputs.log {
        write_log(log, &rows)?;
    }
    Ok(TrainReport { rows, steps: step })
}
