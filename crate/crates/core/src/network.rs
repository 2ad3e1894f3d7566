//! The pose network: a convolutional feature path with optional
//! first/last-layer concatenation, a heatmap head, and either the
//! topology-ordered per-joint regression module or a plain residual
//! regressor.
//!
//! Shapes for a batch of `B` patches and `J` joints:
//!
//! ```text
//! input            B x 1 x 96 x 96
//! conv 7x7 + relu  B x base x 96 x 96     ─┐ (maxpool 4, when concatenating)
//! pool 2, res      B x feat x 48 x 48      │
//! pool 2, res, res B x feat x 24 x 24      │
//! merged           B x (base+)feat x 24 x 24
//! feature maps     B x J x 24 x 24         (1x1 conv)
//! joints           B x 3J
//! ```
//!
//! In the per-joint module every joint, root first and then in kinematic
//! order, runs a small block on the shared feature concatenated with its
//! predecessor's freshly predicted heatmap (a zero map for the root). Each
//! block emits that joint's heatmap and a pooled local feature; the local
//! features feed two fully connected layers.

use std::path::Path;

use handpose_autodiff::{Archive, Conv2d, Linear, ParamStore, ResidualBlock, Tape, TensorError, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::PATCH_SIZE;
use crate::topology::{hmt_order, topology_for, DatasetId, Topology};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub dataset: DatasetId,
    pub use_concat: bool,
    pub use_hmt: bool,
    pub base_channels: usize,
    pub feature_channels: usize,
    pub fc_width: usize,
    pub dropout_rate: f64,
    pub heatmap_size: usize,
    /// Width of the shared feature the per-joint blocks read.
    pub shared_channels: usize,
    /// Width of each per-joint block.
    pub joint_channels: usize,
    /// 2 reaches 24x24 directly; 3 pools to 12x12 and upsamples back.
    pub pool_stages: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetId::Msra,
            use_concat: true,
            use_hmt: true,
            base_channels: 32,
            feature_channels: 64,
            fc_width: 1024,
            dropout_rate: 0.3,
            heatmap_size: 24,
            shared_channels: 32,
            joint_channels: 16,
            pool_stages: 2,
        }
    }
}

impl NetworkConfig {
    /// Narrow widths for CPU-scale experiments: 8/16 channels, 128-wide FC,
    /// 16-channel shared feature, 8-channel joint blocks.
    pub fn desk(dataset: DatasetId) -> Self {
        Self {
            dataset,
            base_channels: 8,
            feature_channels: 16,
            fc_width: 128,
            shared_channels: 16,
            joint_channels: 8,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let widths = [
            self.base_channels,
            self.feature_channels,
            self.fc_width,
            self.shared_channels,
            self.joint_channels,
        ];
        if widths.contains(&0) {
            return Err(Error::Config(format!("layer widths must be positive: {self:?}")));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!("dropout rate {} not in [0, 1)", self.dropout_rate)));
        }
        if self.heatmap_size * 4 != PATCH_SIZE {
            return Err(Error::Config(format!(
                "heatmap size {} does not match a {PATCH_SIZE}px input after two 2x reductions",
                self.heatmap_size
            )));
        }
        if !(2..=3).contains(&self.pool_stages) {
            return Err(Error::Config(format!("pool_stages must be 2 or 3, got {}", self.pool_stages)));
        }
        Ok(())
    }

    /// Channels of the feature the heads read.
    pub fn merged_channels(&self) -> usize {
        self.feature_channels + if self.use_concat { self.base_channels } else { 0 }
    }

    pub fn variant_name(&self) -> &'static str {
        variant_name(self.use_concat, self.use_hmt)
    }
}

pub fn variant_name(use_concat: bool, use_hmt: bool) -> &'static str {
    match (use_concat, use_hmt) {
        (false, false) => "base+base",
        (true, false) => "concat+base",
        (false, true) => "base+hbt",
        (true, true) => "concat+hbt",
    }
}

/// One of the four ablation configurations, otherwise identical to `base`.
pub fn ablation_variant(base: &NetworkConfig, use_concat: bool, use_hmt: bool) -> NetworkConfig {
    NetworkConfig { use_concat, use_hmt, ..base.clone() }
}

/// All four variants in ablation-table order.
pub fn ablation_matrix(base: &NetworkConfig) -> [NetworkConfig; 4] {
    [(false, false), (true, false), (false, true), (true, true)].map(|(c, h)| ablation_variant(base, c, h))
}

#[derive(Clone, Copy, Debug)]
pub struct ForwardOutput {
    /// `B x J x 24 x 24`.
    pub feature_heatmaps: Var,
    /// `B x J x 24 x 24`; the same node as `feature_heatmaps` for the plain
    /// regressor.
    pub hmt_heatmaps: Var,
    /// `B x 3J`, normalised cube coordinates.
    pub joints: Var,
    /// The merged feature the heads read.
    pub merged: Var,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ForwardOptions {
    pub training: bool,
    /// Feed a zero map instead of the predecessor heatmap into this joint's
    /// block (a probe for the conditioning path).
    pub zero_predecessor_of: Option<usize>,
}

impl ForwardOptions {
    pub fn train() -> Self {
        Self { training: true, ..Default::default() }
    }

    pub fn eval() -> Self {
        Self::default()
    }
}

#[derive(Clone, Debug)]
struct JointBlock {
    joint: usize,
    predecessor: Option<usize>,
    conv: Conv2d,
    head: Conv2d,
}

#[derive(Clone, Debug)]
enum Regressor {
    Hmt { reduce: Conv2d, blocks: Vec<JointBlock>, fc1: Linear, fc2: Linear },
    Plain { res1: ResidualBlock, res2: ResidualBlock, fc1: Linear, fc2: Linear },
}

#[derive(Clone, Debug)]
pub struct Network {
    config: NetworkConfig,
    topology: Topology,
    store: ParamStore,
    conv1: Conv2d,
    res1: ResidualBlock,
    res2: ResidualBlock,
    res3: ResidualBlock,
    heat_head: Conv2d,
    regressor: Regressor,
}

/// Side of the pooled local feature of each joint block / the plain
/// regressor's final map.
const LOCAL: usize = 6;

impl Network {
    pub fn build<R: Rng + ?Sized>(config: &NetworkConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let topology = topology_for(config.dataset);
        topology.validate()?;
        let j = topology.joint_count;
        let (base, feat) = (config.base_channels, config.feature_channels);
        let mut store = ParamStore::new();

        let conv1 = Conv2d::new(&mut store, "feat.conv1", 1, base, 7, 1, 3, rng);
        let res1 = ResidualBlock::new(&mut store, "feat.res1", base, feat, rng);
        let res2 = ResidualBlock::new(&mut store, "feat.res2", feat, feat, rng);
        let res3 = ResidualBlock::new(&mut store, "feat.res3", feat, feat, rng);
        let merged = config.merged_channels();
        let heat_head = Conv2d::new(&mut store, "feat.heatmap", merged, j, 1, 1, 0, rng);

        let regressor = if config.use_hmt {
            let shared = config.shared_channels;
            let jc = config.joint_channels;
            let reduce = Conv2d::new(&mut store, "hmt.reduce", merged, shared, 1, 1, 0, rng);
            let mut order = vec![(topology.root, None)];
            order.extend(hmt_order(&topology).into_iter().map(|(jt, p)| (jt, Some(p))));
            let blocks = order
                .into_iter()
                .map(|(joint, predecessor)| JointBlock {
                    joint,
                    predecessor,
                    conv: Conv2d::new(&mut store, &format!("hmt.joint{joint}.conv"), shared + 1, jc, 3, 1, 1, rng),
                    head: Conv2d::new(&mut store, &format!("hmt.joint{joint}.heatmap"), jc, 1, 1, 1, 0, rng),
                })
                .collect();
            let fc1 = Linear::new(&mut store, "hmt.fc1", j * jc * LOCAL * LOCAL, config.fc_width, rng);
            // the coordinate head starts at zero, i.e. at the crop centre;
            // a fan-in scaled start predicts metres off and training then
            // silences every fc1 unit to shrink it
            let fc2 = Linear::zeroed(&mut store, "hmt.fc2", config.fc_width, 3 * j);
            Regressor::Hmt { reduce, blocks, fc1, fc2 }
        } else {
            let r1 = ResidualBlock::new(&mut store, "reg.res1", merged, feat, rng);
            let r2 = ResidualBlock::new(&mut store, "reg.res2", feat, feat, rng);
            let fc1 = Linear::new(&mut store, "reg.fc1", feat * LOCAL * LOCAL, config.fc_width, rng);
            let fc2 = Linear::zeroed(&mut store, "reg.fc2", config.fc_width, 3 * j);
            Regressor::Plain { res1: r1, res2: r2, fc1, fc2 }
        };

        Ok(Self { config: config.clone(), topology, store, conv1, res1, res2, res3, heat_head, regressor })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn joint_count(&self) -> usize {
        self.topology.joint_count
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn parameter_count(&self) -> usize {
        self.store.numel()
    }

    /// Runs the network on `input` (`B x 1 x 96 x 96`) with parameters
    /// bound as `bound` (from [`ParamStore::bind`] on this network's store).
    pub fn forward<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        bound: &[Var],
        input: Var,
        opts: ForwardOptions,
        rng: &mut R,
    ) -> Result<ForwardOutput> {
        let shape = tape.value(input).shape().to_vec();
        if shape.len() != 4 || shape[1] != 1 || shape[2] != PATCH_SIZE || shape[3] != PATCH_SIZE {
            return Err(Error::Tensor(TensorError::Dimension {
                op: "network_forward",
                detail: format!("expected B x 1 x {PATCH_SIZE} x {PATCH_SIZE}, got {shape:?}"),
            }));
        }
        if bound.len() != self.store.len() {
            return Err(Error::Contract(format!(
                "{} bound parameters for a network with {}",
                bound.len(),
                self.store.len()
            )));
        }
        let batch = shape[0];
        let j = self.joint_count();

        let c1 = self.conv1.forward(tape, bound, input)?;
        let c1 = tape.relu(c1);
        let x = tape.max_pool2d(c1, 2, 2)?;
        let x = self.res1.forward(tape, bound, x)?;
        let x = tape.relu(x);
        let x = tape.max_pool2d(x, 2, 2)?;
        let x = self.res2.forward(tape, bound, x)?;
        let mut x = tape.relu(x);
        if self.config.pool_stages == 3 {
            x = tape.max_pool2d(x, 2, 2)?;
        }
        let x = self.res3.forward(tape, bound, x)?;
        let mut last = tape.relu(x);
        if self.config.pool_stages == 3 {
            last = tape.upsample2d(last, 2)?;
        }
        let merged = if self.config.use_concat {
            let first = tape.max_pool2d(c1, 4, 4)?;
            tape.concat_channels(&[first, last])?
        } else {
            last
        };
        let feature_heatmaps = self.heat_head.forward(tape, bound, merged)?;

        let (hmt_heatmaps, joints) = match &self.regressor {
            Regressor::Hmt { reduce, blocks, fc1, fc2 } => {
                let shared = reduce.forward(tape, bound, merged)?;
                let shared = tape.relu(shared);
                let hs = self.config.heatmap_size;
                let zero = tape.constant(Tensor::zeros(&[batch, 1, hs, hs]));
                let mut maps: Vec<Option<Var>> = vec![None; j];
                let mut locals = Vec::with_capacity(blocks.len());
                for b in blocks {
                    let pred_map = match b.predecessor {
                        Some(p) if opts.zero_predecessor_of != Some(b.joint) => {
                            maps[p].expect("predecessors precede successors")
                        }
                        _ => zero,
                    };
                    let inp = tape.concat_channels(&[shared, pred_map])?;
                    let h = b.conv.forward(tape, bound, inp)?;
                    let h = tape.relu(h);
                    maps[b.joint] = Some(b.head.forward(tape, bound, h)?);
                    locals.push(tape.max_pool2d(h, 4, 4)?);
                }
                let maps: Vec<Var> = maps.into_iter().map(|m| m.expect("every joint has a block")).collect();
                let hmt = tape.concat_channels(&maps)?;
                let local = tape.concat_channels(&locals)?;
                let n = tape.value(local).len() / batch;
                let flat = tape.reshape(local, vec![batch, n])?;
                (hmt, self.fc_head(tape, bound, flat, fc1, fc2, opts, rng)?)
            }
            Regressor::Plain { res1, res2, fc1, fc2 } => {
                let r = res1.forward(tape, bound, merged)?;
                let r = tape.relu(r);
                let r = res2.forward(tape, bound, r)?;
                let r = tape.relu(r);
                let r = tape.max_pool2d(r, 4, 4)?;
                let n = tape.value(r).len() / batch;
                let flat = tape.reshape(r, vec![batch, n])?;
                (feature_heatmaps, self.fc_head(tape, bound, flat, fc1, fc2, opts, rng)?)
            }
        };
        Ok(ForwardOutput { feature_heatmaps, hmt_heatmaps, joints, merged })
    }

    #[allow(clippy::too_many_arguments)]
    fn fc_head<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        bound: &[Var],
        flat: Var,
        fc1: &Linear,
        fc2: &Linear,
        opts: ForwardOptions,
        rng: &mut R,
    ) -> Result<Var> {
        let h = fc1.forward(tape, bound, flat)?;
        let h = tape.relu(h);
        let h = tape.dropout(h, self.config.dropout_rate, opts.training, rng)?;
        Ok(fc2.forward(tape, bound, h)?)
    }

    /// Eval-mode joint predictions (`B x 3J`, normalised) for a batch of
    /// patches given as one flat `B x 96 x 96` buffer.
    pub fn predict(&self, patches: &[f64]) -> Result<Vec<f64>> {
        let px = PATCH_SIZE * PATCH_SIZE;
        if patches.is_empty() || patches.len() % px != 0 {
            return Err(Error::Contract(format!("{} values are not a batch of {PATCH_SIZE}x{PATCH_SIZE} patches", patches.len())));
        }
        let batch = patches.len() / px;
        let mut tape = Tape::new();
        let bound = self.store.bind_frozen(&mut tape);
        let x = tape.constant(Tensor::new(vec![batch, 1, PATCH_SIZE, PATCH_SIZE], patches.to_vec())?);
        // eval mode draws nothing from the generator
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = self.forward(&mut tape, &bound, x, ForwardOptions::eval(), &mut rng)?;
        Ok(tape.value(out.joints).data().to_vec())
    }

    pub fn to_archive(&self) -> Result<Archive> {
        let meta = toml::to_string(&self.config)?;
        Ok(Archive::from_store(&self.store, meta))
    }

    pub fn from_archive(archive: &Archive) -> Result<Self> {
        let config: NetworkConfig = toml::from_str(&archive.metadata)?;
        let mut net = Self::build(&config, &mut ChaCha8Rng::seed_from_u64(0))?;
        archive.load_into(&mut net.store)?;
        Ok(net)
    }

    /// Writes parameters with the config embedded as metadata.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(self.to_archive()?.save(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_archive(&Archive::load(path)?)
    }
}
