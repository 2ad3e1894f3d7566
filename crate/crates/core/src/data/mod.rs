//! Canonical on-disk dataset format.
//!
//! A dataset directory holds:
//!
//! * `dataset.toml`: the descriptor (name, intrinsics, topology, samples);
//! * `labels.txt`: one line per frame, `3J` camera-space millimetre values
//!   separated by single spaces;
//! * one frame file per sample: `u32` width, `u32` height, then
//!   `width * height` `u16` depths in mm (0 = missing), all little-endian.
//!
//! Paths inside the descriptor are relative to its directory.

mod import;
mod synthetic;

pub use import::{
    import_msra, import_uvd_listing, parse_uvd_listing, read_depth_image, read_msra_bin, read_msra_joints, UvdLine,
};
pub use synthetic::{generate_synthetic, render_hand, sample_pose, synthesize, SyntheticSample, SyntheticSpec};

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::camera::{Intrinsics, Point3};
use crate::error::{Error, Result};
use crate::preprocess::DepthFrame;
use crate::topology::{topology_for, DatasetId, JointSet};

pub const DESCRIPTOR_FILE: &str = "dataset.toml";
pub const LABELS_FILE: &str = "labels.txt";

pub fn encode_frame(frame: &DepthFrame) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 2 * frame.depth.len());
    out.extend_from_slice(&(frame.width as u32).to_le_bytes());
    out.extend_from_slice(&(frame.height as u32).to_le_bytes());
    for &d in &frame.depth {
        let mm = d.round().clamp(0.0, f32::from(u16::MAX)) as u16;
        out.extend_from_slice(&mm.to_le_bytes());
    }
    out
}

pub fn decode_frame(bytes: &[u8], intrinsics: Intrinsics) -> Result<DepthFrame> {
    let bad = |m: String| Error::Descriptor(format!("frame data: {m}"));
    if bytes.len() < 8 {
        return Err(bad(format!("{} bytes is shorter than the header", bytes.len())));
    }
    let width = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let body = &bytes[8..];
    if body.len() != 2 * width * height {
        return Err(bad(format!("{width}x{height} frame needs {} bytes, found {}", 2 * width * height, body.len())));
    }
    let depth = body
        .chunks_exact(2)
        .map(|b| f32::from(u16::from_le_bytes([b[0], b[1]])))
        .collect();
    DepthFrame::new(width, height, depth, intrinsics)
}

pub fn write_frame(path: impl AsRef<Path>, frame: &DepthFrame) -> Result<()> {
    fs::write(path, encode_frame(frame))?;
    Ok(())
}

pub fn read_frame(path: impl AsRef<Path>, intrinsics: Intrinsics) -> Result<DepthFrame> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::Index(format!("cannot read frame {}: {e}", path.display())))?;
    decode_frame(&bytes, intrinsics)
}

pub fn format_label_line(joints: &JointSet) -> String {
    joints.flat().iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

/// Parses a label file; every line must hold `3 * joint_count` numbers.
pub fn parse_labels(text: &str, path: &Path, joint_count: usize) -> Result<Vec<JointSet>> {
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            let err = |message: String| Error::Parse { path: path.to_path_buf(), line: i + 1, message };
            let values: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| err(format!("{t:?}: {e}"))))
                .collect::<Result<_>>()?;
            if values.len() != 3 * joint_count {
                return Err(err(format!("{} values, expected {}", values.len(), 3 * joint_count)));
            }
            JointSet::from_flat(&values).map_err(|e| err(e.to_string()))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleEntry {
    /// Frame file, relative to the descriptor.
    pub frame: String,
    /// Zero-based line in the label file.
    pub label_line: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
    /// Ground-truth hand centre when known (synthetic data).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub com: Option<Point3>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetDescriptor {
    pub name: String,
    pub topology: DatasetId,
    pub intrinsics: Intrinsics,
    pub labels: String,
    pub samples: Vec<SampleEntry>,
}

impl DatasetDescriptor {
    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let d: Self = toml::from_str(text)?;
        d.intrinsics.validate()?;
        Ok(d)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sample indices grouped by subject tag.
    pub fn subjects(&self) -> Result<BTreeMap<String, Vec<usize>>> {
        let mut out: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, s) in self.samples.iter().enumerate() {
            let tag = s
                .subject
                .clone()
                .ok_or_else(|| Error::Descriptor(format!("sample {i} ({}) has no subject tag", s.frame)))?;
            out.entry(tag).or_default().push(i);
        }
        Ok(out)
    }
}

/// The nine leave-one-subject-out `(train, test)` index pairs over subjects
/// `P0..P8`; pair `k` tests on `Pk`.
pub fn msra_splits(d: &DatasetDescriptor) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    let groups = d.subjects()?;
    let expected: Vec<String> = (0..9).map(|k| format!("P{k}")).collect();
    if let Some(extra) = groups.keys().find(|k| !expected.contains(k)) {
        return Err(Error::Descriptor(format!("unexpected subject tag {extra:?}; expected P0..P8")));
    }
    Ok(expected
        .iter()
        .map(|held_out| {
            let test = groups.get(held_out).cloned().unwrap_or_default();
            let train = (0..d.len())
                .filter(|&i| d.samples[i].subject.as_deref() != Some(held_out.as_str()))
                .collect();
            (train, test)
        })
        .collect())
}

/// A descriptor with its frames and labels loaded into memory.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub descriptor: DatasetDescriptor,
    pub root: PathBuf,
    pub frames: Vec<DepthFrame>,
    pub labels: Vec<JointSet>,
}

impl Dataset {
    /// Loads `dir/dataset.toml` (or the descriptor file itself) and checks
    /// every frame and label.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let desc_path = if path.is_dir() { path.join(DESCRIPTOR_FILE) } else { path.to_path_buf() };
        let root = desc_path.parent().map(Path::to_path_buf).unwrap_or_default();
        let text = fs::read_to_string(&desc_path)
            .map_err(|e| Error::Index(format!("cannot read descriptor {}: {e}", desc_path.display())))?;
        let descriptor = DatasetDescriptor::from_toml(&text)?;
        let topo = topology_for(descriptor.topology);
        let label_path = root.join(&descriptor.labels);
        let label_text = fs::read_to_string(&label_path)
            .map_err(|e| Error::Index(format!("cannot read labels {}: {e}", label_path.display())))?;
        let all_labels = parse_labels(&label_text, &label_path, topo.joint_count)?;
        let mut frames = Vec::with_capacity(descriptor.len());
        let mut labels = Vec::with_capacity(descriptor.len());
        for s in &descriptor.samples {
            frames.push(read_frame(root.join(&s.frame), descriptor.intrinsics)?);
            let l = all_labels.get(s.label_line).ok_or_else(|| {
                Error::Index(format!("{}: label line {} beyond end of {}", s.frame, s.label_line, descriptor.labels))
            })?;
            labels.push(l.clone());
        }
        Ok(Self { descriptor, root, frames, labels })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Subset by sample index (descriptor entries follow).
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut descriptor = self.descriptor.clone();
        descriptor.samples = indices.iter().map(|&i| self.descriptor.samples[i].clone()).collect();
        Self {
            descriptor,
            root: self.root.clone(),
            frames: indices.iter().map(|&i| self.frames[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i].clone()).collect(),
        }
    }

    /// Writes the canonical layout to `dir`: descriptor, labels and one
    /// frame file per sample under `frames/`. Label lines are renumbered in
    /// sample order.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut descriptor = self.descriptor.clone();
        descriptor.labels = LABELS_FILE.to_string();
        let mut label_text = String::new();
        for (i, (s, l)) in descriptor.samples.iter_mut().zip(&self.labels).enumerate() {
            let target = dir.join(&s.frame);
            if let Some(parent) = target.parent() {
                fs::create_dir_all(parent)?;
            }
            write_frame(&target, &self.frames[i])?;
            s.label_line = i;
            label_text.push_str(&format_label_line(l));
            label_text.push('\n');
        }
        fs::write(dir.join(LABELS_FILE), label_text)?;
        fs::write(dir.join(DESCRIPTOR_FILE), descriptor.to_toml()?)?;
        Ok(())
    }
}

/// Standard relative frame path for sample `i`.
pub fn frame_name(i: usize) -> String {
    format!("frames/{i:06}.bin")
}
