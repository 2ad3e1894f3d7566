//! Joint layouts and kinematic chains for the supported datasets.
//!
//! Each [`Topology`] names a root joint and five finger chains (thumb,
//! index, middle, ring, pinky), every chain ordered from the joint nearest
//! the root to the fingertip. Joints that sit on the palm or wrist but on no
//! finger form the root cluster; they hang directly off the root.
//!
//! All index maps live in [`LAYOUTS`]; correcting a layout means editing
//! that table only.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::camera::Point3;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetId {
    Icvl,
    Nyu,
    Msra,
}

impl DatasetId {
    pub const ALL: [DatasetId; 3] = [DatasetId::Icvl, DatasetId::Nyu, DatasetId::Msra];

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetId::Icvl => "icvl",
            DatasetId::Nyu => "nyu",
            DatasetId::Msra => "msra",
        }
    }
}

impl fmt::Display for DatasetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "icvl" => Ok(DatasetId::Icvl),
            "nyu" => Ok(DatasetId::Nyu),
            "msra" => Ok(DatasetId::Msra),
            other => Err(Error::Config(format!("unknown dataset id {other:?} (expected icvl, nyu or msra)"))),
        }
    }
}

pub const FINGERS: [&str; 5] = ["thumb", "index", "middle", "ring", "pinky"];

/// Static description of one dataset layout.
pub struct Layout {
    pub dataset: DatasetId,
    /// Joint names in annotation order; the position is the joint index.
    pub joint_names: &'static [&'static str],
    /// Index of the root joint.
    pub root: usize,
    /// Palm/wrist joints attached directly to the root.
    pub root_cluster: &'static [usize],
    /// Thumb, index, middle, ring, pinky; each proximal to distal.
    pub chains: [&'static [usize]; 5],
}

/// Per-dataset joint maps.
///
/// * ICVL: 16 joints, palm first, then three per finger thumb to pinky.
/// * NYU: the usual 14-joint evaluation subset of the 36 annotated joints
///   (pinky, ring, middle and index tip/mid, thumb tip/mid/base, two wrist
///   joints, palm centre). The wrist-middle joint is the root; the other
///   wrist joint and the palm centre form the root cluster.
/// * MSRA: 21 joints, wrist first, then four per finger in the order index,
///   middle, ring, little, thumb (MCP, PIP, DIP, TIP).
pub const LAYOUTS: [Layout; 3] = [
    Layout {
        dataset: DatasetId::Icvl,
        joint_names: &[
            "palm", "thumb_root", "thumb_mid", "thumb_tip", "index_root", "index_mid", "index_tip",
            "middle_root", "middle_mid", "middle_tip", "ring_root", "ring_mid", "ring_tip",
            "pinky_root", "pinky_mid", "pinky_tip",
        ],
        root: 0,
        root_cluster: &[],
        chains: [&[1, 2, 3], &[4, 5, 6], &[7, 8, 9], &[10, 11, 12], &[13, 14, 15]],
    },
    Layout {
        dataset: DatasetId::Nyu,
        joint_names: &[
            "pinky_tip", "pinky_mid", "ring_tip", "ring_mid", "middle_tip", "middle_mid", "index_tip",
            "index_mid", "thumb_tip", "thumb_mid", "thumb_base", "wrist_back", "wrist_mid", "palm",
        ],
        root: 12,
        root_cluster: &[11, 13],
        chains: [&[10, 9, 8], &[7, 6], &[5, 4], &[3, 2], &[1, 0]],
    },
    Layout {
        dataset: DatasetId::Msra,
        joint_names: &[
            "wrist", "index_mcp", "index_pip", "index_dip", "index_tip", "middle_mcp", "middle_pip",
            "middle_dip", "middle_tip", "ring_mcp", "ring_pip", "ring_dip", "ring_tip", "little_mcp",
            "little_pip", "little_dip", "little_tip", "thumb_mcp", "thumb_pip", "thumb_dip",
            "thumb_tip",
        ],
        root: 0,
        root_cluster: &[],
        chains: [&[17, 18, 19, 20], &[1, 2, 3, 4], &[5, 6, 7, 8], &[9, 10, 11, 12], &[13, 14, 15, 16]],
    },
];

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Topology {
    pub name: DatasetId,
    pub joint_count: usize,
    pub root: usize,
    pub root_cluster: Vec<usize>,
    /// Thumb, index, middle, ring, pinky.
    pub chains: [Vec<usize>; 5],
    pub joint_names: Vec<String>,
}

pub fn topology_for(dataset: DatasetId) -> Topology {
    let layout = LAYOUTS.iter().find(|l| l.dataset == dataset).expect("every dataset has a layout");
    Topology {
        name: dataset,
        joint_count: layout.joint_names.len(),
        root: layout.root,
        root_cluster: layout.root_cluster.to_vec(),
        chains: layout.chains.map(<[usize]>::to_vec),
        joint_names: layout.joint_names.iter().map(|s| s.to_string()).collect(),
    }
}

impl Topology {
    /// Checks the partition property: every joint is the root, in the root
    /// cluster, or in exactly one chain.
    pub fn validate(&self) -> Result<()> {
        let mut seen = vec![0usize; self.joint_count];
        let all = std::iter::once(self.root)
            .chain(self.root_cluster.iter().copied())
            .chain(self.chains.iter().flatten().copied());
        for j in all {
            if j >= self.joint_count {
                return Err(Error::Config(format!("{}: joint index {j} out of range", self.name)));
            }
            seen[j] += 1;
        }
        if let Some(j) = seen.iter().position(|&c| c != 1) {
            return Err(Error::Config(format!(
                "{}: joint {j} appears {} times in root/cluster/chains",
                self.name, seen[j]
            )));
        }
        if self.joint_names.len() != self.joint_count {
            return Err(Error::Config(format!("{}: joint name table has wrong length", self.name)));
        }
        Ok(())
    }

    /// Human-readable TOML descriptor of the layout.
    pub fn to_descriptor(&self) -> String {
        toml::to_string(self).expect("topology serializes")
    }
}

/// Every non-root joint paired with its kinematic predecessor, root cluster
/// first, then chain by chain from proximal to distal. Predecessors always
/// appear before their successors (or are the root).
pub fn hmt_order(t: &Topology) -> Vec<(usize, usize)> {
    let mut order: Vec<(usize, usize)> = t.root_cluster.iter().map(|&j| (j, t.root)).collect();
    for chain in &t.chains {
        let mut prev = t.root;
        for &j in chain {
            order.push((j, prev));
            prev = j;
        }
    }
    order
}

/// Ordered 3D joint locations in camera-space millimetres.
#[derive(Clone, Debug, PartialEq)]
pub struct JointSet {
    pub joints: Vec<Point3>,
}

impl JointSet {
    pub fn new(joints: Vec<Point3>) -> Result<Self> {
        if joints.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::Contract("joint coordinates must be finite".into()));
        }
        Ok(Self { joints })
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    pub fn check_topology(&self, t: &Topology) -> Result<()> {
        if self.joints.len() != t.joint_count {
            return Err(Error::Contract(format!(
                "{} joints given, {} expects {}",
                self.joints.len(),
                t.name,
                t.joint_count
            )));
        }
        Ok(())
    }

    pub fn flat(&self) -> Vec<f64> {
        self.joints.iter().flatten().copied().collect()
    }

    pub fn from_flat(values: &[f64]) -> Result<Self> {
        if values.len() % 3 != 0 {
            return Err(Error::Contract(format!("{} values do not form 3D joints", values.len())));
        }
        Self::new(values.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn joint_counts_and_chain_lengths() {
        let msra = topology_for(DatasetId::Msra);
        assert_eq!(msra.joint_count, 21);
        assert!(msra.chains.iter().all(|c| c.len() == 4));
        let icvl = topology_for(DatasetId::Icvl);
        assert_eq!(icvl.joint_count, 16);
        assert!(icvl.chains.iter().all(|c| c.len() == 3));
        assert_eq!(topology_for(DatasetId::Nyu).joint_count, 14);
    }

    #[test]
    fn every_layout_partitions_its_joints() {
        for id in DatasetId::ALL {
            let t = topology_for(id);
            t.validate().unwrap();
            let mut all: Vec<usize> = std::iter::once(t.root)
                .chain(t.root_cluster.iter().copied())
                .chain(t.chains.iter().flatten().copied())
                .collect();
            all.sort_unstable();
            assert_eq!(all, (0..t.joint_count).collect::<Vec<_>>());
        }
    }

    #[test]
    fn order_is_topological() {
        for id in DatasetId::ALL {
            let t = topology_for(id);
            let order = hmt_order(&t);
            assert_eq!(order.len(), t.joint_count - 1);
            assert!(order.iter().all(|&(j, _)| j != t.root));
            for (pos, &(_, pred)) in order.iter().enumerate() {
                assert!(pred == t.root || order[..pos].iter().any(|&(j, _)| j == pred));
            }
            for chain in &t.chains {
                let first = order.iter().find(|(j, _)| *j == chain[0]).unwrap();
                assert_eq!(first.1, t.root);
            }
        }
        let msra = hmt_order(&topology_for(DatasetId::Msra));
        assert_eq!(msra.len(), 20);
        assert_eq!(msra.iter().filter(|(_, p)| *p == 0).count(), 5);
    }

    #[test]
    fn parses_ids() {
        assert_eq!("MSRA".parse::<DatasetId>().unwrap(), DatasetId::Msra);
        assert!("hands2017".parse::<DatasetId>().is_err());
    }

    #[test]
    fn descriptor_lists_chains() {
        let d = topology_for(DatasetId::Icvl).to_descriptor();
        assert!(d.contains("name = \"icvl\""));
        assert!(d.contains("joint_count = 16"));
    }
}
