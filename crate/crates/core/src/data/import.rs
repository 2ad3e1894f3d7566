//! Importers from public dataset layouts into the canonical format.
//!
//! * Pixel listings (ICVL's native label file, and the NYU conversion
//!   format): one line per frame, `image_path u1 v1 d1 ... uJ vJ dJ`, with
//!   `u, v` in pixels and `d` in mm. Images are 16-bit grayscale PNGs (mm)
//!   or canonical frame files (`.bin`), relative to an image root.
//! * MSRA: `P0..P8/<gesture>/joint.txt` plus `NNNNNN_depth.bin` frames.

use std::fs;
use std::path::{Path, PathBuf};

use crate::camera::{unproject, Intrinsics};
use crate::data::{decode_frame, frame_name, Dataset, DatasetDescriptor, SampleEntry, LABELS_FILE};
use crate::error::{Error, Result};
use crate::preprocess::DepthFrame;
use crate::topology::{topology_for, DatasetId, JointSet};

#[derive(Clone, Debug, PartialEq)]
pub struct UvdLine {
    pub image: String,
    /// `(u px, v px, d mm)` per joint.
    pub uvd: Vec<[f64; 3]>,
}

pub fn parse_uvd_listing(text: &str, path: &Path, joint_count: usize) -> Result<Vec<UvdLine>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let err = |message: String| Error::Parse { path: path.to_path_buf(), line: i + 1, message };
        let mut tokens = line.split_whitespace();
        let Some(image) = tokens.next() else { continue };
        let values: Vec<f64> = tokens
            .map(|t| t.parse::<f64>().map_err(|e| err(format!("{t:?}: {e}"))))
            .collect::<Result<_>>()?;
        if values.len() != 3 * joint_count {
            return Err(err(format!("{} values after the image path, expected {}", values.len(), 3 * joint_count)));
        }
        let uvd = values.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        out.push(UvdLine { image: image.to_string(), uvd });
    }
    Ok(out)
}

/// Reads a 16-bit PNG (mm) or a canonical frame file.
pub fn read_depth_image(path: &Path, intrinsics: Intrinsics) -> Result<DepthFrame> {
    if !path.is_file() {
        return Err(Error::Index(format!("missing image {}", path.display())));
    }
    if path.extension().is_some_and(|e| e == "bin") {
        return decode_frame(&fs::read(path)?, intrinsics);
    }
    let img = image::open(path)?.into_luma16();
    let (w, h) = img.dimensions();
    let depth = img.into_raw().into_iter().map(f32::from).collect();
    DepthFrame::new(w as usize, h as usize, depth, intrinsics)
}

/// Converts a pixel listing to a canonical dataset in `out_dir`.
pub fn import_uvd_listing(
    dataset: DatasetId,
    label_file: &Path,
    image_root: &Path,
    out_dir: &Path,
    intrinsics: Intrinsics,
) -> Result<DatasetDescriptor> {
    let topo = topology_for(dataset);
    let text = fs::read_to_string(label_file)
        .map_err(|e| Error::Index(format!("cannot read {}: {e}", label_file.display())))?;
    let lines = parse_uvd_listing(&text, label_file, topo.joint_count)?;
    let mut frames = Vec::with_capacity(lines.len());
    let mut labels = Vec::with_capacity(lines.len());
    let mut samples = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        frames.push(read_depth_image(&image_root.join(&line.image), intrinsics)?);
        let joints = line
            .uvd
            .iter()
            .map(|&[u, v, d]| unproject(u, v, d, &intrinsics))
            .collect::<Result<Vec<_>>>()?;
        labels.push(JointSet::new(joints)?);
        samples.push(SampleEntry { frame: frame_name(i), label_line: i, subject: None, com: None });
    }
    let descriptor = DatasetDescriptor {
        name: format!("{dataset}-{}", label_file.file_stem().and_then(|s| s.to_str()).unwrap_or("import")),
        topology: dataset,
        intrinsics,
        labels: LABELS_FILE.to_string(),
        samples,
    };
    let ds = Dataset { descriptor, root: out_dir.to_path_buf(), frames, labels };
    ds.write(out_dir)?;
    Ok(ds.descriptor)
}

/// MSRA frame: six `u32` (image width, height, box left, top, right,
/// bottom) then `f32` depths for the box, row-major. Pixels outside the box
/// are empty.
pub fn read_msra_bin(path: &Path, intrinsics: Intrinsics) -> Result<DepthFrame> {
    let bytes = fs::read(path).map_err(|e| Error::Index(format!("cannot read {}: {e}", path.display())))?;
    let bad = |m: String| Error::Descriptor(format!("{}: {m}", path.display()));
    if bytes.len() < 24 {
        return Err(bad("truncated header".into()));
    }
    let h: Vec<usize> = bytes[..24]
        .chunks_exact(4)
        .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
        .collect();
    let (width, height, left, top, right, bottom) = (h[0], h[1], h[2], h[3], h[4], h[5]);
    if right < left || bottom < top || right > width || bottom > height {
        return Err(bad(format!("bad box {left},{top},{right},{bottom} in {width}x{height}")));
    }
    let bw = right - left;
    let body = &bytes[24..];
    if body.len() != 4 * bw * (bottom - top) {
        return Err(bad(format!("expected {} depth bytes, found {}", 4 * bw * (bottom - top), body.len())));
    }
    let mut depth = vec![0.0f32; width * height];
    for (k, b) in body.chunks_exact(4).enumerate() {
        let d = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
        depth[(top + k / bw) * width + left + k % bw] = if d.is_finite() && d > 0.0 { d } else { 0.0 };
    }
    DepthFrame::new(width, height, depth, intrinsics)
}

/// MSRA `joint.txt`: a count line, then one line of 63 values per frame.
/// The file's y and z axes point opposite to ours and are negated.
pub fn read_msra_joints(path: &Path) -> Result<Vec<JointSet>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Index(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let err = |line: usize, message: String| Error::Parse { path: path.to_path_buf(), line: line + 1, message };
    let (n0, first) = lines.next().ok_or_else(|| err(0, "empty joint file".into()))?;
    let count: usize = first.trim().parse().map_err(|e| err(n0, format!("frame count: {e}")))?;
    let mut out = Vec::with_capacity(count);
    for (i, line) in lines {
        let v: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| err(i, format!("{t:?}: {e}"))))
            .collect::<Result<_>>()?;
        if v.len() != 63 {
            return Err(err(i, format!("{} values, expected 63", v.len())));
        }
        out.push(JointSet::new(v.chunks_exact(3).map(|c| [c[0], -c[1], -c[2]]).collect())?);
    }
    if out.len() != count {
        return Err(err(0, format!("header announces {count} frames, found {}", out.len())));
    }
    Ok(out)
}

fn sorted_dirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    v.sort();
    Ok(v)
}

/// Converts an MSRA tree (`root/P0..P8/<gesture>/`) to a canonical dataset
/// with subject tags.
pub fn import_msra(root: &Path, out_dir: &Path, intrinsics: Intrinsics) -> Result<DatasetDescriptor> {
    let mut frames = Vec::new();
    let mut labels = Vec::new();
    let mut samples = Vec::new();
    for k in 0..9 {
        let subject = format!("P{k}");
        let sdir = root.join(&subject);
        if !sdir.is_dir() {
            return Err(Error::Index(format!("missing subject directory {}", sdir.display())));
        }
        for gesture in sorted_dirs(&sdir)? {
            let joints = read_msra_joints(&gesture.join("joint.txt"))?;
            for (f, js) in joints.into_iter().enumerate() {
                frames.push(read_msra_bin(&gesture.join(format!("{f:06}_depth.bin")), intrinsics)?);
                let i = samples.len();
                samples.push(SampleEntry { frame: frame_name(i), label_line: i, subject: Some(subject.clone()), com: None });
                labels.push(js);
            }
        }
    }
    let descriptor = DatasetDescriptor {
        name: "msra".into(),
        topology: DatasetId::Msra,
        intrinsics,
        labels: LABELS_FILE.to_string(),
        samples,
    };
    let ds = Dataset { descriptor, root: out_dir.to_path_buf(), frames, labels };
    ds.write(out_dir)?;
    Ok(ds.descriptor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn listing_counts() {
        let p = Path::new("labels.txt");
        let vals: Vec<String> = (0..48).map(|i| format!("{}", i as f64 + 0.5)).collect();
        let line = format!("img/0001.png {}\n", vals.join(" "));
        let parsed = parse_uvd_listing(&line, p, 16).unwrap();
        assert_eq!(parsed[0].uvd.len(), 16);
        assert_eq!(parsed[0].uvd[1], [3.5, 4.5, 5.5]);
        let short = format!("a.png 1 2 3\n{}", line.replacen(" 47.5", "", 1));
        match parse_uvd_listing(&short, p, 1) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn msra_bin_box() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("000000_depth.bin");
        let mut bytes = Vec::new();
        for v in [4u32, 3, 1, 1, 3, 2] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        for d in [500.0f32, 0.0] {
            bytes.extend_from_slice(&d.to_le_bytes());
        }
        fs::write(&path, &bytes).unwrap();
        let f = read_msra_bin(&path, Intrinsics::msra()).unwrap();
        assert_eq!((f.width, f.height), (4, 3));
        assert_eq!(f.at(1, 1), 500.0);
        assert_eq!(f.depth.iter().filter(|&&d| d > 0.0).count(), 1);
        fs::write(&path, &bytes[..28]).unwrap();
        assert!(read_msra_bin(&path, Intrinsics::msra()).is_err());
    }

    #[test]
    fn msra_joints_flip_axes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("joint.txt");
        let row: Vec<String> = (0..63).map(|i| (i as f64).to_string()).collect();
        fs::write(&path, format!("1\n{}\n", row.join(" "))).unwrap();
        let js = read_msra_joints(&path).unwrap();
        assert_eq!(js[0].joints[1], [3.0, -4.0, -5.0]);
        fs::write(&path, format!("2\n{}\n", row.join(" "))).unwrap();
        assert!(read_msra_joints(&path).is_err());
    }
}
