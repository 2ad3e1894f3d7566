//! Converts a pixel-coordinate label listing with 16-bit PNG depth images
//! (the ICVL layout) into the canonical format. Builds a tiny listing from a
//! synthetic frame first so the example is self-contained.
//!
//! cargo run -p handpose --example import_listing -- /tmp/listing

use std::fmt::Write as _;
use std::path::PathBuf;

use handpose::camera::project;
use handpose::data::{generate_synthetic, import_uvd_listing, Dataset, SyntheticSpec};
use handpose::topology::DatasetId;

fn main() -> handpose::Result<()> {
    let root = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "listing".into()));
    std::fs::create_dir_all(root.join("images"))?;
    let spec = SyntheticSpec::for_dataset(DatasetId::Icvl, 1);
    let k = spec.intrinsics;
    let data = generate_synthetic(&spec, 3)?;

    let mut listing = String::new();
    for (i, (f, joints)) in data.frames.iter().zip(&data.labels).enumerate() {
        let name = format!("images/{i:04}.png");
        let raw: Vec<u16> = f.depth.iter().map(|&d| d as u16).collect();
        image::ImageBuffer::<image::Luma<u16>, _>::from_raw(f.width as u32, f.height as u32, raw)
            .expect("frame dimensions")
            .save(root.join(&name))?;
        listing.push_str(&name);
        for &p in &joints.joints {
            let [u, v, d] = project(p, &k)?;
            write!(listing, " {u:.4} {v:.4} {d:.4}").expect("string write");
        }
        listing.push('\n');
    }
    std::fs::write(root.join("labels.txt"), listing)?;

    let descriptor = import_uvd_listing(DatasetId::Icvl, &root.join("labels.txt"), &root, &root.join("canonical"), k)?;
    let back = Dataset::load(root.join("canonical"))?;
    println!("imported {} frames as {:?}", back.len(), descriptor.name);
    let worst = back
        .labels
        .iter()
        .zip(&data.labels)
        .flat_map(|(a, b)| a.joints.iter().zip(&b.joints).map(|(p, q)| (0..3).map(|i| (p[i] - q[i]).abs()).fold(0.0, f64::max)))
        .fold(0.0, f64::max);
    println!("largest joint deviation after the pixel round trip: {worst:.2e} mm (listing keeps 4 decimals)");
    Ok(())
}
