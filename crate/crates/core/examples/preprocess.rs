//! Crops one synthetic frame around its centre of mass, applies a random
//! augmentation, and writes the patches and joint heatmaps as PNGs.
//!
//! cargo run -p handpose --example preprocess -- /tmp/preview

use std::path::PathBuf;

use handpose::data::{generate_synthetic, SyntheticSpec};
use handpose::heatmap::{decode_argmax, render, patch_to_grid, Heatmap, HEATMAP_SIZE, DEFAULT_SIGMA};
use handpose::preprocess::{augment, compute_com, crop_normalize, AugmentRanges, PATCH_SIZE};
use handpose::topology::DatasetId;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn save_patch(values: &[f64], path: PathBuf) -> handpose::Result<()> {
    // near is bright, background black
    let pixels = values.iter().map(|v| ((1.0 - v) * 127.5).round() as u8).collect();
    image::GrayImage::from_raw(PATCH_SIZE as u32, PATCH_SIZE as u32, pixels).expect("96x96").save(path)?;
    Ok(())
}

fn main() -> handpose::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "preview".into()));
    std::fs::create_dir_all(&out)?;
    let data = generate_synthetic(&SyntheticSpec::for_dataset(DatasetId::Msra, 3), 1)?;
    let (frame, joints) = (&data.frames[0], &data.labels[0]);

    let crop = compute_com(frame)?;
    println!("crop centre {:?} mm, half extent {:?}", crop.center, crop.half_extent);
    save_patch(&crop_normalize(frame, &crop)?.values, out.join("patch.png"))?;

    let params = AugmentRanges::default().sample(&mut ChaCha8Rng::seed_from_u64(1));
    println!("augmentation: {params:?}");
    let (patch, labels) = augment(frame, &crop, joints, &params)?;
    save_patch(&patch.values, out.join("patch_augmented.png"))?;

    let mut sum = vec![0.0; HEATMAP_SIZE * HEATMAP_SIZE];
    for (j, xyz) in labels.chunks_exact(3).enumerate() {
        let h = render(patch_to_grid([xyz[0], xyz[1]], HEATMAP_SIZE), DEFAULT_SIGMA, HEATMAP_SIZE, j)?;
        if j < 3 {
            println!("joint {j}: label ({:+.3}, {:+.3}) -> peak cell {:?}", xyz[0], xyz[1], decode_argmax(&h));
        }
        for (s, v) in sum.iter_mut().zip(&h.values) {
            *s = f64::max(*s, *v);
        }
    }
    Heatmap::from_values(HEATMAP_SIZE, 0, sum)?.save_png(out.join("heatmaps.png"))?;
    println!("wrote patch.png, patch_augmented.png, heatmaps.png to {}", out.display());
    Ok(())
}
