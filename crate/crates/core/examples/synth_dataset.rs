//! Generates a seeded synthetic dataset in the canonical on-disk format and
//! reads it back.
//!
//! cargo run -p handpose --example synth_dataset -- /tmp/synth icvl 16

use handpose::data::{generate_synthetic, Dataset, SyntheticSpec};
use handpose::preprocess::compute_com;
use handpose::topology::DatasetId;

fn main() -> handpose::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "synthetic".into());
    let dataset: DatasetId = args.next().as_deref().unwrap_or("msra").parse()?;
    let n: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(16);

    let spec = SyntheticSpec { subjects: 3, ..SyntheticSpec::for_dataset(dataset, 42) };
    let data = generate_synthetic(&spec, n)?;
    data.write(&out)?;

    let back = Dataset::load(&out)?;
    println!("{} frames of {}x{} written to {out}", back.len(), back.frames[0].width, back.frames[0].height);
    for (i, (f, s)) in back.frames.iter().zip(&back.descriptor.samples).take(4).enumerate() {
        let com = compute_com(f)?.center;
        let planted = s.com.unwrap_or_default();
        println!(
            "  #{i} subject {:<3} COM ({:7.1}, {:7.1}, {:6.1}) mm, planted ({:7.1}, {:7.1}, {:6.1})",
            s.subject.as_deref().unwrap_or("-"),
            com[0], com[1], com[2], planted[0], planted[1], planted[2]
        );
    }
    Ok(())
}
