//! Trains briefly, saves a checkpoint, reloads it and evaluates: mean error,
//! per-joint error and the success curve (written as CSV).
//!
//! cargo run --release -p handpose --example evaluate -- /tmp/eval

use std::path::PathBuf;

use handpose::data::{generate_synthetic, SyntheticSpec};
use handpose::eval::{evaluate, write_success_curve};
use handpose::network::{Network, NetworkConfig};
use handpose::topology::DatasetId;
use handpose::train::{train, TrainConfig, TrainOutputs};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> handpose::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "eval_run".into()));
    let data = generate_synthetic(&SyntheticSpec::for_dataset(DatasetId::Icvl, 5), 24)?;
    let train_set = data.subset(&(0..16).collect::<Vec<_>>());
    let test_set = data.subset(&(16..24).collect::<Vec<_>>());

    let mut net = Network::build(&NetworkConfig::desk(DatasetId::Icvl), &mut ChaCha8Rng::seed_from_u64(5))?;
    let cfg = TrainConfig { batch_size: 8, epochs: 5, checkpoint_every: 5, ..TrainConfig::default() };
    let report = train(&mut net, &train_set, &cfg, &TrainOutputs::in_dir(&out))?;
    println!("{} steps; log and checkpoints in {}", report.steps, out.display());

    let net = Network::load(out.join("final.ckpt"))?;
    let r = evaluate(&net, &test_set)?;
    println!("mean error {:.2} mm over {} frames", r.mean_error_mm, r.frames);
    for (name, e) in net.topology().joint_names.iter().zip(&r.per_joint_mean_mm) {
        println!("  {name:<14} {e:7.2} mm");
    }
    for (t, f) in r.success_curve.iter().step_by(10) {
        println!("  worst joint <= {t:>4} mm: {:5.1}% of frames", 100.0 * f);
    }
    write_success_curve(out.join("success.csv"), &r.success_curve)?;
    Ok(())
}
