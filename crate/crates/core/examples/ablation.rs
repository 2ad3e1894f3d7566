//! Trains the four feature/regressor variants on the same synthetic split
//! and prints their errors. Logs land in `<out>/<variant>/train_log.csv`.
//!
//! cargo run --release -p handpose --example ablation -- --frames 32 --epochs 20

use std::path::PathBuf;

use clap::Parser;
use handpose::ablation::run_ablation;
use handpose::data::{generate_synthetic, SyntheticSpec};
use handpose::network::NetworkConfig;
use handpose::topology::DatasetId;
use handpose::train::{RegressionUnits, TrainConfig};

#[derive(Parser)]
struct Args {
    #[arg(long, default_value_t = 32)]
    frames: usize,
    /// Fraction of frames used for training.
    #[arg(long, default_value_t = 0.75)]
    train_fraction: f64,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 8)]
    batch: usize,
    #[arg(long, default_value_t = 11)]
    seed: u64,
    #[arg(long, default_value = "ablation")]
    out: PathBuf,
}

fn main() -> handpose::Result<()> {
    let args = Args::parse();
    let data = generate_synthetic(&SyntheticSpec::for_dataset(DatasetId::Msra, args.seed), args.frames)?;
    let cut = ((args.frames as f64 * args.train_fraction) as usize).clamp(1, args.frames - 1);
    let train_set = data.subset(&(0..cut).collect::<Vec<_>>());
    let test_set = data.subset(&(cut..args.frames).collect::<Vec<_>>());
    let cfg = TrainConfig {
        batch_size: args.batch,
        epochs: args.epochs,
        seed: args.seed,
        regression_units: RegressionUnits::Millimetres,
        checkpoint_every: 0,
        ..TrainConfig::default()
    };
    std::fs::create_dir_all(&args.out)?;
    let results = run_ablation(&NetworkConfig::desk(DatasetId::Msra), &cfg, &train_set, &test_set, Some(&args.out))?;
    println!("{:<12} {:>9} {:>11} {:>11}", "variant", "params", "train mm", "test mm");
    for r in results {
        println!("{:<12} {:>9} {:>11.2} {:>11.2}", r.variant, r.parameters, r.train_error_mm, r.test_error_mm);
    }
    Ok(())
}
