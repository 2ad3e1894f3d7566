//! Overfits the full network on a handful of synthetic frames and reports
//! the training error as it goes.
//!
//! cargo run --release -p handpose --example overfit -- --frames 8 --epochs 300

use std::time::Instant;

use clap::Parser;
use handpose::data::{generate_synthetic, SyntheticSpec};
use handpose::eval::evaluate;
use handpose::network::{Network, NetworkConfig};
use handpose::topology::DatasetId;
use handpose::train::{train, RegressionUnits, TrainConfig, TrainOutputs};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
struct Args {
    #[arg(long, default_value = "msra")]
    dataset: DatasetId,
    #[arg(long, default_value_t = 8)]
    frames: usize,
    #[arg(long, default_value_t = 300)]
    epochs: usize,
    #[arg(long, default_value_t = 1)]
    batch: usize,
    /// Epochs per printed loss summary.
    #[arg(long, default_value_t = 50)]
    report_every: usize,
    #[arg(long)]
    millimetres: bool,
    #[arg(long, default_value_t = 0.002)]
    lr: f64,
    #[arg(long, default_value_t = 0.96)]
    decay: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda_w: f64,
    #[arg(long, default_value_t = 0.3)]
    dropout: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

fn main() -> handpose::Result<()> {
    let args = Args::parse();
    let data = generate_synthetic(&SyntheticSpec::for_dataset(args.dataset, args.seed), args.frames)?;
    let net_cfg = NetworkConfig { dropout_rate: args.dropout, ..NetworkConfig::desk(args.dataset) };
    let mut net = Network::build(&net_cfg, &mut ChaCha8Rng::seed_from_u64(args.seed))?;
    println!("{} parameters", net.parameter_count());
    let mut cfg = TrainConfig {
        batch_size: args.batch,
        epochs: args.epochs,
        lr0: args.lr,
        lr_decay: args.decay,
        augment: false,
        seed: args.seed,
        checkpoint_every: 0,
        ..TrainConfig::default()
    };
    cfg.weights.lambda_w = args.lambda_w;
    if args.millimetres {
        cfg.regression_units = RegressionUnits::Millimetres;
    }
    let start = Instant::now();
    let report = train(&mut net, &data, &cfg, &TrainOutputs::default())?;
    for chunk in report.rows.chunk_by(|a, b| a.epoch / args.report_every == b.epoch / args.report_every) {
        let n = chunk.len() as f64;
        let mean = |f: fn(&handpose::train::LogRow) -> f64| chunk.iter().map(f).sum::<f64>() / n;
        println!(
            "epochs {:4}-{:4}  total {:10.4}  l_r {:10.4}  r_w {:9.3}  l_ht_f {:8.3}",
            chunk[0].epoch,
            chunk[chunk.len() - 1].epoch,
            mean(|r| r.total),
            mean(|r| r.l_r),
            mean(|r| r.r_w),
            mean(|r| r.l_ht_f),
        );
    }
    let first = report.first_total().unwrap_or(f64::NAN);
    let last = report.last_total().unwrap_or(f64::NAN);
    println!("total loss {first:.4} -> {last:.4} ({:.2}% of initial)", 100.0 * last / first);
    println!("train error {:.2} mm after {:.0}s", evaluate(&net, &data)?.mean_error_mm, start.elapsed().as_secs_f64());
    Ok(())
}
