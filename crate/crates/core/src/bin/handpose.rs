use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use handpose::ablation::run_ablation;
use handpose::bench::bench_inference;
use handpose::camera::Intrinsics;
use handpose::config::RunConfig;
use handpose::data::{generate_synthetic, import_msra, import_uvd_listing, Dataset, SyntheticSpec};
use handpose::eval::{evaluate, write_success_curve};
use handpose::network::Network;
use handpose::preprocess::{compute_com, crop_normalize, denormalize_prediction};
use handpose::topology::DatasetId;
use handpose::train::{train, TrainOutputs};
use handpose::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "handpose", version, about = "3D hand pose estimation from single depth frames")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Icvl,
    Nyu,
    Msra,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a public dataset layout to the canonical format.
    Prepare {
        #[arg(long, value_enum)]
        format: Format,
        /// Pixel listing (icvl, nyu); unused for msra.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Image root (icvl, nyu) or the directory holding P0..P8 (msra).
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override intrinsics as fx,fy,cx,cy.
        #[arg(long, value_parser = parse_intrinsics)]
        intrinsics: Option<Intrinsics>,
    },
    /// Generate a synthetic dataset.
    Synth {
        #[arg(long, default_value = "msra")]
        dataset: DatasetId,
        #[arg(long, default_value_t = 64)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Tag samples with this many round-robin subjects (P0, P1, ...).
        #[arg(long, default_value_t = 0)]
        subjects: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train from a config file.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// key.path=value overrides, e.g. train.epochs=5
        #[arg(long = "set")]
        overrides: Vec<String>,
    },
    /// Evaluate a checkpoint on a dataset.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Success-curve CSV output.
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Predict joints for one frame (canonical .bin or 16-bit PNG).
    Infer {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        frame: PathBuf,
        #[arg(long, value_parser = parse_intrinsics)]
        intrinsics: Option<Intrinsics>,
    },
    /// Inference throughput report.
    Bench {
        /// Checkpoint to time; without one, a fresh network from --config.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        frames: usize,
        #[arg(long, default_value_t = 1)]
        batch: usize,
    },
    /// Train and evaluate all four feature/regressor variants.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set")]
        overrides: Vec<String>,
    },
}

fn parse_intrinsics(s: &str) -> std::result::Result<Intrinsics, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect::<std::result::Result<_, _>>()?;
    match v[..] {
        [fx, fy, cx, cy] => Intrinsics::new(fx, fy, cx, cy).map_err(|e| e.to_string()),
        _ => Err("expected fx,fy,cx,cy".into()),
    }
}

fn need(p: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    p.clone().ok_or_else(|| Error::Config(format!("missing data.{what} in config")))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Prepare { format, labels, images, out, intrinsics } => {
            let d = match format {
                Format::Msra => import_msra(&images, &out, intrinsics.unwrap_or_else(Intrinsics::msra))?,
                Format::Icvl | Format::Nyu => {
                    let (id, k) = match format {
                        Format::Icvl => (DatasetId::Icvl, Intrinsics::icvl()),
                        _ => (DatasetId::Nyu, Intrinsics::nyu()),
                    };
                    let labels = labels.ok_or_else(|| Error::Config("--labels is required".into()))?;
                    import_uvd_listing(id, &labels, &images, &out, intrinsics.unwrap_or(k))?
                }
            };
            println!("wrote {} samples to {}", d.len(), out.display());
        }
        Command::Synth { dataset, n, seed, subjects, out } => {
            let spec = SyntheticSpec { subjects, ..SyntheticSpec::for_dataset(dataset, seed) };
            generate_synthetic(&spec, n)?.write(&out)?;
            println!("wrote {n} synthetic {dataset} samples to {}", out.display());
        }
        Command::Train { config, overrides } => {
            let cfg = RunConfig::load(&config, &overrides)?;
            let data = Dataset::load(need(&cfg.data.train, "train")?)?;
            let out = cfg.data.output.clone().unwrap_or_else(|| PathBuf::from("run"));
            let mut net = Network::build(&cfg.network, &mut ChaCha8Rng::seed_from_u64(cfg.train.seed))?;
            std::fs::create_dir_all(&out)?;
            std::fs::write(out.join("config.toml"), cfg.to_toml()?)?;
            let report = train(&mut net, &data, &cfg.train, &TrainOutputs::in_dir(&out))?;
            println!(
                "{} steps, total loss {:.5} -> {:.5}; checkpoint {}",
                report.steps,
                report.first_total().unwrap_or(f64::NAN),
                report.last_total().unwrap_or(f64::NAN),
                out.join("final.ckpt").display()
            );
            if let Some(test) = &cfg.data.test {
                let r = evaluate(&net, &Dataset::load(test)?)?;
                println!("test mean error {:.2} mm over {} frames", r.mean_error_mm, r.frames);
            }
        }
        Command::Eval { checkpoint, data, curve } => {
            let net = Network::load(&checkpoint)?;
            let r = evaluate(&net, &Dataset::load(&data)?)?;
            println!("frames          {}", r.frames);
            println!("mean error      {:.3} mm", r.mean_error_mm);
            for (j, e) in r.per_joint_mean_mm.iter().enumerate() {
                println!("  joint {j:2} ({:>12})  {e:.3} mm", net.topology().joint_names[j]);
            }
            if let Some(path) = curve {
                write_success_curve(&path, &r.success_curve)?;
                println!("success curve written to {}", path.display());
            }
        }
        Command::Infer { checkpoint, frame, intrinsics } => {
            let net = Network::load(&checkpoint)?;
            let k = intrinsics.unwrap_or_else(|| match net.config().dataset {
                DatasetId::Nyu => Intrinsics::nyu(),
                DatasetId::Icvl => Intrinsics::icvl(),
                DatasetId::Msra => Intrinsics::msra(),
            });
            let f = handpose::data::read_depth_image(&frame, k)?;
            let crop = compute_com(&f)?;
            let pred = net.predict(&crop_normalize(&f, &crop)?.values)?;
            for p in denormalize_prediction(&pred, &crop, net.joint_count())?.joints {
                println!("{} {} {}", p[0], p[1], p[2]);
            }
        }
        Command::Bench { checkpoint, config, frames, batch } => {
            let net = match (checkpoint, config) {
                (Some(c), _) => Network::load(c)?,
                (None, Some(c)) => {
                    let cfg = RunConfig::load(c, &[])?;
                    Network::build(&cfg.network, &mut ChaCha8Rng::seed_from_u64(cfg.train.seed))?
                }
                (None, None) => return Err(Error::Config("bench needs --checkpoint or --config".into())),
            };
            println!("{}", bench_inference(&net, frames, batch, 0)?);
        }
        Command::Ablate { config, overrides } => {
            let cfg = RunConfig::load(&config, &overrides)?;
            let train_set = Dataset::load(need(&cfg.data.train, "train")?)?;
            let test_set = Dataset::load(need(&cfg.data.test, "test")?)?;
            let out = cfg.data.output.clone().unwrap_or_else(|| PathBuf::from("ablation"));
            std::fs::create_dir_all(&out)?;
            for r in run_ablation(&cfg.network, &cfg.train, &train_set, &test_set, Some(&out))? {
                println!("{:<12} test {:8.3} mm   train {:8.3} mm", r.variant, r.test_error_mm, r.train_error_mm);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
