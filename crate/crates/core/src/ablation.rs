//! Trains and evaluates the four feature/regressor combinations under one
//! training configuration.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::data::Dataset;
use crate::error::Result;
use crate::eval::evaluate;
use crate::network::{ablation_matrix, Network, NetworkConfig};
use crate::train::{train, TrainConfig, TrainOutputs};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationResult {
    pub variant: String,
    pub use_concat: bool,
    pub use_hmt: bool,
    pub train_error_mm: f64,
    pub test_error_mm: f64,
    pub initial_total: f64,
    pub final_total: f64,
    pub parameters: usize,
}

/// Every variant starts from weights drawn with `cfg.seed`. With `out_dir`
/// set, each variant writes `<out_dir>/<variant>/train_log.csv` and its
/// checkpoints, and a `summary.csv` collects the results.
pub fn run_ablation(
    base: &NetworkConfig,
    cfg: &TrainConfig,
    train_set: &Dataset,
    test_set: &Dataset,
    out_dir: Option<&Path>,
) -> Result<Vec<AblationResult>> {
    let mut results = Vec::with_capacity(4);
    for net_cfg in ablation_matrix(base) {
        let name = net_cfg.variant_name();
        let mut net = Network::build(&net_cfg, &mut ChaCha8Rng::seed_from_u64(cfg.seed))?;
        let outputs = match out_dir {
            Some(d) => TrainOutputs::in_dir(d.join(name)),
            None => TrainOutputs::default(),
        };
        let report = train(&mut net, train_set, cfg, &outputs)?;
        let r = AblationResult {
            variant: name.to_string(),
            use_concat: net_cfg.use_concat,
            use_hmt: net_cfg.use_hmt,
            train_error_mm: evaluate(&net, train_set)?.mean_error_mm,
            test_error_mm: evaluate(&net, test_set)?.mean_error_mm,
            initial_total: report.first_total().unwrap_or(f64::NAN),
            final_total: report.last_total().unwrap_or(f64::NAN),
            parameters: net.parameter_count(),
        };
        log::info!("{name}: test {:.2} mm, train {:.2} mm", r.test_error_mm, r.train_error_mm);
        results.push(r);
    }
    if let Some(d) = out_dir {
        let mut w = csv::Writer::from_path(d.join("summary.csv"))?;
        for r in &results {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    Ok(results)
}
