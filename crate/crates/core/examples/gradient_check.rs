//! Finite-difference check of the full objective through a small network.
//!
//! cargo run -p handpose --example gradient_check

use handpose::data::{generate_synthetic, SyntheticSpec};
use handpose::heatmap::render_targets;
use handpose::loss::{record_loss, LossInputs, LossWeights};
use handpose::network::{ForwardOptions, Network, NetworkConfig};
use handpose::preprocess::PATCH_SIZE;
use handpose::topology::DatasetId;
use handpose::train::prepare;
use handpose_autodiff::{gradient_check_report, Coordinates, Tensor, TensorError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> handpose::Result<()> {
    let cfg = NetworkConfig {
        dataset: DatasetId::Icvl,
        base_channels: 3,
        feature_channels: 4,
        fc_width: 16,
        shared_channels: 3,
        joint_channels: 2,
        ..NetworkConfig::default()
    };
    let net = Network::build(&cfg, &mut ChaCha8Rng::seed_from_u64(0))?;
    let sample = prepare(&generate_synthetic(&SyntheticSpec::for_dataset(DatasetId::Icvl, 0), 1)?)?.remove(0);
    let j = net.joint_count();
    let n = net.store().len();
    let targets = render_targets(&sample.labels, 24, 1.5);

    let mut inputs: Vec<Tensor> = net.store().params().iter().map(|p| p.tensor.clone()).collect();
    // off the +1 background plateau, where pooling has exact ties
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let patch = sample.patch.iter().map(|v| v - rng.random_range(0.0..0.02)).collect();
    inputs.push(Tensor::new(vec![1, 1, PATCH_SIZE, PATCH_SIZE], patch)?);

    let contract = |e: handpose::Error| TensorError::Contract(e.to_string());
    let report = gradient_check_report(
        |tape, v| {
            let out = net
                .forward(tape, &v[..n], v[n], ForwardOptions::train(), &mut ChaCha8Rng::seed_from_u64(2))
                .map_err(contract)?;
            let li = LossInputs {
                feature_heatmaps: out.feature_heatmaps,
                hmt_heatmaps: out.hmt_heatmaps,
                joints: out.joints,
                target_heatmaps: tape.constant(Tensor::new(vec![1, j, 24, 24], targets.clone())?),
                target_joints: tape.constant(Tensor::new(vec![1, 3 * j], sample.labels.clone())?),
                regularized: net.store().regularized_vars(&v[..n]),
            };
            Ok(record_loss(tape, &li, &LossWeights::default()).map_err(contract)?.total)
        },
        &inputs,
        1e-5,
        Coordinates::Sample(8),
        &mut ChaCha8Rng::seed_from_u64(3),
    )?;
    println!("{} parameters in {n} tensors", net.parameter_count());
    println!("checked {} coordinates", report.coordinates_checked);
    println!("max relative error {:.3e} (max absolute {:.3e})", report.max_relative_error, report.max_abs_error);
    if let Some((input, i, a, num)) = report.worst {
        let name = net.store().params().get(input).map_or("input patch", |p| p.name.as_str());
        println!("worst: {name}[{i}] analytic {a:.6e} numeric {num:.6e}");
    }
    Ok(())
}
