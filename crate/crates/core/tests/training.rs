use std::fs;

use handpose::data::{generate_synthetic, Dataset, SyntheticSpec};
use handpose::network::{ablation_matrix, ForwardOptions, Network, NetworkConfig};
use handpose::preprocess::PATCH_SIZE;
use handpose::topology::DatasetId;
use handpose::train::{prepare, train, TrainConfig, TrainOutputs};
use handpose::Error;
use handpose_autodiff::{Tape, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_net(dataset: DatasetId, use_concat: bool, use_hmt: bool) -> NetworkConfig {
    NetworkConfig {
        dataset,
        use_concat,
        use_hmt,
        base_channels: 4,
        feature_channels: 6,
        fc_width: 32,
        shared_channels: 4,
        joint_channels: 3,
        ..NetworkConfig::default()
    }
}

fn four_samples() -> Dataset {
    generate_synthetic(&SyntheticSpec::for_dataset(DatasetId::Icvl, 12), 4).unwrap()
}

/// 50 full-batch steps on the same 4 samples.
fn fifty_steps() -> TrainConfig {
    TrainConfig { batch_size: 4, epochs: 50, augment: false, checkpoint_every: 0, seed: 3, ..TrainConfig::default() }
}

#[test]
fn every_variant_trains() {
    let data = four_samples();
    for cfg in ablation_matrix(&small_net(DatasetId::Icvl, true, true)) {
        let mut net = Network::build(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let report = train(&mut net, &data, &fifty_steps(), &TrainOutputs::default()).unwrap();
        assert_eq!(report.steps, 50);
        let (first, last) = (report.first_total().unwrap(), report.last_total().unwrap());
        assert!(last < first, "{}: {first} -> {last}", cfg.variant_name());
        assert!(last < 0.5 * first, "{}: {first} -> {last}", cfg.variant_name());
    }
}

#[test]
fn regression_alone_still_learns() {
    let data = four_samples();
    let mut cfg = fifty_steps();
    cfg.weights.lambda_f = 0.0;
    cfg.weights.lambda_hmt = 0.0;
    let mut net = Network::build(&small_net(DatasetId::Icvl, true, true), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    let report = train(&mut net, &data, &cfg, &TrainOutputs::default()).unwrap();
    let head: f64 = report.rows[..5].iter().map(|r| r.l_r).sum::<f64>() / 5.0;
    let tail: f64 = report.rows[45..].iter().map(|r| r.l_r).sum::<f64>() / 5.0;
    assert!(tail < head, "l_r {head} -> {tail}");
}

#[test]
fn same_seed_gives_identical_checkpoints() {
    let data = four_samples();
    let dir = tempfile::tempdir().unwrap();
    let cfg = TrainConfig { batch_size: 2, epochs: 3, checkpoint_every: 1, seed: 9, ..TrainConfig::default() };
    for run in ["a", "b"] {
        let mut net = Network::build(&small_net(DatasetId::Icvl, true, true), &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        train(&mut net, &data, &cfg, &TrainOutputs::in_dir(dir.path().join(run))).unwrap();
    }
    for name in ["epoch_0001.ckpt", "epoch_0003.ckpt", "final.ckpt", "train_log.csv"] {
        let a = fs::read(dir.path().join("a").join(name)).unwrap();
        let b = fs::read(dir.path().join("b").join(name)).unwrap();
        assert!(a == b, "{name} differs");
    }
    let log = fs::read_to_string(dir.path().join("a/train_log.csv")).unwrap();
    assert_eq!(log.lines().next().unwrap(), "step,epoch,lr,l_ht_f,l_r,l_ht_hmt,r_w,total");
    assert_eq!(log.lines().count(), 1 + 3 * 2);
}

#[test]
fn checkpoint_restores_predictions() {
    let data = four_samples();
    let dir = tempfile::tempdir().unwrap();
    let net = Network::build(&small_net(DatasetId::Icvl, true, false), &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
    net.save(dir.path().join("n.ckpt")).unwrap();
    let back = Network::load(dir.path().join("n.ckpt")).unwrap();
    assert_eq!(back.config(), net.config());
    let patch = &prepare(&data).unwrap()[0].patch;
    let (a, b) = (net.predict(patch).unwrap(), back.predict(patch).unwrap());
    // checkpoints store single precision
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-3 * (1.0 + x.abs()));
    }
}

#[test]
fn predecessor_heatmap_feeds_successor() {
    let data = four_samples();
    let net = Network::build(&small_net(DatasetId::Icvl, true, true), &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
    let patch = prepare(&data).unwrap().remove(0).patch;
    let run = |zero: Option<usize>| {
        let mut tape = Tape::new();
        let bound = net.store().bind_frozen(&mut tape);
        let x = tape.constant(Tensor::new(vec![1, 1, PATCH_SIZE, PATCH_SIZE], patch.clone()).unwrap());
        let opts = ForwardOptions { training: false, zero_predecessor_of: zero };
        let out = net.forward(&mut tape, &bound, x, opts, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        tape.value(out.hmt_heatmaps).data().to_vec()
    };
    let base = run(None);
    let cells = 24 * 24;
    let topo = net.topology().clone();
    // every non-root joint that has a predecessor
    for chain in &topo.chains {
        for &j in chain {
            let probed = run(Some(j));
            let own: f64 = (j * cells..(j + 1) * cells).map(|i| (probed[i] - base[i]).abs()).sum();
            assert!(own > 0.0, "joint {j} ignores its predecessor");
            for other in (0..topo.joint_count).filter(|&o| o != j && !chain.contains(&o)) {
                let diff: f64 = (other * cells..(other + 1) * cells).map(|i| (probed[i] - base[i]).abs()).sum();
                assert_eq!(diff, 0.0, "probing joint {j} disturbed unrelated joint {other}");
            }
        }
    }
}

#[test]
fn topology_mismatch_rejected() {
    let data = four_samples();
    let mut net = Network::build(&small_net(DatasetId::Msra, true, true), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert!(matches!(train(&mut net, &data, &fifty_steps(), &TrainOutputs::default()), Err(Error::Config(_))));
}

#[test]
fn divergence_halts_with_last_good_checkpoint() {
    let data = four_samples();
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = fifty_steps();
    cfg.lr0 = 1e20;
    cfg.optimizer = handpose::train::OptimizerKind::Sgd;
    let mut net = Network::build(&small_net(DatasetId::Icvl, false, false), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let err = train(&mut net, &data, &cfg, &TrainOutputs::in_dir(dir.path())).unwrap_err();
    assert!(matches!(err, Error::NumericFault(_)), "{err}");
    // the faulting update is never applied; the checkpoint holds the state
    // training stopped in
    let good = Network::load(dir.path().join("last_good.ckpt")).unwrap();
    for (a, b) in good.store().params().iter().zip(net.store().params()) {
        assert!(b.tensor.data().iter().all(|v| v.is_finite()), "{}", b.name);
        let cast: Vec<f64> = b.tensor.data().iter().map(|&v| f64::from(v as f32)).collect();
        assert_eq!(a.tensor.data(), &cast[..], "{}", a.name);
    }
    assert!(dir.path().join("train_log.csv").is_file());
}
