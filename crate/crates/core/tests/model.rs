mod common;

use affect_mtl::model::{parameter_count, Checkpoint, EncodedExample, Model, ModelConfig, TaskMode};
use affect_mtl::features::FeatureLayout;
use autodiff::{Adam, AdamConfig};
use common::{corpus, encode, tiny_config};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FEATURES: usize = 3;

fn data(n: usize) -> Vec<EncodedExample> {
    encode(&corpus(n, 11), FEATURES)
}

#[test]
fn parameter_count_matches_registry() {
    for mode in [TaskMode::StlClass, TaskMode::StlIntensity, TaskMode::Mtl] {
        for fw in [0, 5] {
            let cfg = tiny_config(mode, 1);
            let m = Model::build(&cfg, fw).unwrap();
            assert_eq!(m.params.num_scalars(), parameter_count(&cfg, fw), "{mode:?} {fw}");
        }
    }
    let cfg = ModelConfig {
        embed_dim: 10,
        gru_hidden: 3,
        filter_widths: vec![2, 4],
        filters_per_width: 5,
        ..ModelConfig::default()
    };
    let by_hand = 2 * 3 * (10 * 3 + 3 * 3 + 3) + (2 * 6 * 5 + 5) + (4 * 6 * 5 + 5) + (12 * 7 + 7) + (12 + 1);
    assert_eq!(parameter_count(&cfg, 2), by_hand);
}

#[test]
fn stl_models_have_only_their_head() {
    let names = |mode| {
        Model::build(&tiny_config(mode, 1), 0)
            .unwrap()
            .params
            .iter()
            .map(|(_, p)| p.name().to_string())
            .collect::<Vec<_>>()
    };
    let class = names(TaskMode::StlClass);
    assert!(class.iter().any(|n| n.starts_with("head.class")));
    assert!(!class.iter().any(|n| n.starts_with("head.intensity")));
    let reg = names(TaskMode::StlIntensity);
    assert!(!reg.iter().any(|n| n.starts_with("head.class")));
    assert!(reg.iter().any(|n| n.starts_with("head.intensity")));
}

#[test]
fn outputs_are_well_formed_and_deterministic() {
    let ex = data(40);
    let m = Model::build(&tiny_config(TaskMode::Mtl, 3), FEATURES).unwrap();
    let a = m.predict(&ex).unwrap();
    let b = m.predict(&ex).unwrap();
    assert_eq!(a, b);
    for p in &a {
        let probs = p.class_probs.unwrap();
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let v = p.intensity.unwrap();
        assert!(v > 0.0 && v < 1.0);
        assert_eq!(p.representation.combined.len(), m.combined_width());
        assert_eq!(p.representation.handcrafted.len(), FEATURES);
    }
}

#[test]
fn batching_and_padding_do_not_change_outputs() {
    let ex = data(20);
    let m = Model::build(&tiny_config(TaskMode::Mtl, 4), FEATURES).unwrap();
    let batched = m.predict(&ex).unwrap();
    for (e, p) in ex.iter().zip(&batched) {
        let single = m.predict(std::slice::from_ref(e)).unwrap().remove(0);
        for (x, y) in single.representation.combined.iter().zip(&p.representation.combined) {
            assert!((x - y).abs() < 1e-12);
        }
        let mut noisy = e.clone();
        let start = noisy.matrix.length * noisy.matrix.dim;
        noisy.matrix.values[start..].iter_mut().for_each(|v| *v = 9.0);
        let n = m.predict(&[noisy]).unwrap().remove(0);
        assert_eq!(n.representation.combined, single.representation.combined);
    }
}

#[test]
fn zero_lambda_leaves_intensity_head_without_gradient() {
    let ex = data(16);
    let cfg = ModelConfig {
        loss_weight_lambda: 0.0,
        ..tiny_config(TaskMode::Mtl, 5)
    };
    let mut m = Model::build(&cfg, FEATURES).unwrap();
    let mut adam = Adam::new(AdamConfig::default(), &m.params);
    let batch: Vec<&EncodedExample> = ex.iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    m.train_step(&mut adam, &batch, &mut rng).unwrap();
    for (_, p) in m.params.iter() {
        let zero = p.grad.iter().all(|&g| g == 0.0);
        if p.name().starts_with("head.intensity") {
            assert!(zero, "{}", p.name());
        } else if p.name().starts_with("head.class") {
            assert!(!zero, "{}", p.name());
        }
    }
}

#[test]
fn zero_patience_stops_after_first_flat_epoch() {
    let ex = data(48);
    let (train, dev) = ex.split_at(32);
    let cfg = ModelConfig {
        patience: 0,
        max_epochs: 20,
        ..tiny_config(TaskMode::Mtl, 6)
    };
    let mut m = Model::build(&cfg, FEATURES).unwrap();
    let out = m.train(train, dev).unwrap();
    let monitors: Vec<f64> = out
        .history
        .iter()
        .map(|r| (r.dev_pearson_class.unwrap() + r.dev_pearson_intensity.unwrap()) / 2.0)
        .collect();
    let n = monitors.len();
    assert!(n == cfg.max_epochs || monitors[n - 1] <= monitors[..n - 1].iter().cloned().fold(f64::MIN, f64::max));
    assert!(monitors[..n - 1].windows(2).all(|w| w[1] > w[0]));
    assert_eq!(out.best_epoch, if n == cfg.max_epochs { n } else { n - 1 });
}

#[test]
fn loss_falls_over_early_epochs() {
    let ex = data(96);
    let (train, dev) = ex.split_at(64);
    for seed in [1, 2, 3] {
        let cfg = ModelConfig {
            max_epochs: 5,
            patience: 5,
            ..tiny_config(TaskMode::Mtl, seed)
        };
        let mut m = Model::build(&cfg, FEATURES).unwrap();
        let out = m.train(train, dev).unwrap();
        assert_eq!(out.history.len(), 5);
        assert!(out.history[4].train_loss < out.history[0].train_loss, "seed {seed}: {:?}", out.history);
    }
}

#[test]
fn training_is_reproducible_and_checkpoints_round_trip() {
    let ex = data(48);
    let (train, dev) = ex.split_at(32);
    let cfg = ModelConfig {
        max_epochs: 3,
        patience: 3,
        dropout: 0.3,
        ..tiny_config(TaskMode::Mtl, 8)
    };
    let run = || {
        let mut m = Model::build(&cfg, FEATURES).unwrap();
        let out = m.train(train, dev).unwrap();
        Checkpoint {
            model: m,
            feature_layout: FeatureLayout::default(),
            history: out.history,
            best_epoch: out.best_epoch,
            config_hash: "0123".into(),
        }
    };
    let a = run().to_bytes().unwrap();
    let b = run().to_bytes().unwrap();
    assert_eq!(a, b);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("checkpoint.bin");
    let ck = Checkpoint::from_bytes(&a).unwrap();
    ck.save(&path).unwrap();
    let loaded = Checkpoint::load(&path).unwrap();
    assert_eq!(loaded.to_bytes().unwrap(), a);
    assert_eq!(loaded.model.predict(&ex).unwrap(), ck.model.predict(&ex).unwrap());
    assert!(Checkpoint::from_bytes(&a[..a.len() - 8]).is_err());
}

#[test]
fn rejects_mismatched_inputs() {
    let ex = data(4);
    let m = Model::build(&tiny_config(TaskMode::Mtl, 1), FEATURES + 1).unwrap();
    assert!(m.predict(&ex).is_err());
    let mut unlabeled = ex.clone();
    unlabeled[0].intensity = None;
    let mut m = Model::build(&tiny_config(TaskMode::StlIntensity, 1), FEATURES).unwrap();
    assert!(m.train(&unlabeled, &ex).is_err());
    let mut c = Model::build(&tiny_config(TaskMode::StlClass, 1), FEATURES).unwrap();
    assert!(c.train(&unlabeled, &ex).is_ok());
}
