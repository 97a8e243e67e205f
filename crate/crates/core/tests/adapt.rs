use std::sync::Arc;

use geoadapt::adapt::*;
use geoadapt::geodata::*;
use geoadapt::models::Tensor;
use geoadapt::rng::derive_seed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tiles(style: &str, n: usize, size: usize, role: Role) -> Dataset {
    let style = style_by_name(style).unwrap();
    let samples = (0..n)
        .map(|i| {
            let mut t = generate_tile(&style, tile_seed(3, i), size).unwrap();
            t.domain.role = role;
            t
        })
        .collect();
    Dataset::from_samples(samples, 2)
}

fn small_data(n: usize) -> ExperimentData {
    let src = tiles("vegas", n, 32, Role::Source);
    let tgt = tiles("khartoum", n, 32, Role::Target);
    ExperimentData::from_datasets(&[src], &tgt, (0.75, 0.25), 0).unwrap()
}

fn config(mode: Mode, iterations: u64) -> TrainConfig {
    TrainConfig {
        mode,
        iterations,
        batch_size: 2,
        seg_lr: 1e-2,
        eval_every: 5,
        aug: None,
        ..TrainConfig::default()
    }
}

fn random_logits(rng: &mut ChaCha8Rng, shape: [usize; 4]) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-4.0..4.0)).collect()).unwrap()
}

#[test]
fn seg_loss_matches_scalar_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let logits = random_logits(&mut rng, [2, 5, 4, 3]);
    let masks: Vec<Mask> = (0..2)
        .map(|_| Mask::from_vec(5, 4, (0..20).map(|_| rng.random_range(0..3)).collect()).unwrap())
        .collect();
    let mut total = 0.0;
    for b in 0..2 {
        for y in 0..5 {
            for x in 0..4 {
                let z: Vec<f64> = (0..3).map(|k| logits.data()[((b * 5 + y) * 4 + x) * 3 + k]).collect();
                let denom: f64 = z.iter().map(|v| v.exp()).sum();
                total -= (z[masks[b].get(y, x) as usize].exp() / denom).ln();
            }
        }
    }
    let oracle = total / 40.0;
    assert!(((seg_loss(&logits, &masks).unwrap() - oracle) / oracle).abs() < 1e-6);

    let two = Tensor::from_vec([1, 1, 2, 2], vec![0.0f64; 4]).unwrap();
    let m = Mask::from_vec(1, 2, vec![0, 1]).unwrap();
    assert!((seg_loss(&two, std::slice::from_ref(&m)).unwrap() - 2f64.ln()).abs() < 1e-6);
    let sure = Tensor::from_vec([1, 1, 2, 2], vec![1000.0f64, -1000.0, -1000.0, 1000.0]).unwrap();
    assert!(seg_loss(&sure, &[m]).unwrap() < 1e-3);
}

#[test]
fn bce_matches_scalar_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let x: f64 = rng.random_range(-8.0..8.0);
        let y = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
        let s = 1.0 / (1.0 + (-x).exp());
        let oracle = -(y * s.ln() + (1.0 - y) * (1.0 - s).ln());
        assert!(((bce_with_logits(x, y) - oracle) / oracle).abs() < 1e-6);
    }
    let zeros = Tensor::<f64>::zeros([1, 2, 2, 1]);
    let (ld, ladv) = adversarial_losses(&zeros, &zeros).unwrap();
    assert!((ld - 2.0 * 2f64.ln()).abs() < 1e-12);
    assert!((ladv - 2f64.ln()).abs() < 1e-12);
}

#[test]
fn adversarial_loop_without_target_terms_reduces_to_source_only() {
    let data = small_data(16);
    let steps = 50;
    let mut so = TrainState::new(config(Mode::SourceOnly, steps), 2).unwrap();
    let mut cfg = config(Mode::Advent, steps);
    cfg.lambda_adv = 0.0;
    cfg.lambda_ent = 0.0;
    let mut adv = TrainState::new(cfg, 2).unwrap();
    let seed = derive_seed(0, &[1]);
    let mut src_a = BatchIterator::new(data.source_train.clone(), 2, seed).unwrap();
    let mut src_b = BatchIterator::new(data.source_train.clone(), 2, seed).unwrap();
    let mut tgt = BatchIterator::new(data.target_train.clone(), 2, seed).unwrap();
    for _ in 0..steps {
        train_step(&mut so, &src_a.next_batch().unwrap(), None).unwrap();
        train_step(&mut adv, &src_b.next_batch().unwrap(), Some(&tgt.next_batch().unwrap())).unwrap();
        assert_eq!(so.segmenter.params(), adv.segmenter.params());
    }
    assert_eq!(so.history.seg_loss, adv.history.seg_loss);
}

#[test]
fn updates_are_isolated() {
    let data = small_data(8);
    let src = BatchIterator::new(data.source_train.clone(), 2, 4).unwrap().next_batch().unwrap();
    let tgt = BatchIterator::new(data.target_train.clone(), 2, 4).unwrap().next_batch().unwrap();
    let run = |seg_lr: f64, disc_lr: f64| {
        let mut cfg = config(Mode::Advent, 10);
        cfg.seg_lr = seg_lr;
        cfg.disc_lr = disc_lr;
        let mut s = TrainState::new(cfg, 2).unwrap();
        let before = (s.segmenter.clone(), s.discriminator.clone().unwrap());
        train_step(&mut s, &src, Some(&tgt)).unwrap();
        (before, s)
    };
    let ((seg0, disc0), base) = run(1e-2, 1e-3);
    let (_, no_disc) = run(1e-2, 0.0);
    let (_, no_seg) = run(0.0, 1e-3);
    assert_ne!(base.segmenter.params(), seg0.params());
    assert_ne!(base.discriminator.as_ref().unwrap().params(), disc0.params());
    // the segmenter step never sees the discriminator update, and vice versa
    assert_eq!(base.segmenter.params(), no_disc.segmenter.params());
    assert_eq!(no_disc.discriminator.as_ref().unwrap().params(), disc0.params());
    assert_eq!(base.discriminator.as_ref().unwrap().params(), no_seg.discriminator.as_ref().unwrap().params());
    assert_eq!(no_seg.segmenter.params(), seg0.params());
}

#[test]
fn checkpoint_resume_matches_uninterrupted_run() {
    let data = small_data(12);
    let mut cfg = config(Mode::AdventAug, 16);
    cfg.aug = Some(AugSettings {
        adaptive: Some(AdaptiveSettings {
            interval: 2,
            ..AdaptiveSettings::default()
        }),
        ..AugSettings::default()
    });
    let dir = tempfile::tempdir().unwrap();
    let full = run_experiment(&cfg, &data, &ExperimentOptions::default()).unwrap();

    let opts = ExperimentOptions {
        out_dir: Some(dir.path().to_path_buf()),
        stop_at: Some(6),
        ..ExperimentOptions::default()
    };
    let first = run_experiment(&cfg, &data, &opts).unwrap();
    assert_eq!(first.state.iter, 6);
    let resumed = run_experiment(
        &cfg,
        &data,
        &ExperimentOptions {
            resume: Some(dir.path().join(FINAL_CHECKPOINT)),
            stop_at: None,
            ..opts
        },
    )
    .unwrap();
    assert_eq!(resumed.state.iter, 16);
    assert_eq!(resumed.state.segmenter.params(), full.state.segmenter.params());
    assert_eq!(
        resumed.state.discriminator.as_ref().unwrap().params(),
        full.state.discriminator.as_ref().unwrap().params()
    );
    assert_eq!(resumed.state.adaptive, full.state.adaptive);
    assert_eq!(resumed.state.history.seg_loss, full.state.history.seg_loss);
    assert_eq!(resumed.record, full.record);

    let logged = std::fs::read_to_string(dir.path().join(METRICS_FILE)).unwrap();
    let lines: Vec<LogLine> = logged.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines, full.log);
    let record: geoadapt::eval::MetricsRecord =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join(RECORD_FILE)).unwrap()).unwrap();
    assert_eq!(record, full.record);

    let mut other = cfg.clone();
    other.seed = 9;
    let err = run_experiment(
        &other,
        &data,
        &ExperimentOptions {
            resume: Some(dir.path().join(FINAL_CHECKPOINT)),
            ..ExperimentOptions::default()
        },
    );
    assert!(err.is_err());
}

#[test]
fn memorizes_a_small_source_set() {
    let src = tiles("vegas", 32, 32, Role::Source);
    let data = ExperimentData {
        source_train: Arc::new(src.clone()),
        source_val: src,
        target_train: Arc::new(Dataset::default()),
        target_val: tiles("vegas", 4, 32, Role::Target),
        classes: 2,
    };
    let mut cfg = config(Mode::SourceOnly, 200);
    cfg.batch_size = 4;
    cfg.eval_every = 200;
    let out = run_experiment(&cfg, &data, &ExperimentOptions::default()).unwrap();
    let tail = History::mean_since(&out.state.history.seg_loss, 180).unwrap();
    assert!(tail < 0.1, "final loss {tail}");
    assert!(out.record.source_val_iou.unwrap() > 0.9, "{:?}", out.record.source_val_iou);
    assert_eq!(out.record.monitor, "healthy");
}

#[test]
fn discriminator_separates_domains_under_a_frozen_segmenter() {
    let data = small_data(24);
    let mut warm = config(Mode::SourceOnly, 100);
    warm.eval_every = 100;
    let pre = run_experiment(&warm, &data, &ExperimentOptions::default()).unwrap();

    let mut cfg = config(Mode::Advent, 500);
    cfg.seg_lr = 0.0;
    let mut state = TrainState::new(cfg, 2).unwrap();
    state.segmenter = pre.state.segmenter.clone();
    let mut src = BatchIterator::new(data.source_train.clone(), 2, 1).unwrap();
    let mut tgt = BatchIterator::new(data.target_train.clone(), 2, 2).unwrap();
    let mut reached = None;
    for i in 0..500 {
        train_step(&mut state, &src.next_batch().unwrap(), Some(&tgt.next_batch().unwrap())).unwrap();
        if i >= 20 && History::mean_since(&state.history.disc_acc, i - 19).unwrap() > 0.95 {
            reached = Some(i);
            break;
        }
    }
    assert_eq!(state.segmenter.params(), pre.state.segmenter.params());
    assert!(reached.is_some(), "accuracy stayed at {:?}", History::mean_since(&state.history.disc_acc, 480));
}

#[test]
fn invalid_configs_rejected() {
    let data = small_data(8);
    let mut cfg = config(Mode::SourceOnly, 10);
    cfg.eval_every = 0;
    assert!(run_experiment(&cfg, &data, &ExperimentOptions::default()).is_err());
    let mut state = TrainState::new(config(Mode::Advent, 10), 2).unwrap();
    let src = BatchIterator::new(data.source_train.clone(), 2, 1).unwrap().next_batch().unwrap();
    assert!(matches!(train_step(&mut state, &src, None), Err(geoadapt::Error::MissingData(_))));
    let mut so = TrainState::new(config(Mode::SourceOnly, 10), 2).unwrap();
    assert!(train_step_advent(&mut so, &src, None).is_err());
}

#[test]
fn fixed_seed_runs_are_identical() {
    let data = small_data(8);
    let cfg = config(Mode::Advent, 8);
    let a = run_experiment(&cfg, &data, &ExperimentOptions::default()).unwrap();
    let b = run_experiment(&cfg, &data, &ExperimentOptions::default()).unwrap();
    assert_eq!(a.state.segmenter.params(), b.state.segmenter.params());
    assert_eq!(a.log, b.log);
}
