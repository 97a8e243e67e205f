//! Acceptance suite: one PASS/FAIL line per criterion, criteria 1-7.
//!
//! Runs as a plain binary (`harness = false`). `ACCEPTANCE_CRITERIA=1,2,7`
//! restricts the run to a subset. Criterion 6 trains 11 desk-scale models
//! and dominates the runtime.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{binomial_3sigma, permute_plan, rel_err, threshold_purity};
use geoadapt::adapt::*;
use geoadapt::augment::*;
use geoadapt::eval::*;
use geoadapt::geodata::*;
use geoadapt::labelgap::*;
use geoadapt::models::*;
use geoadapt::rng::substream;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

#[derive(Default)]
struct Checks {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Checks {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }

    fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }
}

fn run(id: u32, name: &str, budget: Duration, f: fn(&mut Checks)) -> bool {
    let start = Instant::now();
    let mut c = Checks::default();
    if let Err(p) = catch_unwind(AssertUnwindSafe(|| f(&mut c))) {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        c.failures.push(format!("panicked: {msg}"));
    }
    let elapsed = start.elapsed();
    if elapsed > budget {
        c.failures.push(format!("runtime {:.1}s over the {:.0}s budget", elapsed.as_secs_f64(), budget.as_secs_f64()));
    }
    let ok = c.failures.is_empty();
    println!(
        "criterion {id} ({name}): {} [{:.1}s]",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    for n in &c.notes {
        println!("    {n}");
    }
    for f in &c.failures {
        println!("    FAILED: {f}");
    }
    ok
}

fn random_mask(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Mask {
    Mask::from_vec(h, w, (0..h * w).map(|_| rng.random_range(0..2u8)).collect()).unwrap()
}

fn metric_oracle(c: &mut Checks) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut mismatches = 0;
    for _ in 0..100 {
        let (pred, gt) = (random_mask(&mut rng, 32, 32), random_mask(&mut rng, 32, 32));
        let mut counts = [[0u64; 2]; 2];
        for (&p, &g) in pred.data().iter().zip(gt.data()) {
            counts[g as usize][p as usize] += 1;
        }
        let m = confusion_counts(&pred, &gt, 2).unwrap();
        let oracle_iou = counts[1][1] as f64 / (counts[1][1] + counts[0][1] + counts[1][0]) as f64;
        let same = (0..2).all(|g| (0..2).all(|p| m.get(g, p) == counts[g][p]));
        if !same || iou(&m, 1).unwrap() != oracle_iou {
            mismatches += 1;
        }
    }
    c.check(mismatches == 0, || format!("{mismatches}/100 mask pairs disagree with the counting oracle"));

    let reference = [
        (47.6, 36.6, 11.0),
        (13.59, 15.09, -1.50),
        (9.95, 17.56, -7.61),
        (26.36, 23.62, 2.74),
        (25.05, 30.09, -5.04),
        (11.03, 14.77, -3.74),
    ];
    for (a, s, d) in reference {
        let got = delta_iou(a, s);
        c.check((got - d).abs() < 1e-9, || format!("reference delta({a}, {s}) = {got}, want {d}"));
    }
    for (s, a, shown) in [(15.09, 13.59, "-1.50"), (33.81, 36.00, "+2.19")] {
        let got = format!("{:+.2}", delta_iou(a, s));
        c.check(got == shown, || format!("augmented row ({s}, {a}) gives {got}, want {shown}"));
    }
    c.note("100 random 32x32 pairs exact; six reference deltas and both augmented-row deltas reproduced");
}

fn pixel(p: &[f64]) -> ProbMap<f64> {
    ProbMap::new(Tensor::from_vec([1, 1, 1, p.len()], p.to_vec()).unwrap()).unwrap()
}

fn entropy_correctness(c: &mut Checks) {
    let u = entropy_map(&pixel(&[0.5, 0.5])).data()[0];
    c.check((u - 1.0).abs() < 1e-6, || format!("uniform entropy {u}"));
    let o = entropy_map(&pixel(&[1.0, 0.0])).data()[0];
    c.check(o.abs() < 1e-6, || format!("one-hot entropy {o}"));
    let e = entropy_map(&pixel(&[0.9, 0.1])).data()[0];
    c.check((e - 0.46900).abs() < 1e-4, || format!("entropy(0.9, 0.1) = {e}"));

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for classes in [2, 3, 5] {
        let n = 2 * 8 * 8 * classes;
        let z = Tensor::from_vec([2, 8, 8, classes], (0..n).map(|_| rng.random_range(-6.0..6.0)).collect()).unwrap();
        let probs = softmax_probs(&z).unwrap();
        let info = self_information_map(&probs);
        for (px, ent) in info.values.data().chunks_exact(classes).zip(entropy_map(&probs).data()) {
            worst = worst.max((px.iter().sum::<f64>() - ent).abs());
        }
    }
    c.check(worst < 1e-12, || format!("channel-sum identity off by {worst}"));

    let z = Tensor::from_vec([1, 4, 4, 2], (0..32).map(|_| rng.random_range(-3.0..3.0)).collect::<Vec<f64>>()).unwrap();
    let objective = |z: &Tensor<f64>| entropy_map(&softmax_probs(z).unwrap()).data().iter().sum::<f64>() / 16.0;
    let analytic = entropy_backward(&softmax_probs(&z).unwrap(), &Tensor::filled([1, 4, 4, 1], 1.0 / 16.0));
    let numeric: Vec<f64> = (0..32)
        .map(|i| {
            let (mut hi, mut lo) = (z.clone(), z.clone());
            hi.data_mut()[i] += 1e-5;
            lo.data_mut()[i] -= 1e-5;
            (objective(&hi) - objective(&lo)) / 2e-5
        })
        .collect();
    let err = rel_err(analytic.data(), &numeric);
    c.check(err < 1e-4, || format!("entropy gradient rel err {err}"));
    c.note(format!("channel-sum max dev {worst:.1e}; gradient rel err {err:.1e}"));
}

fn augmentation_suite(c: &mut Checks) {
    const N: usize = 10_000;
    for p in [0.0, 0.6, 1.0] {
        let config = AugmentationConfig::full(p).unwrap();
        let mut rng = substream(77, &[p.to_bits()]);
        let mut counts = [0usize; OpKind::ALL.len()];
        for _ in 0..N {
            for t in sample_pipeline(&config, &mut rng).0 {
                counts[OpKind::ALL.iter().position(|&k| k == t.kind()).unwrap()] += 1;
            }
        }
        let (lo, hi) = binomial_3sigma(N, p);
        for (k, &n) in OpKind::ALL.iter().zip(&counts) {
            c.check((lo..=hi).contains(&(n as f64)), || format!("{k:?} fired {n}/{N} at p = {p}"));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let plans = [
        vec![Transform::Hflip],
        vec![Transform::Vflip],
        vec![Transform::Rot90 { k: 1 }],
        vec![Transform::Rot90 { k: 2 }],
        vec![Transform::Rot90 { k: 3 }],
        vec![Transform::TranslateInt { dx: 5, dy: -3 }],
        vec![Transform::Vflip, Transform::Rot90 { k: 1 }, Transform::TranslateInt { dx: -2, dy: 7 }],
    ];
    for plan in &plans {
        let mask = random_mask(&mut rng, 24, 24);
        let image = Tensor::<f32>::zeros([1, 24, 24, 3]);
        let (_, got) = augment_pair(&image, &mask, &TransformPlan(plan.clone())).unwrap();
        let (want, _, _) = permute_plan(mask.data(), 24, 24, plan);
        c.check(got.data() == &want[..], || format!("paired transform {plan:?} differs from index oracle"));
    }

    let x = Tensor::from_vec([1, 8, 8, 2], (0..128).map(|_| rng.random::<f64>()).collect()).unwrap();
    let w: Vec<f64> = (0..128).map(|_| rng.random_range(-1.0..1.0)).collect();
    let wt = Tensor::from_vec([1, 8, 8, 2], w.clone()).unwrap();
    let mut worst: f64 = 0.0;
    for plan in [
        vec![Transform::Rot90 { k: 3 }, Transform::Hflip],
        vec![Transform::TranslateInt { dx: 2, dy: 1 }],
        vec![Transform::RotateArbitrary { degrees: -23.0 }, Transform::ScaleIso { factor: 1.2 }],
    ] {
        let aug = MapAugmentation::new(&[TransformPlan(plan)], x.shape()).unwrap();
        let f = |t: &Tensor<f64>| aug.forward(t).data().iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        let numeric: Vec<f64> = (0..128)
            .map(|i| {
                let (mut hi, mut lo) = (x.clone(), x.clone());
                hi.data_mut()[i] += 1e-4;
                lo.data_mut()[i] -= 1e-4;
                (f(&hi) - f(&lo)) / 2e-4
            })
            .collect();
        worst = worst.max(rel_err(aug.backward(&wt).data(), &numeric));
    }
    c.check(worst < 1e-5, || format!("augment_maps gradient rel err {worst}"));

    for (logit, want) in [(5.0f32, 0.85), (-5.0, 0.0)] {
        let mut s = AdaptiveState::new(0.4, 0.6, 0.01, 0.85).unwrap();
        for _ in 0..200 {
            s.update(&[logit; 4]).unwrap();
            c.check((0.0..=s.p_max).contains(&s.p), || format!("adaptive p left [0, p_max]: {}", s.p));
        }
        c.check((s.p - want).abs() < 1e-12, || format!("constant logit {logit} leaves p at {}, want {want}", s.p));
    }
    c.note(format!("augment_maps gradient rel err {worst:.1e}"));
}

fn line_features(src: &[f64], tgt: &[f64]) -> Vec<LabelFeature> {
    src.iter()
        .map(|&x| (x, Role::Source))
        .chain(tgt.iter().map(|&x| (x, Role::Target)))
        .enumerate()
        .map(|(i, (x, origin))| LabelFeature {
            vector: vec![x],
            origin,
            id: i as u64,
        })
        .collect()
}

fn random_features(rng: &mut ChaCha8Rng, n: usize, d: usize, offset: f64, sd: f64) -> Vec<LabelFeature> {
    let normal = Normal::new(0.0, sd).unwrap();
    (0..n)
        .map(|i| {
            let origin = if i < n / 2 { Role::Source } else { Role::Target };
            let shift = if origin == Role::Target { offset } else { 0.0 };
            LabelFeature {
                vector: (0..d).map(|_| normal.sample(rng) + shift).collect(),
                origin,
                id: i as u64,
            }
        })
        .collect()
}

fn purity_oracle(c: &mut Checks) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut mismatches = 0;
    for _ in 0..100 {
        let n = rng.random_range(2..=30);
        let d = rng.random_range(1..=4);
        let f = random_features(&mut rng, n.max(2), d, 0.0, 1.0);
        let got = purity_curve(&f).unwrap().purity;
        let want = threshold_purity(&f);
        if got.len() != want.len() || got.iter().zip(&want).any(|(a, b)| (a - b).abs() > 1e-12) {
            mismatches += 1;
        }
    }
    c.check(mismatches == 0, || format!("{mismatches}/100 random instances differ from the brute-force oracle"));

    let sep = purity_curve(&line_features(&[0.0, 1.0], &[10.0, 11.0])).unwrap().auc;
    c.check((sep - 0.8333333333333334).abs() < 1e-9, || format!("separated line auc {sep}, want 0.8333..."));
    let mixed = purity_curve(&line_features(&[0.0, 2.0], &[1.0, 3.0])).unwrap();
    c.check((mixed.auc - 0.5833333333333334).abs() < 1e-9, || {
        format!(
            "interleaved line auc {} (purity {:?}), want 0.5833...; see the decisions ledger",
            mixed.auc, mixed.purity
        )
    });

    let mut scale_failures = 0;
    for _ in 0..50 {
        let f = random_features(&mut rng, 20, 3, 0.5, 1.0);
        let base = purity_curve(&f).unwrap();
        for k in [1e-3, 1.0, 1e3] {
            let scaled: Vec<LabelFeature> = f
                .iter()
                .map(|x| LabelFeature {
                    vector: x.vector.iter().map(|v| v * k).collect(),
                    ..x.clone()
                })
                .collect();
            let s = purity_curve(&scaled).unwrap();
            if s.purity != base.purity || s.auc != base.auc {
                scale_failures += 1;
            }
        }
    }
    c.check(scale_failures == 0, || format!("{scale_failures} scaled instances changed their curve"));

    let mut wins = 0;
    for trial in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + trial);
        let sep = purity_curve(&random_features(&mut rng, 40, 2, 8.0, 1.0)).unwrap().auc;
        let mix = purity_curve(&random_features(&mut rng, 40, 2, 0.0, 1.0)).unwrap().auc;
        wins += usize::from(sep > mix);
    }
    c.check(wins == 20, || format!("separated blobs beat interleaved blobs in {wins}/20 trials"));
    c.note(format!("interleaved line: purity {:?}, auc {:.6}", mixed.purity, mixed.auc));
}

fn small_pair(n: usize, size: usize) -> ExperimentData {
    let render = |name: &str, role| {
        let style = style_by_name(name).unwrap();
        let samples = (0..n)
            .map(|i| {
                let mut t = generate_tile(&style, tile_seed(11, i), size).unwrap();
                t.domain.role = role;
                t
            })
            .collect();
        Dataset::from_samples(samples, 2)
    };
    ExperimentData::from_datasets(&[render("vegas", Role::Source)], &render("khartoum", Role::Target), (0.8, 0.2), 0)
        .unwrap()
}

fn reduction_and_determinism(c: &mut Checks) {
    let data = small_pair(20, 32);
    let base = TrainConfig {
        iterations: 50,
        batch_size: 2,
        seg_lr: 1e-2,
        eval_every: 10,
        aug: None,
        ..TrainConfig::default()
    };
    let so = run_experiment(
        &TrainConfig {
            mode: Mode::SourceOnly,
            ..base.clone()
        },
        &data,
        &ExperimentOptions::default(),
    )
    .unwrap();
    let adv = run_experiment(
        &TrainConfig {
            mode: Mode::Advent,
            lambda_adv: 0.0,
            lambda_ent: 0.0,
            ..base.clone()
        },
        &data,
        &ExperimentOptions::default(),
    )
    .unwrap();
    c.check(so.state.history.seg_loss == adv.state.history.seg_loss, || {
        "source-only and lambda = 0 adversarial loss trajectories differ".into()
    });
    c.check(so.state.segmenter.params() == adv.state.segmenter.params(), || {
        "segmenter weights differ after 50 steps".into()
    });

    let cfg = TrainConfig {
        mode: Mode::AdventAug,
        iterations: 20,
        aug: Some(AugSettings {
            adaptive: Some(AdaptiveSettings {
                interval: 1,
                ..AdaptiveSettings::default()
            }),
            ..AugSettings::default()
        }),
        ..base
    };
    let full = run_experiment(&cfg, &data, &ExperimentOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let part = ExperimentOptions {
        out_dir: Some(dir.path().to_path_buf()),
        stop_at: Some(10),
        ..ExperimentOptions::default()
    };
    run_experiment(&cfg, &data, &part).unwrap();
    let resumed = run_experiment(
        &cfg,
        &data,
        &ExperimentOptions {
            resume: Some(dir.path().join(FINAL_CHECKPOINT)),
            stop_at: None,
            ..part
        },
    )
    .unwrap();
    let same = resumed.state.segmenter.params() == full.state.segmenter.params()
        && resumed.state.discriminator.as_ref().unwrap().params() == full.state.discriminator.as_ref().unwrap().params()
        && resumed.state.adaptive == full.state.adaptive
        && resumed.state.history.disc_acc == full.state.history.disc_acc;
    c.check(same, || "restored run diverges from the uninterrupted run over iterations 10..20".into());
    c.note("50-step reduction bit-exact; save at 10, restore, run to 20 bit-exact");
}

const DESK_TILES: usize = 500;
const DESK_ITERS: u64 = 2000;
const DESK_BATCH: usize = 2;
const DESK_SEG_LR: f64 = 1e-2;

fn desk_config(mode: Mode, seed: u64) -> TrainConfig {
    TrainConfig {
        mode,
        iterations: DESK_ITERS,
        batch_size: DESK_BATCH,
        seg_lr: DESK_SEG_LR,
        eval_every: 250,
        seed,
        aug: (mode == Mode::AdventAug).then(AugSettings::default),
        ..TrainConfig::default()
    }
}

fn desk_run(c: &mut Checks, data: &ExperimentData, mode: Mode, seed: u64) -> ExperimentOutcome {
    let start = Instant::now();
    let out = run_experiment(
        &desk_config(mode, seed),
        data,
        &ExperimentOptions {
            benchmark: "v2k".into(),
            ..ExperimentOptions::default()
        },
    )
    .unwrap();
    let secs = start.elapsed().as_secs_f64();
    c.check(secs <= 1800.0, || format!("{mode} seed {seed} took {secs:.0}s"));
    let line = format!(
        "{mode:>11} seed {seed}: target IoU {:.4}  source-val IoU {:.4}  monitor {} (overfit {:?})  [{secs:.0}s]",
        out.record.iou_building,
        out.record.source_val_iou.unwrap_or(f64::NAN),
        out.record.monitor,
        out.status.evidence.overfit_at,
    );
    // Progress for a run that takes hours; the summary repeats it.
    eprintln!("    {line}");
    c.note(line);
    out
}

/// (b) and (c) over one block of seeds.
fn desk_block(c: &mut Checks, data: &ExperimentData, seeds: std::ops::Range<u64>) -> (usize, usize, Vec<MetricsRecord>) {
    let (mut aug_wins, mut overfit) = (0, 0);
    let mut records = Vec::new();
    for seed in seeds {
        let plain = desk_run(c, data, Mode::Advent, seed);
        let aug = desk_run(c, data, Mode::AdventAug, seed);
        aug_wins += usize::from(aug.record.iou_building >= plain.record.iou_building);
        overfit += usize::from(plain.status.overfit_detected());
        records.push(plain.record);
        records.push(aug.record);
    }
    (aug_wins, overfit, records)
}

fn desk_experiment(c: &mut Checks) {
    let preset = benchmark_preset("v2k").unwrap();
    let render = |style: &CityStyle, role| {
        let samples = (0..DESK_TILES)
            .map(|i| {
                let mut t = generate_tile(style, tile_seed(0, i), 64).unwrap();
                t.domain.role = role;
                t
            })
            .collect();
        Dataset::from_samples(samples, 2)
    };
    let data = ExperimentData::from_datasets(
        &[render(&preset.sources[0], Role::Source)],
        &render(&preset.target, Role::Target),
        (0.8, 0.2),
        0,
    )
    .unwrap();

    let so = desk_run(c, &data, Mode::SourceOnly, 0);
    let src_iou = so.record.source_val_iou.unwrap_or(0.0);
    c.check(src_iou >= 0.70, || format!("(a) source-only source-val IoU {src_iou:.4} < 0.70"));

    let mut records = vec![so.record];
    let mut outcome = None;
    for (attempt, seeds) in [(1, 0..5), (2, 5..10)] {
        let (wins, overfit, recs) = desk_block(c, &data, seeds.clone());
        records.extend(recs);
        c.note(format!(
            "block {attempt} (seeds {seeds:?}): advent_aug >= advent in {wins}/5, overfit flagged in {overfit}/5 advent runs"
        ));
        outcome = Some((wins, overfit));
        if wins >= 4 && overfit >= 3 {
            break;
        }
        if attempt == 1 {
            c.note("block 1 missed (b) or (c); rerunning once with fresh seeds");
        }
    }
    let (wins, overfit) = outcome.unwrap();
    c.check(wins >= 4, || format!("(b) advent_aug >= advent in only {wins}/5 seeds"));
    c.check(overfit >= 3, || format!("(c) discriminator overfit in only {overfit}/5 advent runs"));
    if let Ok(r) = render_report(&records) {
        for line in r.text.lines() {
            c.note(line.to_string());
        }
    }
}

fn report_fidelity(c: &mut Checks) {
    let columns = [
        ("GTA→CS", 47.6, 36.6),
        ("V→K", 13.59, 15.09),
        ("V,P→K", 9.95, 17.56),
        ("P,S→K", 26.36, 23.62),
        ("V,S,P→K", 25.05, 30.09),
        ("On→V.Off", 11.03, 14.77),
    ];
    let rec = |bench: &str, mode: &str, v: f64| MetricsRecord {
        benchmark: bench.into(),
        mode: mode.into(),
        seed: 0,
        augmented: false,
        unit: IouUnit::Percent,
        class_iou: vec![],
        iou_building: v,
        source_val_iou: None,
        delta_iou: None,
        iterations: 0,
        monitor: String::new(),
        overfit_detected: false,
    };
    let records: Vec<MetricsRecord> = columns
        .iter()
        .flat_map(|&(b, a, s)| [rec(b, "advent", a), rec(b, "source_only", s)])
        .collect();
    let report = render_report(&records).unwrap();
    c.check(report.text == include_str!("golden/reference_table.txt"), || {
        format!("table differs from golden file:\n{}", report.text)
    });
    let labels: Vec<&str> = report.csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    c.check(labels == [ROW_ADAPTED, ROW_SOURCE_ONLY, ROW_DELTA], || format!("row labels {labels:?}"));
    c.check(labels == ["IoU (ADVENT)", "IoU (src-only)", "Δ IoU"], || "row labels renamed".into());
}

/// Id, name, runtime budget in seconds, body.
type Criterion = (u32, &'static str, u64, fn(&mut Checks));

fn main() -> ExitCode {
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_CRITERIA")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let criteria: [Criterion; 7] = [
        (1, "metric oracle", 5, metric_oracle),
        (2, "entropy correctness", 10, entropy_correctness),
        (3, "augmentation suite", 60, augmentation_suite),
        (4, "purity-curve oracle", 60, purity_oracle),
        (5, "training reduction and determinism", 300, reduction_and_determinism),
        (6, "desk-scale directional experiment", 21 * 1800, desk_experiment),
        (7, "report fidelity", 1, report_fidelity),
    ];
    let mut failed = Vec::new();
    for (id, name, secs, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        if !run(id, name, Duration::from_secs(secs), f) {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all selected criteria PASS");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAIL on criteria {failed:?}");
        ExitCode::FAILURE
    }
}
