mod common;

use common::{binomial_3sigma, permute_plan, rel_err};
use geoadapt::augment::*;
use geoadapt::geodata::Mask;
use geoadapt::models::Tensor;
use geoadapt::rng::{substream, Rng};
use proptest::prelude::*;
use rand::Rng as _;
use rand::SeedableRng;

fn random_mask(h: usize, w: usize, seed: u64) -> Mask {
    let mut rng = Rng::seed_from_u64(seed);
    Mask::from_vec(h, w, (0..h * w).map(|_| rng.random_range(0..2u8)).collect()).unwrap()
}

fn random_image(h: usize, w: usize, seed: u64) -> Tensor<f32> {
    let mut rng = Rng::seed_from_u64(seed);
    Tensor::from_vec([1, h, w, 3], (0..h * w * 3).map(|_| rng.random::<f32>()).collect()).unwrap()
}

fn permutation_plans() -> Vec<Vec<Transform>> {
    vec![
        vec![Transform::Hflip],
        vec![Transform::Vflip],
        vec![Transform::Rot90 { k: 1 }],
        vec![Transform::Rot90 { k: 2 }],
        vec![Transform::Rot90 { k: 3 }],
        vec![Transform::TranslateInt { dx: 3, dy: -5 }],
        vec![Transform::Rot90 { k: 2 }, Transform::TranslateInt { dx: 3, dy: -5 }],
        vec![Transform::Hflip, Transform::Rot90 { k: 1 }, Transform::TranslateInt { dx: -8, dy: 8 }],
    ]
}

#[test]
fn paired_transforms_match_index_oracle() {
    for (i, plan) in permutation_plans().into_iter().enumerate() {
        for (h, w) in [(16, 16), (12, 20)] {
            let mask = random_mask(h, w, i as u64);
            let image = random_image(h, w, 100 + i as u64);
            let (img2, mask2) = augment_pair(&image, &mask, &TransformPlan(plan.clone())).unwrap();
            let (want, wh, ww) = permute_plan(mask.data(), h, w, &plan);
            assert_eq!((mask2.height(), mask2.width()), (wh, ww), "{plan:?}");
            assert_eq!(mask2.data(), &want[..], "{plan:?}");
            // translations fill; otherwise the image moves with the mask
            if !plan.iter().any(|t| matches!(t, Transform::TranslateInt { .. })) {
                for c in 0..3 {
                    let chan: Vec<u8> = image.data().iter().skip(c).step_by(3).map(|v| (v * 255.0) as u8).collect();
                    let (moved, _, _) = permute_plan(&chan, h, w, &plan);
                    let got: Vec<u8> = img2.data().iter().skip(c).step_by(3).map(|v| (v * 255.0) as u8).collect();
                    assert_eq!(got, moved);
                }
            }
        }
    }
}

#[test]
fn empty_plan_is_identity() {
    let mask = random_mask(16, 16, 1);
    let image = random_image(16, 16, 2);
    let (i2, m2) = augment_pair(&image, &mask, &TransformPlan::default()).unwrap();
    assert_eq!(i2, image);
    assert_eq!(m2, mask);
}

#[test]
fn map_involutions() {
    let mut rng = Rng::seed_from_u64(5);
    let x = Tensor::from_vec([2, 8, 8, 2], (0..256).map(|_| rng.random::<f64>()).collect()).unwrap();
    let twice = TransformPlan(vec![Transform::Hflip, Transform::Hflip]);
    assert_eq!(augment_maps(&x, &[twice.clone(), twice]).unwrap(), x);
    let four = TransformPlan(vec![Transform::Rot90 { k: 1 }; 4]);
    assert_eq!(augment_maps(&x, &[four.clone(), four]).unwrap(), x);
}

#[test]
fn map_gradient_matches_finite_differences() {
    let mut rng = Rng::seed_from_u64(11);
    let x = Tensor::from_vec([1, 8, 8, 2], (0..128).map(|_| rng.random::<f64>()).collect()).unwrap();
    let weights: Vec<f64> = (0..128).map(|_| rng.random_range(-1.0..1.0)).collect();
    let plans = [
        vec![Transform::Hflip],
        vec![Transform::Rot90 { k: 1 }, Transform::TranslateInt { dx: 2, dy: -1 }],
        vec![Transform::RotateArbitrary { degrees: 17.0 }, Transform::ScaleIso { factor: 1.13 }],
        vec![Transform::ScaleIso { factor: 0.85 }, Transform::Cutout { cx: 0.3, cy: 0.6 }],
    ];
    for plan in plans {
        let aug = MapAugmentation::new(&[TransformPlan(plan.clone())], x.shape()).unwrap();
        for w in [vec![1.0; 128], weights.clone()] {
            let objective = |t: &Tensor<f64>| -> f64 {
                aug.forward(t).data().iter().zip(&w).map(|(a, b)| a * b).sum()
            };
            let analytic = aug.backward(&Tensor::from_vec([1, 8, 8, 2], w.clone()).unwrap());
            let mut numeric = vec![0.0; 128];
            for i in 0..128 {
                let (mut hi, mut lo) = (x.clone(), x.clone());
                hi.data_mut()[i] += 1e-4;
                lo.data_mut()[i] -= 1e-4;
                numeric[i] = (objective(&hi) - objective(&lo)) / 2e-4;
            }
            let e = rel_err(analytic.data(), &numeric);
            assert!(e < 1e-5, "{plan:?}: rel err {e}");
        }
    }
}

#[test]
fn firing_rates_within_three_sigma() {
    const N: usize = 10_000;
    for p in [0.0, 0.6, 1.0] {
        let config = AugmentationConfig::full(p).unwrap();
        let mut rng = substream(2024, &[p.to_bits()]);
        let mut counts = [0usize; 10];
        for _ in 0..N {
            for t in sample_pipeline(&config, &mut rng).0 {
                counts[OpKind::ALL.iter().position(|&k| k == t.kind()).unwrap()] += 1;
            }
        }
        let (lo, hi) = binomial_3sigma(N, p);
        for (k, &c) in OpKind::ALL.iter().zip(&counts) {
            assert!((c as f64) >= lo && (c as f64) <= hi, "{k:?} fired {c} times at p={p}");
        }
    }
}

#[test]
fn photometric_ops_rejected_for_maps() {
    let x = Tensor::<f32>::zeros([1, 8, 8, 2]);
    for t in [
        Transform::Brightness { delta: 0.1 },
        Transform::Contrast { factor: 1.1 },
        Transform::HueShift { turns: 0.05 },
    ] {
        assert!(augment_maps(&x, &[TransformPlan(vec![t])]).is_err());
    }
}

#[test]
fn same_stream_same_outputs() {
    let config = AugmentationConfig::full(0.6).unwrap();
    let mask = random_mask(32, 32, 3);
    let image = random_image(32, 32, 4);
    let run = || {
        let plan = sample_pipeline(&config, &mut substream(9, &[1, 2]));
        augment_pair(&image, &mask, &plan).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn plan_json_uses_op_tags() {
    let plan = TransformPlan(vec![Transform::Rot90 { k: 2 }, Transform::Hflip]);
    assert_eq!(plan.to_json(), r#"[{"op":"rot90","k":2},{"op":"hflip"}]"#);
    let back: TransformPlan = serde_json::from_str(&plan.to_json()).unwrap();
    assert_eq!(back, plan);
}

fn histogram(m: &Mask) -> [usize; 2] {
    let mut h = [0; 2];
    for &v in m.data() {
        h[v as usize] += 1;
    }
    h
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flips_and_quarter_turns_preserve_histogram(seed in any::<u64>(), k in 1u8..=3, flip in any::<bool>()) {
        let mask = random_mask(16, 24, seed);
        let image = random_image(16, 24, seed ^ 1);
        let mut plan = vec![Transform::Rot90 { k }];
        if flip { plan.push(Transform::Vflip); }
        let (_, m2) = augment_pair(&image, &mask, &TransformPlan(plan)).unwrap();
        prop_assert_eq!(histogram(&m2), histogram(&mask));
    }

    #[test]
    fn geometric_ops_only_lose_labels_to_fill(seed in any::<u64>(), deg in -30.0f64..30.0, s in 0.8f64..1.25) {
        let mask = random_mask(32, 32, seed);
        let image = random_image(32, 32, seed ^ 2);
        for t in [Transform::RotateArbitrary { degrees: deg }, Transform::ScaleIso { factor: s }] {
            let (_, m2) = augment_pair(&image, &mask, &TransformPlan(vec![t])).unwrap();
            prop_assert!(m2.data().iter().all(|&v| v < 2));
            prop_assert_eq!(m2.data().len(), mask.data().len());
        }
    }

    #[test]
    fn adaptive_p_stays_clamped(signs in proptest::collection::vec(prop_oneof![Just(-5.0f32), Just(5.0f32), Just(0.0f32)], 1..400)) {
        let mut s = AdaptiveState::new(0.4, 0.6, 0.05, 0.85).unwrap();
        for chunk in signs.chunks(3) {
            s.update(chunk).unwrap();
            prop_assert!(s.p >= 0.0 && s.p <= s.p_max);
        }
    }
}
