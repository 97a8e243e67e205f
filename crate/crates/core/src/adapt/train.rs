use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::{Mode, TrainConfig};
use super::losses::{bce_mean_with_grad, seg_loss_with_grad};
use super::monitor::History;
use super::optim::{lr_schedule, Adam, Sgd};
use crate::augment::{sample_pipeline, AdaptiveState, MapAugmentation, TransformPlan};
use crate::error::{Error, Result};
use crate::geodata::Batch;
use crate::models::{
    entropy_backward, self_information_backward, self_information_map, softmax_probs, ArrayData, Checkpoint,
    Discriminator, DiscriminatorDescriptor, ParamSet, Segmenter, SegmenterDescriptor, Tensor,
};
use crate::rng::{substream, tag};

/// Everything needed to continue training bit-exactly.
#[derive(Clone, Debug)]
pub struct TrainState {
    pub config: TrainConfig,
    pub iter: u64,
    pub segmenter: Segmenter<f32>,
    pub discriminator: Option<Discriminator<f32>>,
    pub seg_opt: Sgd,
    pub disc_opt: Option<Adam>,
    pub adaptive: Option<AdaptiveState>,
    pub disc_steps: u64,
    pub history: History,
}

/// Scalars from one step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub seg_loss: f64,
    pub adv_loss: Option<f64>,
    pub disc_loss: Option<f64>,
    pub disc_acc: Option<f64>,
    pub r_t: Option<f64>,
    pub p: Option<f64>,
}

impl TrainState {
    pub fn new(config: TrainConfig, classes: usize) -> Result<Self> {
        config.validate()?;
        let segmenter = Segmenter::new(SegmenterDescriptor::new(classes), config.seed);
        let seg_opt = Sgd::new(segmenter.params(), config.momentum, config.weight_decay);
        let (discriminator, disc_opt) = if config.mode.is_adversarial() {
            let d = Discriminator::new(DiscriminatorDescriptor::new(classes), config.seed);
            let opt = Adam::new(d.params(), config.adam_betas);
            (Some(d), Some(opt))
        } else {
            (None, None)
        };
        let adaptive = match config.discriminator_augmentation().and_then(|a| a.adaptive.as_ref()) {
            Some(a) => Some(a.initial_state()?),
            None => None,
        };
        Ok(Self {
            config,
            iter: 0,
            segmenter,
            discriminator,
            seg_opt,
            disc_opt,
            adaptive,
            disc_steps: 0,
            history: History::default(),
        })
    }

    pub fn classes(&self) -> usize {
        self.segmenter.classes()
    }

    fn lr(&self, base: f64) -> Result<f64> {
        let c = &self.config;
        lr_schedule(base, self.iter.min(c.iterations), c.iterations, c.poly_power)
    }

    /// Current discriminator-input augmentation probability, if augmenting.
    pub fn disc_aug_p(&self) -> Option<f64> {
        let aug = self.config.discriminator_augmentation()?;
        Some(self.adaptive.as_ref().map_or(aug.p, |a| a.p))
    }

    fn map_plans(&self, batch: usize, domain: u64) -> Result<Vec<TransformPlan>> {
        let Some(p) = self.disc_aug_p() else {
            return Ok(vec![TransformPlan::default(); batch]);
        };
        let cfg = self.config.discriminator_augmentation().expect("active").discriminator_config(p)?;
        Ok((0..batch as u64)
            .map(|i| sample_pipeline(&cfg, &mut substream(self.config.seed, &[tag::DISC_AUG, self.iter, domain, i])))
            .collect())
    }

    fn segmenter_source_grads(&self, src: &Batch) -> Result<(f64, ParamSet<f32>, Tensor<f32>)> {
        let (logits, cache) = self.segmenter.forward_train(&src.images)?;
        let (loss, dlogits) = seg_loss_with_grad(&logits, &src.masks)?;
        let mut grads = self.segmenter.params().zeros_like();
        self.segmenter.backward(&cache, &dlogits, &mut grads);
        Ok((loss, grads, logits))
    }

    pub fn to_checkpoint(&self, extra: serde_json::Value) -> Checkpoint {
        let mut ck = Checkpoint::new(json!({
            "kind": "train_state",
            "config": self.config,
            "iter": self.iter,
            "classes": self.classes(),
            "disc_steps": self.disc_steps,
            "adam_t": self.disc_opt.as_ref().map(|o| o.t),
            "adaptive": self.adaptive,
            "evals": self.history.evals,
            "extra": extra,
        }));
        ck.push_params("segmenter", self.segmenter.params());
        ck.push_params("seg_velocity", &self.seg_opt.velocity);
        if let (Some(d), Some(o)) = (&self.discriminator, &self.disc_opt) {
            ck.push_params("discriminator", d.params());
            ck.push_params("adam_m", &o.m);
            ck.push_params("adam_v", &o.v);
        }
        let h = &self.history;
        for (name, col) in [
            ("seg_loss", &h.seg_loss),
            ("adv_loss", &h.adv_loss),
            ("disc_loss", &h.disc_loss),
            ("disc_acc", &h.disc_acc),
            ("r_t", &h.r_t),
            ("p", &h.p),
        ] {
            ck.push(format!("history/{name}"), vec![col.len()], ArrayData::F64(col.clone()));
        }
        ck
    }

    /// Rebuild a state written by [`TrainState::to_checkpoint`]; returns the
    /// caller's extra metadata alongside.
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<(Self, serde_json::Value)> {
        let bad = |what: &str| Error::Checkpoint(format!("training checkpoint lacks {what}"));
        let meta = &ck.meta;
        if meta["kind"] != "train_state" {
            return Err(bad("kind = train_state"));
        }
        let config: TrainConfig = serde_json::from_value(meta["config"].clone())?;
        let classes = meta["classes"].as_u64().ok_or_else(|| bad("classes"))? as usize;
        let mut state = TrainState::new(config, classes)?;
        state.iter = meta["iter"].as_u64().ok_or_else(|| bad("iter"))?;
        state.disc_steps = meta["disc_steps"].as_u64().ok_or_else(|| bad("disc_steps"))?;
        state.adaptive = serde_json::from_value(meta["adaptive"].clone())?;
        ck.load_params("segmenter", state.segmenter.params_mut())?;
        ck.load_params("seg_velocity", &mut state.seg_opt.velocity)?;
        if let (Some(d), Some(o)) = (&mut state.discriminator, &mut state.disc_opt) {
            ck.load_params("discriminator", d.params_mut())?;
            ck.load_params("adam_m", &mut o.m)?;
            ck.load_params("adam_v", &mut o.v)?;
            o.t = meta["adam_t"].as_u64().ok_or_else(|| bad("adam_t"))?;
        }
        let h = &mut state.history;
        for (name, col) in [
            ("seg_loss", &mut h.seg_loss),
            ("adv_loss", &mut h.adv_loss),
            ("disc_loss", &mut h.disc_loss),
            ("disc_acc", &mut h.disc_acc),
            ("r_t", &mut h.r_t),
            ("p", &mut h.p),
        ] {
            *col = ck.f64_array(&format!("history/{name}"))?.to_vec();
        }
        h.evals = serde_json::from_value(meta["evals"].clone())?;
        Ok((state, meta["extra"].clone()))
    }
}

/// One supervised step on a labeled source batch.
pub fn train_step_source_only(state: &mut TrainState, batch: &Batch) -> Result<StepStats> {
    if state.config.mode != Mode::SourceOnly {
        return Err(Error::invalid(format!("source-only step in {} mode", state.config.mode)));
    }
    let (loss, grads, _) = state.segmenter_source_grads(batch)?;
    let lr = state.lr(state.config.seg_lr)?;
    state.seg_opt.step(state.segmenter.params_mut(), &grads, lr);
    state.iter += 1;
    state.history.seg_loss.push(loss);
    Ok(StepStats {
        seg_loss: loss,
        ..StepStats::default()
    })
}

fn concat(a: &Tensor<f32>, b: &Tensor<f32>) -> Result<Tensor<f32>> {
    Tensor::stack(&[a.clone(), b.clone()])
}

/// One adversarial step: segmenter update against a frozen discriminator,
/// then a discriminator update on detached self-information maps.
pub fn train_step_advent(state: &mut TrainState, src: &Batch, tgt: Option<&Batch>) -> Result<StepStats> {
    let mode = state.config.mode;
    if !mode.is_adversarial() {
        return Err(Error::invalid("adversarial step in source_only mode"));
    }
    let tgt = tgt.ok_or_else(|| Error::MissingData("adversarial step needs a target batch".into()))?;
    let cfg = state.config.clone();
    let disc = state.discriminator.as_ref().expect("adversarial state has a discriminator");

    // (1) segmenter on both domains
    let (seg_loss, mut grads, src_logits) = state.segmenter_source_grads(src)?;
    let (tgt_logits, tgt_cache) = state.segmenter.forward_train(&tgt.images)?;
    let src_probs = softmax_probs(&src_logits)?;
    let tgt_probs = softmax_probs(&tgt_logits)?;
    let src_info = self_information_map(&src_probs).values;
    let tgt_info = self_information_map(&tgt_probs).values;
    let tgt_aug = MapAugmentation::new(&state.map_plans(tgt_info.batch(), 1)?, tgt_info.shape())?;
    let src_aug = MapAugmentation::new(&state.map_plans(src_info.batch(), 0)?, src_info.shape())?;
    let tgt_maps = tgt_aug.forward(&tgt_info);

    // (2) segmenter update, discriminator frozen
    let (d_tgt, d_cache) = disc.forward_train(&tgt_maps)?;
    let (adv_loss, d_adv) = bce_mean_with_grad(&d_tgt, 1.0);
    let mut tgt_grad: Option<Tensor<f32>> = None;
    if cfg.lambda_adv > 0.0 {
        let scaled = d_adv.map(|g| g * cfg.lambda_adv as f32);
        let dmaps = disc.backward(&d_cache, &scaled, None, true).expect("input gradient");
        tgt_grad = Some(self_information_backward(&tgt_probs, &tgt_aug.backward(&dmaps)));
    }
    if cfg.entropy_min_enabled && cfg.lambda_ent > 0.0 {
        let [b, h, w, _] = tgt_logits.shape();
        let scale = (cfg.lambda_ent / (b * h * w) as f64) as f32;
        let g = entropy_backward(&tgt_probs, &Tensor::filled([b, h, w, 1], scale));
        match &mut tgt_grad {
            Some(t) => t.add_assign(&g),
            None => tgt_grad = Some(g),
        }
    }
    if let Some(g) = tgt_grad {
        let mut tg = state.segmenter.params().zeros_like();
        state.segmenter.backward(&tgt_cache, &g, &mut tg);
        grads.add_assign(&tg);
    }
    let seg_lr = state.lr(cfg.seg_lr)?;
    state.seg_opt.step(state.segmenter.params_mut(), &grads, seg_lr);

    // (3) discriminator update on detached maps: source real, target fake
    let n_src = src_info.batch();
    let maps = concat(&src_aug.forward(&src_info), &tgt_maps)?;
    let disc = state.discriminator.as_ref().expect("discriminator");
    let (logits, cache) = disc.forward_train(&maps)?;
    let per_item = logits.data().len() / logits.batch();
    let (real, fake) = logits.data().split_at(n_src * per_item);
    let to_tensor = |v: &[f32], b: usize| {
        let [_, h, w, c] = logits.shape();
        Tensor::from_vec([b, h, w, c], v.to_vec())
    };
    let (real_t, fake_t) = (to_tensor(real, n_src)?, to_tensor(fake, logits.batch() - n_src)?);
    let (l_real, g_real) = bce_mean_with_grad(&real_t, 1.0);
    let (l_fake, g_fake) = bce_mean_with_grad(&fake_t, 0.0);
    let disc_loss = l_real + l_fake;
    let correct = real.iter().filter(|&&v| v > 0.0).count() + fake.iter().filter(|&&v| v < 0.0).count();
    let disc_acc = correct as f64 / logits.data().len() as f64;
    let mut dgrads = disc.params().zeros_like();
    disc.backward(&cache, &concat(&g_real, &g_fake)?, Some(&mut dgrads), false);
    let disc_lr = state.lr(cfg.disc_lr)?;
    let (d, opt) = (
        state.discriminator.as_mut().expect("discriminator"),
        state.disc_opt.as_mut().expect("adam"),
    );
    opt.step(d.params_mut(), &dgrads, disc_lr);
    state.disc_steps += 1;

    // (4) adaptive probability from non-augmented source maps
    let interval = cfg
        .discriminator_augmentation()
        .and_then(|a| a.adaptive.as_ref())
        .map(|a| a.interval);
    if let (Some(a), Some(every)) = (state.adaptive.as_mut(), interval) {
        if state.disc_steps.is_multiple_of(every) {
            let raw = state.discriminator.as_ref().expect("discriminator").forward(&src_info)?;
            a.update(raw.data())?;
        }
    }
    let r_t = state.adaptive.as_ref().and_then(|a| a.r_t());
    let p = state.disc_aug_p();

    state.iter += 1;
    let h = &mut state.history;
    h.seg_loss.push(seg_loss);
    h.adv_loss.push(adv_loss);
    h.disc_loss.push(disc_loss);
    h.disc_acc.push(disc_acc);
    h.r_t.push(r_t.unwrap_or(f64::NAN));
    h.p.push(p.unwrap_or(f64::NAN));
    Ok(StepStats {
        seg_loss,
        adv_loss: Some(adv_loss),
        disc_loss: Some(disc_loss),
        disc_acc: Some(disc_acc),
        r_t,
        p,
    })
}

/// Dispatch on the configured mode.
pub fn train_step(state: &mut TrainState, src: &Batch, tgt: Option<&Batch>) -> Result<StepStats> {
    match state.config.mode {
        Mode::SourceOnly => train_step_source_only(state, src),
        Mode::Advent | Mode::AdventAug => train_step_advent(state, src, tgt),
    }
}
