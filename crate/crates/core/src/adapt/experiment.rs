use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::monitor::{divergence_monitor, EvalPoint, History, MonitorStatus};
use super::train::{train_step, TrainState};
use crate::error::{Error, Result};
use crate::eval::{dataset_iou, MetricsRecord};
use crate::geodata::{split_dataset, BatchIterator, Cursor, Dataset, Manifest, Role};
use crate::models::Checkpoint;
use crate::rng::{derive_seed, tag};

pub const METRICS_FILE: &str = "metrics.jsonl";
pub const RECORD_FILE: &str = "record.json";
pub const BEST_CHECKPOINT: &str = "best.ckpt";
pub const FINAL_CHECKPOINT: &str = "final.ckpt";

/// Building class index in binary benchmarks.
pub const BUILDING: usize = 1;

/// Train/val splits of the source and target data.
#[derive(Clone, Debug)]
pub struct ExperimentData {
    pub source_train: Arc<Dataset>,
    pub source_val: Dataset,
    /// Used without labels.
    pub target_train: Arc<Dataset>,
    pub target_val: Dataset,
    pub classes: usize,
}

impl ExperimentData {
    /// Split every source and the target with `seed`; source train splits
    /// are concatenated and sampled uniformly over tiles.
    pub fn from_datasets(sources: &[Dataset], target: &Dataset, fractions: (f64, f64), seed: u64) -> Result<Self> {
        if sources.is_empty() {
            return Err(Error::invalid("at least one source dataset required"));
        }
        let classes = target.class_count;
        if sources.iter().any(|s| s.class_count != classes) {
            return Err(Error::invalid("source and target class counts differ"));
        }
        let mut src_train = Vec::new();
        let mut src_val = Vec::new();
        for s in sources {
            let (tr, va) = split_dataset(s, fractions, seed)?;
            src_train.push(tr);
            src_val.push(va);
        }
        let (tgt_train, tgt_val) = split_dataset(target, fractions, seed)?;
        let data = Self {
            source_train: Arc::new(Dataset::concat(src_train)?),
            source_val: Dataset::concat(src_val)?,
            target_train: Arc::new(tgt_train),
            target_val: tgt_val,
            classes,
        };
        if data.source_train.is_empty() || data.target_train.is_empty() || data.target_val.is_empty() {
            return Err(Error::invalid("split left an empty train or target-val set"));
        }
        Ok(data)
    }

    pub fn from_manifests(sources: &[Manifest], target: &Manifest, fractions: (f64, f64), seed: u64) -> Result<Self> {
        let sources = sources
            .iter()
            .map(|m| Dataset::load(m, Role::Source))
            .collect::<Result<Vec<_>>>()?;
        Self::from_datasets(&sources, &Dataset::load(target, Role::Target)?, fractions, seed)
    }
}

#[derive(Clone, Debug, Default)]
pub struct ExperimentOptions {
    pub benchmark: String,
    /// Where metrics, checkpoints and the record go; nothing is written when unset.
    pub out_dir: Option<PathBuf>,
    /// Continue from a training checkpoint.
    pub resume: Option<PathBuf>,
    /// Stop (and write the final checkpoint) once this iteration is reached.
    pub stop_at: Option<u64>,
}

/// One line of the metrics log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogLine {
    pub iter: u64,
    pub mode: String,
    pub seg_loss: f64,
    pub disc_acc: Option<f64>,
    pub r_t: Option<f64>,
    pub p: Option<f64>,
    pub val_iou_target: f64,
    pub monitor: String,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub record: MetricsRecord,
    pub status: MonitorStatus,
    pub state: TrainState,
    pub log: Vec<LogLine>,
}

#[derive(Serialize, Deserialize)]
struct Cursors {
    source: Cursor,
    target: Option<Cursor>,
    best_iou: Option<f64>,
}

fn last_finite(col: &[f64]) -> Option<f64> {
    col.last().copied().filter(|v| !v.is_nan())
}

fn read_log(path: &Path, upto: u64) -> Result<Vec<LogLine>> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(path, e)),
    };
    let mut out = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let rec: LogLine = serde_json::from_str(line)?;
        if rec.iter <= upto {
            out.push(rec);
        }
    }
    Ok(out)
}

fn write_log(path: &Path, lines: &[LogLine]) -> Result<()> {
    let mut buf = Vec::new();
    for l in lines {
        serde_json::to_writer(&mut buf, l)?;
        buf.push(b'\n');
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

fn save(ck: &Checkpoint, dir: &Option<PathBuf>, name: &str) -> Result<()> {
    if let Some(d) = dir {
        ck.save(&d.join(name))?;
    }
    Ok(())
}

/// Train per `config`, evaluating target-val IoU every `eval_every`
/// iterations and at the end. The record reports the final model.
pub fn run_experiment(config: &TrainConfig, data: &ExperimentData, opts: &ExperimentOptions) -> Result<ExperimentOutcome> {
    config.validate()?;
    let adversarial = config.mode.is_adversarial();
    let seg_aug = config.segmenter_augmentation()?;
    let mut src_it = BatchIterator::new(
        data.source_train.clone(),
        config.batch_size,
        derive_seed(config.seed, &[tag::SOURCE_STREAM]),
    )?
    .with_augmentation(seg_aug.clone());
    let mut tgt_it = if adversarial {
        Some(
            BatchIterator::new(
                data.target_train.clone(),
                config.batch_size,
                derive_seed(config.seed, &[tag::TARGET_STREAM]),
            )?
            .with_augmentation(seg_aug),
        )
    } else {
        None
    };

    if let Some(d) = &opts.out_dir {
        fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let mut best_iou: Option<f64> = None;
    let (mut state, mut log) = match &opts.resume {
        Some(path) => {
            let (state, extra) = TrainState::from_checkpoint(&Checkpoint::load(path)?)?;
            if state.config != *config {
                return Err(Error::invalid("resume checkpoint was written with a different config"));
            }
            let cursors: Cursors = serde_json::from_value(extra)?;
            src_it.seek(cursors.source);
            if let (Some(it), Some(c)) = (tgt_it.as_mut(), cursors.target) {
                it.seek(c);
            }
            best_iou = cursors.best_iou;
            let log = match &opts.out_dir {
                Some(d) => read_log(&d.join(METRICS_FILE), state.iter)?,
                None => Vec::new(),
            };
            (state, log)
        }
        None => (TrainState::new(config.clone(), data.classes)?, Vec::new()),
    };
    if let Some(d) = &opts.out_dir {
        write_log(&d.join(METRICS_FILE), &log)?;
    }
    let metrics_path = opts.out_dir.as_ref().map(|d| d.join(METRICS_FILE));

    let stop = opts.stop_at.unwrap_or(config.iterations).min(config.iterations);
    // One history entry per step, so the last evaluation's iteration is also
    // where its averaging window ended, even across a resume.
    let mut window_start = state.history.evals.last().map_or(0, |e| e.iter as usize);
    while state.iter < stop {
        let src = src_it.next_batch()?;
        let tgt = match tgt_it.as_mut() {
            Some(it) => Some(it.next_batch()?),
            None => None,
        };
        train_step(&mut state, &src, tgt.as_ref())?;

        if state.iter % config.eval_every == 0 || state.iter == config.iterations {
            let iou = dataset_iou(&state.segmenter, &data.target_val.samples, data.classes)?.iou(BUILDING);
            state.history.evals.push(EvalPoint {
                iter: state.iter,
                val_iou_target: iou,
            });
            let status = divergence_monitor(&state.history, &config.monitor)?;
            let h = &state.history;
            let line = LogLine {
                iter: state.iter,
                mode: config.mode.to_string(),
                seg_loss: History::mean_since(&h.seg_loss, window_start).unwrap_or(f64::NAN),
                disc_acc: History::mean_since(&h.disc_acc, window_start),
                r_t: last_finite(&h.r_t),
                p: last_finite(&h.p),
                val_iou_target: iou,
                monitor: status.state.as_str().to_string(),
            };
            window_start = h.len();
            if let Some(path) = &metrics_path {
                let mut f = fs::OpenOptions::new()
                    .append(true)
                    .open(path)
                    .map_err(|e| Error::io(path, e))?;
                let mut text = serde_json::to_string(&line)?;
                text.push('\n');
                f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
            }
            log.push(line);
            if best_iou.is_none_or(|b| iou > b) {
                best_iou = Some(iou);
                if opts.out_dir.is_some() {
                    let extra = serde_json::to_value(Cursors {
                        source: src_it.cursor(),
                        target: tgt_it.as_ref().map(|t| t.cursor()),
                        best_iou,
                    })?;
                    save(&state.to_checkpoint(extra), &opts.out_dir, BEST_CHECKPOINT)?;
                }
            }
        }
    }

    let extra = serde_json::to_value(Cursors {
        source: src_it.cursor(),
        target: tgt_it.as_ref().map(|t| t.cursor()),
        best_iou,
    })?;
    save(&state.to_checkpoint(extra), &opts.out_dir, FINAL_CHECKPOINT)?;

    let status = divergence_monitor(&state.history, &config.monitor)?;
    let target = dataset_iou(&state.segmenter, &data.target_val.samples, data.classes)?;
    let source_val_iou = if data.source_val.is_empty() {
        None
    } else {
        Some(dataset_iou(&state.segmenter, &data.source_val.samples, data.classes)?.iou(BUILDING))
    };
    let record = MetricsRecord {
        benchmark: opts.benchmark.clone(),
        mode: config.mode.to_string(),
        seed: config.seed,
        augmented: config.segmenter_augmentation()?.is_some(),
        unit: Default::default(),
        class_iou: target.per_class_iou(),
        iou_building: target.iou(BUILDING),
        source_val_iou,
        delta_iou: None,
        iterations: state.iter,
        monitor: status.state.as_str().to_string(),
        overfit_detected: status.overfit_detected(),
    };
    if let Some(d) = &opts.out_dir {
        let path = d.join(RECORD_FILE);
        let mut text = serde_json::to_string_pretty(&record)?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(ExperimentOutcome {
        record,
        status,
        state,
        log,
    })
}
