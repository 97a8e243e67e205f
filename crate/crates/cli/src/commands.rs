use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use geoadapt::adapt::{run_experiment, ExperimentOptions, Mode, TrainState, BUILDING};
use geoadapt::eval::{dataset_iou, render_predictions, render_report, MetricsRecord};
use geoadapt::geodata::{benchmark_preset, generate_dataset, Dataset, Manifest, Role, MANIFEST_FILE};
use geoadapt::labelgap::{compare_gaps, Embedding, Featurization, GapPair, GapSummary};
use geoadapt::models::Checkpoint;
use serde::{Deserialize, Serialize};

use crate::config::{resolve_data_path, ExperimentConfig};
use crate::CliError;

type CmdResult = Result<(), CliError>;

fn write(path: &Path, contents: impl AsRef<[u8]>) -> CmdResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::runtime(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
}

#[derive(Args)]
pub struct GenDataArgs {
    /// Benchmark preset: v2k, vp2k, ps2k, vsp2k or on2voff.
    #[arg(long)]
    preset: String,
    /// Tiles per domain.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// One subdirectory per domain is created here.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 64)]
    tile_size: usize,
}

pub fn gen_data(a: GenDataArgs) -> CmdResult {
    if a.n == 0 {
        return Err(CliError::usage("--n must be >= 1"));
    }
    let preset = benchmark_preset(&a.preset)?;
    for style in preset.sources.iter().chain([&preset.target]) {
        let dir = a.out.join(&style.name);
        let m = generate_dataset(style, a.n, a.seed, a.tile_size, &dir)?;
        println!("{}: {} tiles -> {}", style.name, m.len(), dir.join(MANIFEST_FILE).display());
    }
    Ok(())
}

#[derive(Args)]
pub struct TrainArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides `train.mode`.
    #[arg(long)]
    mode: Option<Mode>,
    /// Overrides the seed list with a single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Continue from a checkpoint written by an earlier run; needs a single seed.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Stop after this many iterations (the run can be resumed later).
    #[arg(long)]
    stop_at: Option<u64>,
}

/// Directory of one (mode, seed) run under the config's `out_dir`.
pub fn run_dir(out: &Path, mode: Mode, seed: u64) -> PathBuf {
    out.join(format!("{mode}_seed{seed}"))
}

pub fn train(a: TrainArgs) -> CmdResult {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(m) = a.mode {
        cfg.train.mode = m;
    }
    if let Some(s) = a.seed {
        cfg.seeds = vec![s];
    }
    cfg.validate()?;
    if a.resume.is_some() && cfg.seeds.len() != 1 {
        return Err(CliError::usage("--resume needs exactly one seed (use --seed)"));
    }
    let data = cfg.load_data()?;
    for &seed in &cfg.seeds {
        let mut tc = cfg.train.clone();
        tc.seed = seed;
        let dir = run_dir(&cfg.out_dir, tc.mode, seed);
        let out = run_experiment(
            &tc,
            &data,
            &ExperimentOptions {
                benchmark: cfg.benchmark.clone(),
                out_dir: Some(dir.clone()),
                resume: a.resume.clone(),
                stop_at: a.stop_at,
            },
        )?;
        let r = &out.record;
        println!(
            "{} seed {seed}: iter {} target IoU {:.4} source-val IoU {} monitor {} -> {}",
            tc.mode,
            r.iterations,
            r.iou_building,
            r.source_val_iou.map_or("n/a".into(), |v| format!("{v:.4}")),
            r.monitor,
            dir.display()
        );
    }
    Ok(())
}

#[derive(Args)]
pub struct EvalArgs {
    /// Training checkpoint (best.ckpt or final.ckpt).
    #[arg(long)]
    checkpoint: PathBuf,
    /// Tiles to evaluate on.
    #[arg(long)]
    manifest: PathBuf,
    /// Write prediction panels for the first tiles to this PNG.
    #[arg(long)]
    panels: Option<PathBuf>,
    /// Rows in the panel image.
    #[arg(long, default_value_t = 4)]
    panel_rows: usize,
    /// Write the per-class IoU as JSON here as well as to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct EvalOutput {
    tiles: usize,
    class_iou: Vec<f64>,
    iou_building: f64,
}

pub fn eval(a: EvalArgs) -> CmdResult {
    let ck = Checkpoint::load(&a.checkpoint)?;
    let (state, _) = TrainState::from_checkpoint(&ck)?;
    let manifest = Manifest::load(&resolve_data_path(&a.manifest))?;
    let data = Dataset::load(&manifest, Role::Target)?;
    let m = dataset_iou(&state.segmenter, &data.samples, state.classes())?;
    let out = EvalOutput {
        tiles: data.len(),
        class_iou: m.per_class_iou(),
        iou_building: m.iou(BUILDING),
    };
    let text = serde_json::to_string_pretty(&out).map_err(CliError::runtime)? + "\n";
    print!("{text}");
    if let Some(p) = &a.out {
        write(p, &text)?;
    }
    if let Some(p) = &a.panels {
        let rows = a.panel_rows.clamp(1, data.len());
        if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| CliError::runtime(format!("{}: {e}", dir.display())))?;
        }
        render_predictions(&[&state.segmenter], &data.samples[..rows], p)?;
    }
    Ok(())
}

#[derive(Args)]
pub struct GapArgs {
    /// JSON list of {"name", "source": [manifests], "target": [manifests]}.
    #[arg(long)]
    pairs: PathBuf,
    /// `grid[:G]` or `stats[:G]`.
    #[arg(long, default_value = "grid:32")]
    featurization: String,
    /// `identity`, `pca:K` or `external:PATH` (ids per pair: sources first, then targets).
    #[arg(long, default_value = "identity")]
    embedding: String,
    /// Output directory: `summary.json` plus one curve CSV per pair.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PairSpec {
    name: String,
    source: Vec<PathBuf>,
    target: Vec<PathBuf>,
}

fn parse_featurization(s: &str) -> Result<Featurization, CliError> {
    let (kind, g) = s.split_once(':').unwrap_or((s, "32"));
    let g: usize = g.parse().map_err(|_| CliError::usage(format!("bad grid size in {s:?}")))?;
    match kind {
        "grid" => Ok(Featurization::Grid { g }),
        "stats" => Ok(Featurization::Stats { g }),
        _ => Err(CliError::usage(format!("unknown featurization {s:?}"))),
    }
}

fn parse_embedding(s: &str) -> Result<Embedding, CliError> {
    match s.split_once(':') {
        None if s == "identity" => Ok(Embedding::Identity),
        Some(("pca", k)) => Ok(Embedding::Pca {
            k: k.parse().map_err(|_| CliError::usage(format!("bad PCA dimension in {s:?}")))?,
        }),
        Some(("external", p)) => Ok(Embedding::External {
            path: resolve_data_path(Path::new(p)),
        }),
        _ => Err(CliError::usage(format!("unknown embedding {s:?}"))),
    }
}

fn load_masks(paths: &[PathBuf]) -> Result<Vec<geoadapt::geodata::Mask>, CliError> {
    let mut out = Vec::new();
    for p in paths {
        let data = Dataset::load(&Manifest::load(&resolve_data_path(p))?, Role::Source)?;
        out.extend(data.samples.into_iter().map(|s| s.mask));
    }
    Ok(out)
}

pub fn gap(a: GapArgs) -> CmdResult {
    let featurization = parse_featurization(&a.featurization)?;
    let embedding = parse_embedding(&a.embedding)?;
    let text = fs::read_to_string(&a.pairs).map_err(|e| CliError::usage(format!("{}: {e}", a.pairs.display())))?;
    let specs: Vec<PairSpec> =
        serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", a.pairs.display())))?;
    let pairs = specs
        .iter()
        .map(|s| {
            Ok(GapPair {
                name: s.name.clone(),
                source: load_masks(&s.source)?,
                target: load_masks(&s.target)?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let ranked = compare_gaps(&pairs, featurization, &embedding)?;
    let summary: Vec<&GapSummary> = ranked.iter().map(|r| &r.summary).collect();
    for r in &ranked {
        write(&a.out.join(format!("{}.csv", r.summary.pair)), r.curve.to_csv())?;
        println!("{}  auc {:.4}  ({} source, {} target)", r.summary.pair, r.summary.auc, r.summary.n_source, r.summary.n_target);
    }
    write(
        &a.out.join("summary.json"),
        serde_json::to_string_pretty(&summary).map_err(CliError::runtime)? + "\n",
    )
}

#[derive(Args)]
pub struct ReportArgs {
    /// Glob patterns over `record.json` files, JSONL files of records, or
    /// directories searched for `record.json`.
    #[arg(long, num_args = 1.., required = true)]
    runs: Vec<String>,
    /// Output directory for `table.txt`, `table.csv` and `runs.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read_records(path: &Path) -> Result<Vec<MetricsRecord>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    let bad = |e: serde_json::Error| CliError::usage(format!("{}: {e}", path.display()));
    if path.extension().is_some_and(|e| e == "jsonl") {
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(bad))
            .collect()
    } else {
        Ok(vec![serde_json::from_str(&text).map_err(bad)?])
    }
}

/// Directories are searched recursively for `record.json`; files are taken as given.
fn collect_records(path: &Path, out: &mut Vec<PathBuf>) -> Result<(), CliError> {
    if !path.is_dir() {
        out.push(path.to_path_buf());
        return Ok(());
    }
    let mut entries: Vec<PathBuf> = fs::read_dir(path)
        .map_err(CliError::runtime)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()
        .map_err(CliError::runtime)?;
    entries.sort();
    for e in entries {
        if e.is_dir() {
            collect_records(&e, out)?;
        } else if e.file_name().is_some_and(|n| n == "record.json") {
            out.push(e);
        }
    }
    Ok(())
}

pub fn report(a: ReportArgs) -> CmdResult {
    let mut files = Vec::new();
    for pattern in &a.runs {
        let matches = glob::glob(pattern).map_err(|e| CliError::usage(format!("bad pattern {pattern:?}: {e}")))?;
        let mut any = false;
        for m in matches {
            collect_records(&m.map_err(CliError::runtime)?, &mut files)?;
            any = true;
        }
        if !any {
            return Err(CliError::usage(format!("{pattern}: no matching files")));
        }
    }
    if files.is_empty() {
        return Err(CliError::usage("no record.json found under the given --runs paths"));
    }
    let mut records = Vec::new();
    for f in &files {
        records.extend(read_records(f)?);
    }
    let report = render_report(&records)?;
    print!("{}", report.text);
    if let Some(dir) = &a.out {
        write(&dir.join("table.txt"), &report.text)?;
        write(&dir.join("table.csv"), &report.csv)?;
        write(&dir.join("runs.csv"), &report.long_csv)?;
    }
    Ok(())
}
