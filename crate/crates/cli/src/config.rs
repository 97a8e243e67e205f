use std::path::{Path, PathBuf};

use geoadapt::adapt::{ExperimentData, TrainConfig};
use geoadapt::geodata::{benchmark_preset, generate_tile, tile_seed, Dataset, Manifest, Role};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Environment variable prefixed to relative manifest paths.
pub const DATA_ROOT_VAR: &str = "GEOADAPT_DATA_ROOT";

/// Tiles rendered in memory from a benchmark preset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticData {
    /// Tiles per domain.
    pub n: usize,
    #[serde(default = "default_tile_size")]
    pub tile_size: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_tile_size() -> usize {
    64
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

/// Everything one `train` invocation needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Preset name; also the report column.
    pub benchmark: String,
    /// Render the preset's domains instead of reading manifests.
    #[serde(default)]
    pub synthetic: Option<SyntheticData>,
    #[serde(default)]
    pub source_manifests: Vec<PathBuf>,
    #[serde(default)]
    pub target_manifest: Option<PathBuf>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
}

pub fn resolve_data_path(p: &Path) -> PathBuf {
    match std::env::var_os(DATA_ROOT_VAR) {
        Some(root) if p.is_relative() => PathBuf::from(root).join(p),
        _ => p.to_path_buf(),
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::usage(format!("invalid config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let manifests = !self.source_manifests.is_empty() || self.target_manifest.is_some();
        match (&self.synthetic, manifests) {
            (Some(_), true) => return Err(CliError::usage("give either `synthetic` or manifests, not both")),
            (None, false) => return Err(CliError::usage("config needs `synthetic` or source/target manifests")),
            (None, true) if self.source_manifests.is_empty() || self.target_manifest.is_none() => {
                return Err(CliError::usage("both source_manifests and target_manifest are required"))
            }
            _ => {}
        }
        if let Some(s) = &self.synthetic {
            benchmark_preset(&self.benchmark).map_err(CliError::usage)?;
            if s.n == 0 {
                return Err(CliError::usage("synthetic.n must be >= 1"));
            }
        }
        if self.seeds.is_empty() {
            return Err(CliError::usage("seed list is empty"));
        }
        self.train.validate().map_err(CliError::usage)
    }

    pub fn load_data(&self) -> Result<ExperimentData, CliError> {
        let (tr, va) = self.train.split;
        let data_seed = self.synthetic.as_ref().map_or(0, |s| s.seed);
        if let Some(s) = &self.synthetic {
            let preset = benchmark_preset(&self.benchmark).map_err(CliError::usage)?;
            let render = |style, role| -> Result<Dataset, CliError> {
                let samples = (0..s.n)
                    .map(|i| {
                        let mut t = generate_tile(style, tile_seed(s.seed, i), s.tile_size)?;
                        t.domain.role = role;
                        Ok(t)
                    })
                    .collect::<geoadapt::Result<Vec<_>>>()
                    .map_err(CliError::usage)?;
                Ok(Dataset::from_samples(samples, 2))
            };
            let sources = preset
                .sources
                .iter()
                .map(|st| render(st, Role::Source))
                .collect::<Result<Vec<_>, _>>()?;
            let target = render(&preset.target, Role::Target)?;
            return ExperimentData::from_datasets(&sources, &target, (tr, va), data_seed).map_err(CliError::usage);
        }
        let load = |p: &PathBuf| Manifest::load(&resolve_data_path(p)).map_err(CliError::usage);
        let sources = self.source_manifests.iter().map(load).collect::<Result<Vec<_>, _>>()?;
        let target = load(self.target_manifest.as_ref().expect("validated"))?;
        ExperimentData::from_manifests(&sources, &target, (tr, va), data_seed).map_err(CliError::runtime)
    }
}
