//! Pipeline configuration: presets, TOML files and seed derivation.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use pbow_core::classify::{ClassifierSpec, SplitSpec};
use pbow_core::datasets::ShapeParams;
use pbow_core::{derive_seed, CodebookKind, CodebookSpec};
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Output directory used when neither the command line, the environment nor
/// the configuration names one.
pub const DEFAULT_OUT_DIR: &str = "pbow-out";

/// Environment variable overriding the configured output directory.
pub const OUT_DIR_ENV: &str = "PBOW_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// The full-size synthetic experiment: 500 points per cloud.
    PaperSynthetic,
    /// The same experiment with 100 points per cloud.
    DeskSynthetic,
}

impl Preset {
    pub const ALL: [Preset; 2] = [Preset::PaperSynthetic, Preset::DeskSynthetic];

    pub fn name(self) -> &'static str {
        match self {
            Preset::PaperSynthetic => "paper-synthetic",
            Preset::DeskSynthetic => "desk-synthetic",
        }
    }

    pub fn config(self) -> PipelineConfig {
        let base = PipelineConfig::default();
        match self {
            Preset::DeskSynthetic => base,
            Preset::PaperSynthetic => PipelineConfig {
                dataset: DatasetConfig {
                    points_per_cloud: 500,
                    ..base.dataset
                },
                ..base
            },
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .with_context(|| format!("unknown preset '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub clouds_per_class: usize,
    pub points_per_cloud: usize,
    pub noise_sigma: f64,
    pub shapes: ShapeParams,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            clouds_per_class: 50,
            points_per_cloud: 100,
            noise_sigma: 0.1,
            shapes: ShapeParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FiltrationKind {
    Rips,
    Cubical,
}

impl FromStr for FiltrationKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rips" => Ok(Self::Rips),
            "cubical" => Ok(Self::Cubical),
            _ => bail!("unknown filtration '{s}'"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiltrationConfig {
    pub kind: FiltrationKind,
    /// Homology dimension of the diagrams fed to the codebook.
    pub dim: usize,
    /// Largest Rips edge length; the cloud diameter when absent.
    pub max_radius: Option<f64>,
}

impl Default for FiltrationConfig {
    fn default() -> Self {
        Self {
            kind: FiltrationKind::Rips,
            dim: 1,
            max_radius: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    Pbow,
    Spbow,
}

impl EncoderKind {
    pub fn for_codebook(kind: CodebookKind) -> Self {
        match kind {
            CodebookKind::Kmeans => EncoderKind::Pbow,
            CodebookKind::Gmm => EncoderKind::Spbow,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub repetitions: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        let s = SplitSpec::default();
        Self {
            train_fraction: s.train_fraction,
            repetitions: s.repetitions,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub sizes: Vec<usize>,
    pub weighted: Vec<bool>,
    pub kinds: Vec<CodebookKind>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            sizes: (1..=20).map(|k| 10 * k).collect(),
            weighted: vec![false, true],
            kinds: vec![CodebookKind::Kmeans, CodebookKind::Gmm],
        }
    }
}

/// Every knob of the pipeline. All randomness is derived from `seed`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    /// Worker threads; all available cores when absent or zero.
    pub jobs: Option<usize>,
    pub dataset: DatasetConfig,
    pub filtration: FiltrationConfig,
    pub codebook: CodebookSpec,
    /// Must agree with `codebook.kind` when given.
    pub encoder: Option<EncoderKind>,
    pub classifier: ClassifierSpec,
    pub split: SplitConfig,
    pub sweep: SweepConfig,
}

/// Pipeline stages with their own random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Dataset = 1,
    Codebook = 2,
    Split = 3,
    Stability = 4,
}

/// Recursively overlays `patch` on `base`; tables merge, everything else is
/// replaced.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, p) => *b = p,
    }
}

impl PipelineConfig {
    /// The preset (or the defaults) overlaid with the TOML file, if any.
    pub fn load(preset: Option<Preset>, file: Option<&Path>) -> Result<Self> {
        let base = preset.map_or_else(PipelineConfig::default, Preset::config);
        let cfg = match file {
            None => base,
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                Self::overlay(base, &text)
                    .with_context(|| format!("in config file {}", path.display()))?
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `base` with the settings of a TOML document applied on top.
    pub fn overlay(base: PipelineConfig, toml_text: &str) -> Result<Self> {
        let patch: toml::Table = toml::from_str(toml_text)?;
        let mut value = serde_json::to_value(&base)?;
        merge(&mut value, serde_json::to_value(patch)?);
        Ok(serde_json::from_value(value)?)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(enc) = self.encoder {
            if enc != EncoderKind::for_codebook(self.codebook.kind) {
                bail!(
                    "encoder {enc:?} does not match codebook kind {}",
                    self.codebook.kind
                );
            }
        }
        if self.dataset.clouds_per_class == 0 || self.dataset.points_per_cloud == 0 {
            bail!("dataset sizes must be positive");
        }
        if !(self.dataset.noise_sigma >= 0.0) || !self.dataset.noise_sigma.is_finite() {
            bail!("noise_sigma must be finite and non-negative");
        }
        if self.codebook.n == 0 || self.sweep.sizes.contains(&0) {
            bail!("codebook sizes must be positive");
        }
        if self.sweep.sizes.is_empty()
            || self.sweep.weighted.is_empty()
            || self.sweep.kinds.is_empty()
        {
            bail!("sweep needs at least one size, weighting and codebook kind");
        }
        if let Some(r) = self.filtration.max_radius {
            if !(r > 0.0) {
                bail!("max_radius must be positive, got {r}");
            }
        }
        self.split_spec().validate()?;
        Ok(())
    }

    pub fn stage_seed(&self, stage: Stage) -> u64 {
        derive_seed(self.seed, stage as u64)
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            train_fraction: self.split.train_fraction,
            repetitions: self.split.repetitions,
            seed: self.stage_seed(Stage::Split),
        }
    }

    /// Output directory by precedence: `explicit` (command line or
    /// environment), then the configuration, then [`DEFAULT_OUT_DIR`].
    pub fn resolve_out_dir(&self, explicit: Option<&Path>) -> PathBuf {
        explicit
            .map(Path::to_path_buf)
            .or_else(|| self.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }
}
