//! Command-line front end for the persistence bag-of-words pipeline.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // negated comparisons reject NaN

pub mod check;
pub mod commands;
pub mod config;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use pbow_core::CodebookKind;
use serde::Serialize;

use crate::config::{FiltrationKind, PipelineConfig, Preset, OUT_DIR_ENV};

#[derive(Debug, Parser)]
#[command(
    name = "pbow",
    version,
    about = "Bag-of-words vectorization of persistence diagrams"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Master seed; overrides the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML file overlaid on the preset.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = OUT_DIR_ENV)]
    pub out: Option<PathBuf>,
    /// Worker threads (0 uses every core).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Base configuration.
    #[arg(long, global = true)]
    pub preset: Option<Preset>,
}

#[derive(Debug, Clone, Args)]
pub struct DiagramSource {
    /// Diagram CSV files.
    pub inputs: Vec<PathBuf>,
    /// Diagram manifest written by `ph`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Homology dimension; the configured one when absent.
    #[arg(long)]
    pub dim: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the synthetic point-cloud dataset and its manifest.
    Generate,
    /// Compute persistence diagrams of point clouds or images.
    Ph {
        /// Point-cloud CSV files (Rips) or image files (cubical).
        inputs: Vec<PathBuf>,
        /// Dataset manifest written by `generate`.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        filtration: Option<FiltrationKind>,
        /// Homology dimensions to compute; the configured one when absent.
        #[arg(long, value_delimiter = ',')]
        dims: Vec<usize>,
        #[arg(long)]
        max_radius: Option<f64>,
    },
    /// Wasserstein and bottleneck distances between two diagram files.
    Dist {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        q: f64,
        #[arg(long)]
        dim: Option<usize>,
    },
    /// Learn a codebook from diagrams.
    Codebook {
        #[command(flatten)]
        source: DiagramSource,
        /// `kmeans` (PBoW) or `gmm` (sPBoW).
        #[arg(long)]
        kind: Option<CodebookKind>,
        /// Codebook size N.
        #[arg(short = 'n', long)]
        size: Option<usize>,
        /// Persistence-weighted subsampling.
        #[arg(long)]
        weighted: Option<bool>,
        /// Subsample size S.
        #[arg(long)]
        sample_size: Option<usize>,
    },
    /// Encode diagrams against a codebook into a feature CSV.
    Encode {
        #[command(flatten)]
        source: DiagramSource,
        /// Codebook JSON written by `codebook`.
        #[arg(long)]
        codebook: PathBuf,
        /// Skip the signed square root and L2 normalization.
        #[arg(long)]
        raw: bool,
    },
    /// Accuracy over repeated stratified splits of a labeled feature CSV.
    Classify {
        features: PathBuf,
        /// Use k-nearest neighbours instead of the linear classifier.
        #[arg(long)]
        knn: Option<usize>,
    },
    /// Accuracy as a function of codebook size on the synthetic dataset.
    Sweep {
        /// Codebook sizes; the configured grid when absent.
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        /// Codebook kinds; the configured ones when absent.
        #[arg(long, value_delimiter = ',')]
        kinds: Vec<CodebookKind>,
    },
    /// Test the sPBoW stability bound on random perturbations.
    StabilityCheck {
        /// GMM codebook JSON; a random mixture when absent.
        #[arg(long)]
        codebook: Option<PathBuf>,
        /// Components of the random mixture.
        #[arg(long, default_value_t = 5)]
        components: usize,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
    },
}

impl GlobalArgs {
    /// The effective configuration: preset, then file, then flags.
    pub fn config(&self) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::load(self.preset, self.config.as_deref())?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(jobs) = self.jobs {
            cfg.jobs = Some(jobs);
        }
        Ok(cfg)
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn diagram_inputs(source: &DiagramSource, cfg: &PipelineConfig) -> Result<commands::DiagramInputs> {
    commands::load_diagrams(
        &source.inputs,
        source.manifest.as_deref(),
        source.dim.unwrap_or(cfg.filtration.dim),
    )
}

/// Runs one parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = cli.global.config()?;
    let out = cfg.resolve_out_dir(cli.global.out.as_deref());
    if let Some(jobs) = cfg.jobs.filter(|&j| j > 0) {
        // Fails only when the pool already exists, as in repeated in-process runs.
        if rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .is_err()
        {
            log::debug!("thread pool already initialized");
        }
    }
    match cli.command {
        Command::Generate => {
            let m = commands::generate(&cfg, &out)?;
            println!("{}", out.join(commands::MANIFEST_FILE).display());
            log::info!("{} clouds", m.clouds.len());
        }
        Command::Ph {
            inputs,
            manifest,
            filtration,
            dims,
            max_radius,
        } => {
            let kind = filtration.unwrap_or(cfg.filtration.kind);
            let dims = if dims.is_empty() {
                vec![cfg.filtration.dim]
            } else {
                dims
            };
            let radius = max_radius.or(cfg.filtration.max_radius);
            commands::ph(&inputs, manifest.as_deref(), kind, &dims, radius, &out)?;
            println!("{}", out.join(commands::DIAGRAM_MANIFEST_FILE).display());
        }
        Command::Dist { a, b, q, dim } => {
            print_json(&commands::dist(
                &a,
                &b,
                q,
                dim.unwrap_or(cfg.filtration.dim),
            )?)?;
        }
        Command::Codebook {
            source,
            kind,
            size,
            weighted,
            sample_size,
        } => {
            if let Some(k) = kind {
                cfg.codebook.kind = k;
            }
            if let Some(n) = size {
                cfg.codebook.n = n;
            }
            if let Some(w) = weighted {
                cfg.codebook.weighted = w;
            }
            if let Some(s) = sample_size {
                cfg.codebook.sample_size = s;
            }
            cfg.encoder = None;
            cfg.validate()?;
            let inputs = diagram_inputs(&source, &cfg)?;
            commands::codebook(&cfg, &inputs.diagrams, &out)?;
            println!("{}", out.join(commands::CODEBOOK_FILE).display());
        }
        Command::Encode {
            source,
            codebook,
            raw,
        } => {
            let cb = commands::load_codebook(&codebook)?;
            let inputs = diagram_inputs(&source, &cfg)?;
            let path =
                commands::encode(&cb, &inputs.diagrams, inputs.labels.as_deref(), raw, &out)?;
            println!("{}", path.display());
        }
        Command::Classify { features, knn } => {
            if let Some(k) = knn {
                cfg.classifier = pbow_core::classify::ClassifierSpec::Knn { k };
            }
            print_json(&commands::classify(&cfg, &features, &out)?)?;
        }
        Command::Sweep { sizes, kinds } => {
            if !sizes.is_empty() {
                cfg.sweep.sizes = sizes;
            }
            if !kinds.is_empty() {
                cfg.sweep.kinds = kinds;
            }
            cfg.validate()?;
            let summary = commands::sweep(&cfg, &out)?;
            print_json(&summary.best)?;
        }
        Command::StabilityCheck {
            codebook,
            components,
            trials,
        } => {
            let report =
                commands::stability_check(&cfg, codebook.as_deref(), components, trials, &out)?;
            print_json(&report)?;
        }
    }
    Ok(())
}
