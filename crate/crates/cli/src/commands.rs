//! The pipeline stages behind each subcommand. Every function reads and
//! writes the documented CSV/JSON formats under an output directory.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use pbow_core::classify::{
    grid_search, train_and_score, ClassifierSpec, GridResult, GridRow, GridSpec,
};
use pbow_core::datasets::{
    class_names, generate_dataset_with, DatasetManifest, LabeledDiagramSet, ManifestEntry,
    ShapeClass,
};
use pbow_core::io::{
    read_diagram_file, read_features, read_image_file, read_point_cloud_file, write_diagrams,
    write_features, write_json, write_point_cloud, DiagramDocument,
};
use pbow_core::metrics::{bottleneck, wasserstein};
use pbow_core::persistence::{
    build_cubical_filtration, compute_persistence, rips_diagram, to_birth_persistence,
    InfinitePolicy,
};
use pbow_core::{derive_seed, Codebook, CodebookKind, Diagram, Encoder};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::check::{check_stability, random_mixture, StabilityReport};
use crate::config::{FiltrationKind, PipelineConfig, Stage};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const DIAGRAM_MANIFEST_FILE: &str = "diagrams.json";
pub const CODEBOOK_FILE: &str = "codebook.json";
pub const FEATURES_FILE: &str = "features.csv";
pub const CLASSIFICATION_FILE: &str = "classification.json";
pub const SWEEP_CSV_FILE: &str = "sweep.csv";
pub const SWEEP_PLOT_FILE: &str = "sweep_plot.json";
pub const SWEEP_SUMMARY_FILE: &str = "sweep_summary.json";
pub const STABILITY_FILE: &str = "stability.json";

fn create_file(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(
        fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    write_json(value, create_file(path)?)?;
    Ok(())
}

fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Paths inside a manifest are relative to the manifest's directory.
fn resolve(manifest: &Path, entry: &str) -> PathBuf {
    manifest.parent().unwrap_or(Path::new(".")).join(entry)
}

/// Writes the synthetic dataset as one CSV per cloud plus [`MANIFEST_FILE`].
pub fn generate(cfg: &PipelineConfig, out: &Path) -> Result<DatasetManifest> {
    let d = &cfg.dataset;
    let seed = cfg.stage_seed(Stage::Dataset);
    let clouds = generate_dataset_with(
        d.clouds_per_class,
        d.points_per_cloud,
        d.noise_sigma,
        seed,
        &d.shapes,
    )?;
    let mut entries = Vec::with_capacity(clouds.len());
    let mut index = vec![0usize; ShapeClass::ALL.len()];
    for c in &clouds {
        let k = index[c.label()];
        index[c.label()] += 1;
        let rel = format!("clouds/{}_{k:03}.csv", c.class.name());
        write_point_cloud(&c.cloud, create_file(&out.join(&rel))?)?;
        entries.push(ManifestEntry {
            path: rel,
            label: c.label(),
            class: c.class.name().to_string(),
            seed: c.seed,
        });
    }
    let manifest = DatasetManifest {
        class_names: class_names(),
        clouds_per_class: d.clouds_per_class,
        points_per_cloud: d.points_per_cloud,
        noise_sigma: d.noise_sigma,
        seed,
        shape_params: d.shapes,
        clouds: entries,
    };
    save_json(&manifest, &out.join(MANIFEST_FILE))?;
    log::info!(
        "wrote {} clouds to {}",
        manifest.clouds.len(),
        out.display()
    );
    Ok(manifest)
}

/// One diagram file listed in a [`DiagramManifest`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramEntry {
    pub path: String,
    pub source: String,
    pub label: Option<usize>,
}

/// Diagrams produced by `ph`, with labels carried over from a dataset
/// manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramManifest {
    pub dims: Vec<usize>,
    pub filtration: FiltrationKind,
    pub class_names: Vec<String>,
    pub diagrams: Vec<DiagramEntry>,
}

/// Diagrams of the requested dimensions for one input file.
pub fn diagrams_of_file(
    path: &Path,
    kind: FiltrationKind,
    dims: &[usize],
    max_radius: Option<f64>,
) -> Result<Vec<Diagram>> {
    match kind {
        FiltrationKind::Rips => {
            let cloud = read_point_cloud_file(path)?;
            dims.iter()
                .map(|&d| Ok(rips_diagram(&cloud, d, max_radius)?))
                .collect()
        }
        FiltrationKind::Cubical => {
            let image = read_image_file(path)?;
            let f = build_cubical_filtration(&image);
            Ok(compute_persistence(&f, dims)
                .iter()
                .map(|bd| to_birth_persistence(bd, InfinitePolicy::Ignore))
                .collect())
        }
    }
}

fn write_diagram_outputs(
    diagrams: &[Diagram],
    source: &str,
    kind: FiltrationKind,
    csv: &Path,
) -> Result<()> {
    write_diagrams(diagrams, create_file(csv)?)?;
    let doc = DiagramDocument {
        source: source.to_string(),
        filtration: format!("{kind:?}").to_lowercase(),
        policy: InfinitePolicy::Ignore,
        diagrams: diagrams.to_vec(),
    };
    save_json(&doc, &csv.with_extension("json"))
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "input".to_string(), |s| s.to_string_lossy().into_owned())
}

/// Persistence diagrams of the given files (or of every cloud in a dataset
/// manifest), written to `out/diagrams/` together with
/// [`DIAGRAM_MANIFEST_FILE`].
pub fn ph(
    inputs: &[PathBuf],
    manifest: Option<&Path>,
    kind: FiltrationKind,
    dims: &[usize],
    max_radius: Option<f64>,
    out: &Path,
) -> Result<DiagramManifest> {
    ensure!(!dims.is_empty(), "no homology dimension requested");
    let mut jobs: Vec<(PathBuf, String, Option<usize>)> = inputs
        .iter()
        .map(|p| (p.clone(), p.display().to_string(), None))
        .collect();
    let mut names = Vec::new();
    if let Some(m) = manifest {
        let dataset: DatasetManifest = load_json(m)?;
        names = dataset.class_names.clone();
        jobs.extend(
            dataset
                .clouds
                .iter()
                .map(|c| (resolve(m, &c.path), c.path.clone(), Some(c.label))),
        );
    }
    ensure!(!jobs.is_empty(), "no input files");
    let mut seen = std::collections::HashSet::new();
    let stems: Vec<String> = jobs
        .iter()
        .enumerate()
        .map(|(i, (p, _, _))| {
            let s = file_stem(p);
            if seen.insert(s.clone()) {
                s
            } else {
                format!("{s}_{i}")
            }
        })
        .collect();
    let entries: Vec<DiagramEntry> = jobs
        .par_iter()
        .zip(&stems)
        .map(|((path, source, label), stem)| {
            let diagrams = diagrams_of_file(path, kind, dims, max_radius)?;
            let rel = format!("diagrams/{stem}.csv");
            write_diagram_outputs(&diagrams, source, kind, &out.join(&rel))?;
            Ok(DiagramEntry {
                path: rel,
                source: source.clone(),
                label: *label,
            })
        })
        .collect::<Result<_>>()?;
    let result = DiagramManifest {
        dims: dims.to_vec(),
        filtration: kind,
        class_names: names,
        diagrams: entries,
    };
    save_json(&result, &out.join(DIAGRAM_MANIFEST_FILE))?;
    log::info!(
        "wrote {} diagram files to {}",
        result.diagrams.len(),
        out.join("diagrams").display()
    );
    Ok(result)
}

/// Diagrams of dimension `dim`, from diagram CSV files and/or a diagram
/// manifest. Labels are returned only when every diagram has one.
pub struct DiagramInputs {
    pub diagrams: Vec<Diagram>,
    pub labels: Option<Vec<usize>>,
    pub class_names: Vec<String>,
}

pub fn load_diagrams(
    inputs: &[PathBuf],
    manifest: Option<&Path>,
    dim: usize,
) -> Result<DiagramInputs> {
    let mut diagrams = Vec::new();
    let mut labels = Vec::new();
    for p in inputs {
        diagrams.push(read_diagram_file(p, dim)?);
        labels.push(None);
    }
    let mut class_names = Vec::new();
    if let Some(m) = manifest {
        let dm: DiagramManifest = load_json(m)?;
        class_names = dm.class_names.clone();
        for e in &dm.diagrams {
            diagrams.push(read_diagram_file(&resolve(m, &e.path), dim)?);
            labels.push(e.label);
        }
    }
    ensure!(!diagrams.is_empty(), "no diagrams given");
    let labels = labels.into_iter().collect::<Option<Vec<usize>>>();
    Ok(DiagramInputs {
        diagrams,
        labels,
        class_names,
    })
}

/// Distances between the dimension-`dim` diagrams of two files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub dim: usize,
    pub q: f64,
    pub wasserstein: f64,
    pub bottleneck: f64,
}

pub fn dist(a: &Path, b: &Path, q: f64, dim: usize) -> Result<DistanceReport> {
    let (da, db) = (read_diagram_file(a, dim)?, read_diagram_file(b, dim)?);
    Ok(DistanceReport {
        dim,
        q,
        wasserstein: wasserstein(&da, &db, q)?,
        bottleneck: bottleneck(&da, &db),
    })
}

/// Fits the configured codebook and writes [`CODEBOOK_FILE`].
pub fn codebook(cfg: &PipelineConfig, diagrams: &[Diagram], out: &Path) -> Result<Codebook> {
    let cb = cfg
        .codebook
        .fit(diagrams, cfg.stage_seed(Stage::Codebook))?;
    save_json(&cb, &out.join(CODEBOOK_FILE))?;
    log::info!(
        "fitted {} codebook of size {} ({})",
        cfg.codebook.kind,
        cb.size(),
        cb.id()
    );
    Ok(cb)
}

pub fn load_codebook(path: &Path) -> Result<Codebook> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Codebook::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Encodes `diagrams` and writes [`FEATURES_FILE`]; `raw` skips the
/// signed-square-root normalization.
pub fn encode(
    cb: &Codebook,
    diagrams: &[Diagram],
    labels: Option<&[usize]>,
    raw: bool,
    out: &Path,
) -> Result<PathBuf> {
    let encoder = Encoder::new(cb)?;
    let features: Vec<_> = if raw {
        diagrams.par_iter().map(|d| encoder.encode_raw(d)).collect()
    } else {
        encoder.encode_all(diagrams)
    };
    let path = out.join(FEATURES_FILE);
    write_features(&features, labels, create_file(&path)?)?;
    Ok(path)
}

/// Accuracy of the configured classifier over repeated stratified splits of a
/// labeled feature file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub classifier: ClassifierSpec,
    pub train_fraction: f64,
    pub accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
}

pub fn classify(cfg: &PipelineConfig, features: &Path, out: &Path) -> Result<ClassificationReport> {
    let file =
        fs::File::open(features).with_context(|| format!("opening {}", features.display()))?;
    let (x, labels) = read_features(file, &features.display().to_string())?;
    let Some(y) = labels else {
        bail!("{} has no label column", features.display())
    };
    let classes = y.iter().max().map_or(0, |m| m + 1);
    let split = cfg.split_spec();
    let accuracies = (0..split.repetitions)
        .map(|rep| {
            let s = split.split(&y, rep)?;
            let pick = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<usize>) {
                idx.iter().map(|&i| (x[i].clone(), y[i])).unzip()
            };
            let (tx, ty) = pick(&s.train);
            let (vx, vy) = pick(&s.test);
            Ok(train_and_score(
                &cfg.classifier,
                &tx,
                &ty,
                &vx,
                &vy,
                classes,
                derive_seed(split.seed, rep as u64),
            )?)
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = accuracies.len() as f64;
    let mean = accuracies.iter().sum::<f64>() / n;
    let std = (accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
    let report = ClassificationReport {
        classifier: cfg.classifier.clone(),
        train_fraction: split.train_fraction,
        accuracies,
        mean_accuracy: mean,
        std_accuracy: std,
    };
    save_json(&report, &out.join(CLASSIFICATION_FILE))?;
    Ok(report)
}

/// Diagrams of the synthetic dataset described by `cfg`, computed in memory.
pub fn synthetic_diagrams(cfg: &PipelineConfig) -> Result<LabeledDiagramSet> {
    ensure!(
        cfg.filtration.kind == FiltrationKind::Rips,
        "the synthetic dataset needs a Rips filtration"
    );
    let d = &cfg.dataset;
    let clouds = generate_dataset_with(
        d.clouds_per_class,
        d.points_per_cloud,
        d.noise_sigma,
        cfg.stage_seed(Stage::Dataset),
        &d.shapes,
    )?;
    let entries = clouds
        .par_iter()
        .map(|c| {
            Ok((
                rips_diagram(&c.cloud, cfg.filtration.dim, cfg.filtration.max_radius)?,
                c.label(),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LabeledDiagramSet::new(entries, class_names())?)
}

/// Best configuration of one encoder in a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub config: PipelineConfig,
    pub diagrams: usize,
    pub best: Vec<GridRow>,
    pub diagram_secs: f64,
    pub sweep_secs: f64,
}

impl SweepSummary {
    pub fn best_for(&self, encoder: &str) -> Option<&GridRow> {
        self.best.iter().find(|r| r.encoder == encoder)
    }
}

/// Accuracy-vs-N sweep on precomputed diagrams for every configured codebook
/// kind; results are merged into one table.
pub fn sweep_diagrams(cfg: &PipelineConfig, set: &LabeledDiagramSet) -> Result<GridResult> {
    let mut rows = Vec::new();
    for &kind in &cfg.sweep.kinds {
        let spec = GridSpec {
            sizes: cfg.sweep.sizes.clone(),
            weighted: cfg.sweep.weighted.clone(),
            kind,
            codebook: cfg.codebook.clone(),
            classifier: cfg.classifier.clone(),
            split: cfg.split_spec(),
        };
        let start = Instant::now();
        let g = grid_search(set, &spec)?;
        log::info!(
            "{kind} sweep over {} configurations took {:.1?}",
            g.rows.len(),
            start.elapsed()
        );
        rows.extend(g.rows);
    }
    Ok(GridResult { rows })
}

/// The full synthetic experiment: dataset, diagrams and sweep. Writes
/// [`SWEEP_CSV_FILE`], [`SWEEP_PLOT_FILE`] and [`SWEEP_SUMMARY_FILE`].
pub fn sweep(cfg: &PipelineConfig, out: &Path) -> Result<SweepSummary> {
    let start = Instant::now();
    let set = synthetic_diagrams(cfg)?;
    let diagram_secs = start.elapsed().as_secs_f64();
    log::info!("computed {} diagrams in {diagram_secs:.1}s", set.len());
    let start = Instant::now();
    let grid = sweep_diagrams(cfg, &set)?;
    let sweep_secs = start.elapsed().as_secs_f64();
    fs::create_dir_all(out)?;
    fs::write(out.join(SWEEP_CSV_FILE), grid.to_csv())?;
    fs::write(out.join(SWEEP_PLOT_FILE), grid.to_plot_json()?)?;
    let mut best: Vec<GridRow> = Vec::new();
    for kind in &cfg.sweep.kinds {
        let encoder = crate::config::EncoderKind::for_codebook(*kind);
        let name = format!("{encoder:?}").to_lowercase();
        let sub = GridResult {
            rows: grid
                .rows
                .iter()
                .filter(|r| r.encoder == name)
                .cloned()
                .collect(),
        };
        best.extend(sub.best().cloned());
    }
    let summary = SweepSummary {
        config: cfg.clone(),
        diagrams: set.len(),
        best,
        diagram_secs,
        sweep_secs,
    };
    save_json(&summary, &out.join(SWEEP_SUMMARY_FILE))?;
    Ok(summary)
}

/// Stability check on a saved GMM codebook, or on a random mixture of
/// `components` components drawn from the stability seed.
pub fn stability_check(
    cfg: &PipelineConfig,
    codebook: Option<&Path>,
    components: usize,
    trials: usize,
    out: &Path,
) -> Result<StabilityReport> {
    let seed = cfg.stage_seed(Stage::Stability);
    let gmm = match codebook {
        Some(path) => match load_codebook(path)?.model {
            pbow_core::codebook::CodebookModel::Gmm { components, .. } => pbow_core::GmmCodebook {
                components,
                iterations_run: 0,
                log_likelihood_history: vec![],
            },
            _ => bail!(
                "{} is a {} codebook; the certificate needs a GMM",
                path.display(),
                CodebookKind::Kmeans
            ),
        },
        None => {
            ensure!(components >= 1, "need at least one component");
            random_mixture(&mut ChaCha8Rng::seed_from_u64(seed), components)
        }
    };
    let report = check_stability(&gmm, trials, derive_seed(seed, 1))?;
    save_json(&report, &out.join(STABILITY_FILE))?;
    ensure!(
        report.holds(),
        "stability bound violated on {} of {} trials (max ratio {} > C = {}); see {}",
        report.violations,
        report.trials,
        report.max_ratio,
        report.c,
        out.join(STABILITY_FILE).display()
    );
    Ok(report)
}
