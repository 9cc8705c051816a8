//! Classifiers over feature vectors and the codebook-size sweep.

use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codebook::{CodebookKind, CodebookSpec};
use crate::datasets::LabeledDiagramSet;
use crate::derive_seed;
use crate::encoding::Encoder;
use crate::error::{Error, Result};
use crate::persistence::Diagram;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    /// Stochastic subgradient steps over shuffled examples.
    Sgd,
    /// Full subgradient steps with backtracking; the objective never increases.
    FullBatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearOptions {
    pub epochs: usize,
    pub learning_rate: f64,
    /// L2 penalty on the weights (not the bias).
    pub reg: f64,
    pub seed: u64,
    pub solver: Solver,
    /// Z-score every feature with training-set statistics.
    pub standardize: bool,
}

impl Default for LinearOptions {
    fn default() -> Self {
        Self {
            epochs: 100,
            learning_rate: 0.1,
            reg: 1e-3,
            seed: 0,
            solver: Solver::Sgd,
            standardize: true,
        }
    }
}

/// One-vs-rest linear classifier on the L2-regularized hinge loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    /// Per-feature affine map `(x - shift) / scale` applied before scoring.
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
    /// Mean one-vs-rest objective after each epoch.
    pub objective_history: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_dims(x: &[Vec<f64>], dim: usize) -> Result<()> {
    match x.iter().find(|r| r.len() != dim) {
        Some(r) => Err(Error::DimensionMismatch {
            expected: dim,
            got: r.len(),
        }),
        None => Ok(()),
    }
}

/// Binary hinge objective `λ/2 |w|² + mean max(0, 1 - y (w·x + b))`.
fn binary_objective(x: &[Vec<f64>], y: &[f64], w: &[f64], b: f64, reg: f64) -> f64 {
    let loss: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, &yi)| (1.0 - yi * (dot(w, xi) + b)).max(0.0))
        .sum();
    0.5 * reg * dot(w, w) + loss / x.len() as f64
}

fn train_binary_sgd(
    x: &[Vec<f64>],
    y: &[f64],
    opts: &LinearOptions,
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, f64, Vec<f64>) {
    let dim = x[0].len();
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..x.len()).collect();
    let mut t = 0usize;
    let mut history = Vec::with_capacity(opts.epochs);
    for _ in 0..opts.epochs {
        order.shuffle(rng);
        for &i in &order {
            t += 1;
            let eta = opts.learning_rate / (1.0 + opts.learning_rate * opts.reg * t as f64);
            let margin = y[i] * (dot(&w, &x[i]) + b);
            let shrink = 1.0 - eta * opts.reg;
            for wj in w.iter_mut() {
                *wj *= shrink;
            }
            if margin < 1.0 {
                for (wj, xj) in w.iter_mut().zip(&x[i]) {
                    *wj += eta * y[i] * xj;
                }
                b += eta * y[i];
            }
        }
        history.push(binary_objective(x, y, &w, b, opts.reg));
    }
    (w, b, history)
}

fn train_binary_full(x: &[Vec<f64>], y: &[f64], opts: &LinearOptions) -> (Vec<f64>, f64, Vec<f64>) {
    let dim = x[0].len();
    let n = x.len() as f64;
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut obj = binary_objective(x, y, &w, b, opts.reg);
    let mut history = Vec::with_capacity(opts.epochs);
    for _ in 0..opts.epochs {
        let mut gw: Vec<f64> = w.iter().map(|wj| opts.reg * wj).collect();
        let mut gb = 0.0;
        for (xi, &yi) in x.iter().zip(y) {
            if yi * (dot(&w, xi) + b) < 1.0 {
                for (g, xj) in gw.iter_mut().zip(xi) {
                    *g -= yi * xj / n;
                }
                gb -= yi / n;
            }
        }
        let mut step = opts.learning_rate;
        for _ in 0..60 {
            let w_new: Vec<f64> = w.iter().zip(&gw).map(|(wj, g)| wj - step * g).collect();
            let b_new = b - step * gb;
            let o = binary_objective(x, y, &w_new, b_new, opts.reg);
            if o <= obj {
                w = w_new;
                b = b_new;
                obj = o;
                break;
            }
            step *= 0.5;
        }
        history.push(obj);
    }
    (w, b, history)
}

/// Trains one binary classifier per class on `x` with labels `y` in
/// `0..classes`.
pub fn train_linear(
    x: &[Vec<f64>],
    y: &[usize],
    classes: usize,
    opts: &LinearOptions,
) -> Result<LinearModel> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "{} feature rows for {} labels",
            x.len(),
            y.len()
        )));
    }
    check_dims(x, x[0].len())?;
    if let Some(&l) = y.iter().find(|&&l| l >= classes) {
        return Err(Error::InvalidInput(format!(
            "label {l} out of range for {classes} classes"
        )));
    }
    let mut present = vec![false; classes];
    for &l in y {
        present[l] = true;
    }
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::SingleClass);
    }
    let dim = x[0].len();
    let (shift, scale) = if opts.standardize {
        feature_moments(x)
    } else {
        (vec![0.0; dim], vec![1.0; dim])
    };
    let scaled: Vec<Vec<f64>> = x.iter().map(|r| apply_affine(r, &shift, &scale)).collect();
    let x = scaled.as_slice();
    let per_class: Vec<(Vec<f64>, f64, Vec<f64>)> = (0..classes)
        .map(|c| {
            let yc: Vec<f64> = y.iter().map(|&l| if l == c { 1.0 } else { -1.0 }).collect();
            match opts.solver {
                Solver::Sgd => {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, c as u64));
                    train_binary_sgd(x, &yc, opts, &mut rng)
                }
                Solver::FullBatch => train_binary_full(x, &yc, opts),
            }
        })
        .collect();
    let epochs = per_class[0].2.len();
    let objective_history = (0..epochs)
        .map(|e| per_class.iter().map(|(_, _, h)| h[e]).sum::<f64>() / classes as f64)
        .collect();
    let (weights, bias) = per_class.into_iter().map(|(w, b, _)| (w, b)).unzip();
    Ok(LinearModel {
        weights,
        bias,
        shift,
        scale,
        objective_history,
    })
}

fn feature_moments(x: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len() as f64;
    let dim = x[0].len();
    let mut mean = vec![0.0; dim];
    for r in x {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v / n;
        }
    }
    let mut scale = vec![0.0; dim];
    for r in x {
        for ((s, v), m) in scale.iter_mut().zip(r).zip(&mean) {
            *s += (v - m) * (v - m) / n;
        }
    }
    for s in scale.iter_mut() {
        *s = if *s > 1e-24 { s.sqrt() } else { 1.0 };
    }
    (mean, scale)
}

fn apply_affine(x: &[f64], shift: &[f64], scale: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(shift)
        .zip(scale)
        .map(|((v, m), s)| (v - m) / s)
        .collect()
}

impl LinearModel {
    pub fn classes(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    /// Class with the highest score; the lowest class wins ties.
    pub fn predict(&self, x: &[f64]) -> usize {
        let z = apply_affine(x, &self.shift, &self.scale);
        let mut best = (0, f64::NEG_INFINITY);
        for (c, (w, b)) in self.weights.iter().zip(&self.bias).enumerate() {
            let s = dot(w, &z) + b;
            if s > best.1 {
                best = (c, s);
            }
        }
        best.0
    }
}

/// Fraction of correct predictions.
pub fn evaluate(model: &LinearModel, x: &[Vec<f64>], y: &[usize]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    check_dims(x, model.dim())?;
    let correct = x
        .iter()
        .zip(y)
        .filter(|(xi, &yi)| model.predict(xi) == yi)
        .count();
    Ok(correct as f64 / x.len() as f64)
}

/// k-NN label of `x`: majority vote among the `k` nearest training rows
/// (Euclidean, index order on distance ties). A tied vote goes to the class
/// of the nearest neighbour among the tied classes.
pub fn knn_predict(train_x: &[Vec<f64>], train_y: &[usize], x: &[f64], k: usize) -> Result<usize> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be >= 1".into()));
    }
    if k > train_x.len() {
        return Err(Error::KTooLarge {
            k,
            n: train_x.len(),
        });
    }
    let mut d: Vec<(f64, usize)> = train_x
        .iter()
        .enumerate()
        .map(|(i, t)| {
            (
                t.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(),
                i,
            )
        })
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let neighbours = &d[..k];
    let classes = train_y.iter().max().map_or(0, |m| m + 1);
    let mut votes = vec![0usize; classes];
    for &(_, i) in neighbours {
        votes[train_y[i]] += 1;
    }
    let top = *votes.iter().max().expect("k >= 1");
    let winner = neighbours
        .iter()
        .map(|&(_, i)| train_y[i])
        .find(|&c| votes[c] == top)
        .expect("voted class");
    Ok(winner)
}

/// k-NN accuracy on a labeled test set.
pub fn knn_classify(
    train_x: &[Vec<f64>],
    train_y: &[usize],
    test_x: &[Vec<f64>],
    test_y: &[usize],
    k: usize,
) -> Result<f64> {
    if test_x.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    if let Some(first) = train_x.first() {
        check_dims(train_x, first.len())?;
        check_dims(test_x, first.len())?;
    }
    let mut correct = 0;
    for (x, &y) in test_x.iter().zip(test_y) {
        if knn_predict(train_x, train_y, x, k)? == y {
            correct += 1;
        }
    }
    Ok(correct as f64 / test_x.len() as f64)
}

/// Repeated stratified train/test splitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub repetitions: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            seed: 0,
            repetitions: 5,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidInput(format!(
                "train fraction must be in (0, 1), got {}",
                self.train_fraction
            )));
        }
        if self.repetitions == 0 {
            return Err(Error::InvalidInput("repetitions must be >= 1".into()));
        }
        Ok(())
    }

    /// The split used by repetition `rep`.
    pub fn split(&self, labels: &[usize], rep: usize) -> Result<Split> {
        self.validate()?;
        stratified_split(
            labels,
            self.train_fraction,
            derive_seed(self.seed, rep as u64),
        )
    }
}

/// Index sets of one train/test split, each ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// The training diagrams of `set`; the only diagrams a codebook may see.
    pub fn train_diagrams<'a>(&self, set: &'a LabeledDiagramSet) -> TrainDiagrams<'a> {
        TrainDiagrams(self.train.iter().map(|&i| &set.entries[i].0).collect())
    }
}

/// Diagrams from the training side of a [`Split`].
#[derive(Debug, Clone)]
pub struct TrainDiagrams<'a>(Vec<&'a Diagram>);

impl<'a> TrainDiagrams<'a> {
    pub fn iter(&self) -> impl Iterator<Item = &'a Diagram> + '_ {
        self.0.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Per class, a seeded shuffle puts `round(fraction · count)` items in the
/// training set, keeping at least one item on each side when the class has
/// two or more.
pub fn stratified_split(labels: &[usize], fraction: f64, seed: u64) -> Result<Split> {
    if labels.is_empty() {
        return Err(Error::InvalidInput("nothing to split".into()));
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for c in 0..classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        if members.is_empty() {
            continue;
        }
        members.shuffle(&mut rng);
        let mut k = (fraction * members.len() as f64).round() as usize;
        if members.len() >= 2 {
            k = k.clamp(1, members.len() - 1);
        } else {
            k = 1;
        }
        train.extend_from_slice(&members[..k]);
        test.extend_from_slice(&members[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ClassifierSpec {
    Linear(LinearOptions),
    Knn { k: usize },
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        ClassifierSpec::Linear(LinearOptions::default())
    }
}

/// Accuracy of `classifier` trained on `(train_x, train_y)` and tested on
/// `(test_x, test_y)`.
pub fn train_and_score(
    classifier: &ClassifierSpec,
    train_x: &[Vec<f64>],
    train_y: &[usize],
    test_x: &[Vec<f64>],
    test_y: &[usize],
    classes: usize,
    seed: u64,
) -> Result<f64> {
    match classifier {
        ClassifierSpec::Linear(opts) => {
            let opts = LinearOptions {
                seed,
                ..opts.clone()
            };
            let model = train_linear(train_x, train_y, classes, &opts)?;
            evaluate(&model, test_x, test_y)
        }
        ClassifierSpec::Knn { k } => knn_classify(train_x, train_y, test_x, test_y, *k),
    }
}

/// Sweep settings shared by every configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub sizes: Vec<usize>,
    pub weighted: Vec<bool>,
    pub kind: CodebookKind,
    /// Template for codebook fitting; `n`, `weighted` and `kind` are
    /// overridden per configuration.
    pub codebook: CodebookSpec,
    pub classifier: ClassifierSpec,
    pub split: SplitSpec,
}

/// One configuration of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub weighted: bool,
    pub encoder: String,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub wall_time_secs: f64,
    pub accuracies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub rows: Vec<GridRow>,
}

#[derive(Debug, Serialize)]
struct PlotSeries<'a> {
    encoder: &'a str,
    weighted: bool,
    x: Vec<usize>,
    y: Vec<f64>,
    err: Vec<f64>,
}

impl GridResult {
    pub fn best(&self) -> Option<&GridRow> {
        self.rows
            .iter()
            .fold(None, |best: Option<&GridRow>, r| match best {
                Some(b) if b.mean_accuracy >= r.mean_accuracy => Some(b),
                _ => Some(r),
            })
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("N,weighted,encoder,mean_accuracy,std_accuracy,wall_time_secs\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:.3}",
                r.n, r.weighted, r.encoder, r.mean_accuracy, r.std_accuracy, r.wall_time_secs
            );
        }
        out
    }

    /// Accuracy-vs-N curves, one series per (encoder, weighting) pair.
    pub fn to_plot_json(&self) -> Result<String> {
        let mut series: Vec<PlotSeries<'_>> = Vec::new();
        for r in &self.rows {
            let pos = series
                .iter()
                .position(|s| s.encoder == r.encoder && s.weighted == r.weighted);
            let s = match pos {
                Some(p) => &mut series[p],
                None => {
                    series.push(PlotSeries {
                        encoder: &r.encoder,
                        weighted: r.weighted,
                        x: vec![],
                        y: vec![],
                        err: vec![],
                    });
                    series.last_mut().expect("just pushed")
                }
            };
            s.x.push(r.n);
            s.y.push(r.mean_accuracy);
            s.err.push(r.std_accuracy);
        }
        Ok(serde_json::to_string_pretty(&serde_json::json!({
            "x_label": "N",
            "y_label": "accuracy",
            "series": series,
        }))?)
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Accuracy of one configuration on one split. Codebooks see training
/// diagrams only.
pub fn run_split(
    set: &LabeledDiagramSet,
    split: &Split,
    codebook: &CodebookSpec,
    classifier: &ClassifierSpec,
    seed: u64,
) -> Result<f64> {
    let train = split.train_diagrams(set);
    let cb = codebook.fit(train.iter(), derive_seed(seed, 0))?;
    let encoder = Encoder::new(&cb)?;
    let encode = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<usize>) {
        idx.iter()
            .map(|&i| (encoder.encode(&set.entries[i].0).values, set.entries[i].1))
            .unzip()
    };
    let (train_x, train_y) = encode(&split.train);
    let (test_x, test_y) = encode(&split.test);
    train_and_score(
        classifier,
        &train_x,
        &train_y,
        &test_x,
        &test_y,
        set.num_classes(),
        derive_seed(seed, 1),
    )
}

/// Runs every (N, weighting) configuration over `spec.split.repetitions`
/// splits. Jobs run in parallel; results do not depend on the schedule.
pub fn grid_search(set: &LabeledDiagramSet, spec: &GridSpec) -> Result<GridResult> {
    spec.split.validate()?;
    let labels = set.labels();
    let splits: Vec<Split> = (0..spec.split.repetitions)
        .map(|r| spec.split.split(&labels, r))
        .collect::<Result<_>>()?;
    let configs: Vec<(usize, bool)> = spec
        .sizes
        .iter()
        .flat_map(|&n| spec.weighted.iter().map(move |&w| (n, w)))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..configs.len())
        .flat_map(|c| (0..splits.len()).map(move |r| (c, r)))
        .collect();
    let results: Vec<(f64, f64)> = jobs
        .par_iter()
        .map(|&(c, r)| {
            let (n, weighted) = configs[c];
            let codebook = CodebookSpec {
                kind: spec.kind,
                n,
                weighted,
                ..spec.codebook.clone()
            };
            let seed = derive_seed(
                spec.split.seed,
                ((n as u64) << 32) | ((weighted as u64) << 16) | r as u64,
            );
            let start = Instant::now();
            let acc = run_split(set, &splits[r], &codebook, &spec.classifier, seed)?;
            Ok((acc, start.elapsed().as_secs_f64()))
        })
        .collect::<Result<_>>()?;
    let encoder = match spec.kind {
        CodebookKind::Kmeans => "pbow",
        CodebookKind::Gmm => "spbow",
    };
    let rows = configs
        .iter()
        .enumerate()
        .map(|(c, &(n, weighted))| {
            let chunk = &results[c * splits.len()..(c + 1) * splits.len()];
            let accuracies: Vec<f64> = chunk.iter().map(|r| r.0).collect();
            let (mean_accuracy, std_accuracy) = mean_std(&accuracies);
            GridRow {
                n,
                weighted,
                encoder: encoder.to_string(),
                mean_accuracy,
                std_accuracy,
                wall_time_secs: chunk.iter().map(|r| r.1).sum(),
                accuracies,
            }
        })
        .collect();
    Ok(GridResult { rows })
}
