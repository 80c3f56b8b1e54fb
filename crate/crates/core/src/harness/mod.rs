//! Experiment grid: shifts × methods × tests × sample sizes, repeated.
//!
//! Every run draws its samples from a counter RNG keyed by
//! `(master seed, cell key, repetition, run)`, and cells are assembled in a
//! fixed order, so results do not depend on the thread count.

mod report;
mod svg;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

pub use report::{emit_reports, load_results, save_results, RESULTS_FILE};
pub use svg::{BarChart, BarSeries, LineChart, Series};

use crate::datagen::{generate_dataset, split, LatentFactorDataset, SchemaKind, SplitIndices, SplitRatios};
use crate::detector::{detect, DetectOptions};
use crate::error::{Error, Result};
use crate::models::{
    fit_pca, fit_srp, load_model, save_model, train_cbm, train_task_classifier, Geometry, Method, MlpClassifier,
    PcaDims, PcaModel, Reducer, Representation, SavedModel, SrpModel, TrainConfig,
};
use crate::rng::{derive_seed, keyed_rng, str_key};
use crate::shifts::{apply_shift, ConceptMode, ConceptTarget, ImageOp, Intensity, ShiftKind, ShiftSpec};
use crate::stattests::{MmdOptions, TestKind};

/// Test sample sizes the grid accepts.
pub const ALLOWED_SIZES: [usize; 8] = [10, 20, 50, 100, 200, 500, 1000, 10000];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetSpec {
    pub schema: SchemaKind,
    pub n: usize,
    pub seed: u64,
    pub split: SplitRatios,
}

impl DatasetSpec {
    /// 30000 sprites or 20000 rooms.
    pub fn desk(schema: SchemaKind) -> Self {
        let n = match schema {
            SchemaKind::Sprites => 30000,
            SchemaKind::Rooms => 20000,
        };
        DatasetSpec { schema, n, seed: 0, split: SplitRatios::default() }
    }
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec::desk(SchemaKind::Sprites)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSpec {
    pub training: TrainConfig,
    /// Cumulative explained-variance target for PCA.
    pub pca_variance: f64,
    /// SRP output dimension; defaults to the PCA dimension.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub srp_dims: Option<usize>,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec { training: TrainConfig::default(), pca_variance: 0.80, srp_dims: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub models: ModelSpec,
    pub methods: Vec<Method>,
    /// Tests for continuous representations; hard methods always use chi-squared.
    pub tests: Vec<TestKind>,
    pub sample_sizes: Vec<usize>,
    /// A no-shift entry is added when absent.
    pub shifts: Vec<ShiftSpec>,
    pub runs_per_cell: usize,
    pub repetitions: usize,
    pub alpha: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Fitted models are stored under `<cache_dir>/<config hash>/`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    pub df_normalize: bool,
    pub mmd_permutations: usize,
    /// Keep the per-run log in each cell.
    pub keep_runs: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetSpec::default(),
            models: ModelSpec::default(),
            methods: Method::ALL.to_vec(),
            tests: vec![TestKind::Ks],
            sample_sizes: vec![10, 20, 50, 100, 200, 500, 1000],
            shifts: default_shifts(),
            runs_per_cell: 100,
            repetitions: 5,
            alpha: 0.05,
            seed: 0,
            output_dir: PathBuf::from("results"),
            cache_dir: None,
            df_normalize: true,
            mmd_permutations: crate::stattests::DEFAULT_PERMUTATIONS,
            keep_runs: true,
        }
    }
}

/// No shift, medium Gaussian noise, medium knockout, large scale shift and
/// medium translation, all at δ = 1.0.
pub fn default_shifts() -> Vec<ShiftSpec> {
    vec![
        ShiftSpec::none(),
        ShiftSpec::new(ShiftKind::Gaussian, Intensity::Medium, 1.0),
        ShiftSpec::new(ShiftKind::Knockout { class: None }, Intensity::Medium, 1.0),
        ShiftSpec::new(
            ShiftKind::Concept {
                targets: vec![ConceptTarget { concept: "scale".into(), values: None, mode: ConceptMode::Remove }],
            },
            Intensity::Large,
            1.0,
        ),
        ShiftSpec::new(ShiftKind::Image { ops: vec![ImageOp::Translate] }, Intensity::Medium, 1.0),
    ]
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.dataset.n == 0 {
            return bad("dataset.n must be positive".into());
        }
        self.dataset.split.validate()?;
        if self.methods.is_empty() {
            return bad("no methods selected".into());
        }
        if self.sample_sizes.is_empty() {
            return bad("no sample sizes".into());
        }
        if let Some(s) = self.sample_sizes.iter().find(|s| !ALLOWED_SIZES.contains(s)) {
            return bad(format!("sample size {s} is not one of {ALLOWED_SIZES:?}"));
        }
        if self.runs_per_cell == 0 || self.repetitions == 0 {
            return bad("runs_per_cell and repetitions must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha {} outside (0, 1)", self.alpha));
        }
        if self.methods.iter().any(|m| !m.is_hard()) && !self.tests.iter().any(|t| *t != TestKind::Chi2) {
            return bad("continuous methods need `ks` or `mmd` in tests".into());
        }
        if self.tests.contains(&TestKind::Mmd) && self.mmd_permutations == 0 {
            return bad("mmd_permutations must be positive".into());
        }
        if !(self.models.pca_variance > 0.0 && self.models.pca_variance <= 1.0) {
            return bad(format!("pca_variance {} outside (0, 1]", self.models.pca_variance));
        }
        if self.models.srp_dims == Some(0) {
            return bad("srp_dims must be positive".into());
        }
        self.shifts.iter().try_for_each(ShiftSpec::validate)
    }

    /// Shifts with a leading no-shift entry when none was listed.
    pub fn shifts_with_none(&self) -> Vec<ShiftSpec> {
        let mut out = self.shifts.clone();
        if !out.iter().any(ShiftSpec::is_none) {
            out.insert(0, ShiftSpec::none());
        }
        out
    }

    /// `(method, test)` cells in grid order.
    pub fn method_tests(&self) -> Vec<(Method, TestKind)> {
        let mut out = Vec::new();
        for &m in &self.methods {
            if m.is_hard() {
                out.push((m, TestKind::Chi2));
            } else {
                out.extend(self.tests.iter().filter(|t| **t != TestKind::Chi2).map(|&t| (m, t)));
            }
        }
        let mut seen = Vec::new();
        out.retain(|p| {
            let fresh = !seen.contains(p);
            seen.push(*p);
            fresh
        });
        out
    }

    /// Hash of the inputs that determine the fitted models.
    pub fn model_key(&self) -> String {
        let blob = serde_json::to_vec(&(&self.dataset, &self.models)).expect("serializable");
        crate::datagen::sha256_hex(&blob)[..16].to_string()
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::malformed(path, e.to_string()))
    }
}

/// Dataset, split and fitted models for one configuration.
#[derive(Debug, Clone)]
pub struct Workbench {
    pub dataset: LatentFactorDataset,
    pub split: SplitIndices,
    pub pca: Option<Arc<PcaModel>>,
    pub srp: Option<Arc<SrpModel>>,
    pub task: Option<Arc<MlpClassifier>>,
    pub cbm: Option<Arc<MlpClassifier>>,
    pub model_key: String,
}

fn cached<T>(
    dir: Option<&Path>,
    name: &str,
    unwrap: impl Fn(SavedModel) -> Option<T>,
    wrap: impl Fn(&T) -> SavedModel,
    fit: impl FnOnce() -> Result<T>,
) -> Result<T> {
    let Some(dir) = dir else { return fit() };
    let path = dir.join(name);
    if path.join("model.json").exists() {
        let model = load_model(&path)?;
        return unwrap(model).ok_or_else(|| Error::malformed(&path, format!("cached model is not `{name}`")));
    }
    let model = fit()?;
    save_model(&wrap(&model), &path)?;
    Ok(model)
}

impl Workbench {
    /// Generate the dataset and fit (or load cached) models for the configured methods.
    pub fn prepare(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let spec = &config.dataset;
        let dataset = generate_dataset(spec.schema, spec.n, spec.seed)?;
        let split = split(spec.n, spec.split, spec.seed)?;
        let key = config.model_key();
        let dir = config.cache_dir.as_ref().map(|d| d.join(&key));
        let dir = dir.as_deref();
        let pool = config.models.training.pool;
        let has = |m: Method| config.methods.contains(&m);

        let need_pca = has(Method::Pca) || (has(Method::Srp) && config.models.srp_dims.is_none());
        let pca = if need_pca {
            let dims = PcaDims::VarianceFraction(config.models.pca_variance);
            Some(cached(
                dir,
                "pca",
                |m| if let SavedModel::Pca(p) = m { Some(p) } else { None },
                |p| SavedModel::Pca(p.clone()),
                || fit_pca(&dataset, &split.train, dims, pool),
            )?)
        } else {
            None
        };
        let srp = if has(Method::Srp) {
            let m = config.models.srp_dims.or(pca.as_ref().map(PcaModel::dims)).expect("pca fitted");
            let geometry = Geometry::of(&dataset, pool);
            let seed = derive_seed(config.models.training.seed, &[0x5e9]);
            Some(cached(
                dir,
                "srp",
                |m| if let SavedModel::Srp(s) = m { Some(s) } else { None },
                |s| SavedModel::Srp(s.clone()),
                || fit_srp(geometry.input_dim(), m, seed, geometry),
            )?)
        } else {
            None
        };
        let clf = |m| if let SavedModel::Classifier(c) = m { Some(c) } else { None };
        let wrap = |c: &MlpClassifier| SavedModel::Classifier(c.clone());
        let task = if has(Method::BbsdSoft) || has(Method::BbsdHard) {
            Some(cached(dir, "task", clf, wrap, || {
                train_task_classifier(&dataset, &split, &config.models.training)
            })?)
        } else {
            None
        };
        let cbm = if has(Method::CbsdSoft) || has(Method::CbsdHard) {
            Some(cached(dir, "cbm", clf, wrap, || train_cbm(&dataset, &split, &config.models.training))?)
        } else {
            None
        };
        Ok(Workbench {
            dataset,
            split,
            pca: pca.map(Arc::new),
            srp: srp.map(Arc::new),
            task: task.map(Arc::new),
            cbm: cbm.map(Arc::new),
            model_key: key,
        })
    }

    pub fn reducer(&self, method: Method) -> Result<Reducer> {
        let missing = || Error::NotFitted(format!("no model prepared for {method}"));
        match method {
            Method::Pca => Ok(Reducer::Pca(self.pca.clone().ok_or_else(missing)?)),
            Method::Srp => Ok(Reducer::Srp(self.srp.clone().ok_or_else(missing)?)),
            Method::BbsdSoft | Method::BbsdHard => Reducer::from_classifier(method, self.task.clone().ok_or_else(missing)?),
            Method::CbsdSoft | Method::CbsdHard => Reducer::from_classifier(method, self.cbm.clone().ok_or_else(missing)?),
        }
    }

    /// The saved-model checksum behind a method's reducer.
    pub fn checksum(&self, method: Method) -> Option<String> {
        let model = match method {
            Method::Pca => SavedModel::Pca(self.pca.as_deref()?.clone()),
            Method::Srp => SavedModel::Srp(self.srp.as_deref()?.clone()),
            Method::BbsdSoft | Method::BbsdHard => SavedModel::Classifier(self.task.as_deref()?.clone()),
            Method::CbsdSoft | Method::CbsdHard => SavedModel::Classifier(self.cbm.as_deref()?.clone()),
        };
        Some(model.checksum())
    }

    pub fn validation_set(&self) -> LatentFactorDataset {
        self.dataset.subset(&self.split.validation)
    }

    pub fn test_set(&self) -> LatentFactorDataset {
        self.dataset.subset(&self.split.test)
    }

    pub fn summary(&self, methods: &[Method]) -> ModelSummary {
        let checksums = methods
            .iter()
            .filter_map(|&m| self.checksum(m).map(|c| (m.name().to_string(), c)))
            .collect();
        ModelSummary {
            model_key: self.model_key.clone(),
            pca_dims: self.pca.as_ref().map(|p| p.dims()),
            srp_dims: self.srp.as_ref().map(|s| s.dims()),
            task_val_accuracy: self.task.as_ref().map(|t| t.report.val_accuracy.clone()),
            concept_val_accuracy: self.cbm.as_ref().map(|c| {
                c.head_names.iter().cloned().zip(c.report.val_accuracy.iter().copied()).collect()
            }),
            label_val_accuracy: self.cbm.as_ref().and_then(|c| c.report.label_val_accuracy),
            architecture: "fully connected network on 2x2-pooled pixels in place of a CNN".into(),
            checksums,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model_key: String,
    pub pca_dims: Option<usize>,
    pub srp_dims: Option<usize>,
    pub task_val_accuracy: Option<Vec<f64>>,
    pub concept_val_accuracy: Option<BTreeMap<String, f64>>,
    pub label_val_accuracy: Option<f64>,
    pub architecture: String,
    pub checksums: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub repetition: usize,
    pub run: usize,
    pub detected: bool,
    pub p_value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_concept: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptCss {
    pub concept: String,
    pub mean: f64,
    pub ci95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub dataset: SchemaKind,
    pub method: Method,
    pub test: TestKind,
    pub shift: ShiftSpec,
    pub sample_size: usize,
    /// Total runs: `runs_per_cell × repetitions`.
    pub runs: usize,
    pub detections: usize,
    /// Runs classified correctly: detections under a shift, non-detections without one.
    pub correct: usize,
    pub accuracy: f64,
    /// Student-t half-width over repetition accuracies.
    pub ci95: f64,
    pub mean_p: f64,
    pub repetition_accuracy: Vec<f64>,
    pub repetition_mean_p: Vec<f64>,
    pub repetition_median_p: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub css: Option<Vec<ConceptCss>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_concepts: Option<BTreeMap<String, usize>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub log: Vec<RunRecord>,
}

impl CellResult {
    pub fn shift_label(&self) -> String {
        self.shift.tag()
    }

    pub fn intensity_label(&self) -> &'static str {
        if self.shift.is_none() {
            "none"
        } else {
            self.shift.intensity.name()
        }
    }

    pub fn delta(&self) -> f64 {
        if self.shift.is_none() {
            0.0
        } else {
            self.shift.delta
        }
    }

    /// Detection rate regardless of whether a shift was present.
    pub fn detection_rate(&self) -> f64 {
        self.detections as f64 / self.runs as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResults {
    pub config: ExperimentConfig,
    pub models: ModelSummary,
    pub cells: Vec<CellResult>,
}

/// Half-width of a 95% Student-t interval for the mean of `xs`.
pub fn ci95(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let t = StudentsT::new(0.0, 1.0, n as f64 - 1.0).expect("df >= 1").inverse_cdf(0.975);
    t * (var / n as f64).sqrt()
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

struct Run {
    record: RunRecord,
    css: Option<Vec<f64>>,
}

/// Generate data, fit models and run the full grid.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResults> {
    let bench = Workbench::prepare(config)?;
    run_grid(&bench, config)
}

/// Run the grid of `config` against already prepared models.
pub fn run_grid(bench: &Workbench, config: &ExperimentConfig) -> Result<ExperimentResults> {
    config.validate()?;
    let pairs = config.method_tests();
    let mut methods: Vec<Method> = Vec::new();
    for (m, _) in &pairs {
        if !methods.contains(m) {
            methods.push(*m);
        }
    }
    let reducers: Vec<Reducer> = methods.iter().map(|&m| bench.reducer(m)).collect::<Result<_>>()?;
    let validation = bench.validation_set();
    let test = bench.test_set();
    let max_size = *config.sample_sizes.iter().max().expect("validated nonempty");
    if max_size > validation.len() || max_size > test.len() {
        return Err(Error::InvalidArgument(format!(
            "sample size {max_size} exceeds the pools (validation {}, test {})",
            validation.len(),
            test.len()
        )));
    }
    let source_reps: Vec<Representation> =
        reducers.par_iter().map(|r| r.reduce(&validation)).collect::<Result<_>>()?;

    let mut cells = Vec::new();
    for (si, shift) in config.shifts_with_none().iter().enumerate() {
        let target_reps: Vec<Vec<Representation>> = (0..config.repetitions)
            .into_par_iter()
            .map(|rep| {
                let spec = shift
                    .clone()
                    .with_seed(derive_seed(config.seed, &[0x5f, si as u64, rep as u64, shift.seed]));
                let shifted = apply_shift(&test, &spec)?;
                if shifted.len() < max_size {
                    return Err(Error::InvalidArgument(format!(
                        "shift `{}` leaves {} test samples, fewer than sample size {max_size}",
                        shift.tag(),
                        shifted.len()
                    )));
                }
                reducers.iter().map(|r| r.reduce(&shifted)).collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;

        for &(method, test_kind) in &pairs {
            let mi = methods.iter().position(|&m| m == method).expect("listed");
            for &size in &config.sample_sizes {
                let cell_key = str_key(&format!("{si}|{}|{}|{size}", method.name(), test_kind.name()));
                let opts = DetectOptions {
                    test: test_kind,
                    alpha: config.alpha,
                    df_normalize: config.df_normalize,
                    mmd: MmdOptions { permutations: config.mmd_permutations, seed: 0 },
                };
                let total = config.repetitions * config.runs_per_cell;
                let runs: Vec<Run> = (0..total)
                    .into_par_iter()
                    .map(|k| {
                        let (rep, run) = (k / config.runs_per_cell, k % config.runs_per_cell);
                        let mut rng = keyed_rng(config.seed, &[cell_key, rep as u64, run as u64]);
                        let src = &source_reps[mi];
                        let tgt = &target_reps[rep][mi];
                        let src_idx = index::sample(&mut rng, src.nrows(), size).into_vec();
                        let tgt_idx = index::sample(&mut rng, tgt.nrows(), size).into_vec();
                        let seed = derive_seed(config.seed, &[cell_key, rep as u64, run as u64, 0x33d]);
                        let report = detect(&src.select_rows(&src_idx), &tgt.select_rows(&tgt_idx), &opts.clone().with_seed(seed))?;
                        let css = report.per_concept.as_ref().map(|pc| {
                            let names: Vec<&str> = src.groups.as_ref().expect("concept groups").iter().map(|g| g.name.as_str()).collect();
                            names
                                .iter()
                                .map(|n| pc.iter().find(|c| c.concept == *n).map_or(0.0, |c| c.css))
                                .collect()
                        });
                        Ok(Run {
                            record: RunRecord {
                                repetition: rep,
                                run,
                                detected: report.shift_detected,
                                p_value: report.p_value,
                                top_concept: report.per_concept.as_ref().and_then(|pc| pc.first()).map(|c| c.concept.clone()),
                            },
                            css,
                        })
                    })
                    .collect::<Result<_>>()?;
                let names = source_reps[mi]
                    .groups
                    .as_ref()
                    .map(|g| g.iter().map(|g| g.name.clone()).collect::<Vec<_>>());
                cells.push(aggregate(config, shift, method, test_kind, size, bench.dataset.kind(), names, runs));
            }
        }
    }
    Ok(ExperimentResults { config: config.clone(), models: bench.summary(&methods), cells })
}

#[allow(clippy::too_many_arguments)]
fn aggregate(
    config: &ExperimentConfig,
    shift: &ShiftSpec,
    method: Method,
    test: TestKind,
    size: usize,
    dataset: SchemaKind,
    concept_names: Option<Vec<String>>,
    runs: Vec<Run>,
) -> CellResult {
    let reps = config.repetitions;
    let per = config.runs_per_cell;
    let correct_of = |r: &RunRecord| r.detected != shift.is_none();
    let detections = runs.iter().filter(|r| r.record.detected).count();
    let correct = runs.iter().filter(|r| correct_of(&r.record)).count();
    let mut rep_acc = Vec::with_capacity(reps);
    let mut rep_mean_p = Vec::with_capacity(reps);
    let mut rep_median_p = Vec::with_capacity(reps);
    for chunk in runs.chunks(per) {
        rep_acc.push(chunk.iter().filter(|r| correct_of(&r.record)).count() as f64 / per as f64);
        let mut ps: Vec<f64> = chunk.iter().map(|r| r.record.p_value).collect();
        rep_mean_p.push(ps.iter().sum::<f64>() / per as f64);
        rep_median_p.push(median(&mut ps));
    }
    let css = concept_names.as_ref().map(|names| {
        names
            .iter()
            .enumerate()
            .map(|(c, name)| {
                let means: Vec<f64> = runs
                    .chunks(per)
                    .map(|chunk| chunk.iter().map(|r| r.css.as_ref().map_or(0.0, |v| v[c])).sum::<f64>() / per as f64)
                    .collect();
                ConceptCss {
                    concept: name.clone(),
                    mean: means.iter().sum::<f64>() / means.len() as f64,
                    ci95: ci95(&means),
                }
            })
            .collect()
    });
    let top_concepts = concept_names.map(|names| {
        let mut counts: BTreeMap<String, usize> = names.into_iter().map(|n| (n, 0)).collect();
        for r in &runs {
            if let Some(t) = &r.record.top_concept {
                *counts.entry(t.clone()).or_default() += 1;
            }
        }
        counts
    });
    let total = runs.len();
    CellResult {
        dataset,
        method,
        test,
        shift: shift.clone(),
        sample_size: size,
        runs: total,
        detections,
        correct,
        accuracy: correct as f64 / total as f64,
        ci95: ci95(&rep_acc),
        mean_p: runs.iter().map(|r| r.record.p_value).sum::<f64>() / total as f64,
        repetition_accuracy: rep_acc,
        repetition_mean_p: rep_mean_p,
        repetition_median_p: rep_median_p,
        css,
        top_concepts,
        log: if config.keep_runs { runs.into_iter().map(|r| r.record).collect() } else { Vec::new() },
    }
}
