//! Task classifiers (black-box reducers) and sequential concept bottleneck
//! models (concept reducers).
//!
//! A concept bottleneck model is trained in two stages: a shared trunk with
//! one softmax head per concept is fit on the summed per-concept
//! cross-entropy, then a multinomial logistic regression maps the frozen
//! concatenated concept probabilities to the task label.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::mlp::{FitReport, Network, SgdOptions};
use super::{dataset_features, Geometry, DEFAULT_POOL};
use crate::datagen::{LatentFactorDataset, SchemaKind, SplitIndices};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub sgd: SgdOptions,
    /// SGD settings for the label predictor of a concept bottleneck model.
    pub label_sgd: SgdOptions,
    pub pool: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: vec![256, 128],
            sgd: SgdOptions::default(),
            label_sgd: SgdOptions {
                learning_rate: 0.1,
                batch_size: 128,
                ..SgdOptions::default()
            },
            pool: DEFAULT_POOL,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Task,
    #[serde(rename = "cbm")]
    ConceptBottleneck,
}

/// Accuracies recorded at the end of training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub head_names: Vec<String>,
    pub train_accuracy: Vec<f64>,
    pub val_accuracy: Vec<f64>,
    /// Task accuracy of the label predictor on validation, for concept models.
    pub label_val_accuracy: Option<f64>,
    pub label_train_accuracy: Option<f64>,
    pub fit: FitReport,
    pub label_fit: Option<FitReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpClassifier {
    pub kind: ClassifierKind,
    pub schema: SchemaKind,
    pub geometry: Geometry,
    pub config: TrainConfig,
    pub network: Network,
    pub head_names: Vec<String>,
    /// Logistic regression from concatenated concept probabilities to the task.
    pub label_head: Option<Network>,
    pub report: TrainReport,
}

impl MlpClassifier {
    pub fn head_sizes(&self) -> Vec<usize> {
        self.network.head_sizes()
    }

    /// Softmax outputs of every head for pooled features.
    pub fn predict_proba_features(&self, x: ArrayView2<f64>) -> Result<Vec<Array2<f64>>> {
        if x.ncols() != self.network.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "classifier takes {} features, got {}",
                self.network.input_dim(),
                x.ncols()
            )));
        }
        Ok(self.network.predict_proba(x))
    }

    pub fn predict_proba(&self, ds: &LatentFactorDataset) -> Result<Vec<Array2<f64>>> {
        let x = self.geometry.features(ds)?;
        self.predict_proba_features(x.view())
    }

    /// Task-class probabilities. For a concept model these come from the
    /// label predictor applied to the concept probabilities.
    pub fn task_proba_features(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let heads = self.predict_proba_features(x)?;
        match (&self.kind, &self.label_head) {
            (ClassifierKind::Task, _) => Ok(heads.into_iter().next().expect("one head")),
            (ClassifierKind::ConceptBottleneck, Some(label)) => {
                let c = concat(&heads);
                Ok(label.predict_proba(c.view()).into_iter().next().expect("one head"))
            }
            (ClassifierKind::ConceptBottleneck, None) => {
                Err(Error::NotFitted("concept model has no label predictor".into()))
            }
        }
    }
}

/// Concatenate per-head probability blocks column-wise.
pub(crate) fn concat(blocks: &[Array2<f64>]) -> Array2<f64> {
    let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
    ndarray::concatenate(Axis(1), &views).expect("equal row counts")
}

fn targets_for(ds: &LatentFactorDataset, idx: &[usize], kind: ClassifierKind) -> Vec<Vec<u32>> {
    match kind {
        ClassifierKind::Task => vec![idx.iter().map(|&i| ds.task_labels[i]).collect()],
        ClassifierKind::ConceptBottleneck => (0..ds.num_concepts())
            .map(|c| idx.iter().map(|&i| ds.concept_label(i, c)).collect())
            .collect(),
    }
}

fn check_split(ds: &LatentFactorDataset, split: &SplitIndices) -> Result<()> {
    if split.train.is_empty() || split.validation.is_empty() {
        return Err(Error::InvalidArgument("training and validation splits must be nonempty".into()));
    }
    if split.train.iter().chain(&split.validation).any(|&i| i >= ds.len()) {
        return Err(Error::InvalidArgument("split index outside dataset".into()));
    }
    Ok(())
}

/// Train the end-to-end task classifier used by BBSDs/BBSDh.
pub fn train_task_classifier(
    ds: &LatentFactorDataset,
    split: &SplitIndices,
    config: &TrainConfig,
) -> Result<MlpClassifier> {
    check_split(ds, split)?;
    let geometry = Geometry::of(ds, config.pool);
    let xt = dataset_features(ds, Some(&split.train), config.pool)?;
    let xv = dataset_features(ds, Some(&split.validation), config.pool)?;
    let yt = targets_for(ds, &split.train, ClassifierKind::Task);
    let yv = targets_for(ds, &split.validation, ClassifierKind::Task);
    let mut net = Network::new(geometry.input_dim(), &config.hidden, &[ds.num_task_classes()], config.seed);
    let fit = net.fit(xt.view(), &yt, xv.view(), &yv, &config.sgd, config.seed)?;
    let train_accuracy = net.accuracy(xt.view(), &yt);
    Ok(MlpClassifier {
        kind: ClassifierKind::Task,
        schema: ds.kind(),
        geometry,
        config: config.clone(),
        network: net,
        head_names: vec!["task".to_string()],
        label_head: None,
        report: TrainReport {
            head_names: vec!["task".to_string()],
            train_accuracy,
            val_accuracy: fit.val_accuracy.clone(),
            label_val_accuracy: None,
            label_train_accuracy: None,
            fit,
            label_fit: None,
        },
    })
}

/// Train a sequential concept bottleneck model used by CBSDs/CBSDh.
pub fn train_cbm(ds: &LatentFactorDataset, split: &SplitIndices, config: &TrainConfig) -> Result<MlpClassifier> {
    check_split(ds, split)?;
    let geometry = Geometry::of(ds, config.pool);
    let xt = dataset_features(ds, Some(&split.train), config.pool)?;
    let xv = dataset_features(ds, Some(&split.validation), config.pool)?;
    let kind = ClassifierKind::ConceptBottleneck;
    let yt = targets_for(ds, &split.train, kind);
    let yv = targets_for(ds, &split.validation, kind);
    let cards = ds.schema.cardinalities();
    let mut net = Network::new(geometry.input_dim(), &config.hidden, &cards, config.seed);
    let fit = net.fit(xt.view(), &yt, xv.view(), &yv, &config.sgd, config.seed)?;
    let train_accuracy = net.accuracy(xt.view(), &yt);

    // stage two: label predictor on frozen concept probabilities
    let ct = concat(&net.predict_proba(xt.view()));
    let cv = concat(&net.predict_proba(xv.view()));
    drop(xt);
    let lt = targets_for(ds, &split.train, ClassifierKind::Task);
    let lv = targets_for(ds, &split.validation, ClassifierKind::Task);
    let mut label = Network::new(ct.ncols(), &[], &[ds.num_task_classes()], config.seed ^ 0x1abe1);
    let label_fit = label.fit(ct.view(), &lt, cv.view(), &lv, &config.label_sgd, config.seed)?;
    let label_train = label.accuracy(ct.view(), &lt)[0];

    let names: Vec<String> = ds.schema.names().iter().map(|s| s.to_string()).collect();
    Ok(MlpClassifier {
        kind,
        schema: ds.kind(),
        geometry,
        config: config.clone(),
        network: net,
        head_names: names.clone(),
        report: TrainReport {
            head_names: names,
            train_accuracy,
            val_accuracy: fit.val_accuracy.clone(),
            label_val_accuracy: Some(label_fit.best_val_accuracy),
            label_train_accuracy: Some(label_train),
            fit,
            label_fit: Some(label_fit),
        },
        label_head: Some(label),
    })
}
