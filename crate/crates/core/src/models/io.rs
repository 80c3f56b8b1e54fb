//! Model directory format.
//!
//! `model.json` holds the model kind, input geometry, hyperparameters,
//! recorded accuracies and an ordered tensor table; `weights.bin` is the
//! concatenation of those tensors as little-endian `f64`, row-major, in
//! table order. Classifier tensors are listed as `trunk.{l}.weight`
//! (`in x out`), `trunk.{l}.bias`, then `head.{h}.weight`, `head.{h}.bias`,
//! then `label.weight`, `label.bias` for concept models. PCA stores `mean`,
//! `components`, `explained_variance`, `explained_variance_ratio`; SRP stores
//! the dense `projection`.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::classifier::{ClassifierKind, MlpClassifier, TrainConfig, TrainReport};
use super::mlp::{Dense, Network};
use super::{Geometry, Method, PcaModel, Reducer, SrpModel};
use crate::datagen::SchemaKind;
use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Any fitted model that can back a reducer.
#[derive(Debug, Clone, PartialEq)]
pub enum SavedModel {
    Pca(PcaModel),
    Srp(SrpModel),
    Classifier(MlpClassifier),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ClassifierMeta {
    config: TrainConfig,
    head_names: Vec<String>,
    report: TrainReport,
    architecture: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SrpMeta {
    seed: u64,
    density: f64,
    scale: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelManifest {
    format_version: u32,
    kind: String,
    schema: Option<SchemaKind>,
    geometry: Geometry,
    tensors: Vec<TensorEntry>,
    weights_sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    classifier: Option<ClassifierMeta>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    srp: Option<SrpMeta>,
}

struct TensorWriter {
    table: Vec<TensorEntry>,
    bytes: Vec<u8>,
}

impl TensorWriter {
    fn push<'a>(&mut self, name: String, shape: Vec<usize>, data: impl Iterator<Item = &'a f64>) {
        for v in data {
            self.bytes.extend_from_slice(&v.to_le_bytes());
        }
        self.table.push(TensorEntry { name, shape });
    }

    fn dense(&mut self, prefix: &str, d: &Dense) {
        self.push(format!("{prefix}.weight"), vec![d.inputs(), d.outputs()], d.weight.iter());
        self.push(format!("{prefix}.bias"), vec![d.outputs()], d.bias.iter());
    }
}

struct TensorReader<'a> {
    table: std::slice::Iter<'a, TensorEntry>,
    data: &'a [u8],
    path: &'a Path,
}

impl TensorReader<'_> {
    fn next(&mut self, name: &str) -> Result<(Vec<usize>, Vec<f64>)> {
        let entry = self
            .table
            .next()
            .ok_or_else(|| Error::malformed(self.path, format!("missing tensor `{name}`")))?;
        if entry.name != name {
            return Err(Error::malformed(self.path, format!("expected tensor `{name}`, found `{}`", entry.name)));
        }
        let len: usize = entry.shape.iter().product();
        if self.data.len() < len * 8 {
            return Err(Error::malformed(self.path, "weights.bin is truncated"));
        }
        let (head, rest) = self.data.split_at(len * 8);
        self.data = rest;
        let vals = head
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect();
        Ok((entry.shape.clone(), vals))
    }

    fn matrix(&mut self, name: &str) -> Result<Array2<f64>> {
        let (shape, vals) = self.next(name)?;
        if shape.len() != 2 {
            return Err(Error::malformed(self.path, format!("`{name}` is not a matrix")));
        }
        Array2::from_shape_vec((shape[0], shape[1]), vals).map_err(|e| Error::malformed(self.path, e.to_string()))
    }

    fn vector(&mut self, name: &str) -> Result<Array1<f64>> {
        let (shape, vals) = self.next(name)?;
        if shape.len() != 1 {
            return Err(Error::malformed(self.path, format!("`{name}` is not a vector")));
        }
        Ok(Array1::from(vals))
    }

    fn dense(&mut self, prefix: &str) -> Result<Dense> {
        let weight = self.matrix(&format!("{prefix}.weight"))?;
        let bias = self.vector(&format!("{prefix}.bias"))?;
        if bias.len() != weight.ncols() {
            return Err(Error::malformed(self.path, format!("`{prefix}` bias width mismatch")));
        }
        Ok(Dense { weight, bias })
    }
}

fn encode(model: &SavedModel) -> (ModelManifest, Vec<u8>) {
    let mut w = TensorWriter { table: Vec::new(), bytes: Vec::new() };
    let (kind, schema, geometry, classifier, srp) = match model {
        SavedModel::Pca(p) => {
            w.push("mean".into(), vec![p.mean.len()], p.mean.iter());
            w.push("components".into(), p.components.shape().to_vec(), p.components.iter());
            w.push("explained_variance".into(), vec![p.dims()], p.explained_variance.iter());
            w.push("explained_variance_ratio".into(), vec![p.dims()], p.explained_variance_ratio.iter());
            ("pca", None, p.geometry, None, None)
        }
        SavedModel::Srp(s) => {
            let dense = s.dense();
            w.push("projection".into(), dense.shape().to_vec(), dense.iter());
            let meta = SrpMeta { seed: s.seed, density: s.density, scale: s.scale };
            ("srp", None, s.geometry, None, Some(meta))
        }
        SavedModel::Classifier(c) => {
            for (l, d) in c.network.trunk.iter().enumerate() {
                w.dense(&format!("trunk.{l}"), d);
            }
            for (h, d) in c.network.heads.iter().enumerate() {
                w.dense(&format!("head.{h}"), d);
            }
            if let Some(label) = &c.label_head {
                w.dense("label", &label.heads[0]);
            }
            let meta = ClassifierMeta {
                config: c.config.clone(),
                head_names: c.head_names.clone(),
                report: c.report.clone(),
                architecture: format!(
                    "fully connected: pooled pixels -> {:?} ReLU -> softmax heads {:?}",
                    c.config.hidden,
                    c.network.head_sizes()
                ),
            };
            let kind = match c.kind {
                ClassifierKind::Task => "task",
                ClassifierKind::ConceptBottleneck => "cbm",
            };
            (kind, Some(c.schema), c.geometry, Some(meta), None)
        }
    };
    let manifest = ModelManifest {
        format_version: MODEL_FORMAT_VERSION,
        kind: kind.to_string(),
        schema,
        geometry,
        tensors: w.table,
        weights_sha256: crate::datagen::sha256_hex(&w.bytes),
        classifier,
        srp,
    };
    (manifest, w.bytes)
}

impl SavedModel {
    /// SHA-256 of the serialized weights, used as reducer provenance.
    pub fn checksum(&self) -> String {
        encode(self).0.weights_sha256
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            SavedModel::Pca(_) => "pca",
            SavedModel::Srp(_) => "srp",
            SavedModel::Classifier(c) => match c.kind {
                ClassifierKind::Task => "task",
                ClassifierKind::ConceptBottleneck => "cbm",
            },
        }
    }

    /// Build the reducer for `method` on top of this model.
    pub fn reducer(&self, method: Method) -> Result<Reducer> {
        match (self, method) {
            (SavedModel::Pca(p), Method::Pca) => Ok(Reducer::Pca(Arc::new(p.clone()))),
            (SavedModel::Srp(s), Method::Srp) => Ok(Reducer::Srp(Arc::new(s.clone()))),
            (SavedModel::Classifier(c), m) => Reducer::from_classifier(m, Arc::new(c.clone())),
            (other, m) => Err(Error::NotFitted(format!("a `{}` model cannot back {m}", other.kind_name()))),
        }
    }
}

pub fn save_model(model: &SavedModel, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (manifest, bytes) = encode(model);
    let wp = dir.join("weights.bin");
    fs::write(&wp, &bytes).map_err(|e| Error::io(wp, e))?;
    let mp = dir.join("model.json");
    fs::write(&mp, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(mp, e))
}

pub fn load_model(dir: impl AsRef<Path>) -> Result<SavedModel> {
    let dir = dir.as_ref();
    let mp = dir.join("model.json");
    let text = fs::read_to_string(&mp).map_err(|e| Error::io(&mp, e))?;
    let manifest: ModelManifest = serde_json::from_str(&text).map_err(|e| Error::malformed(&mp, e.to_string()))?;
    if manifest.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::malformed(&mp, format!("unsupported format version {}", manifest.format_version)));
    }
    let wp = dir.join("weights.bin");
    let bytes = fs::read(&wp).map_err(|e| Error::io(&wp, e))?;
    let expected: usize = manifest.tensors.iter().map(|t| t.shape.iter().product::<usize>() * 8).sum();
    if bytes.len() != expected {
        return Err(Error::malformed(&wp, format!("expected {expected} bytes, found {}", bytes.len())));
    }
    if crate::datagen::sha256_hex(&bytes) != manifest.weights_sha256 {
        return Err(Error::Checksum(wp));
    }
    let mut r = TensorReader { table: manifest.tensors.iter(), data: &bytes, path: &wp };
    let geometry = manifest.geometry;
    match manifest.kind.as_str() {
        "pca" => {
            let mean = r.vector("mean")?;
            let components = r.matrix("components")?;
            let explained_variance = r.vector("explained_variance")?;
            let explained_variance_ratio = r.vector("explained_variance_ratio")?;
            Ok(SavedModel::Pca(PcaModel { geometry, mean, components, explained_variance, explained_variance_ratio }))
        }
        "srp" => {
            let meta = manifest.srp.ok_or_else(|| Error::malformed(&mp, "missing `srp` section"))?;
            let p = r.matrix("projection")?;
            Ok(SavedModel::Srp(SrpModel::from_dense(p.view(), geometry, meta.seed)?))
        }
        kind @ ("task" | "cbm") => {
            let meta = manifest.classifier.ok_or_else(|| Error::malformed(&mp, "missing `classifier` section"))?;
            let schema = manifest.schema.ok_or_else(|| Error::malformed(&mp, "missing `schema`"))?;
            let trunk = (0..meta.config.hidden.len())
                .map(|l| r.dense(&format!("trunk.{l}")))
                .collect::<Result<Vec<_>>>()?;
            let n_heads = if kind == "task" { 1 } else { meta.head_names.len() };
            let heads = (0..n_heads).map(|h| r.dense(&format!("head.{h}"))).collect::<Result<Vec<_>>>()?;
            let label_head = if kind == "cbm" {
                Some(Network { trunk: vec![], heads: vec![r.dense("label")?] })
            } else {
                None
            };
            Ok(SavedModel::Classifier(MlpClassifier {
                kind: if kind == "task" { ClassifierKind::Task } else { ClassifierKind::ConceptBottleneck },
                schema,
                geometry,
                config: meta.config,
                network: Network { trunk, heads },
                head_names: meta.head_names,
                label_head,
                report: meta.report,
            }))
        }
        other => Err(Error::malformed(&mp, format!("unknown model kind `{other}`"))),
    }
}
