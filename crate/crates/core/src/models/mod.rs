//! Dimensionality reducers and the representations they produce.
//!
//! All reducers share one preprocessing step: pixels are scaled to [0, 1],
//! average-pooled by a fixed factor and flattened in `(row, col, channel)`
//! order. PCA and SRP then act linearly on these features; the task
//! classifier and the concept bottleneck model are small fully connected
//! networks whose softmax or argmax outputs become the representation.

mod classifier;
mod io;
mod mlp;
mod pca;
mod reducer;
mod srp;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::LatentFactorDataset;
use crate::error::{Error, Result};

pub use classifier::{
    train_cbm, train_task_classifier, ClassifierKind, MlpClassifier, TrainConfig, TrainReport,
};
pub use io::{load_model, save_model, SavedModel};
pub use mlp::{softmax_rows, Dense, FitReport, Gradients, Network, SgdOptions};
pub use pca::{fit_pca, fit_pca_features, PcaDims, PcaModel};
pub use reducer::{argmax_lowest, Reducer};
pub use srp::{fit_srp, SrpModel};

/// Default average-pooling factor applied before every reducer.
pub const DEFAULT_POOL: usize = 2;

/// The six detection methods, one per reducer flavour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "PCA")]
    Pca,
    #[serde(rename = "SRP")]
    Srp,
    #[serde(rename = "BBSDs")]
    BbsdSoft,
    #[serde(rename = "BBSDh")]
    BbsdHard,
    #[serde(rename = "CBSDs")]
    CbsdSoft,
    #[serde(rename = "CBSDh")]
    CbsdHard,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Pca,
        Method::Srp,
        Method::BbsdSoft,
        Method::BbsdHard,
        Method::CbsdSoft,
        Method::CbsdHard,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Pca => "PCA",
            Method::Srp => "SRP",
            Method::BbsdSoft => "BBSDs",
            Method::BbsdHard => "BBSDh",
            Method::CbsdSoft => "CBSDs",
            Method::CbsdHard => "CBSDh",
        }
    }

    pub fn is_concept(self) -> bool {
        matches!(self, Method::CbsdSoft | Method::CbsdHard)
    }

    pub fn is_hard(self) -> bool {
        matches!(self, Method::BbsdHard | Method::CbsdHard)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "cardinality")]
pub enum ColumnKind {
    Continuous,
    Categorical(usize),
}

/// Contiguous column range `[start, end)` belonging to one concept.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptGroup {
    pub name: String,
    pub start: usize,
    pub end: usize,
}

/// A reduced `n x d` representation.
#[derive(Debug, Clone, PartialEq)]
pub struct Representation {
    pub method: Method,
    pub matrix: Array2<f64>,
    pub column_kinds: Vec<ColumnKind>,
    pub groups: Option<Vec<ConceptGroup>>,
}

impl Representation {
    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    /// Rows `indices`, in order.
    pub fn select_rows(&self, indices: &[usize]) -> Representation {
        Representation {
            method: self.method,
            matrix: self.matrix.select(ndarray::Axis(0), indices),
            column_kinds: self.column_kinds.clone(),
            groups: self.groups.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.column_kinds.len() != self.ncols() {
            return Err(Error::ShapeMismatch(format!(
                "{} column kinds for {} columns",
                self.column_kinds.len(),
                self.ncols()
            )));
        }
        for (j, kind) in self.column_kinds.iter().enumerate() {
            if let ColumnKind::Categorical(card) = *kind {
                let bad = self
                    .matrix
                    .column(j)
                    .iter()
                    .any(|&v| v < 0.0 || v.fract() != 0.0 || v >= card as f64);
                if bad {
                    return Err(Error::InvalidArgument(format!(
                        "column {j} is categorical({card}) but holds other values"
                    )));
                }
            }
        }
        if let Some(groups) = &self.groups {
            let mut next = 0;
            for g in groups {
                if g.start != next || g.end <= g.start {
                    return Err(Error::InvalidArgument(format!("group `{}` is not contiguous", g.name)));
                }
                next = g.end;
            }
            if next != self.ncols() {
                return Err(Error::InvalidArgument("groups do not cover all columns".into()));
            }
        }
        Ok(())
    }
}

/// Pooled, [0, 1]-scaled features of raw images laid out `n x (h*w*c)`.
pub fn image_features(images: &[u8], h: usize, w: usize, c: usize, pool: usize) -> Result<Array2<f64>> {
    if pool == 0 || h % pool != 0 || w % pool != 0 {
        return Err(Error::InvalidArgument(format!("pool factor {pool} does not divide {h}x{w}")));
    }
    let stride = h * w * c;
    if stride == 0 || images.len() % stride != 0 {
        return Err(Error::ShapeMismatch(format!(
            "{} bytes is not a whole number of {h}x{w}x{c} images",
            images.len()
        )));
    }
    let n = images.len() / stride;
    let (ph, pw) = (h / pool, w / pool);
    let d = ph * pw * c;
    let norm = 1.0 / (255.0 * (pool * pool) as f64);
    let mut out = vec![0.0; n * d];
    out.par_chunks_mut(d.max(1))
        .zip(images.par_chunks(stride))
        .for_each(|(row, img)| {
            for y in 0..h {
                for x in 0..w {
                    let o = ((y / pool) * pw + x / pool) * c;
                    let i = (y * w + x) * c;
                    for ch in 0..c {
                        row[o + ch] += f64::from(img[i + ch]);
                    }
                }
            }
            row.iter_mut().for_each(|v| *v *= norm);
        });
    Array2::from_shape_vec((n, d), out).map_err(|e| Error::ShapeMismatch(e.to_string()))
}

/// Features of the listed samples (all samples when `indices` is `None`).
pub fn dataset_features(ds: &LatentFactorDataset, indices: Option<&[usize]>, pool: usize) -> Result<Array2<f64>> {
    match indices {
        None => image_features(&ds.images, ds.height, ds.width, ds.channels, pool),
        Some(idx) => {
            let s = ds.image_len();
            let mut buf = Vec::with_capacity(idx.len() * s);
            for &i in idx {
                buf.extend_from_slice(ds.image(i));
            }
            image_features(&buf, ds.height, ds.width, ds.channels, pool)
        }
    }
}

/// Input geometry a fitted reducer expects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Geometry {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub pool: usize,
}

impl Geometry {
    pub fn of(ds: &LatentFactorDataset, pool: usize) -> Self {
        Geometry {
            height: ds.height,
            width: ds.width,
            channels: ds.channels,
            pool,
        }
    }

    pub fn input_dim(&self) -> usize {
        (self.height / self.pool) * (self.width / self.pool) * self.channels
    }

    pub fn check(&self, ds: &LatentFactorDataset) -> Result<()> {
        if (ds.height, ds.width, ds.channels) != (self.height, self.width, self.channels) {
            return Err(Error::ShapeMismatch(format!(
                "reducer expects {}x{}x{} images, got {}x{}x{}",
                self.height, self.width, self.channels, ds.height, ds.width, ds.channels
            )));
        }
        Ok(())
    }

    pub fn features(&self, ds: &LatentFactorDataset) -> Result<Array2<f64>> {
        self.check(ds)?;
        dataset_features(ds, None, self.pool)
    }
}
