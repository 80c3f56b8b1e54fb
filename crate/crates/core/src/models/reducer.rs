use std::sync::Arc;

use ndarray::{Array2, ArrayView2};

use super::classifier::{concat, ClassifierKind, MlpClassifier};
use super::{ColumnKind, ConceptGroup, Method, PcaModel, Representation, SrpModel};
use crate::datagen::LatentFactorDataset;
use crate::error::{Error, Result};

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax_lowest(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// A fitted dimensionality reducer.
///
/// Fitted models are immutable; the network-backed variants share one
/// classifier through an `Arc` so soft and hard reducers can coexist.
#[derive(Debug, Clone)]
pub enum Reducer {
    Pca(Arc<PcaModel>),
    Srp(Arc<SrpModel>),
    TaskSoftmax(Arc<MlpClassifier>),
    TaskHard(Arc<MlpClassifier>),
    ConceptSoftmax(Arc<MlpClassifier>),
    ConceptHard(Arc<MlpClassifier>),
}

impl Reducer {
    pub fn method(&self) -> Method {
        match self {
            Reducer::Pca(_) => Method::Pca,
            Reducer::Srp(_) => Method::Srp,
            Reducer::TaskSoftmax(_) => Method::BbsdSoft,
            Reducer::TaskHard(_) => Method::BbsdHard,
            Reducer::ConceptSoftmax(_) => Method::CbsdSoft,
            Reducer::ConceptHard(_) => Method::CbsdHard,
        }
    }

    /// Wrap a classifier as the reducer for `method`, checking compatibility.
    pub fn from_classifier(method: Method, clf: Arc<MlpClassifier>) -> Result<Self> {
        let need = match method {
            Method::BbsdSoft | Method::BbsdHard => ClassifierKind::Task,
            Method::CbsdSoft | Method::CbsdHard => ClassifierKind::ConceptBottleneck,
            Method::Pca | Method::Srp => {
                return Err(Error::NotFitted(format!("{method} needs a linear model, not a classifier")))
            }
        };
        if clf.kind != need {
            return Err(Error::NotFitted(format!("{method} needs a {need:?} model, got {:?}", clf.kind)));
        }
        Ok(match method {
            Method::BbsdSoft => Reducer::TaskSoftmax(clf),
            Method::BbsdHard => Reducer::TaskHard(clf),
            Method::CbsdSoft => Reducer::ConceptSoftmax(clf),
            _ => Reducer::ConceptHard(clf),
        })
    }

    fn geometry(&self) -> &super::Geometry {
        match self {
            Reducer::Pca(p) => &p.geometry,
            Reducer::Srp(s) => &s.geometry,
            Reducer::TaskSoftmax(c) | Reducer::TaskHard(c) | Reducer::ConceptSoftmax(c) | Reducer::ConceptHard(c) => {
                &c.geometry
            }
        }
    }

    pub fn reduce(&self, ds: &LatentFactorDataset) -> Result<Representation> {
        let x = self.geometry().features(ds)?;
        let mut rep = self.reduce_features(x.view())?;
        if let (Some(groups), Reducer::ConceptSoftmax(_) | Reducer::ConceptHard(_)) = (&rep.groups, self) {
            if groups.len() != ds.num_concepts() {
                return Err(Error::ShapeMismatch("concept model and dataset schema differ".into()));
            }
        }
        rep.method = self.method();
        Ok(rep)
    }

    /// Reduce pooled features directly.
    pub fn reduce_features(&self, x: ArrayView2<f64>) -> Result<Representation> {
        let method = self.method();
        match self {
            Reducer::Pca(p) => Ok(Representation {
                method,
                matrix: p.transform_features(x)?,
                column_kinds: vec![ColumnKind::Continuous; p.dims()],
                groups: None,
            }),
            Reducer::Srp(s) => Ok(Representation {
                method,
                matrix: s.transform_features(x)?,
                column_kinds: vec![ColumnKind::Continuous; s.dims()],
                groups: None,
            }),
            Reducer::TaskSoftmax(c) => {
                let p = c.task_proba_features(x)?;
                let k = p.ncols();
                Ok(Representation {
                    method,
                    matrix: p,
                    column_kinds: vec![ColumnKind::Continuous; k],
                    groups: None,
                })
            }
            Reducer::TaskHard(c) => {
                let p = c.task_proba_features(x)?;
                let k = p.ncols();
                let labels = Array2::from_shape_fn((p.nrows(), 1), |(i, _)| {
                    argmax_lowest(p.row(i).as_slice().expect("contiguous")) as f64
                });
                Ok(Representation {
                    method,
                    matrix: labels,
                    column_kinds: vec![ColumnKind::Categorical(k)],
                    groups: None,
                })
            }
            Reducer::ConceptSoftmax(c) => {
                let heads = c.predict_proba_features(x)?;
                let mut groups = Vec::with_capacity(heads.len());
                let mut start = 0;
                for (name, h) in c.head_names.iter().zip(&heads) {
                    groups.push(ConceptGroup {
                        name: name.clone(),
                        start,
                        end: start + h.ncols(),
                    });
                    start += h.ncols();
                }
                Ok(Representation {
                    method,
                    matrix: concat(&heads),
                    column_kinds: vec![ColumnKind::Continuous; start],
                    groups: Some(groups),
                })
            }
            Reducer::ConceptHard(c) => {
                let heads = c.predict_proba_features(x)?;
                let n = x.nrows();
                let mut m = Array2::zeros((n, heads.len()));
                for (j, h) in heads.iter().enumerate() {
                    for i in 0..n {
                        m[[i, j]] = argmax_lowest(h.row(i).as_slice().expect("contiguous")) as f64;
                    }
                }
                Ok(Representation {
                    method,
                    matrix: m,
                    column_kinds: heads.iter().map(|h| ColumnKind::Categorical(h.ncols())).collect(),
                    groups: Some(
                        c.head_names
                            .iter()
                            .enumerate()
                            .map(|(j, name)| ConceptGroup {
                                name: name.clone(),
                                start: j,
                                end: j + 1,
                            })
                            .collect(),
                    ),
                })
            }
        }
    }
}
