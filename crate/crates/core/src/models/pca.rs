use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::{ColumnKind, Geometry, Method, Representation};
use crate::datagen::LatentFactorDataset;
use crate::error::{Error, Result};

/// How many components to keep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PcaDims {
    Fixed(usize),
    /// Smallest m whose cumulative explained variance reaches the fraction.
    VarianceFraction(f64),
}

impl Default for PcaDims {
    fn default() -> Self {
        PcaDims::VarianceFraction(0.80)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub geometry: Geometry,
    pub mean: Array1<f64>,
    /// `m x d` with orthonormal rows, descending eigenvalue order.
    pub components: Array2<f64>,
    pub explained_variance: Array1<f64>,
    pub explained_variance_ratio: Array1<f64>,
}

impl PcaModel {
    pub fn dims(&self) -> usize {
        self.components.nrows()
    }

    /// Project already-computed features.
    pub fn transform_features(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.mean.len() {
            return Err(Error::ShapeMismatch(format!(
                "PCA fitted on {} features, got {}",
                self.mean.len(),
                x.ncols()
            )));
        }
        let centered = &x - &self.mean;
        Ok(centered.dot(&self.components.t()))
    }

    /// Map projections back to feature space.
    pub fn reconstruct(&self, z: ArrayView2<f64>) -> Array2<f64> {
        z.dot(&self.components) + &self.mean
    }

    pub fn transform(&self, ds: &LatentFactorDataset) -> Result<Representation> {
        let x = self.geometry.features(ds)?;
        Ok(Representation {
            method: Method::Pca,
            matrix: self.transform_features(x.view())?,
            column_kinds: vec![ColumnKind::Continuous; self.dims()],
            groups: None,
        })
    }
}

/// Fit PCA on a feature matrix by eigendecomposition of its covariance.
pub fn fit_pca_features(x: ArrayView2<f64>, dims: PcaDims, geometry: Geometry) -> Result<PcaModel> {
    let (n, d) = x.dim();
    if n < 2 {
        return Err(Error::InvalidArgument("PCA needs at least two samples".into()));
    }
    let mean = x.mean_axis(Axis(0)).expect("n >= 2");
    let centered = &x - &mean;
    let cov = centered.t().dot(&centered) / (n as f64 - 1.0);
    let total: f64 = cov.diag().sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(Error::Degenerate("all features are constant".into()));
    }

    let cov_na = DMatrix::from_row_slice(d, d, cov.as_slice().expect("standard layout"));
    let eig = cov_na.symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();

    let limit = n.min(d);
    let m = match dims {
        PcaDims::Fixed(m) => {
            if m == 0 || m > limit {
                return Err(Error::InvalidArgument(format!("PCA dims {m} outside [1, {limit}]")));
            }
            m
        }
        PcaDims::VarianceFraction(f) => {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::InvalidArgument(format!("variance fraction {f} outside (0, 1]")));
            }
            let mut acc = 0.0;
            let mut m = limit;
            for (i, v) in values.iter().enumerate().take(limit) {
                acc += v / total;
                if acc >= f - 1e-12 {
                    m = i + 1;
                    break;
                }
            }
            m
        }
    };

    let mut components = Array2::zeros((m, d));
    for (r, &i) in order.iter().take(m).enumerate() {
        let v = eig.eigenvectors.column(i);
        // sign convention: largest-magnitude entry positive
        let pivot = v.iter().copied().fold(0.0_f64, |a, b| if b.abs() > a.abs() { b } else { a });
        let s = if pivot < 0.0 { -1.0 } else { 1.0 };
        for c in 0..d {
            components[[r, c]] = s * v[c];
        }
    }
    let explained_variance = Array1::from(values[..m].to_vec());
    let explained_variance_ratio = explained_variance.mapv(|v| (v / total).clamp(0.0, 1.0));
    Ok(PcaModel {
        geometry,
        mean,
        components,
        explained_variance,
        explained_variance_ratio,
    })
}

/// Fit PCA on the listed training samples of a dataset.
pub fn fit_pca(ds: &LatentFactorDataset, train: &[usize], dims: PcaDims, pool: usize) -> Result<PcaModel> {
    let geometry = Geometry::of(ds, pool);
    let x = super::dataset_features(ds, Some(train), pool)?;
    fit_pca_features(x.view(), dims, geometry)
}
