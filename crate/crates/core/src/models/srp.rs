//! Sparse random projection.
//!
//! Entries are `+s` and `-s` with probability `density / 2` each and zero
//! otherwise, with `density = 1/√d` and `s = √(1 / (density · m))`.

use ndarray::{Array2, ArrayView2};
use rand::Rng;

use super::{ColumnKind, Geometry, Method, Representation};
use crate::datagen::LatentFactorDataset;
use crate::error::{Error, Result};
use crate::rng::keyed_rng;

#[derive(Debug, Clone, PartialEq)]
pub struct SrpModel {
    pub geometry: Geometry,
    pub input_dim: usize,
    pub density: f64,
    pub scale: f64,
    pub seed: u64,
    /// Per output row, the nonzero columns and their signs (`true` = `+s`).
    pub rows: Vec<Vec<(u32, bool)>>,
}

impl SrpModel {
    pub fn dims(&self) -> usize {
        self.rows.len()
    }

    pub fn nonzeros(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Dense `m x d` projection matrix.
    pub fn dense(&self) -> Array2<f64> {
        let mut p = Array2::zeros((self.dims(), self.input_dim));
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, pos) in row {
                p[[r, c as usize]] = if pos { self.scale } else { -self.scale };
            }
        }
        p
    }

    /// Rebuild from a dense matrix whose entries are in `{+s, 0, -s}`.
    pub fn from_dense(p: ArrayView2<f64>, geometry: Geometry, seed: u64) -> Result<Self> {
        let (m, d) = p.dim();
        if m == 0 || d == 0 {
            return Err(Error::ShapeMismatch("empty projection".into()));
        }
        let density = 1.0 / (d as f64).sqrt();
        let scale = (1.0 / (density * m as f64)).sqrt();
        let mut rows = Vec::with_capacity(m);
        for r in 0..m {
            let mut row = Vec::new();
            for c in 0..d {
                let v = p[[r, c]];
                if v == 0.0 {
                    continue;
                }
                if ((v.abs() - scale) / scale).abs() > 1e-9 {
                    return Err(Error::InvalidArgument(format!("projection entry {v} is not ±{scale}")));
                }
                row.push((c as u32, v > 0.0));
            }
            rows.push(row);
        }
        Ok(SrpModel { geometry, input_dim: d, density, scale, seed, rows })
    }

    pub fn transform_features(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input_dim {
            return Err(Error::ShapeMismatch(format!(
                "SRP built for {} features, got {}",
                self.input_dim,
                x.ncols()
            )));
        }
        let mut out = Array2::zeros((x.nrows(), self.dims()));
        for (i, xi) in x.outer_iter().enumerate() {
            for (r, row) in self.rows.iter().enumerate() {
                let mut acc = 0.0;
                for &(c, pos) in row {
                    let v = xi[c as usize];
                    acc += if pos { v } else { -v };
                }
                out[[i, r]] = acc * self.scale;
            }
        }
        Ok(out)
    }

    pub fn transform(&self, ds: &LatentFactorDataset) -> Result<Representation> {
        let x = self.geometry.features(ds)?;
        Ok(Representation {
            method: Method::Srp,
            matrix: self.transform_features(x.view())?,
            column_kinds: vec![ColumnKind::Continuous; self.dims()],
            groups: None,
        })
    }
}

/// Sample an `m x d` sparse projection.
pub fn fit_srp(input_dim: usize, m: usize, seed: u64, geometry: Geometry) -> Result<SrpModel> {
    if m == 0 || input_dim == 0 {
        return Err(Error::InvalidArgument(format!("SRP needs m >= 1 and d >= 1, got m={m} d={input_dim}")));
    }
    let density = 1.0 / (input_dim as f64).sqrt();
    let scale = (1.0 / (density * m as f64)).sqrt();
    let rows = (0..m)
        .map(|r| {
            let mut rng = keyed_rng(seed, &[0x5e9, r as u64]);
            (0..input_dim)
                .filter_map(|c| {
                    let u: f64 = rng.gen();
                    if u < density / 2.0 {
                        Some((c as u32, true))
                    } else if u < density {
                        Some((c as u32, false))
                    } else {
                        None
                    }
                })
                .collect()
        })
        .collect();
    Ok(SrpModel { geometry, input_dim, density, scale, seed, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn geom(d: usize) -> Geometry {
        Geometry { height: 1, width: d, channels: 1, pool: 1 }
    }

    #[test]
    fn zero_maps_to_zero() {
        let p = fit_srp(100, 8, 1, geom(100)).unwrap();
        let z = p.transform_features(Array2::zeros((2, 100)).view()).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn seeded() {
        assert_eq!(fit_srp(50, 4, 3, geom(50)).unwrap(), fit_srp(50, 4, 3, geom(50)).unwrap());
        assert_ne!(fit_srp(50, 4, 3, geom(50)).unwrap().rows, fit_srp(50, 4, 4, geom(50)).unwrap().rows);
    }

    #[test]
    fn density_within_binomial_band() {
        let (d, m) = (1024, 64);
        let p = fit_srp(d, m, 7, geom(d)).unwrap();
        let trials = (d * m) as f64;
        let dens = 1.0 / 32.0;
        let mean = trials * dens;
        let sd = (trials * dens * (1.0 - dens)).sqrt();
        assert!((p.nonzeros() as f64 - mean).abs() < 3.0 * sd);
    }

    #[test]
    fn dense_round_trip_and_sparse_product() {
        let p = fit_srp(40, 5, 2, geom(40)).unwrap();
        let back = SrpModel::from_dense(p.dense().view(), geom(40), 2).unwrap();
        assert_eq!(back, p);
        let x = Array2::from_shape_fn((3, 40), |(i, j)| (i * 40 + j) as f64 / 7.0);
        let sparse = p.transform_features(x.view()).unwrap();
        let dense = x.dot(&p.dense().t());
        assert!(sparse.iter().zip(dense.iter()).all(|(a, b)| (a - b).abs() < 1e-9));
    }
}
