//! Kernel two-sample test.
//!
//! The statistic is the unbiased MMD² u-statistic with an RBF kernel whose
//! bandwidth comes from the median heuristic on the pooled sample. The
//! p-value is a permutation p-value; each permutation draws its own keyed
//! stream so the result does not depend on the rayon pool size.

use std::cmp::Ordering;

use ndarray::{ArrayView2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::{TestKind, TestResult};
use crate::error::{Error, Result};
use crate::rng::keyed_rng;

pub const DEFAULT_PERMUTATIONS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmdOptions {
    pub permutations: usize,
    pub seed: u64,
}

impl Default for MmdOptions {
    fn default() -> Self {
        MmdOptions {
            permutations: DEFAULT_PERMUTATIONS,
            seed: 0,
        }
    }
}

fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn rows(m: ArrayView2<f64>) -> Vec<Vec<f64>> {
    m.axis_iter(Axis(0)).map(|r| r.to_vec()).collect()
}

/// `σ² = median(‖zᵢ - zⱼ‖², i < j) / 2` over the pooled rows.
/// Returns `None` when the median distance is zero.
pub fn median_heuristic(pooled: &[Vec<f64>]) -> Option<f64> {
    let n = pooled.len();
    let mut d: Vec<f64> = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            d.push(sq_dist(&pooled[i], &pooled[j]));
        }
    }
    if d.is_empty() {
        return None;
    }
    let mid = d.len() / 2;
    let median = if d.len() % 2 == 1 {
        *d.select_nth_unstable_by(mid, f64::total_cmp).1
    } else {
        let hi = *d.select_nth_unstable_by(mid, f64::total_cmp).1;
        let lo = d[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lo + hi)
    };
    (median > 0.0).then_some(median / 2.0)
}

/// Full RBF Gram matrix `exp(-‖zᵢ - zⱼ‖² / (2σ²))`, row-major.
pub fn rbf_gram(pooled: &[Vec<f64>], sigma2: f64) -> Vec<f64> {
    let n = pooled.len();
    let mut k = vec![0.0; n * n];
    k.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = (-sq_dist(&pooled[i], &pooled[j]) / (2.0 * sigma2)).exp();
        }
    });
    k
}

/// Block sums of the Gram matrix for a membership split. Returns the
/// off-diagonal sums within X and within Y and the cross sum.
struct GramSums {
    n: usize,
    row_sums: Vec<f64>,
    off_diag_total: f64,
}

impl GramSums {
    fn new(k: &[f64], n: usize) -> Self {
        let row_sums: Vec<f64> = (0..n)
            .map(|i| k[i * n..(i + 1) * n].iter().sum::<f64>() - k[i * n + i])
            .collect();
        let off_diag_total = row_sums.iter().sum();
        GramSums {
            n,
            row_sums,
            off_diag_total,
        }
    }

    /// Unbiased MMD² when the first `nx` entries of `order` form X.
    fn statistic(&self, k: &[f64], order: &[usize], nx: usize) -> f64 {
        let ny = self.n - nx;
        // sum over the smaller group directly, recover the rest from row sums
        let (small, small_is_x) = if nx <= ny {
            (&order[..nx], true)
        } else {
            (&order[nx..], false)
        };
        let mut within_small = 0.0;
        for (a, &i) in small.iter().enumerate() {
            let row = &k[i * self.n..(i + 1) * self.n];
            for &j in &small[a + 1..] {
                within_small += row[j];
            }
        }
        within_small *= 2.0;
        let rows_small: f64 = small.iter().map(|&i| self.row_sums[i]).sum();
        let cross = rows_small - within_small;
        let within_large = self.off_diag_total - within_small - 2.0 * cross;
        let (sxx, syy) = if small_is_x {
            (within_small, within_large)
        } else {
            (within_large, within_small)
        };
        let (nxf, nyf) = (nx as f64, ny as f64);
        sxx / (nxf * (nxf - 1.0)) + syy / (nyf * (nyf - 1.0)) - 2.0 * cross / (nxf * nyf)
    }
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

fn check(a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> Result<()> {
    if a.nrows() < 2 || b.nrows() < 2 {
        return Err(Error::InvalidArgument(format!(
            "mmd_test needs at least 2 samples per side, got {} and {}",
            a.nrows(),
            b.nrows()
        )));
    }
    if a.ncols() != b.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "mmd_test: {} vs {} columns",
            a.ncols(),
            b.ncols()
        )));
    }
    if a.iter().chain(b.iter()).any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("mmd_test: non-finite input".into()));
    }
    Ok(())
}

/// Unbiased MMD² for a fixed bandwidth.
pub fn mmd_unbiased(a: ArrayView2<f64>, b: ArrayView2<f64>, sigma2: f64) -> Result<f64> {
    check(&a, &b)?;
    let mut pooled = rows(a);
    pooled.extend(rows(b));
    let k = rbf_gram(&pooled, sigma2);
    let order: Vec<usize> = (0..pooled.len()).collect();
    Ok(GramSums::new(&k, pooled.len()).statistic(&k, &order, a.nrows()))
}

/// Biased (V-statistic) MMD² for a fixed bandwidth. Zero when the two
/// empirical measures coincide.
pub fn mmd_biased(a: ArrayView2<f64>, b: ArrayView2<f64>, sigma2: f64) -> Result<f64> {
    check(&a, &b)?;
    let mut pooled = rows(a);
    pooled.extend(rows(b));
    let n = pooled.len();
    let nx = a.nrows();
    let k = rbf_gram(&pooled, sigma2);
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let v = k[i * n + j];
            match (i < nx, j < nx) {
                (true, true) => sxx += v,
                (false, false) => syy += v,
                _ => sxy += v,
            }
        }
    }
    let (nxf, nyf) = (nx as f64, (n - nx) as f64);
    Ok((sxx / (nxf * nxf) + syy / (nyf * nyf) - sxy / (nxf * nyf)).max(0.0))
}

/// MMD permutation test.
///
/// Rows of each sample are put into a canonical (lexicographic) order before
/// permuting, so the outcome is invariant to the input row order. The
/// reported statistic is the unbiased MMD² clamped at zero; the permutation
/// comparison uses the unclamped values.
pub fn mmd_test(a: ArrayView2<f64>, b: ArrayView2<f64>, opts: MmdOptions) -> Result<TestResult> {
    check(&a, &b)?;
    let mut xa = rows(a);
    let mut xb = rows(b);
    xa.sort_by(|p, q| lexicographic(p, q));
    xb.sort_by(|p, q| lexicographic(p, q));
    let nx = xa.len();
    let mut pooled = xa;
    pooled.extend(xb);
    let n = pooled.len();

    let (sigma2, degenerate) = match median_heuristic(&pooled) {
        Some(s) => (s, false),
        None => (1.0, true),
    };
    let k = rbf_gram(&pooled, sigma2);
    let sums = GramSums::new(&k, n);
    let identity: Vec<usize> = (0..n).collect();
    let observed = sums.statistic(&k, &identity, nx);

    let exceed: usize = (0..opts.permutations)
        .into_par_iter()
        .map(|p| {
            let mut order = identity.clone();
            order.shuffle(&mut keyed_rng(opts.seed, &[0x33d, p as u64]));
            usize::from(sums.statistic(&k, &order, nx) >= observed)
        })
        .sum();
    let p_value = (1 + exceed) as f64 / (1 + opts.permutations) as f64;
    Ok(TestResult {
        test_name: TestKind::Mmd,
        statistic: observed.max(0.0),
        p_value,
        dims_tested: a.ncols(),
        df: None,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::Rng;

    fn random(n: usize, d: usize, shift: f64, seed: u64) -> Array2<f64> {
        let mut rng = keyed_rng(seed, &[]);
        Array2::from_shape_fn((n, d), |_| rng.gen::<f64>() + shift)
    }

    #[test]
    fn biased_statistic_of_a_copy_is_zero() {
        let a = random(12, 3, 0.0, 1);
        let v = mmd_biased(a.view(), a.view(), 0.7).unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn clear_shift_is_detected() {
        let a = random(30, 2, 0.0, 1);
        let b = random(30, 2, 2.0, 2);
        let r = mmd_test(a.view(), b.view(), MmdOptions { permutations: 200, seed: 3 }).unwrap();
        assert!((r.p_value - 1.0 / 201.0).abs() < 1e-12);
        assert!(r.statistic > 0.0);
    }

    #[test]
    fn identical_points_fall_back() {
        let a = array![[1.0, 1.0], [1.0, 1.0]];
        let r = mmd_test(a.view(), a.view(), MmdOptions { permutations: 10, seed: 0 }).unwrap();
        assert!(r.degenerate);
        assert!((0.0..=1.0).contains(&r.p_value));
    }

    #[test]
    fn too_few_rows() {
        let a = array![[1.0]];
        let b = array![[1.0], [2.0]];
        assert!(mmd_test(a.view(), b.view(), MmdOptions::default()).is_err());
    }

    #[test]
    fn seeded_and_order_blind() {
        let a = random(15, 2, 0.0, 5);
        let b = random(15, 2, 0.2, 6);
        let opts = MmdOptions { permutations: 300, seed: 9 };
        let r1 = mmd_test(a.view(), b.view(), opts).unwrap();
        let r2 = mmd_test(a.view(), b.view(), opts).unwrap();
        assert_eq!(r1, r2);
        let mut a_rev = a.clone();
        a_rev.invert_axis(Axis(0));
        let r3 = mmd_test(a_rev.view(), b.view(), opts).unwrap();
        assert_eq!(r1, r3);
    }
}
