//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use ndarray::{Array2, Axis};
use rand::Rng;
use shiftlens::models::{fit_pca_features, Geometry, Gradients, Network, PcaDims};
use shiftlens::rng::keyed_rng;

pub fn brute_ks(a: &[f64], b: &[f64]) -> f64 {
    let ecdf = |s: &[f64], t: f64| s.iter().filter(|&&v| v <= t).count() as f64 / s.len() as f64;
    a.iter().chain(b).map(|&t| (ecdf(a, t) - ecdf(b, t)).abs()).fold(0.0, f64::max)
}

pub fn direct_mmd_unbiased(a: &[Vec<f64>], b: &[Vec<f64>], sigma2: f64) -> f64 {
    let k = |x: &[f64], y: &[f64]| {
        let d: f64 = x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum();
        (-d / (2.0 * sigma2)).exp()
    };
    let (m, n) = (a.len() as f64, b.len() as f64);
    let mut xx = 0.0;
    for i in 0..a.len() {
        for j in 0..a.len() {
            if i != j {
                xx += k(&a[i], &a[j]);
            }
        }
    }
    let mut yy = 0.0;
    for i in 0..b.len() {
        for j in 0..b.len() {
            if i != j {
                yy += k(&b[i], &b[j]);
            }
        }
    }
    let xy: f64 = a.iter().flat_map(|x| b.iter().map(move |y| k(x, y))).sum();
    xx / (m * (m - 1.0)) + yy / (n * (n - 1.0)) - 2.0 * xy / (m * n)
}

pub fn textbook_chi2(a: &[usize], b: &[usize], card: usize) -> f64 {
    let mut table = vec![[0.0f64; 2]; card];
    for &x in a {
        table[x][0] += 1.0;
    }
    for &x in b {
        table[x][1] += 1.0;
    }
    let n = (a.len() + b.len()) as f64;
    let rows = [a.len() as f64, b.len() as f64];
    let mut stat = 0.0;
    for col in &table {
        let total = col[0] + col[1];
        if total == 0.0 {
            continue;
        }
        for r in 0..2 {
            let e = rows[r] * total / n;
            stat += (col[r] - e).powi(2) / e;
        }
    }
    stat
}

/// Cyclic Jacobi eigensolver for a symmetric matrix; returns (values, vectors as columns).
pub fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(i == j)).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

/// Every parameter of the network, mutably, in a fixed order.
pub fn params_mut(net: &mut Network) -> Vec<&mut f64> {
    net.trunk
        .iter_mut()
        .chain(net.heads.iter_mut())
        .flat_map(|d| d.weight.iter_mut().chain(d.bias.iter_mut()))
        .collect()
}

pub fn grads_flat(g: &Gradients) -> Vec<f64> {
    g.trunk
        .iter()
        .chain(&g.heads)
        .flat_map(|d| d.weight.iter().chain(d.bias.iter()).copied())
        .collect()
}

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = keyed_rng(seed, &[]);
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0))
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheck {
    pub parameters: usize,
    /// Parameters skipped because the perturbation crossed a ReLU kink.
    pub kinks: usize,
    pub worst_relative_error: f64,
}

/// Backprop gradients of a small two-head network against central differences.
pub fn gradient_check(seed: u64, eps: f64) -> GradCheck {
    let mut net = Network::new(6, &[5, 4], &[3, 2], 10 + seed);
    // zero biases put pre-activations exactly on the ReLU kink when a whole layer is dead
    let mut brng = keyed_rng(300 + seed, &[]);
    for d in net.trunk.iter_mut().chain(net.heads.iter_mut()) {
        d.bias.mapv_inplace(|_| brng.gen_range(-0.5..0.5));
    }
    let x = random_matrix(7, 6, 100 + seed);
    let mut rng = keyed_rng(200 + seed, &[]);
    let y = vec![
        (0..7).map(|_| rng.gen_range(0..3)).collect::<Vec<u32>>(),
        (0..7).map(|_| rng.gen_range(0..2)).collect::<Vec<u32>>(),
    ];
    let (base, grads) = net.loss_and_gradients(x.view(), &y);
    let analytic = grads_flat(&grads);
    let mut out = GradCheck { parameters: analytic.len(), kinks: 0, worst_relative_error: 0.0 };
    for (p, &a) in analytic.iter().enumerate() {
        let orig = *params_mut(&mut net)[p];
        *params_mut(&mut net)[p] = orig + eps;
        let up = net.loss(x.view(), &y);
        *params_mut(&mut net)[p] = orig - eps;
        let down = net.loss(x.view(), &y);
        *params_mut(&mut net)[p] = orig;
        let (fwd, bwd) = ((up - base) / eps, (base - down) / eps);
        if (fwd - bwd).abs() > 5e-3 {
            out.kinks += 1;
            continue;
        }
        let numeric = (up - down) / (2.0 * eps);
        let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-6);
        out.worst_relative_error = out.worst_relative_error.max(rel);
    }
    out
}

/// Largest deviation (eigenvalues and sign-aligned components) between PCA
/// and the Jacobi eigensolver on a 50 x 5 anisotropic sample.
pub fn pca_oracle_error(seed: u64) -> f64 {
    let mut x = random_matrix(50, 5, seed);
    for (j, mut col) in x.axis_iter_mut(Axis(1)).enumerate() {
        col *= 1.0 + 2.0 * j as f64;
    }
    let geometry = Geometry { height: 1, width: 5, channels: 1, pool: 1 };
    let model = fit_pca_features(x.view(), PcaDims::Fixed(5), geometry).unwrap();
    let mean = x.mean_axis(Axis(0)).unwrap();
    let c = &x - &mean;
    let cov = c.t().dot(&c) / 49.0;
    let (vals, vecs) = jacobi_eigen(cov.rows().into_iter().map(|r| r.to_vec()).collect());
    let mut order: Vec<usize> = (0..5).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    let mut worst: f64 = 0.0;
    for (m, &i) in order.iter().enumerate() {
        worst = worst.max((model.explained_variance[m] - vals[i]).abs());
        let oracle: Vec<f64> = (0..5).map(|r| vecs[r][i]).collect();
        let comp = model.components.row(m);
        let sign = comp.iter().zip(&oracle).map(|(a, b)| a * b).sum::<f64>().signum();
        for (a, b) in comp.iter().zip(&oracle) {
            worst = worst.max((a - sign * b).abs());
        }
    }
    worst
}
