//! A minimal multi-head fully connected network.
//!
//! A trunk of ReLU layers feeds any number of softmax heads; the training
//! loss is the sum over heads of the mean cross-entropy. Training is
//! mini-batch SGD with momentum and early stopping on the mean validation
//! accuracy across heads. Batch order comes from a stream keyed by
//! `(seed, epoch)`, so a fixed seed gives identical weights.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::keyed_rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `in x out`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn init(inputs: usize, outputs: usize, gain: f64, seed: u64, key: u64) -> Self {
        let mut rng = keyed_rng(seed, &[0x1a7e5, key]);
        let normal = Normal::new(0.0, (gain / inputs as f64).sqrt()).expect("finite std");
        Dense {
            weight: Array2::from_shape_fn((inputs, outputs), |_| normal.sample(&mut rng)),
            bias: Array1::zeros(outputs),
        }
    }

    fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut z = x.dot(&self.weight);
        z += &self.bias;
        z
    }

    pub fn inputs(&self) -> usize {
        self.weight.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weight.ncols()
    }
}

/// Row-wise softmax, numerically stabilized.
pub fn softmax_rows(logits: &mut Array2<f64>) {
    for mut row in logits.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

/// Row-wise log-softmax.
fn log_softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        row.mapv_inplace(|v| v - lse);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub trunk: Vec<Dense>,
    pub heads: Vec<Dense>,
}

/// Gradients laid out like the network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub trunk: Vec<Dense>,
    pub heads: Vec<Dense>,
}

impl Network {
    /// He-initialized trunk, variance-1/fan-in heads.
    pub fn new(input: usize, hidden: &[usize], head_sizes: &[usize], seed: u64) -> Self {
        let mut trunk = Vec::with_capacity(hidden.len());
        let mut width = input;
        for (l, &h) in hidden.iter().enumerate() {
            trunk.push(Dense::init(width, h, 2.0, seed, l as u64));
            width = h;
        }
        let heads = head_sizes
            .iter()
            .enumerate()
            .map(|(i, &k)| Dense::init(width, k, 1.0, seed, 1000 + i as u64))
            .collect();
        Network { trunk, heads }
    }

    pub fn input_dim(&self) -> usize {
        self.trunk
            .first()
            .or_else(|| self.heads.first())
            .map_or(0, Dense::inputs)
    }

    pub fn head_sizes(&self) -> Vec<usize> {
        self.heads.iter().map(Dense::outputs).collect()
    }

    pub fn parameters(&self) -> impl Iterator<Item = &f64> {
        self.trunk
            .iter()
            .chain(&self.heads)
            .flat_map(|d| d.weight.iter().chain(d.bias.iter()))
    }

    pub fn is_finite(&self) -> bool {
        self.parameters().all(|v| v.is_finite())
    }

    /// Post-ReLU trunk activations for every layer.
    fn trunk_forward(&self, x: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let mut acts: Vec<Array2<f64>> = Vec::with_capacity(self.trunk.len());
        for layer in &self.trunk {
            let mut z = match acts.last() {
                Some(a) => layer.forward(a.view()),
                None => layer.forward(x.view()),
            };
            z.mapv_inplace(|v| v.max(0.0));
            acts.push(z);
        }
        acts
    }

    fn head_logits(&self, last: ArrayView2<f64>) -> Vec<Array2<f64>> {
        self.heads.iter().map(|h| h.forward(last)).collect()
    }

    /// Softmax outputs of every head.
    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Vec<Array2<f64>> {
        // chunked to bound the size of intermediate activations
        const CHUNK: usize = 2048;
        let mut parts: Vec<Vec<Array2<f64>>> = Vec::new();
        let mut start = 0;
        while start < x.nrows() {
            let end = (start + CHUNK).min(x.nrows());
            let xs = x.slice(s![start..end, ..]);
            let acts = self.trunk_forward(xs);
            let last = acts.last().map_or(xs.view(), |a| a.view());
            let mut logits = self.head_logits(last);
            logits.iter_mut().for_each(softmax_rows);
            parts.push(logits);
            start = end;
        }
        (0..self.heads.len())
            .map(|h| {
                if parts.is_empty() {
                    return Array2::zeros((0, self.heads[h].outputs()));
                }
                let views: Vec<_> = parts.iter().map(|p| p[h].view()).collect();
                ndarray::concatenate(Axis(0), &views).expect("equal widths")
            })
            .collect()
    }

    /// Summed mean cross-entropy over heads.
    pub fn loss(&self, x: ArrayView2<f64>, targets: &[Vec<u32>]) -> f64 {
        let acts = self.trunk_forward(x);
        let last = acts.last().map_or(x.view(), |a| a.view());
        self.head_logits(last)
            .iter()
            .zip(targets)
            .map(|(logits, y)| {
                let ls = log_softmax_rows(logits);
                -y.iter().enumerate().map(|(i, &c)| ls[[i, c as usize]]).sum::<f64>() / y.len() as f64
            })
            .sum()
    }

    /// Loss and its exact gradient by backpropagation.
    pub fn loss_and_gradients(&self, x: ArrayView2<f64>, targets: &[Vec<u32>]) -> (f64, Gradients) {
        let b = x.nrows() as f64;
        let acts = self.trunk_forward(x);
        let last = acts.last().map_or(x.view(), |a| a.view());
        let mut loss = 0.0;
        let mut d_last = Array2::<f64>::zeros(last.raw_dim());
        let mut head_grads = Vec::with_capacity(self.heads.len());
        for (head, (logits, y)) in self.heads.iter().zip(self.head_logits(last).into_iter().zip(targets)) {
            let ls = log_softmax_rows(&logits);
            let mut g = ls.mapv(f64::exp);
            for (i, &c) in y.iter().enumerate() {
                loss -= ls[[i, c as usize]] / b;
                g[[i, c as usize]] -= 1.0;
            }
            g /= b;
            head_grads.push(Dense {
                weight: last.t().dot(&g),
                bias: g.sum_axis(Axis(0)),
            });
            d_last += &g.dot(&head.weight.t());
        }
        let mut trunk_grads: Vec<Dense> = Vec::with_capacity(self.trunk.len());
        for l in (0..self.trunk.len()).rev() {
            d_last.zip_mut_with(&acts[l], |d, &a| {
                if a <= 0.0 {
                    *d = 0.0;
                }
            });
            let input = if l == 0 { x.view() } else { acts[l - 1].view() };
            trunk_grads.push(Dense {
                weight: input.t().dot(&d_last),
                bias: d_last.sum_axis(Axis(0)),
            });
            if l > 0 {
                d_last = d_last.dot(&self.trunk[l].weight.t());
            }
        }
        trunk_grads.reverse();
        (
            loss,
            Gradients {
                trunk: trunk_grads,
                heads: head_grads,
            },
        )
    }

    /// Fraction of correct argmax predictions per head.
    pub fn accuracy(&self, x: ArrayView2<f64>, targets: &[Vec<u32>]) -> Vec<f64> {
        self.predict_proba(x)
            .iter()
            .zip(targets)
            .map(|(p, y)| {
                let hits = p
                    .outer_iter()
                    .zip(y)
                    .filter(|(row, &c)| super::reducer::argmax_lowest(row.as_slice().expect("contiguous")) == c as usize)
                    .count();
                hits as f64 / y.len().max(1) as f64
            })
            .collect()
    }
}

/// Mini-batch SGD settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdOptions {
    pub max_epochs: usize,
    pub patience: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
}

impl Default for SgdOptions {
    fn default() -> Self {
        SgdOptions {
            max_epochs: 200,
            patience: 10,
            learning_rate: 0.02,
            momentum: 0.9,
            batch_size: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub val_accuracy: Vec<f64>,
    /// Mean validation accuracy after each epoch.
    pub history: Vec<f64>,
}

fn gather_targets(targets: &[Vec<u32>], idx: &[usize]) -> Vec<Vec<u32>> {
    targets.iter().map(|t| idx.iter().map(|&i| t[i]).collect()).collect()
}

fn zeros_like(net: &Network) -> Gradients {
    let z = |d: &Dense| Dense {
        weight: Array2::zeros(d.weight.raw_dim()),
        bias: Array1::zeros(d.bias.raw_dim()),
    };
    Gradients {
        trunk: net.trunk.iter().map(z).collect(),
        heads: net.heads.iter().map(z).collect(),
    }
}

fn check_targets(x: ArrayView2<f64>, targets: &[Vec<u32>], net: &Network) -> Result<()> {
    if targets.len() != net.heads.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} target columns for {} heads",
            targets.len(),
            net.heads.len()
        )));
    }
    for (t, h) in targets.iter().zip(&net.heads) {
        if t.len() != x.nrows() {
            return Err(Error::ShapeMismatch("targets and inputs differ in length".into()));
        }
        if t.iter().any(|&c| c as usize >= h.outputs()) {
            return Err(Error::InvalidArgument("target class outside head width".into()));
        }
    }
    if x.ncols() != net.input_dim() {
        return Err(Error::ShapeMismatch(format!(
            "network takes {} inputs, got {}",
            net.input_dim(),
            x.ncols()
        )));
    }
    Ok(())
}

impl Network {
    /// Train in place; the returned network state is the best validation epoch.
    pub fn fit(
        &mut self,
        train_x: ArrayView2<f64>,
        train_y: &[Vec<u32>],
        val_x: ArrayView2<f64>,
        val_y: &[Vec<u32>],
        opts: &SgdOptions,
        seed: u64,
    ) -> Result<FitReport> {
        check_targets(train_x, train_y, self)?;
        check_targets(val_x, val_y, self)?;
        if train_x.nrows() == 0 || val_x.nrows() == 0 {
            return Err(Error::InvalidArgument("empty training or validation set".into()));
        }
        let batch = opts.batch_size.max(1);
        let mut velocity = zeros_like(self);
        let mut best = self.clone();
        let mut best_acc = f64::NEG_INFINITY;
        let mut best_epoch = 0;
        let mut best_per_head = Vec::new();
        let mut stale = 0;
        let mut history = Vec::new();
        let mut order: Vec<usize> = (0..train_x.nrows()).collect();
        for epoch in 0..opts.max_epochs {
            order.sort_unstable();
            order.shuffle(&mut keyed_rng(seed, &[0xe90c, epoch as u64]));
            for chunk in order.chunks(batch) {
                let xb = train_x.select(Axis(0), chunk);
                let yb = gather_targets(train_y, chunk);
                let (loss, grads) = self.loss_and_gradients(xb.view(), &yb);
                if !loss.is_finite() {
                    return Err(Error::Diverged(format!("non-finite loss {loss} at epoch {epoch}")));
                }
                self.step(&mut velocity, &grads, opts);
            }
            if !self.is_finite() {
                return Err(Error::Diverged(format!("non-finite parameters after epoch {epoch}")));
            }
            let per_head = self.accuracy(val_x, val_y);
            let acc = per_head.iter().sum::<f64>() / per_head.len() as f64;
            history.push(acc);
            if acc > best_acc {
                best_acc = acc;
                best_epoch = epoch;
                best_per_head = per_head;
                best = self.clone();
                stale = 0;
            } else {
                stale += 1;
                if stale >= opts.patience {
                    break;
                }
            }
        }
        *self = best;
        Ok(FitReport {
            epochs_run: history.len(),
            best_epoch,
            best_val_accuracy: best_acc,
            val_accuracy: best_per_head,
            history,
        })
    }

    fn step(&mut self, velocity: &mut Gradients, grads: &Gradients, opts: &SgdOptions) {
        let (lr, mu) = (opts.learning_rate, opts.momentum);
        let layers = self.trunk.iter_mut().chain(self.heads.iter_mut());
        let vels = velocity.trunk.iter_mut().chain(velocity.heads.iter_mut());
        let gs = grads.trunk.iter().chain(&grads.heads);
        for ((p, v), g) in layers.zip(vels).zip(gs) {
            v.weight.zip_mut_with(&g.weight, |vi, &gi| *vi = mu * *vi - lr * gi);
            v.bias.zip_mut_with(&g.bias, |vi, &gi| *vi = mu * *vi - lr * gi);
            p.weight += &v.weight;
            p.bias += &v.bias;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn softmax_sums_to_one() {
        let mut a = array![[1.0, 2.0, 3.0], [1000.0, 1000.0, -1000.0]];
        softmax_rows(&mut a);
        for r in a.rows() {
            assert!((r.sum() - 1.0).abs() < 1e-12);
        }
        assert!((a[[1, 0]] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn learns_xor() {
        let x = array![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
        let y = vec![vec![0u32, 1, 1, 0]];
        let mut net = Network::new(2, &[16], &[2], 3);
        let opts = SgdOptions { max_epochs: 2000, patience: 2000, learning_rate: 0.1, momentum: 0.9, batch_size: 4 };
        let rep = net.fit(x.view(), &y, x.view(), &y, &opts, 1).unwrap();
        assert_eq!(rep.best_val_accuracy, 1.0);
    }

    #[test]
    fn divergence_is_reported() {
        let x = array![[1e6, -1e6], [-1e6, 1e6]];
        let y = vec![vec![0u32, 1]];
        let mut net = Network::new(2, &[4], &[2], 0);
        let opts = SgdOptions { max_epochs: 50, patience: 50, learning_rate: 1e6, momentum: 0.9, batch_size: 2 };
        assert!(matches!(net.fit(x.view(), &y, x.view(), &y, &opts, 0), Err(Error::Diverged(_))));
    }

    #[test]
    fn target_validation() {
        let x = array![[0.0, 1.0]];
        let mut net = Network::new(2, &[3], &[2], 0);
        let bad = vec![vec![5u32]];
        assert!(net.fit(x.view(), &bad, x.view(), &bad, &SgdOptions::default(), 0).is_err());
    }
}
