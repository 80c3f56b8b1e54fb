use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::keyed_rng;

/// Train/validation/test fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.70,
            validation: 0.15,
            test: 0.15,
        }
    }
}

impl SplitRatios {
    pub fn new(train: f64, validation: f64, test: f64) -> Result<Self> {
        let r = SplitRatios {
            train,
            validation,
            test,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return Err(Error::InvalidArgument(format!("split ratios must be positive: {parts:?}")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("split ratios sum to {sum}, not 1")));
        }
        Ok(())
    }

    /// Partition sizes for `n` items.
    ///
    /// Train is `round(n * train)` (halves round up), validation is
    /// `floor(n * validation)`, and test takes the remainder.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let train = ((n as f64 * self.train) + 0.5 - 1e-9).floor().max(0.0) as usize;
        let train = train.min(n);
        let val = ((n as f64 * self.validation) + 1e-9).floor() as usize;
        let val = val.min(n - train);
        (train, val, n - train - val)
    }
}

/// Disjoint index lists produced by [`split`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

/// Shuffle `0..n` with a seeded permutation and cut it by `ratios`.
pub fn split(n: usize, ratios: SplitRatios, seed: u64) -> Result<SplitIndices> {
    ratios.validate()?;
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut keyed_rng(seed, &[0x5911]));
    let (a, b, _) = ratios.sizes(n);
    let test = perm.split_off(a + b);
    let validation = perm.split_off(a);
    Ok(SplitIndices {
        train: perm,
        validation,
        test,
        seed,
    })
}
