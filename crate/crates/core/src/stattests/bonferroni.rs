use serde::{Deserialize, Serialize};

use super::TestResult;
use crate::error::{Error, Result};

/// Per-dimension results folded with a Bonferroni correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiTestResult {
    pub per_dimension: Vec<TestResult>,
    /// `min(1, K * min p)`.
    pub combined_p: f64,
    pub max_statistic: f64,
    pub alpha: f64,
    /// `min p < alpha / K`.
    pub reject: bool,
}

pub fn bonferroni(results: Vec<TestResult>, alpha: f64) -> Result<MultiTestResult> {
    if results.is_empty() {
        return Err(Error::InvalidArgument("bonferroni: no results".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside (0, 1)")));
    }
    let k = results.len() as f64;
    let min_p = results.iter().map(|r| r.p_value).fold(f64::INFINITY, f64::min);
    let max_statistic = results.iter().map(|r| r.statistic).fold(f64::NEG_INFINITY, f64::max);
    Ok(MultiTestResult {
        combined_p: (k * min_p).min(1.0),
        max_statistic,
        alpha,
        reject: min_p < alpha / k,
        per_dimension: results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stattests::TestKind;

    fn r(p: f64) -> TestResult {
        TestResult {
            test_name: TestKind::Ks,
            statistic: 1.0 - p,
            p_value: p,
            dims_tested: 1,
            df: None,
            degenerate: false,
        }
    }

    #[test]
    fn single_result_is_identity() {
        let m = bonferroni(vec![r(0.3)], 0.05).unwrap();
        assert_eq!(m.combined_p, 0.3);
        assert!(!m.reject);
    }

    #[test]
    fn three_tests() {
        let m = bonferroni(vec![r(0.01), r(0.9), r(0.9)], 0.05).unwrap();
        assert!(m.reject);
        assert!((m.combined_p - 0.03).abs() < 1e-15);
        assert!((m.max_statistic - 0.99).abs() < 1e-15);
    }

    #[test]
    fn all_ones() {
        let m = bonferroni(vec![r(1.0); 4], 0.05).unwrap();
        assert!(!m.reject);
        assert_eq!(m.combined_p, 1.0);
    }

    #[test]
    fn invalid_inputs() {
        assert!(bonferroni(vec![], 0.05).is_err());
        assert!(bonferroni(vec![r(0.5)], 1.0).is_err());
    }
}
