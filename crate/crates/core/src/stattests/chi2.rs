use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::{TestKind, TestResult};
use crate::error::{Error, Result};

/// Category counts of both samples, `cardinality` columns each.
pub fn contingency(a: &[usize], b: &[usize], cardinality: usize) -> Result<(Vec<u64>, Vec<u64>)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("chi2_test: empty sample".into()));
    }
    let mut ca = vec![0u64; cardinality];
    let mut cb = vec![0u64; cardinality];
    for (xs, counts) in [(a, &mut ca), (b, &mut cb)] {
        for &x in xs {
            if x >= cardinality {
                return Err(Error::InvalidArgument(format!(
                    "chi2_test: category {x} outside cardinality {cardinality}"
                )));
            }
            counts[x] += 1;
        }
    }
    Ok((ca, cb))
}

/// Homogeneity statistic and degrees of freedom for a 2 x K table.
/// Columns with zero total are skipped and do not count toward df.
pub fn chi2_statistic(ca: &[u64], cb: &[u64]) -> (f64, usize) {
    let na: u64 = ca.iter().sum();
    let nb: u64 = cb.iter().sum();
    let total = (na + nb) as f64;
    let mut stat = 0.0;
    let mut nonzero = 0usize;
    for (&oa, &ob) in ca.iter().zip(cb) {
        let col = (oa + ob) as f64;
        if col == 0.0 {
            continue;
        }
        nonzero += 1;
        for (o, rowsum) in [(oa, na), (ob, nb)] {
            let e = rowsum as f64 * col / total;
            if e > 0.0 {
                let diff = o as f64 - e;
                stat += diff * diff / e;
            }
        }
    }
    (stat, nonzero.saturating_sub(1))
}

/// Chi-squared test of homogeneity between two categorical samples.
pub fn chi2_test(a: &[usize], b: &[usize], cardinality: usize) -> Result<TestResult> {
    let (ca, cb) = contingency(a, b, cardinality)?;
    let (stat, df) = chi2_statistic(&ca, &cb);
    if df == 0 {
        return Ok(TestResult {
            test_name: TestKind::Chi2,
            statistic: 0.0,
            p_value: 1.0,
            dims_tested: 1,
            df: Some(0),
            degenerate: true,
        });
    }
    let dist = ChiSquared::new(df as f64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(TestResult {
        test_name: TestKind::Chi2,
        statistic: stat,
        p_value: dist.sf(stat).clamp(0.0, 1.0),
        dims_tested: 1,
        df: Some(df),
        degenerate: false,
    })
}
