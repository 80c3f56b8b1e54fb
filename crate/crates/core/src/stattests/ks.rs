use super::{TestKind, TestResult};
use crate::error::{Error, Result};

fn sorted_finite(xs: &[f64], label: &str) -> Result<Vec<f64>> {
    if xs.is_empty() {
        return Err(Error::InvalidArgument(format!("ks_test: sample {label} is empty")));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(format!("ks_test: sample {label} has non-finite values")));
    }
    let mut v = xs.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    Ok(v)
}

/// Two-sample KS statistic over already sorted samples, by merge scan.
fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// `sup |F_a - F_b|` over the pooled sample points.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    let a = sorted_finite(a, "a")?;
    let b = sorted_finite(b, "b")?;
    Ok(sup_distance(&a, &b))
}

/// Asymptotic Kolmogorov survival function `Q(λ) = 2 Σ_{j≥1} (-1)^{j-1} exp(-2 j² λ²)`.
///
/// The series is cut once a term drops below 1e-10. Below λ = 0.2 the value
/// is 1 to within 1e-12 while the series converges slowly, so 1 is returned.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100_000u32 {
        let j = f64::from(j);
        let term = (-2.0 * j * j * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-10 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value and the
/// small-sample correction `λ = (√ne + 0.12 + 0.11/√ne) D`.
pub fn ks_test(a: &[f64], b: &[f64]) -> Result<TestResult> {
    let d = ks_statistic(a, b)?;
    let (n, m) = (a.len() as f64, b.len() as f64);
    let ne = n * m / (n + m);
    let sq = ne.sqrt();
    let lambda = (sq + 0.12 + 0.11 / sq) * d;
    Ok(TestResult {
        test_name: TestKind::Ks,
        statistic: d,
        p_value: kolmogorov_survival(lambda),
        dims_tested: 1,
        df: None,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples() {
        let a = [3.0, 1.0, 2.0, 2.0];
        let r = ks_test(&a, &a).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn disjoint_supports() {
        let r = ks_test(&[-3.0, -1.0, 0.0], &[1.0, 2.0]).unwrap();
        assert_eq!(r.statistic, 1.0);
        assert!(r.p_value < 0.2);
    }

    #[test]
    fn ties_across_samples() {
        // F_a and F_b only differ at 2: a jumps to 2/3, b to 1/3
        let d = ks_statistic(&[1.0, 2.0, 3.0], &[1.0, 3.0, 3.0]).unwrap();
        assert!((d - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_or_nan_rejected() {
        assert!(ks_test(&[], &[1.0]).is_err());
        assert!(ks_test(&[1.0], &[]).is_err());
        assert!(ks_test(&[f64::NAN], &[1.0]).is_err());
    }

    #[test]
    fn survival_known_values() {
        // Q(1.0) and Q(1.36) from standard Kolmogorov tables
        assert!((kolmogorov_survival(1.0) - 0.269_999_671).abs() < 1e-6);
        assert!((kolmogorov_survival(1.358) - 0.050_06).abs() < 1e-4);
        assert_eq!(kolmogorov_survival(0.0), 1.0);
        assert!(kolmogorov_survival(5.0) < 1e-20);
    }
}
