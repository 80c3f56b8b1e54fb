use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptShiftScore {
    pub scores: Vec<f64>,
    /// Every statistic was zero and the scores are uniform.
    pub degenerate: bool,
}

/// `t_i / Σ t`; uniform `1/k` when the sum is zero.
pub fn concept_shift_score(t: &[f64]) -> Result<ConceptShiftScore> {
    if t.is_empty() {
        return Err(Error::InvalidArgument("concept shift score of an empty vector".into()));
    }
    if let Some(bad) = t.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("statistic {bad} is not a finite nonnegative number")));
    }
    let total: f64 = t.iter().sum();
    if total == 0.0 {
        let k = t.len() as f64;
        return Ok(ConceptShiftScore { scores: vec![1.0 / k; t.len()], degenerate: true });
    }
    Ok(ConceptShiftScore { scores: t.iter().map(|v| v / total).collect(), degenerate: false })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_values() {
        assert_eq!(concept_shift_score(&[2.0, 1.0, 1.0]).unwrap().scores, vec![0.5, 0.25, 0.25]);
        assert_eq!(concept_shift_score(&[0.0, 0.0, 5.0]).unwrap().scores, vec![0.0, 0.0, 1.0]);
        let eq = concept_shift_score(&[3.0; 4]).unwrap();
        assert!(eq.scores.iter().all(|&s| s == 0.25) && !eq.degenerate);
    }

    #[test]
    fn zero_sum_is_uniform() {
        let z = concept_shift_score(&[0.0; 5]).unwrap();
        assert!(z.degenerate);
        assert!(z.scores.iter().all(|&s| (s - 0.2).abs() < 1e-15));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(concept_shift_score(&[]).is_err());
        assert!(concept_shift_score(&[1.0, -0.1]).is_err());
        assert!(concept_shift_score(&[f64::NAN]).is_err());
    }
}
