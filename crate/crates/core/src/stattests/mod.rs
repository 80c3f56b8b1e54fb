//! Two-sample tests and multiple-testing aggregation.

mod bonferroni;
mod chi2;
mod ks;
mod mmd;

use serde::{Deserialize, Serialize};

pub use bonferroni::{bonferroni, MultiTestResult};
pub use chi2::{chi2_statistic, chi2_test, contingency};
pub use ks::{kolmogorov_survival, ks_statistic, ks_test};
pub use mmd::{
    median_heuristic, mmd_biased, mmd_test, mmd_unbiased, rbf_gram, MmdOptions, DEFAULT_PERMUTATIONS,
};

/// Which test produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestKind {
    Ks,
    Chi2,
    Mmd,
}

impl TestKind {
    pub fn name(self) -> &'static str {
        match self {
            TestKind::Ks => "ks",
            TestKind::Chi2 => "chi2",
            TestKind::Mmd => "mmd",
        }
    }
}

impl std::str::FromStr for TestKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ks" => Ok(TestKind::Ks),
            "chi2" => Ok(TestKind::Chi2),
            "mmd" => Ok(TestKind::Mmd),
            other => Err(crate::Error::InvalidArgument(format!("unknown test `{other}`"))),
        }
    }
}

/// Outcome of one two-sample test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub test_name: TestKind,
    pub statistic: f64,
    pub p_value: f64,
    pub dims_tested: usize,
    /// Degrees of freedom, for chi-squared results.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub df: Option<usize>,
    /// Set when the test fell back to a conventional value (zero df, zero bandwidth).
    #[serde(default)]
    pub degenerate: bool,
}
