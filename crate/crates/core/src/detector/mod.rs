//! Shift decisions and concept-level explanations.
//!
//! Decision rules by representation shape:
//!
//! | representation                  | test                                   |
//! |---------------------------------|----------------------------------------|
//! | continuous, no concept groups   | per-column KS + Bonferroni, or MMD     |
//! | one categorical column          | chi-squared                            |
//! | concept softmax blocks (CBSDs)  | KS per column, Bonferroni within block, then across concepts; or MMD |
//! | per-concept labels (CBSDh)      | chi-squared per concept + Bonferroni   |
//!
//! For concept representations the per-concept statistics are normalized
//! into the Concept Shift Score, `css_i = t_i / Σ t`.

mod css;

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

pub use css::{concept_shift_score, ConceptShiftScore};

use crate::error::{Error, Result};
use crate::models::{ColumnKind, ConceptGroup, Method, Representation};
use crate::shifts::ShiftSpec;
use crate::stattests::{bonferroni, chi2_test, ks_test, mmd_test, MmdOptions, TestKind, TestResult};

pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct DetectOptions {
    /// Test for continuous representations: `Ks` or `Mmd`.
    pub test: TestKind,
    pub alpha: f64,
    /// Divide chi-squared statistics by their degrees of freedom before CSS.
    pub df_normalize: bool,
    pub mmd: MmdOptions,
}

impl Default for DetectOptions {
    fn default() -> Self {
        DetectOptions {
            test: TestKind::Ks,
            alpha: DEFAULT_ALPHA,
            df_normalize: true,
            mmd: MmdOptions::default(),
        }
    }
}

impl DetectOptions {
    pub fn with_test(mut self, test: TestKind) -> Self {
        self.test = test;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.mmd.seed = seed;
        self
    }
}

/// One concept's row in an explanation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptScore {
    pub concept: String,
    pub p_value: f64,
    /// The statistic entering CSS (chi-squared / df when normalized).
    pub statistic: f64,
    pub raw_statistic: f64,
    pub css: f64,
    pub rejected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub test: TestKind,
    /// Sorted by CSS, descending; ties keep schema order.
    pub concepts: Vec<ConceptScore>,
    /// Bonferroni across concepts on concept p-values.
    pub combined_p: f64,
    pub shift_detected: bool,
    /// All statistics were zero; CSS fell back to uniform.
    pub css_degenerate: bool,
    pub df_normalized: bool,
}

impl Explanation {
    pub fn top(&self) -> Option<&ConceptScore> {
        self.concepts.first()
    }

    /// CSS values in the given concept order.
    pub fn css_by_name(&self, names: &[&str]) -> Vec<f64> {
        names
            .iter()
            .map(|n| self.concepts.iter().find(|c| c.concept == *n).map_or(0.0, |c| c.css))
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reducer_checksum: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<ShiftSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSizes {
    pub source: usize,
    pub target: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub method: Method,
    pub test: TestKind,
    pub alpha: f64,
    pub shift_detected: bool,
    /// Overall p-value after any multiple-testing correction.
    pub p_value: f64,
    pub per_dimension: Vec<TestResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_concept: Option<Vec<ConceptScore>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub css_degenerate: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub df_normalized: Option<bool>,
    pub sample_sizes: SampleSizes,
    #[serde(default)]
    pub provenance: Provenance,
}

fn check_pair(source: &Representation, target: &Representation, alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside (0, 1)")));
    }
    if source.method != target.method {
        return Err(Error::ShapeMismatch(format!(
            "source reduced with {}, target with {}",
            source.method, target.method
        )));
    }
    if source.ncols() != target.ncols() || source.column_kinds != target.column_kinds || source.groups != target.groups {
        return Err(Error::ShapeMismatch(format!(
            "source has {} columns, target {}",
            source.ncols(),
            target.ncols()
        )));
    }
    if source.nrows() == 0 || target.nrows() == 0 {
        return Err(Error::InvalidArgument("source and target must be nonempty".into()));
    }
    if source.ncols() == 0 {
        return Err(Error::ShapeMismatch("representation has no columns".into()));
    }
    Ok(())
}

fn column_labels(col: ArrayView1<f64>) -> Vec<usize> {
    col.iter().map(|&v| v as usize).collect()
}

fn column_values(col: ArrayView1<f64>) -> Vec<f64> {
    col.to_vec()
}

fn ks_columns(source: &Representation, target: &Representation) -> Result<Vec<TestResult>> {
    (0..source.ncols())
        .map(|j| {
            ks_test(
                &column_values(source.matrix.column(j)),
                &column_values(target.matrix.column(j)),
            )
        })
        .collect()
}

fn chi2_column(source: &Representation, target: &Representation, j: usize, card: usize) -> Result<TestResult> {
    chi2_test(
        &column_labels(source.matrix.column(j)),
        &column_labels(target.matrix.column(j)),
        card,
    )
}

enum Shape {
    Continuous,
    Categorical(Vec<usize>),
}

fn shape_of(rep: &Representation) -> Result<Shape> {
    let cats: Vec<Option<usize>> = rep
        .column_kinds
        .iter()
        .map(|k| match k {
            ColumnKind::Categorical(c) => Some(*c),
            ColumnKind::Continuous => None,
        })
        .collect();
    if cats.iter().all(Option::is_none) {
        Ok(Shape::Continuous)
    } else if cats.iter().all(Option::is_some) {
        Ok(Shape::Categorical(cats.into_iter().flatten().collect()))
    } else {
        Err(Error::ShapeMismatch("representation mixes continuous and categorical columns".into()))
    }
}

/// Test whether source and target representations come from one distribution.
pub fn detect(source: &Representation, target: &Representation, opts: &DetectOptions) -> Result<DetectionReport> {
    check_pair(source, target, opts.alpha)?;
    let sizes = SampleSizes { source: source.nrows(), target: target.nrows() };
    let shape = shape_of(source)?;
    let concept = source.groups.is_some();

    // concept representations: the explanation carries the per-concept decision
    let (explanation, concept_dims) = if concept {
        let (ex, dims) = explain_with_dimensions(source, target, opts)?;
        (Some(ex), Some(dims))
    } else {
        (None, None)
    };

    let (test, per_dimension, p_value, detected) = match (&shape, opts.test) {
        (Shape::Categorical(cards), _) => {
            match (&explanation, concept_dims) {
                (Some(ex), Some(per)) => (TestKind::Chi2, per, ex.combined_p, ex.shift_detected),
                _ => {
                    let per = (0..cards.len())
                        .map(|j| chi2_column(source, target, j, cards[j]))
                        .collect::<Result<Vec<_>>>()?;
                    let m = bonferroni(per, opts.alpha)?;
                    (TestKind::Chi2, m.per_dimension, m.combined_p, m.reject)
                }
            }
        }
        (Shape::Continuous, TestKind::Mmd) => {
            let r = mmd_test(source.matrix.view(), target.matrix.view(), opts.mmd)?;
            let (p, detected) = (r.p_value, r.p_value < opts.alpha);
            (TestKind::Mmd, vec![r], p, detected)
        }
        (Shape::Continuous, TestKind::Ks) => {
            if let (Some(ex), Some(per)) = (&explanation, concept_dims) {
                (TestKind::Ks, per, ex.combined_p, ex.shift_detected)
            } else {
                let m = bonferroni(ks_columns(source, target)?, opts.alpha)?;
                (TestKind::Ks, m.per_dimension, m.combined_p, m.reject)
            }
        }
        (Shape::Continuous, TestKind::Chi2) => {
            return Err(Error::InvalidArgument(
                "chi-squared needs a categorical representation; use ks or mmd".into(),
            ))
        }
    };

    Ok(DetectionReport {
        method: source.method,
        test,
        alpha: opts.alpha,
        shift_detected: detected,
        p_value,
        per_dimension,
        css_degenerate: explanation.as_ref().map(|e| e.css_degenerate),
        df_normalized: explanation.as_ref().map(|e| e.df_normalized),
        per_concept: explanation.map(|e| e.concepts),
        sample_sizes: sizes,
        provenance: Provenance::default(),
    })
}

fn concept_result(
    source: &Representation,
    target: &Representation,
    group: &ConceptGroup,
    opts: &DetectOptions,
) -> Result<(f64, f64, f64, Vec<TestResult>)> {
    match source.column_kinds[group.start] {
        ColumnKind::Categorical(card) => {
            if group.end != group.start + 1 {
                return Err(Error::ShapeMismatch(format!("categorical concept `{}` spans several columns", group.name)));
            }
            let r = chi2_column(source, target, group.start, card)?;
            let df = r.df.unwrap_or(0);
            let t = if !opts.df_normalize {
                r.statistic
            } else if df == 0 {
                0.0
            } else {
                r.statistic / df as f64
            };
            Ok((r.p_value, t, r.statistic, vec![r]))
        }
        ColumnKind::Continuous => {
            let per = (group.start..group.end)
                .map(|j| {
                    ks_test(
                        &column_values(source.matrix.column(j)),
                        &column_values(target.matrix.column(j)),
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let m = bonferroni(per, opts.alpha)?;
            Ok((m.combined_p, m.max_statistic, m.max_statistic, m.per_dimension))
        }
    }
}

/// Per-concept statistics, p-values and CSS ranking.
pub fn explain(source: &Representation, target: &Representation, opts: &DetectOptions) -> Result<Explanation> {
    Ok(explain_with_dimensions(source, target, opts)?.0)
}

fn explain_with_dimensions(
    source: &Representation,
    target: &Representation,
    opts: &DetectOptions,
) -> Result<(Explanation, Vec<TestResult>)> {
    check_pair(source, target, opts.alpha)?;
    let groups = source
        .groups
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument(format!("{} representation has no concept groups", source.method)))?;
    if groups.is_empty() {
        return Err(Error::InvalidArgument("no concept groups".into()));
    }
    shape_of(source)?;
    let rows = groups
        .iter()
        .map(|g| concept_result(source, target, g, opts))
        .collect::<Result<Vec<_>>>()?;
    let k = rows.len() as f64;
    let stats: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let css = concept_shift_score(&stats)?;
    let min_p = rows.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let threshold = opts.alpha / k;
    let mut concepts: Vec<ConceptScore> = groups
        .iter()
        .zip(&rows)
        .zip(&css.scores)
        .map(|((g, &(p, t, raw, _)), &c)| ConceptScore {
            concept: g.name.clone(),
            p_value: p,
            statistic: t,
            raw_statistic: raw,
            css: c,
            rejected: p < threshold,
        })
        .collect();
    concepts.sort_by(|a, b| b.css.total_cmp(&a.css));
    let test = match source.column_kinds[0] {
        ColumnKind::Categorical(_) => TestKind::Chi2,
        ColumnKind::Continuous => TestKind::Ks,
    };
    let explanation = Explanation {
        test,
        concepts,
        combined_p: (k * min_p).min(1.0),
        shift_detected: min_p < threshold,
        css_degenerate: css.degenerate,
        df_normalized: opts.df_normalize && test == TestKind::Chi2,
    };
    Ok((explanation, rows.into_iter().flat_map(|r| r.3).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    fn rep(method: Method, m: Array2<f64>, kinds: Vec<ColumnKind>, groups: Option<Vec<ConceptGroup>>) -> Representation {
        Representation { method, matrix: m, column_kinds: kinds, groups }
    }

    fn group(name: &str, start: usize, end: usize) -> ConceptGroup {
        ConceptGroup { name: name.into(), start, end }
    }

    #[test]
    fn identical_single_column_gives_p_one() {
        let m = Array2::from_shape_fn((40, 1), |(i, _)| i as f64);
        let r = rep(Method::Pca, m, vec![ColumnKind::Continuous], None);
        let out = detect(&r, &r, &DetectOptions::default()).unwrap();
        assert_eq!(out.p_value, 1.0);
        assert!(!out.shift_detected);
        assert!(out.per_concept.is_none());
    }

    #[test]
    fn hard_task_uses_chi2() {
        let s = Array2::from_shape_fn((100, 1), |(i, _)| (i % 3) as f64);
        let t = Array2::from_shape_fn((100, 1), |_| 0.0);
        let a = rep(Method::BbsdHard, s, vec![ColumnKind::Categorical(3)], None);
        let b = rep(Method::BbsdHard, t, vec![ColumnKind::Categorical(3)], None);
        let out = detect(&a, &b, &DetectOptions::default().with_test(TestKind::Mmd)).unwrap();
        assert_eq!(out.test, TestKind::Chi2);
        assert!(out.shift_detected);
    }

    #[test]
    fn concept_hard_ranks_the_moved_concept() {
        let n = 300;
        let kinds = vec![ColumnKind::Categorical(4), ColumnKind::Categorical(4)];
        let groups = Some(vec![group("a", 0, 1), group("b", 1, 2)]);
        let s = Array2::from_shape_fn((n, 2), |(i, j)| ((i * (j + 1)) % 4) as f64);
        let mut t = s.clone();
        for i in 0..n {
            if t[[i, 1]] == 0.0 {
                t[[i, 1]] = 1.0;
            }
        }
        let a = rep(Method::CbsdHard, s, kinds.clone(), groups.clone());
        let b = rep(Method::CbsdHard, t, kinds, groups);
        let out = detect(&a, &b, &DetectOptions::default()).unwrap();
        assert!(out.shift_detected);
        let per = out.per_concept.unwrap();
        assert_eq!(per[0].concept, "b");
        assert_eq!(per[1].css, 0.0);
        assert!((per.iter().map(|c| c.css).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_concepts_are_degenerate() {
        let kinds = vec![ColumnKind::Categorical(2), ColumnKind::Categorical(3)];
        let groups = Some(vec![group("a", 0, 1), group("b", 1, 2)]);
        let s = Array2::from_shape_fn((30, 2), |(i, j)| (i % (j + 2)) as f64);
        let a = rep(Method::CbsdHard, s, kinds, groups);
        let ex = explain(&a, &a, &DetectOptions::default()).unwrap();
        assert!(ex.css_degenerate);
        assert!(!ex.shift_detected);
        assert!(ex.concepts.iter().all(|c| (c.css - 0.5).abs() < 1e-12 && !c.rejected));
    }

    #[test]
    fn soft_concepts_use_block_max() {
        let groups = Some(vec![group("a", 0, 2), group("b", 2, 3)]);
        let s = Array2::from_shape_fn((50, 3), |(i, j)| (i as f64 + j as f64 * 0.1) / 50.0);
        let mut t = s.clone();
        t.column_mut(1).mapv_inplace(|v| v + 0.5);
        let a = rep(Method::CbsdSoft, s, vec![ColumnKind::Continuous; 3], groups.clone());
        let b = rep(Method::CbsdSoft, t, vec![ColumnKind::Continuous; 3], groups);
        let ex = explain(&a, &b, &DetectOptions::default()).unwrap();
        assert_eq!(ex.concepts[0].concept, "a");
        assert!((ex.concepts[0].statistic - 0.52).abs() < 1e-12);
        let d = detect(&a, &b, &DetectOptions::default()).unwrap();
        assert_eq!(d.per_dimension.len(), 3);
        assert_eq!(d.shift_detected, ex.shift_detected);
    }

    #[test]
    fn mismatches_are_rejected() {
        let a = rep(Method::Pca, array![[1.0, 2.0]], vec![ColumnKind::Continuous; 2], None);
        let b = rep(Method::Pca, array![[1.0]], vec![ColumnKind::Continuous], None);
        assert!(detect(&a, &b, &DetectOptions::default()).is_err());
        let c = rep(Method::Srp, array![[1.0, 2.0]], vec![ColumnKind::Continuous; 2], None);
        assert!(detect(&a, &c, &DetectOptions::default()).is_err());
        let mixed = rep(Method::Pca, array![[1.0, 0.0]], vec![ColumnKind::Continuous, ColumnKind::Categorical(2)], None);
        assert!(detect(&mixed, &mixed, &DetectOptions::default()).is_err());
        assert!(explain(&a, &a, &DetectOptions::default()).is_err());
        assert!(detect(&a, &a, &DetectOptions::default().with_test(TestKind::Chi2)).is_err());
    }
}
