//! Synthetic dataset shifts applied to a fraction δ of a test set.
//!
//! Which samples are affected is the prefix of a seeded permutation, so the
//! affected set at δ = 0.1 is contained in the set at δ = 0.5, which is
//! contained in the set at δ = 1.0.

mod affine;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use affine::{transform_image, Affine};

use crate::datagen::LatentFactorDataset;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, keyed_rng};

/// Permitted shift proportions.
pub const DELTAS: [f64; 3] = [0.1, 0.5, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Intensity {
    Small,
    #[default]
    Medium,
    Large,
}

impl Intensity {
    pub const ALL: [Intensity; 3] = [Intensity::Small, Intensity::Medium, Intensity::Large];

    pub fn name(self) -> &'static str {
        match self {
            Intensity::Small => "small",
            Intensity::Medium => "medium",
            Intensity::Large => "large",
        }
    }

    fn pick(self, small: f64, medium: f64, large: f64) -> f64 {
        match self {
            Intensity::Small => small,
            Intensity::Medium => medium,
            Intensity::Large => large,
        }
    }

    /// Gaussian noise standard deviation in 0-255 pixel units.
    pub fn gaussian_sigma(self) -> f64 {
        self.pick(1.0, 10.0, 100.0)
    }

    /// Magnitude bound for an image operation: pixels for translation,
    /// degrees for rotation and shear, a fraction for zoom.
    pub fn image_magnitude(self, op: ImageOp) -> f64 {
        match op {
            ImageOp::Translate => self.pick(5.0, 10.0, 15.0),
            ImageOp::Rotate => self.pick(10.0, 40.0, 90.0),
            ImageOp::Zoom => self.pick(0.10, 0.20, 0.40),
            ImageOp::Shear => self.pick(10.0, 20.0, 40.0),
            ImageOp::Flip => 0.0,
        }
    }

    /// Number of concept values targeted when none are listed.
    pub fn concept_value_count(self, cardinality: usize) -> usize {
        match self {
            Intensity::Small => 1,
            Intensity::Medium => cardinality.div_ceil(4),
            Intensity::Large => cardinality.div_ceil(2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConceptMode {
    #[default]
    Remove,
    KeepOnly,
}

/// One concept imbalance: drop samples with (or without) the given values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptTarget {
    pub concept: String,
    /// Grid indices; when absent the lowest-index values are chosen by intensity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<u32>>,
    #[serde(default)]
    pub mode: ConceptMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageOp {
    Translate,
    Rotate,
    Zoom,
    Shear,
    Flip,
}

impl ImageOp {
    pub fn name(self) -> &'static str {
        match self {
            ImageOp::Translate => "translate",
            ImageOp::Rotate => "rotate",
            ImageOp::Zoom => "zoom",
            ImageOp::Shear => "shear",
            ImageOp::Flip => "flip",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShiftKind {
    None,
    Gaussian,
    Knockout {
        /// Task class to thin out; defaults to the majority class.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        class: Option<u32>,
    },
    Concept {
        targets: Vec<ConceptTarget>,
    },
    Image {
        ops: Vec<ImageOp>,
    },
    Combination {
        shifts: Vec<ShiftSpec>,
    },
}

fn default_delta() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftSpec {
    #[serde(flatten)]
    pub kind: ShiftKind,
    #[serde(default)]
    pub intensity: Intensity,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub seed: u64,
}

impl ShiftSpec {
    pub fn new(kind: ShiftKind, intensity: Intensity, delta: f64) -> Self {
        ShiftSpec { kind, intensity, delta, seed: 0 }
    }

    pub fn none() -> Self {
        ShiftSpec::new(ShiftKind::None, Intensity::Medium, 1.0)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn is_none(&self) -> bool {
        matches!(self.kind, ShiftKind::None)
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            ShiftKind::None => "none",
            ShiftKind::Gaussian => "gaussian",
            ShiftKind::Knockout { .. } => "knockout",
            ShiftKind::Concept { .. } => "concept",
            ShiftKind::Image { .. } => "image",
            ShiftKind::Combination { .. } => "combination",
        }
    }

    /// Compact label such as `concept:scale` or `image:translate+flip`.
    pub fn tag(&self) -> String {
        match &self.kind {
            ShiftKind::Knockout { class: Some(c) } => format!("knockout:{c}"),
            ShiftKind::Concept { targets } => {
                let parts: Vec<String> = targets
                    .iter()
                    .map(|t| match t.mode {
                        ConceptMode::Remove => t.concept.clone(),
                        ConceptMode::KeepOnly => format!("{}=keep", t.concept),
                    })
                    .collect();
                format!("concept:{}", parts.join("+"))
            }
            ShiftKind::Image { ops } => {
                let parts: Vec<&str> = ops.iter().map(|o| o.name()).collect();
                format!("image:{}", parts.join("+"))
            }
            ShiftKind::Combination { shifts } => {
                let parts: Vec<String> = shifts.iter().map(ShiftSpec::tag).collect();
                format!("combination[{}]", parts.join(";"))
            }
            _ => self.kind_name().to_string(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_at(1)
    }

    fn validate_at(&self, depth: usize) -> Result<()> {
        if !DELTAS.iter().any(|d| (d - self.delta).abs() < 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "delta {} must be one of 0.1, 0.5, 1.0",
                self.delta
            )));
        }
        match &self.kind {
            ShiftKind::Concept { targets } if targets.is_empty() => {
                Err(Error::InvalidArgument("concept shift needs at least one target".into()))
            }
            ShiftKind::Image { ops } if ops.is_empty() => {
                Err(Error::InvalidArgument("image shift needs at least one operation".into()))
            }
            ShiftKind::Combination { shifts } => {
                if shifts.is_empty() {
                    return Err(Error::InvalidArgument("combination shift is empty".into()));
                }
                if depth >= 2 {
                    return Err(Error::InvalidArgument("combinations may not be nested".into()));
                }
                shifts.iter().try_for_each(|s| s.validate_at(depth + 1))
            }
            _ => Ok(()),
        }
    }
}

/// Result of a shift together with where each output sample came from.
#[derive(Debug, Clone)]
pub struct ShiftOutcome {
    pub dataset: LatentFactorDataset,
    /// Input index of every output sample.
    pub source_index: Vec<usize>,
    /// Output positions whose pixels were modified.
    pub perturbed: Vec<usize>,
}

pub fn apply_shift(ds: &LatentFactorDataset, spec: &ShiftSpec) -> Result<LatentFactorDataset> {
    Ok(apply_shift_traced(ds, spec)?.dataset)
}

pub fn apply_shift_traced(ds: &LatentFactorDataset, spec: &ShiftSpec) -> Result<ShiftOutcome> {
    if ds.is_empty() {
        return Err(Error::InvalidArgument("cannot shift an empty dataset".into()));
    }
    spec.validate()?;
    let mut out = ShiftOutcome {
        dataset: ds.clone(),
        source_index: (0..ds.len()).collect(),
        perturbed: Vec::new(),
    };
    apply_into(&mut out, spec)?;
    out.perturbed.sort_unstable();
    out.perturbed.dedup();
    Ok(out)
}

fn apply_into(out: &mut ShiftOutcome, spec: &ShiftSpec) -> Result<()> {
    match &spec.kind {
        ShiftKind::None => Ok(()),
        ShiftKind::Gaussian => {
            let chosen = affected(out.dataset.len(), spec.delta, spec.seed, 0x6a55);
            gaussian(&mut out.dataset, &chosen, spec.intensity.gaussian_sigma(), spec.seed);
            out.perturbed.extend(chosen);
            Ok(())
        }
        ShiftKind::Image { ops } => {
            let chosen = affected(out.dataset.len(), spec.delta, spec.seed, 0x1a6e);
            image(&mut out.dataset, &chosen, ops, spec.intensity, spec.seed);
            out.perturbed.extend(chosen);
            Ok(())
        }
        ShiftKind::Knockout { class } => {
            let ds = &out.dataset;
            let class = match class {
                Some(c) => *c,
                None => majority_class(&ds.task_labels, ds.num_task_classes()),
            };
            let members: Vec<usize> = (0..ds.len()).filter(|&i| ds.task_labels[i] == class).collect();
            if members.is_empty() {
                return Err(Error::Absent(format!("task class {class}")));
            }
            remove(out, &members, spec.delta, spec.seed, 0xc0ff);
            Ok(())
        }
        ShiftKind::Concept { targets } => {
            for (t_idx, target) in targets.iter().enumerate() {
                let ds = &out.dataset;
                let c = ds.schema.index_of(&target.concept)?;
                let card = ds.schema.concepts[c].cardinality;
                let values: Vec<u32> = match &target.values {
                    Some(v) => v.clone(),
                    None => (0..spec.intensity.concept_value_count(card) as u32).collect(),
                };
                if values.is_empty() {
                    return Err(Error::InvalidArgument(format!("no values given for `{}`", target.concept)));
                }
                if let Some(bad) = values.iter().find(|&&v| v as usize >= card) {
                    return Err(Error::InvalidArgument(format!(
                        "value {bad} out of range for concept `{}`",
                        target.concept
                    )));
                }
                let has = |i: usize| values.contains(&ds.concept_label(i, c));
                if !(0..ds.len()).any(has) {
                    return Err(Error::Absent(format!("concept `{}` with values {values:?}", target.concept)));
                }
                let members: Vec<usize> = match target.mode {
                    ConceptMode::Remove => (0..ds.len()).filter(|&i| has(i)).collect(),
                    ConceptMode::KeepOnly => (0..ds.len()).filter(|&i| !has(i)).collect(),
                };
                remove(out, &members, spec.delta, derive_seed(spec.seed, &[t_idx as u64]), 0xc0c);
            }
            Ok(())
        }
        ShiftKind::Combination { shifts } => {
            for (i, child) in shifts.iter().enumerate() {
                let child = ShiftSpec {
                    seed: derive_seed(spec.seed, &[i as u64, child.seed]),
                    ..child.clone()
                };
                apply_into(out, &child)?;
            }
            Ok(())
        }
    }
}

/// Most frequent label; ties go to the lowest label.
pub fn majority_class(labels: &[u32], num_classes: usize) -> u32 {
    let mut counts = vec![0usize; num_classes.max(1)];
    for &l in labels {
        if (l as usize) < counts.len() {
            counts[l as usize] += 1;
        }
    }
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best as u32
}

/// The first `round(delta * n)` entries of a seeded permutation of `0..n`.
pub fn affected(n: usize, delta: f64, seed: u64, salt: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut keyed_rng(seed, &[salt]));
    order.truncate(affected_count(n, delta));
    order
}

fn affected_count(n: usize, delta: f64) -> usize {
    ((delta * n as f64).round() as usize).min(n)
}

/// Drop a δ-fraction of `members`, keeping survivors in their original order.
fn remove(out: &mut ShiftOutcome, members: &[usize], delta: f64, seed: u64, salt: u64) {
    let picked = affected(members.len(), delta, seed, salt);
    let mut drop = vec![false; out.dataset.len()];
    for p in picked {
        drop[members[p]] = true;
    }
    let keep: Vec<usize> = (0..out.dataset.len()).filter(|&i| !drop[i]).collect();
    // remap perturbed positions to the surviving order
    let mut new_pos = vec![usize::MAX; drop.len()];
    for (j, &i) in keep.iter().enumerate() {
        new_pos[i] = j;
    }
    out.perturbed = out
        .perturbed
        .iter()
        .filter_map(|&p| (new_pos[p] != usize::MAX).then_some(new_pos[p]))
        .collect();
    out.source_index = keep.iter().map(|&i| out.source_index[i]).collect();
    out.dataset = out.dataset.subset(&keep);
}

fn gaussian(ds: &mut LatentFactorDataset, chosen: &[usize], sigma: f64, seed: u64) {
    let stride = ds.image_len();
    let mut mark = vec![false; ds.len()];
    for &i in chosen {
        mark[i] = true;
    }
    let normal = Normal::new(0.0, sigma).expect("positive sigma");
    ds.images.par_chunks_mut(stride).enumerate().for_each(|(i, img)| {
        if !mark[i] {
            return;
        }
        let mut rng = keyed_rng(seed, &[0x6a55, i as u64]);
        for p in img.iter_mut() {
            let v = *p as f64 + normal.sample(&mut rng);
            *p = v.round().clamp(0.0, 255.0) as u8;
        }
    });
}

fn image(ds: &mut LatentFactorDataset, chosen: &[usize], ops: &[ImageOp], intensity: Intensity, seed: u64) {
    let (h, w, c) = (ds.height, ds.width, ds.channels);
    let stride = ds.image_len();
    let mut mark = vec![false; ds.len()];
    for &i in chosen {
        mark[i] = true;
    }
    ds.images.par_chunks_mut(stride).enumerate().for_each(|(i, img)| {
        if !mark[i] {
            return;
        }
        let mut rng = keyed_rng(seed, &[0x1a6e, i as u64]);
        let mut m = Affine::identity();
        for &op in ops {
            let mag = intensity.image_magnitude(op);
            let mut draw = || {
                if mag > 0.0 {
                    Uniform::new_inclusive(-mag, mag).sample(&mut rng)
                } else {
                    0.0
                }
            };
            let step = match op {
                ImageOp::Translate => {
                    let (tx, ty) = (draw(), draw());
                    Affine::translation(tx, ty)
                }
                ImageOp::Rotate => Affine::rotation(draw().to_radians()),
                ImageOp::Zoom => Affine::scaling(1.0 + draw()),
                ImageOp::Shear => Affine::shear(draw().to_radians()),
                ImageOp::Flip => Affine::flip(),
            };
            m = step.then_after(&m);
        }
        let src = img.to_vec();
        transform_image(&src, img, h, w, c, &m);
    });
}
