//! Procedural latent-factor image datasets.
//!
//! Two schemas are provided. `sprites` mirrors the dSprites factor structure
//! (shape, scale, rotation, x, y on a 64x64 binary canvas) and `rooms` is a
//! flat 2D scene with the six 3dshapes factors. Every image is a pure
//! function of its concept-label row, and label rows are sampled uniformly
//! with replacement from a stream keyed by `(seed, sample index)`.

mod io;
mod render;
mod split;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::keyed_rng;

pub use io::{load_dataset, save_dataset, Manifest};
pub(crate) use io::sha256_hex;
pub use render::{hue_to_rgb, render_room, render_sprite, ROOM_BACKGROUND, ROOM_OBJECT};
pub use split::{split, SplitIndices, SplitRatios};

/// Side length of every generated image.
pub const IMAGE_SIZE: usize = 64;

/// Which generator produced a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemaKind {
    Sprites,
    Rooms,
}

impl SchemaKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemaKind::Sprites => "sprites",
            SchemaKind::Rooms => "rooms",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "sprites" => Ok(SchemaKind::Sprites),
            "rooms" => Ok(SchemaKind::Rooms),
            other => Err(Error::UnknownSchema(other.to_string())),
        }
    }

    pub fn channels(self) -> usize {
        match self {
            SchemaKind::Sprites => 1,
            SchemaKind::Rooms => 3,
        }
    }

    pub fn task_rule(self) -> TaskRule {
        match self {
            SchemaKind::Sprites => TaskRule::Shape,
            SchemaKind::Rooms => TaskRule::ScaleShape,
        }
    }

    pub fn schema(self) -> ConceptSchema {
        match self {
            SchemaKind::Sprites => ConceptSchema::sprites(),
            SchemaKind::Rooms => ConceptSchema::rooms(),
        }
    }
}

/// How the task label is derived from a concept-label row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskRule {
    /// Task label is the shape concept label (3 classes).
    #[serde(rename = "shape")]
    Shape,
    /// Task label is `scale * 4 + shape` (32 classes).
    #[serde(rename = "scale_x4_plus_shape")]
    ScaleShape,
}

impl TaskRule {
    pub fn num_classes(self) -> usize {
        match self {
            TaskRule::Shape => 3,
            TaskRule::ScaleShape => 32,
        }
    }
}

/// One human-interpretable latent factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Concept {
    pub name: String,
    pub cardinality: usize,
    pub values: Vec<f64>,
}

impl Concept {
    fn new(name: &str, values: Vec<f64>) -> Self {
        Concept {
            name: name.to_string(),
            cardinality: values.len(),
            values,
        }
    }
}

/// Ordered list of concepts for a schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptSchema {
    pub kind: SchemaKind,
    pub concepts: Vec<Concept>,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

fn codes(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64).collect()
}

impl ConceptSchema {
    /// shape(3) scale(6) rotation(40) x(32) y(32). The constant color factor is not a concept.
    pub fn sprites() -> Self {
        ConceptSchema {
            kind: SchemaKind::Sprites,
            concepts: vec![
                Concept::new("shape", codes(3)),
                Concept::new("scale", linspace(0.5, 1.0, 6)),
                Concept::new("rotation", linspace(0.0, 2.0 * std::f64::consts::PI, 40)),
                Concept::new("x", linspace(0.0, 1.0, 32)),
                Concept::new("y", linspace(0.0, 1.0, 32)),
            ],
        }
    }

    /// floor_hue(10) wall_hue(10) object_hue(10) scale(8) shape(4) orientation(15).
    pub fn rooms() -> Self {
        // Hues stop short of 1.0 so that the first and last grid values are
        // different colors.
        let hues: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
        ConceptSchema {
            kind: SchemaKind::Rooms,
            concepts: vec![
                Concept::new("floor_hue", hues.clone()),
                Concept::new("wall_hue", hues.clone()),
                Concept::new("object_hue", hues),
                Concept::new("scale", linspace(0.0, 1.0, 8)),
                Concept::new("shape", codes(4)),
                Concept::new("orientation", linspace(-30.0, 30.0, 15)),
            ],
        }
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.concepts.iter().map(|c| c.cardinality).collect()
    }

    pub fn names(&self) -> Vec<&str> {
        self.concepts.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.concepts
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::Absent(format!("concept `{name}`")))
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for c in &self.concepts {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::InvalidArgument(format!("duplicate concept `{}`", c.name)));
            }
            if c.cardinality == 0 || c.cardinality != c.values.len() {
                return Err(Error::InvalidArgument(format!(
                    "concept `{}` has cardinality {} but {} values",
                    c.name,
                    c.cardinality,
                    c.values.len()
                )));
            }
        }
        Ok(())
    }
}

/// Images plus concept and task annotations.
///
/// Images are stored row-major as `n x H x W x C` bytes; concept labels as an
/// `n x k` row-major matrix of grid indices.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentFactorDataset {
    pub schema: ConceptSchema,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub images: Vec<u8>,
    pub concept_labels: Vec<u32>,
    pub task_labels: Vec<u32>,
    pub seed: u64,
}

impl LatentFactorDataset {
    /// Assemble a dataset from concept rows by rendering every row.
    pub fn from_labels(kind: SchemaKind, concept_labels: Vec<u32>, seed: u64) -> Result<Self> {
        let schema = kind.schema();
        let k = schema.len();
        if concept_labels.len() % k != 0 {
            return Err(Error::ShapeMismatch(format!(
                "{} labels is not a multiple of {k} concepts",
                concept_labels.len()
            )));
        }
        let n = concept_labels.len() / k;
        let cards = schema.cardinalities();
        for row in concept_labels.chunks(k) {
            for (c, (&v, &card)) in row.iter().zip(&cards).enumerate() {
                if v as usize >= card {
                    return Err(Error::InvalidArgument(format!(
                        "label {v} out of range for concept `{}`",
                        schema.concepts[c].name
                    )));
                }
            }
        }
        let channels = kind.channels();
        let stride = IMAGE_SIZE * IMAGE_SIZE * channels;
        let mut images = vec![0u8; n * stride];
        images
            .par_chunks_mut(stride)
            .zip(concept_labels.par_chunks(k))
            .for_each(|(img, row)| render_row(kind, row, img));
        let rule = kind.task_rule();
        let task_labels = concept_labels.chunks(k).map(|r| task_label(rule, r)).collect();
        Ok(LatentFactorDataset {
            schema,
            height: IMAGE_SIZE,
            width: IMAGE_SIZE,
            channels,
            images,
            concept_labels,
            task_labels,
            seed,
        })
    }

    pub fn kind(&self) -> SchemaKind {
        self.schema.kind
    }

    pub fn len(&self) -> usize {
        self.task_labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.task_labels.is_empty()
    }

    pub fn image_len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let s = self.image_len();
        &self.images[i * s..(i + 1) * s]
    }

    pub fn num_concepts(&self) -> usize {
        self.schema.len()
    }

    pub fn concept_row(&self, i: usize) -> &[u32] {
        let k = self.num_concepts();
        &self.concept_labels[i * k..(i + 1) * k]
    }

    pub fn concept_label(&self, i: usize, concept: usize) -> u32 {
        self.concept_labels[i * self.num_concepts() + concept]
    }

    pub fn task_rule(&self) -> TaskRule {
        self.kind().task_rule()
    }

    pub fn num_task_classes(&self) -> usize {
        self.task_rule().num_classes()
    }

    /// Copy out the listed samples, in the given order.
    pub fn subset(&self, indices: &[usize]) -> LatentFactorDataset {
        let s = self.image_len();
        let k = self.num_concepts();
        let mut images = Vec::with_capacity(indices.len() * s);
        let mut concept_labels = Vec::with_capacity(indices.len() * k);
        let mut task_labels = Vec::with_capacity(indices.len());
        for &i in indices {
            images.extend_from_slice(self.image(i));
            concept_labels.extend_from_slice(self.concept_row(i));
            task_labels.push(self.task_labels[i]);
        }
        LatentFactorDataset {
            schema: self.schema.clone(),
            height: self.height,
            width: self.width,
            channels: self.channels,
            images,
            concept_labels,
            task_labels,
            seed: self.seed,
        }
    }

    /// Check every structural invariant.
    pub fn validate(&self) -> Result<()> {
        self.schema.validate()?;
        let n = self.len();
        if self.images.len() != n * self.image_len() {
            return Err(Error::ShapeMismatch("image buffer length".into()));
        }
        if self.concept_labels.len() != n * self.num_concepts() {
            return Err(Error::ShapeMismatch("concept label buffer length".into()));
        }
        let cards = self.schema.cardinalities();
        let rule = self.task_rule();
        for i in 0..n {
            let row = self.concept_row(i);
            if row.iter().zip(&cards).any(|(&v, &c)| v as usize >= c) {
                return Err(Error::InvalidArgument(format!("sample {i}: concept label out of range")));
            }
            if self.task_labels[i] != task_label(rule, row) {
                return Err(Error::InvalidArgument(format!(
                    "sample {i}: task label disagrees with its concepts"
                )));
            }
        }
        Ok(())
    }
}

/// Task label implied by a concept row.
pub fn task_label(rule: TaskRule, row: &[u32]) -> u32 {
    match rule {
        TaskRule::Shape => row[0],
        // rooms concept order: floor, wall, object, scale, shape, orientation
        TaskRule::ScaleShape => row[3] * 4 + row[4],
    }
}

/// Render one concept row into `out`.
pub fn render_row(kind: SchemaKind, row: &[u32], out: &mut [u8]) {
    match kind {
        SchemaKind::Sprites => render_sprite(row, out),
        SchemaKind::Rooms => render_room(row, out),
    }
}

fn sample_labels(kind: SchemaKind, count: usize, seed: u64) -> Vec<u32> {
    let cards = kind.schema().cardinalities();
    let k = cards.len();
    let mut labels = vec![0u32; count * k];
    labels.par_chunks_mut(k).enumerate().for_each(|(i, row)| {
        let mut rng = keyed_rng(seed, &[i as u64]);
        for (slot, &card) in row.iter_mut().zip(&cards) {
            *slot = rng.gen_range(0..card as u32);
        }
    });
    labels
}

fn generate(kind: SchemaKind, count: usize, seed: u64) -> Result<LatentFactorDataset> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    LatentFactorDataset::from_labels(kind, sample_labels(kind, count, seed), seed)
}

/// `count` dSprites-style binary images with latents sampled uniformly with replacement.
pub fn generate_sprites(count: usize, seed: u64) -> Result<LatentFactorDataset> {
    generate(SchemaKind::Sprites, count, seed)
}

/// `count` flat-scene RGB images with the six 3dshapes factors.
pub fn generate_rooms(count: usize, seed: u64) -> Result<LatentFactorDataset> {
    generate(SchemaKind::Rooms, count, seed)
}

pub fn generate_dataset(kind: SchemaKind, count: usize, seed: u64) -> Result<LatentFactorDataset> {
    generate(kind, count, seed)
}
