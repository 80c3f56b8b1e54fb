//! Dataset directory format.
//!
//! ```text
//! DIR/manifest.json   schema, shape, concepts, task rule, seed, SHA-256 of each blob
//! DIR/images.bin      n*H*W*C unsigned bytes, row-major
//! DIR/labels.bin      n*(k+1) little-endian i32: k concept columns then the task column
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{task_label, Concept, ConceptSchema, LatentFactorDataset, SchemaKind, TaskRule};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobChecksums {
    pub images: String,
    pub labels: String,
}

/// Contents of `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub schema: String,
    pub n: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub concepts: Vec<Concept>,
    pub task_rule: TaskRule,
    pub seed: u64,
    pub checksums: BlobChecksums,
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn label_bytes(ds: &LatentFactorDataset) -> Vec<u8> {
    let k = ds.num_concepts();
    let mut out = Vec::with_capacity(ds.len() * (k + 1) * 4);
    for i in 0..ds.len() {
        for &v in ds.concept_row(i) {
            out.extend_from_slice(&(v as i32).to_le_bytes());
        }
        out.extend_from_slice(&(ds.task_labels[i] as i32).to_le_bytes());
    }
    out
}

/// Write `ds` into directory `dir`, creating it if needed.
pub fn save_dataset(ds: &LatentFactorDataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let labels = label_bytes(ds);
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        schema: ds.kind().name().to_string(),
        n: ds.len(),
        height: ds.height,
        width: ds.width,
        channels: ds.channels,
        concepts: ds.schema.concepts.clone(),
        task_rule: ds.task_rule(),
        seed: ds.seed,
        checksums: BlobChecksums {
            images: sha256_hex(&ds.images),
            labels: sha256_hex(&labels),
        },
    };
    let write = |name: &str, bytes: &[u8]| {
        let p = dir.join(name);
        fs::write(&p, bytes).map_err(|e| Error::io(p, e))
    };
    write("images.bin", &ds.images)?;
    write("labels.bin", &labels)?;
    write("manifest.json", serde_json::to_string_pretty(&manifest)?.as_bytes())
}

/// Read and fully validate a dataset directory.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<LatentFactorDataset> {
    let dir = dir.as_ref();
    let mpath = dir.join("manifest.json");
    let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::malformed(&mpath, e.to_string()))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::malformed(
            &mpath,
            format!("unsupported format version {}", manifest.format_version),
        ));
    }
    let kind = SchemaKind::parse(&manifest.schema)?;
    let schema = kind.schema();
    if manifest.concepts != schema.concepts {
        return Err(Error::malformed(&mpath, format!("concepts differ from the `{}` schema", kind.name())));
    }
    if manifest.task_rule != kind.task_rule() {
        return Err(Error::malformed(&mpath, "task rule does not match schema"));
    }
    if manifest.channels != kind.channels() || manifest.height != super::IMAGE_SIZE || manifest.width != super::IMAGE_SIZE {
        return Err(Error::malformed(&mpath, "image shape does not match schema"));
    }
    let n = manifest.n;
    let k = schema.len();

    let ipath = dir.join("images.bin");
    let images = fs::read(&ipath).map_err(|e| Error::io(&ipath, e))?;
    let expected = n * manifest.height * manifest.width * manifest.channels;
    if images.len() != expected {
        return Err(Error::malformed(
            &ipath,
            format!("expected {expected} bytes, found {}", images.len()),
        ));
    }
    if sha256_hex(&images) != manifest.checksums.images {
        return Err(Error::Checksum(ipath));
    }

    let lpath = dir.join("labels.bin");
    let raw = fs::read(&lpath).map_err(|e| Error::io(&lpath, e))?;
    let expected = n * (k + 1) * 4;
    if raw.len() != expected {
        return Err(Error::malformed(&lpath, format!("expected {expected} bytes, found {}", raw.len())));
    }
    if sha256_hex(&raw) != manifest.checksums.labels {
        return Err(Error::Checksum(lpath));
    }
    let mut concept_labels = Vec::with_capacity(n * k);
    let mut task_labels = Vec::with_capacity(n);
    let cards = schema.cardinalities();
    for (i, row) in raw.chunks_exact((k + 1) * 4).enumerate() {
        let vals: Vec<i32> = row
            .chunks_exact(4)
            .map(|b| i32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        for (c, &v) in vals[..k].iter().enumerate() {
            if v < 0 || v as usize >= cards[c] {
                return Err(Error::malformed(&lpath, format!("sample {i}: label {v} out of range for `{}`", schema.concepts[c].name)));
            }
            concept_labels.push(v as u32);
        }
        let t = vals[k];
        if t < 0 || t as u32 != task_label(kind.task_rule(), &concept_labels[i * k..]) {
            return Err(Error::malformed(&lpath, format!("sample {i}: inconsistent task label {t}")));
        }
        task_labels.push(t as u32);
    }
    Ok(LatentFactorDataset {
        schema: ConceptSchema { kind, concepts: schema.concepts },
        height: manifest.height,
        width: manifest.width,
        channels: manifest.channels,
        images,
        concept_labels,
        task_labels,
        seed: manifest.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate_rooms, generate_sprites};

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let ds = generate_sprites(25, 4).unwrap();
        save_dataset(&ds, dir.path()).unwrap();
        assert_eq!(load_dataset(dir.path()).unwrap(), ds);

        let ds = generate_rooms(7, 4).unwrap();
        save_dataset(&ds, dir.path()).unwrap();
        assert_eq!(load_dataset(dir.path()).unwrap(), ds);
    }

    #[test]
    fn truncated_blob_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&generate_sprites(5, 1).unwrap(), dir.path()).unwrap();
        let p = dir.path().join("images.bin");
        let bytes = fs::read(&p).unwrap();
        fs::write(&p, &bytes[..bytes.len() - 10]).unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(Error::Malformed { .. })));
    }

    #[test]
    fn corrupted_blob_fails_checksum() {
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&generate_sprites(5, 1).unwrap(), dir.path()).unwrap();
        let p = dir.path().join("labels.bin");
        let mut bytes = fs::read(&p).unwrap();
        bytes[0] ^= 1;
        fs::write(&p, &bytes).unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(Error::Checksum(_))));
    }

    #[test]
    fn unknown_schema_is_named() {
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&generate_sprites(3, 1).unwrap(), dir.path()).unwrap();
        let p = dir.path().join("manifest.json");
        let text = fs::read_to_string(&p).unwrap().replace("\"sprites\"", "\"teapots\"");
        fs::write(&p, text).unwrap();
        let err = load_dataset(dir.path()).unwrap_err();
        assert!(err.to_string().contains("teapots"), "{err}");
    }
}
