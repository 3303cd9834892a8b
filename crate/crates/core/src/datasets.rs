//! Synthetic two-class datasets and the IDX (MNIST) container format.
//!
//! `Seg-n` cuts `[0, 1]` into `n` equal segments and labels them by parity;
//! the feature is the sampled coordinate repeated twice. `Circle-n` cuts the
//! unit disc into `n` concentric rings, again labelled by parity. Samples are
//! drawn from the half-open interval of their segment or ring and redrawn if
//! rounding would move them across a boundary, so the label can always be
//! recovered from the features.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::IdxPart;
use crate::randmat::Matrix;
use crate::{rng, Error, Result};

/// Training-set size used by the synthetic benchmarks.
pub const TRAIN_SAMPLES: usize = 60_000;
/// Test-set size used by the synthetic benchmarks.
pub const TEST_SAMPLES: usize = 12_000;

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
const IDX_CLASSES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Provenance {
    Seg { n_segments: u32, seed: u64 },
    Circle { n_rings: u32, seed: u64 },
    Idx { rows: u32, cols: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    feature_dim: usize,
    labels: Vec<u32>,
    n_classes: usize,
    provenance: Provenance,
}

impl Dataset {
    pub fn new(
        features: Vec<f64>,
        feature_dim: usize,
        labels: Vec<u32>,
        n_classes: usize,
        provenance: Provenance,
    ) -> Result<Self> {
        if feature_dim == 0 {
            return Err(Error::Shape("feature_dim must be positive".into()));
        }
        if features.len() != labels.len() * feature_dim {
            return Err(Error::Consistency(format!(
                "{} feature values do not form {} rows of width {feature_dim}",
                features.len(),
                labels.len()
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("dataset features"));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= n_classes) {
            return Err(Error::range("label", i64::from(bad), format!("[0, {n_classes})")));
        }
        Ok(Dataset {
            features,
            feature_dim,
            labels,
            n_classes,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.feature_dim..(i + 1) * self.feature_dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i] as usize
    }

    /// Gathers the given rows into a batch matrix and label vector.
    pub fn batch(&self, indices: &[usize]) -> Result<(Matrix, Vec<usize>)> {
        let mut data = Vec::with_capacity(indices.len() * self.feature_dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(self.row(i));
            labels.push(self.label(i));
        }
        Ok((Matrix::new(indices.len(), self.feature_dim, data)?, labels))
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = alloc::vec![0; self.n_classes];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SyntheticKind {
    Seg,
    Circle,
}

fn check_parts(what: &'static str, n: u32) -> Result<()> {
    if n < 2 {
        return Err(Error::range(what, i64::from(n), ">= 2"));
    }
    Ok(())
}

/// Segment index containing `x`, using the half-open convention.
pub fn segment_of(x: f64, n_segments: u32) -> u32 {
    libm::floor(x * f64::from(n_segments)) as u32
}

/// Euclidean norm of a 2-d feature row.
pub fn radius_of(feature: &[f64]) -> f64 {
    libm::sqrt(feature[0] * feature[0] + feature[1] * feature[1])
}

/// Seg-n: segment `s` uniform, `x` uniform in `[s/n, (s+1)/n)`, feature `[x, x]`, label `s mod 2`.
pub fn gen_seg(n_segments: u32, n_samples: usize, seed: u64) -> Result<Dataset> {
    check_parts("n_segments", n_segments)?;
    let n = f64::from(n_segments);
    let mut r = rng::rng_from_seed(seed);
    let mut features = Vec::with_capacity(2 * n_samples);
    let mut labels = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let s = r.random_range(0..n_segments);
        let x = loop {
            let x = (f64::from(s) + r.random::<f64>()) / n;
            if segment_of(x, n_segments) == s {
                break x;
            }
        };
        features.extend_from_slice(&[x, x]);
        labels.push(s % 2);
    }
    Dataset::new(
        features,
        2,
        labels,
        2,
        Provenance::Seg {
            n_segments,
            seed,
        },
    )
}

/// Circle-n: ring `s` uniform, radius uniform in `[s/n, (s+1)/n)`, angle
/// uniform in `[0, 2 pi)`, feature `[r cos a, r sin a]`, label `s mod 2`.
pub fn gen_circle(n_rings: u32, n_samples: usize, seed: u64) -> Result<Dataset> {
    check_parts("n_rings", n_rings)?;
    let n = f64::from(n_rings);
    let mut r = rng::rng_from_seed(seed);
    let mut features = Vec::with_capacity(2 * n_samples);
    let mut labels = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let s = r.random_range(0..n_rings);
        let point = loop {
            let radius = (f64::from(s) + r.random::<f64>()) / n;
            let angle = 2.0 * core::f64::consts::PI * r.random::<f64>();
            let p = [radius * libm::cos(angle), radius * libm::sin(angle)];
            let norm = radius_of(&p);
            if norm < 1.0 && segment_of(norm, n_rings) == s {
                break p;
            }
        };
        features.extend_from_slice(&point);
        labels.push(s % 2);
    }
    Dataset::new(
        features,
        2,
        labels,
        2,
        Provenance::Circle { n_rings, seed },
    )
}

pub fn generate(kind: SyntheticKind, n: u32, n_samples: usize, seed: u64) -> Result<Dataset> {
    match kind {
        SyntheticKind::Seg => gen_seg(n, n_samples, seed),
        SyntheticKind::Circle => gen_circle(n, n_samples, seed),
    }
}

/// Train and test sets drawn from disjoint streams of `seed`.
pub fn synthetic_split(
    kind: SyntheticKind,
    n: u32,
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    let train = generate(kind, n, n_train, rng::derive_seed(seed, &[0]))?;
    let test = generate(kind, n, n_test, rng::derive_seed(seed, &[1]))?;
    Ok((train, test))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    part: IdxPart,
}

impl<'a> Reader<'a> {
    fn fail(&self, reason: impl Into<String>) -> Error {
        Error::Format {
            part: self.part,
            reason: reason.into(),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let end = self.pos + 4;
        let b = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| self.fail(format!("truncated before {what}")))?;
        self.pos = end;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn rest(&self, expected: usize) -> Result<&'a [u8]> {
        let body = &self.bytes[self.pos..];
        if body.len() != expected {
            return Err(self.fail(format!(
                "expected {expected} payload bytes, found {}",
                body.len()
            )));
        }
        Ok(body)
    }
}

/// Parses an IDX image/label pair. Pixels are scaled to `[0, 1]`.
pub fn parse_idx(images: &[u8], labels: &[u8]) -> Result<Dataset> {
    let mut img = Reader {
        bytes: images,
        pos: 0,
        part: IdxPart::Images,
    };
    let magic = img.u32("magic")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(img.fail(format!("bad magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}")));
    }
    let count = img.u32("image count")? as usize;
    let rows = img.u32("row count")?;
    let cols = img.u32("column count")?;
    let dim = rows as usize * cols as usize;
    if dim == 0 {
        return Err(img.fail("zero-sized images"));
    }
    let pixels = img.rest(count * dim)?;

    let mut lab = Reader {
        bytes: labels,
        pos: 0,
        part: IdxPart::Labels,
    };
    let magic = lab.u32("magic")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(lab.fail(format!("bad magic 0x{magic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}")));
    }
    let label_count = lab.u32("label count")? as usize;
    let raw_labels = lab.rest(label_count)?;
    if let Some(bad) = raw_labels.iter().find(|&&l| l as usize >= IDX_CLASSES) {
        return Err(lab.fail(format!("label {bad} outside 0..{IDX_CLASSES}")));
    }
    if label_count != count {
        return Err(Error::Consistency(format!(
            "{count} images but {label_count} labels"
        )));
    }

    let features = pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
    let labels = raw_labels.iter().map(|&l| u32::from(l)).collect();
    Dataset::new(features, dim, labels, IDX_CLASSES, Provenance::Idx { rows, cols })
}

/// Encodes an IDX-backed dataset back to its image and label files.
pub fn encode_idx(ds: &Dataset) -> Result<(Vec<u8>, Vec<u8>)> {
    let Provenance::Idx { rows, cols } = ds.provenance else {
        return Err(Error::Unsupported("only IDX-backed datasets can be written as IDX".into()));
    };
    let count = u32::try_from(ds.len()).map_err(|_| Error::range("samples", ds.len() as i64, "< 2^32"))?;
    let mut images = Vec::with_capacity(16 + ds.features.len());
    images.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    images.extend_from_slice(&count.to_be_bytes());
    images.extend_from_slice(&rows.to_be_bytes());
    images.extend_from_slice(&cols.to_be_bytes());
    for &v in &ds.features {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Domain(format!("pixel value {v} outside [0, 1]")));
        }
        images.push(libm::round(v * 255.0) as u8);
    }
    let mut labels = Vec::with_capacity(8 + ds.len());
    labels.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    labels.extend_from_slice(&count.to_be_bytes());
    for &l in &ds.labels {
        labels.push(l as u8);
    }
    Ok((images, labels))
}
