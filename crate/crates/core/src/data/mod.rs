//! Image-classification datasets in the IDX format used by MNIST and
//! Fashion-MNIST.

mod idx;

pub use idx::{encode_images, encode_labels, parse_images, parse_labels, IMAGES_MAGIC, LABELS_MAGIC};

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autograd::Tensor;
use crate::rng;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("dataset file not found: {0}")]
    Missing(PathBuf),
    #[error("{path}: bad magic number {found:#010x}, expected {expected:#010x}")]
    BadMagic {
        path: PathBuf,
        found: u32,
        expected: u32,
    },
    #[error("{path}: truncated at byte offset {offset} (needed {needed} bytes)")]
    Truncated {
        path: PathBuf,
        offset: usize,
        needed: usize,
    },
    #[error("{images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("label {label} at index {index} is out of range 0..{classes}")]
    LabelRange {
        index: usize,
        label: u8,
        classes: usize,
    },
    #[error("pixel {value} at index {index} is outside [0, 1]")]
    PixelRange { index: usize, value: f32 },
    #[error("cannot take {n} items from a dataset of {len}")]
    SubsetSize { n: usize, len: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn prefix(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "t10k",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

pub const NUM_CLASSES: usize = 10;

/// Images as row-major `[len, rows * cols]` floats in `[0, 1]` plus labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub split: Split,
    rows: usize,
    cols: usize,
    images: Vec<f32>,
    labels: Vec<u8>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        split: Split,
        rows: usize,
        cols: usize,
        images: Vec<f32>,
        labels: Vec<u8>,
    ) -> Result<Self, DataError> {
        let dim = rows * cols;
        let n = if dim == 0 { 0 } else { images.len() / dim };
        if n * dim != images.len() || n != labels.len() {
            return Err(DataError::CountMismatch {
                images: n,
                labels: labels.len(),
            });
        }
        if let Some((index, &value)) = images
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(DataError::PixelRange { index, value });
        }
        if let Some((index, &label)) = labels
            .iter()
            .enumerate()
            .find(|(_, &l)| l as usize >= NUM_CLASSES)
        {
            return Err(DataError::LabelRange {
                index,
                label,
                classes: NUM_CLASSES,
            });
        }
        Ok(Self {
            name: name.into(),
            split,
            rows,
            cols,
            images,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Pixels per image.
    pub fn dim(&self) -> usize {
        self.rows * self.cols
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn image(&self, i: usize) -> &[f32] {
        let d = self.dim();
        &self.images[i * d..(i + 1) * d]
    }

    pub fn images(&self) -> &[f32] {
        &self.images
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i] as usize
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Images at `indices` as a `[indices.len(), dim]` tensor, plus labels.
    pub fn batch<T: Scalar>(&self, indices: &[usize]) -> (Tensor<T>, Vec<usize>) {
        let d = self.dim();
        let mut data = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            data.extend(self.image(i).iter().map(|&v| T::of(v as f64)));
        }
        let labels = indices.iter().map(|&i| self.label(i)).collect();
        (Tensor::matrix(indices.len(), d, data), labels)
    }

    /// Count of each label `0..10`.
    pub fn class_histogram(&self) -> [usize; NUM_CLASSES] {
        let mut h = [0; NUM_CLASSES];
        for &l in &self.labels {
            h[l as usize] += 1;
        }
        h
    }

    /// The items at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut images = Vec::with_capacity(indices.len() * self.dim());
        for &i in indices {
            images.extend_from_slice(self.image(i));
        }
        Self {
            name: self.name.clone(),
            split: self.split,
            rows: self.rows,
            cols: self.cols,
            images,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// `n` items drawn without replacement, in draw order; a function of
    /// `seed` only.
    pub fn subset(&self, n: usize, seed: u64) -> Result<Self, DataError> {
        if n == 0 || n > self.len() {
            return Err(DataError::SubsetSize { n, len: self.len() });
        }
        let mut r = rng::stream(seed, "subset");
        let picked = index::sample(&mut r, self.len(), n).into_vec();
        Ok(self.select(&picked))
    }

    /// Shuffled `0..len` for one epoch.
    pub fn epoch_order(&self, seed: u64, epoch: u64) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut rng::substream(seed, "epoch", epoch));
        order
    }

    /// Quantized pixels `round(255 x)`.
    pub fn pixels_u8(&self) -> Vec<u8> {
        self.images
            .iter()
            .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }
}

/// Loads an image file and a label file (either may be gzipped).
pub fn load_idx(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<Dataset, DataError> {
    load_named(images.as_ref(), labels.as_ref(), "idx", Split::Train)
}

fn load_named(images: &Path, labels: &Path, name: &str, split: Split) -> Result<Dataset, DataError> {
    let (n, rows, cols, px) = parse_images(images, &idx::read_maybe_gz(images)?)?;
    let lb = parse_labels(labels, &idx::read_maybe_gz(labels)?)?;
    if n != lb.len() {
        return Err(DataError::CountMismatch {
            images: n,
            labels: lb.len(),
        });
    }
    let pixels = px.iter().map(|&p| p as f32 / 255.0).collect();
    Dataset::new(name, split, rows, cols, pixels, lb)
}

/// Loads `{train,t10k}-{images-idx3,labels-idx1}-ubyte[.gz]` from `dir`.
pub fn load_split(dir: impl AsRef<Path>, name: &str, split: Split) -> Result<Dataset, DataError> {
    let dir = dir.as_ref();
    let p = split.prefix();
    let images = idx::find(dir, &format!("{p}-images-idx3-ubyte"))?;
    let labels = idx::find(dir, &format!("{p}-labels-idx1-ubyte"))?;
    load_named(&images, &labels, name, split)
}

/// Writes uncompressed IDX image and label files.
pub fn write_idx(
    d: &Dataset,
    images: impl AsRef<Path>,
    labels: impl AsRef<Path>,
) -> Result<(), DataError> {
    let (ip, lp) = (images.as_ref(), labels.as_ref());
    fs::write(ip, encode_images(d.len(), d.rows, d.cols, &d.pixels_u8())).map_err(|source| {
        DataError::Io {
            path: ip.to_path_buf(),
            source,
        }
    })?;
    fs::write(lp, encode_labels(&d.labels)).map_err(|source| DataError::Io {
        path: lp.to_path_buf(),
        source,
    })
}
