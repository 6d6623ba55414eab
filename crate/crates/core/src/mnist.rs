//! MNIST ingestion: big-endian IDX parsing and pixel/phase conversions.
//!
//! Images map to the phase scale through `phi = 2 * (pixel / 255) - 1`, so
//! ink (high intensity) sits at the `+1` well and background at `-1`. The
//! classifier consumes intensities in `[0, 1]`; [`phase_to_intensities`]
//! clamps a phase field back into that range.

use std::path::Path;

use crate::error::{Error, Result};
use crate::field::PhaseField;

pub const IMAGE_SIDE: usize = 28;
pub const IMAGE_PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;

pub const IMAGES_MAGIC: u32 = 2051;
pub const LABELS_MAGIC: u32 = 2049;

/// Standard file names of the two MNIST splits.
pub const TRAIN_FILES: (&str, &str) = ("train-images-idx3-ubyte", "train-labels-idx1-ubyte");
pub const TEST_FILES: (&str, &str) = ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte");

/// One 28x28 digit with its label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledImage {
    pub pixels: Vec<u8>,
    pub label: u8,
}

impl LabeledImage {
    /// Intensities in `[0, 1]`, the classifier input scale.
    pub fn intensities(&self) -> Vec<f64> {
        self.pixels.iter().map(|&p| p as f64 / 255.0).collect()
    }

    /// Convert to the phase scale on a unit-cell grid.
    pub fn to_phase_field(&self) -> PhaseField {
        let values = self
            .pixels
            .iter()
            .map(|&p| 2.0 * (p as f64 / 255.0) - 1.0)
            .collect();
        PhaseField::from_values(IMAGE_SIDE, IMAGE_SIDE, 1.0, 1.0, values)
            .expect("28x28 image is a valid grid")
    }
}

/// Clamp a phase field into `[-1, 1]` and map it to classifier intensities.
pub fn phase_to_intensities(field: &PhaseField) -> Vec<f64> {
    field
        .values()
        .iter()
        .map(|&v| (v.clamp(-1.0, 1.0) + 1.0) / 2.0)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// An ordered list of labeled images; order follows the byte order of the
/// source files.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub images: Vec<LabeledImage>,
    pub split: Split,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Parse an images/labels file pair in IDX format.
    pub fn load_idx<P: AsRef<Path>>(images_path: P, labels_path: P, split: Split) -> Result<Self> {
        let images = std::fs::read(images_path)?;
        let labels = std::fs::read(labels_path)?;
        Self::from_idx_bytes(&images, &labels, split)
    }

    /// Load the standard file names of a split from a directory.
    pub fn load_dir<P: AsRef<Path>>(dir: P, split: Split) -> Result<Self> {
        let (img, lab) = match split {
            Split::Train => TRAIN_FILES,
            Split::Test => TEST_FILES,
        };
        let dir = dir.as_ref();
        Self::load_idx(dir.join(img), dir.join(lab), split)
    }

    pub fn from_idx_bytes(images: &[u8], labels: &[u8], split: Split) -> Result<Self> {
        let pixels = parse_idx_images(images)?;
        let labels = parse_idx_labels(labels)?;
        if pixels.len() != labels.len() {
            return Err(Error::CountMismatch {
                images: pixels.len(),
                labels: labels.len(),
            });
        }
        let images = pixels
            .into_iter()
            .zip(labels)
            .map(|(pixels, label)| LabeledImage { pixels, label })
            .collect();
        Ok(Self { images, split })
    }

    /// Threshold every pixel: `>= t` becomes 255, the rest 0.
    pub fn binarize(&mut self, threshold: u8) {
        for img in &mut self.images {
            for p in &mut img.pixels {
                *p = if *p >= threshold { 255 } else { 0 };
            }
        }
    }
}

fn read_u32_be(data: &[u8], pos: usize) -> Result<u32> {
    if data.len() < pos + 4 {
        return Err(Error::Truncated {
            needed: pos + 4,
            found: data.len(),
        });
    }
    Ok(u32::from_be_bytes([
        data[pos],
        data[pos + 1],
        data[pos + 2],
        data[pos + 3],
    ]))
}

fn parse_idx_images(data: &[u8]) -> Result<Vec<Vec<u8>>> {
    let magic = read_u32_be(data, 0)?;
    if magic != IMAGES_MAGIC {
        return Err(Error::BadMagic {
            expected: IMAGES_MAGIC,
            found: magic,
        });
    }
    let count = read_u32_be(data, 4)? as usize;
    let rows = read_u32_be(data, 8)? as usize;
    let cols = read_u32_be(data, 12)? as usize;
    if rows != IMAGE_SIDE || cols != IMAGE_SIDE {
        return Err(Error::Format {
            what: "IDX images",
            detail: format!("expected 28x28 images, got {rows}x{cols}"),
        });
    }
    let needed = 16 + count * rows * cols;
    if data.len() < needed {
        return Err(Error::Truncated {
            needed,
            found: data.len(),
        });
    }
    Ok(data[16..needed]
        .chunks_exact(rows * cols)
        .map(|c| c.to_vec())
        .collect())
}

fn parse_idx_labels(data: &[u8]) -> Result<Vec<u8>> {
    let magic = read_u32_be(data, 0)?;
    if magic != LABELS_MAGIC {
        return Err(Error::BadMagic {
            expected: LABELS_MAGIC,
            found: magic,
        });
    }
    let count = read_u32_be(data, 4)? as usize;
    let needed = 8 + count;
    if data.len() < needed {
        return Err(Error::Truncated {
            needed,
            found: data.len(),
        });
    }
    let labels = data[8..needed].to_vec();
    if let Some(&bad) = labels.iter().find(|&&l| l > 9) {
        return Err(Error::Format {
            what: "IDX labels",
            detail: format!("label {bad} out of range 0..=9"),
        });
    }
    Ok(labels)
}
