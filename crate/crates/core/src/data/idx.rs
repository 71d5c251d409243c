//! IDX (MNIST-style) unsigned-byte image and label files.

use std::path::Path;

use super::dataset::{Dataset, Sample};
use crate::engine::Tensor;
use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

fn bad(detail: impl Into<String>) -> Error {
    Error::Format {
        what: "IDX file",
        detail: detail.into(),
    }
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| bad(format!("truncated header at byte {at}")))
}

/// Raw image file contents: `(count, rows, cols, pixels)`.
pub fn decode_images(bytes: &[u8]) -> Result<(usize, usize, usize, &[u8])> {
    let magic = be_u32(bytes, 0)?;
    if magic != IMAGES_MAGIC {
        return Err(bad(format!("image magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}")));
    }
    let n = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let body = &bytes[16..];
    if body.len() != n * rows * cols {
        return Err(bad(format!(
            "header declares {n}x{rows}x{cols} = {} bytes, body has {}",
            n * rows * cols,
            body.len()
        )));
    }
    Ok((n, rows, cols, body))
}

pub fn decode_labels(bytes: &[u8]) -> Result<&[u8]> {
    let magic = be_u32(bytes, 0)?;
    if magic != LABELS_MAGIC {
        return Err(bad(format!("label magic {magic:#010x}, expected {LABELS_MAGIC:#010x}")));
    }
    let n = be_u32(bytes, 4)? as usize;
    let body = &bytes[8..];
    if body.len() != n {
        return Err(bad(format!("header declares {n} labels, body has {}", body.len())));
    }
    Ok(body)
}

pub fn encode_images(rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
    let n = pixels.len() / (rows * cols);
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IMAGES_MAGIC, n as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Builds a dataset from in-memory IDX image and label files. Classes are the
/// distinct label bytes in ascending order.
pub fn dataset_from_idx(images: &[u8], labels: &[u8]) -> Result<Dataset> {
    let (n, rows, cols, pixels) = decode_images(images)?;
    let raw_labels = decode_labels(labels)?;
    if raw_labels.len() != n {
        return Err(bad(format!("{n} images but {} labels", raw_labels.len())));
    }
    let mut classes: Vec<u8> = raw_labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let per = rows * cols;
    let samples = (0..n)
        .map(|i| {
            let data = pixels[i * per..(i + 1) * per].iter().map(|&b| b as f64 / 255.0).collect();
            Ok(Sample {
                image: Tensor::new(vec![1, rows, cols], data)?,
                label: classes.binary_search(&raw_labels[i]).expect("label is in class list"),
                subject: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(samples, classes.iter().map(u8::to_string).collect())
}

pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let images = std::fs::read(images_path).map_err(|e| Error::io(images_path, e))?;
    let labels = std::fs::read(labels_path).map_err(|e| Error::io(labels_path, e))?;
    dataset_from_idx(&images, &labels)
}
