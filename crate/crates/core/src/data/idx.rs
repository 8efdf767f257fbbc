//! IDX container ingestion (the classic MNIST distribution format).
//!
//! Images: big-endian magic `0x00000803`, three big-endian u32 dimension
//! sizes (count, rows, cols), then unsigned pixel bytes. Labels: magic
//! `0x00000801`, one u32 count, then label bytes. Pixels are scaled by
//! 1/255 into [0, 1] and images flattened row-major.

use std::fs;
use std::path::Path;

use crate::data::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn read_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(Error::Data(format!("truncated IDX file while reading {what}")));
    }
    Ok(u32::from_be_bytes(bytes[offset..end].try_into().unwrap()))
}

/// Loads an images/labels IDX pair into a dataset.
pub fn load_idx<T: Scalar>(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<LabeledDataset<T>> {
    let images = fs::read(images_path.as_ref())?;
    let labels = fs::read(labels_path.as_ref())?;

    let magic = read_u32(&images, 0, "images magic")?;
    if magic != IMAGES_MAGIC {
        return Err(Error::Data(format!(
            "bad images magic 0x{magic:08x}, expected 0x{IMAGES_MAGIC:08x}"
        )));
    }
    let count = read_u32(&images, 4, "image count")? as usize;
    let rows = read_u32(&images, 8, "image rows")? as usize;
    let cols = read_u32(&images, 12, "image cols")? as usize;
    let width = rows * cols;
    let payload = &images[16..];
    if payload.len() != count * width {
        return Err(Error::Data(format!(
            "images payload holds {} bytes, header implies {}",
            payload.len(),
            count * width
        )));
    }

    let magic = read_u32(&labels, 0, "labels magic")?;
    if magic != LABELS_MAGIC {
        return Err(Error::Data(format!(
            "bad labels magic 0x{magic:08x}, expected 0x{LABELS_MAGIC:08x}"
        )));
    }
    let label_count = read_u32(&labels, 4, "label count")? as usize;
    if label_count != count {
        return Err(Error::Data(format!(
            "image count {count} does not match label count {label_count}"
        )));
    }
    let label_payload = &labels[8..];
    if label_payload.len() != count {
        return Err(Error::Data(format!(
            "labels payload holds {} bytes, header implies {count}",
            label_payload.len()
        )));
    }

    let inputs: Vec<Vec<T>> = payload
        .chunks_exact(width)
        .map(|chunk| chunk.iter().map(|&b| T::of(b as f64 / 255.0)).collect())
        .collect();
    let labels: Vec<usize> = label_payload.iter().map(|&b| b as usize).collect();
    let max_label = labels.iter().copied().max().unwrap_or(0);
    LabeledDataset::new(inputs, labels, max_label + 1)
}

/// Writes a dataset back to an IDX pair, inverse-scaling values by 255.
///
/// Images are written with dimensions `(count, 1, width)`; for datasets that
/// came from [`load_idx`] the pixel values round-trip exactly.
pub fn write_idx<T: Scalar>(
    dataset: &LabeledDataset<T>,
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<()> {
    let count = dataset.len() as u32;
    let width = dataset.input_width() as u32;

    let mut images = Vec::with_capacity(16 + dataset.len() * dataset.input_width());
    images.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    images.extend_from_slice(&count.to_be_bytes());
    images.extend_from_slice(&1u32.to_be_bytes());
    images.extend_from_slice(&width.to_be_bytes());
    for row in &dataset.inputs {
        for &v in row {
            images.push((v.as_f64() * 255.0).round().clamp(0.0, 255.0) as u8);
        }
    }

    let mut labels = Vec::with_capacity(8 + dataset.len());
    labels.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    labels.extend_from_slice(&count.to_be_bytes());
    for &y in &dataset.labels {
        labels.push(y as u8);
    }

    fs::write(images_path.as_ref(), images)?;
    fs::write(labels_path.as_ref(), labels)?;
    Ok(())
}
