//! MNIST in the IDX format: `idx3-ubyte` images and `idx1-ubyte` labels.

use std::fs;
use std::path::Path;

use hcn_core::data::Dataset;
use hcn_core::BinaryTensor3;

use crate::error::{Error, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

/// Gray levels at or above this are on.
pub const THRESHOLD: u8 = 128;

fn be_u32(data: &[u8], at: usize) -> Result<u32> {
    data.get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("four bytes")))
        .ok_or_else(|| Error::format("IDX", "truncated header"))
}

/// Decodes an image file into binarized `1 x rows x cols` tensors.
pub fn decode_images(data: &[u8]) -> Result<Vec<BinaryTensor3>> {
    if be_u32(data, 0)? != IMAGES_MAGIC {
        return Err(Error::format("IDX", "not an image file"));
    }
    let n = be_u32(data, 4)? as usize;
    let rows = be_u32(data, 8)? as usize;
    let cols = be_u32(data, 12)? as usize;
    let size = rows.checked_mul(cols).ok_or_else(|| Error::format("IDX", "dimension overflow"))?;
    let total = n.checked_mul(size).ok_or_else(|| Error::format("IDX", "dimension overflow"))?;
    let body = &data[16..];
    if body.len() != total {
        return Err(Error::format("IDX", format!("expected {total} pixel bytes, found {}", body.len())));
    }
    if size == 0 {
        return Ok(Vec::new());
    }
    body.chunks(size)
        .map(|px| {
            let bits: Vec<bool> = px.iter().map(|&g| g >= THRESHOLD).collect();
            Ok(BinaryTensor3::from_bits(1, rows, cols, &bits)?)
        })
        .collect()
}

pub fn decode_labels(data: &[u8]) -> Result<Vec<usize>> {
    if be_u32(data, 0)? != LABELS_MAGIC {
        return Err(Error::format("IDX", "not a label file"));
    }
    let n = be_u32(data, 4)? as usize;
    let body = &data[8..];
    if body.len() != n {
        return Err(Error::format("IDX", format!("expected {n} labels, found {}", body.len())));
    }
    Ok(body.iter().map(|&l| l as usize).collect())
}

/// The first `per_class` images of every digit, in file order.
pub fn load(images: &Path, labels: &Path, per_class: usize) -> Result<Dataset> {
    let xs = decode_images(&fs::read(images).map_err(Error::io(images))?)?;
    let ls = decode_labels(&fs::read(labels).map_err(Error::io(labels))?)?;
    if xs.len() != ls.len() {
        return Err(Error::format("IDX", "image and label counts differ"));
    }
    if let Some(&bad) = ls.iter().find(|&&l| l > 9) {
        return Err(Error::format("IDX", format!("label {bad} is not a digit")));
    }
    let mut taken = [0usize; 10];
    let mut d = Dataset { labels: Some(Vec::new()), ..Dataset::default() };
    for (x, l) in xs.into_iter().zip(ls) {
        if taken[l] < per_class {
            taken[l] += 1;
            d.images.push(x);
            d.labels.as_mut().expect("set above").push(l);
        }
    }
    Ok(d)
}
