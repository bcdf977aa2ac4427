//! The IDX container used by the MNIST family: a big-endian magic number
//! (`0x00000803` for `u8` image tensors, `0x00000801` for `u8` label
//! vectors), one `u32` per dimension, then the raw bytes.

use std::fs;
use std::path::Path;

use super::{Dataset, Split};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

fn format_err(what: &'static str, offset: usize, msg: impl Into<String>) -> Error {
    Error::Format {
        what,
        offset: offset as u64,
        msg: msg.into(),
    }
}

fn read_u32(bytes: &[u8], offset: usize, what: &'static str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| format_err(what, offset, "truncated header"))
}

/// Parses an IDX buffer with the given magic; returns its dimensions and payload.
pub fn parse_idx<'a>(bytes: &'a [u8], magic: u32, what: &'static str) -> Result<(Vec<usize>, &'a [u8])> {
    let found = read_u32(bytes, 0, what)?;
    if found != magic {
        return Err(format_err(what, 0, format!("bad magic {found:#010x}, expected {magic:#010x}")));
    }
    let rank = (magic & 0xff) as usize;
    let mut dims = Vec::with_capacity(rank);
    for d in 0..rank {
        dims.push(read_u32(bytes, 4 + 4 * d, what)? as usize);
    }
    let start = 4 + 4 * rank;
    let len: usize = dims.iter().product();
    let end = start + len;
    if bytes.len() < end {
        return Err(format_err(
            what,
            bytes.len(),
            format!("truncated payload: {} of {len} bytes", bytes.len() - start.min(bytes.len())),
        ));
    }
    if bytes.len() > end {
        return Err(format_err(what, end, format!("{} trailing bytes", bytes.len() - end)));
    }
    Ok((dims, &bytes[start..end]))
}

fn encode_idx(magic: u32, dims: &[usize], payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + 4 * dims.len() + payload.len());
    out.extend_from_slice(&magic.to_be_bytes());
    for &d in dims {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    out.extend_from_slice(payload);
    out
}

/// Byte `b` maps to `2 b / 255 - 1`, i.e. `[0, 1]` intensities rescaled to `[-1, 1]`.
pub fn byte_to_value(b: u8) -> f64 {
    2.0 * f64::from(b) / 255.0 - 1.0
}

/// Inverse of [`byte_to_value`]; values are clamped to `[-1, 1]` and rounded.
pub fn value_to_byte(v: f64) -> u8 {
    ((v.clamp(-1.0, 1.0) + 1.0) * 127.5).round() as u8
}

/// Decodes image and label buffers into a dataset with inputs `[N, 1, H, W]`.
/// The class count is one more than the largest label.
pub fn decode_idx(images: &[u8], labels: &[u8], split: Split) -> Result<Dataset> {
    let (idims, pixels) = parse_idx(images, IMAGE_MAGIC, "images")?;
    let (ldims, label_bytes) = parse_idx(labels, LABEL_MAGIC, "labels")?;
    if idims[0] != ldims[0] {
        return Err(format_err(
            "labels",
            4,
            format!("{} labels for {} images", ldims[0], idims[0]),
        ));
    }
    let labels: Vec<usize> = label_bytes.iter().map(|&b| usize::from(b)).collect();
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let inputs = Tensor::new(
        vec![idims[0], 1, idims[1], idims[2]],
        pixels.iter().map(|&b| byte_to_value(b)).collect(),
    )?;
    Dataset::new(inputs, labels, classes, split)
}

/// Reads an image file and its label file.
pub fn load_idx(images: &Path, labels: &Path, split: Split) -> Result<Dataset> {
    decode_idx(&fs::read(images)?, &fs::read(labels)?, split)
}

/// Encodes a dataset as `(images, labels)` IDX buffers. Inputs are quantized
/// with [`value_to_byte`]; flat `[N, D]` inputs are stored as `1 x D` images.
pub fn encode_dataset(dataset: &Dataset) -> Result<(Vec<u8>, Vec<u8>)> {
    let n = dataset.len();
    let (h, w) = match dataset.sample_shape() {
        [d] => (1, *d),
        [1, h, w] => (*h, *w),
        other => {
            return Err(Error::shape(
                "encode_idx",
                format!("cannot store samples of shape {other:?} as single-channel images"),
            ))
        }
    };
    if dataset.labels.iter().any(|&l| l > 255) {
        return Err(Error::invalid("labels above 255 do not fit in a byte"));
    }
    let pixels: Vec<u8> = dataset.inputs.data().iter().map(|&v| value_to_byte(v)).collect();
    let labels: Vec<u8> = dataset.labels.iter().map(|&l| l as u8).collect();
    Ok((
        encode_idx(IMAGE_MAGIC, &[n, h, w], &pixels),
        encode_idx(LABEL_MAGIC, &[n], &labels),
    ))
}

pub fn write_idx(dataset: &Dataset, images: &Path, labels: &Path) -> Result<()> {
    let (img, lab) = encode_dataset(dataset)?;
    fs::write(images, img)?;
    fs::write(labels, lab)?;
    Ok(())
}
