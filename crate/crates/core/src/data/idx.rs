//! IDX files as distributed with MNIST: a big-endian magic number, big-endian
//! `u32` dimensions, then raw `u8` payload.

use std::fs;
use std::path::Path;

use super::{Dataset, Split};
use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

/// Raw image tensor from an IDX file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<u8>,
}

fn be_u32(bytes: &[u8], at: usize, what: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::parse(format!("{what}: truncated header")))
}

pub fn read_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    let magic = be_u32(bytes, 0, "images")?;
    if magic != IMAGES_MAGIC {
        return Err(Error::parse(format!("images: bad magic {magic:#010x}")));
    }
    let count = be_u32(bytes, 4, "images")? as usize;
    let height = be_u32(bytes, 8, "images")? as usize;
    let width = be_u32(bytes, 12, "images")? as usize;
    let need = count * height * width;
    let payload = &bytes[16..];
    if payload.len() < need {
        return Err(Error::parse(format!(
            "images: truncated payload ({} of {need} bytes)",
            payload.len()
        )));
    }
    Ok(IdxImages {
        count,
        height,
        width,
        pixels: payload[..need].to_vec(),
    })
}

pub fn read_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0, "labels")?;
    if magic != LABELS_MAGIC {
        return Err(Error::parse(format!("labels: bad magic {magic:#010x}")));
    }
    let count = be_u32(bytes, 4, "labels")? as usize;
    let payload = &bytes[8..];
    if payload.len() < count {
        return Err(Error::parse(format!(
            "labels: truncated payload ({} of {count} bytes)",
            payload.len()
        )));
    }
    Ok(payload[..count].to_vec())
}

/// Map a raw byte to [-1, 1]: `2 * v / 255 - 1`.
pub fn scale_pixel(v: u8) -> f32 {
    (2.0 * v as f64 / 255.0 - 1.0) as f32
}

/// Inverse of [`scale_pixel`] for values it produced.
pub fn unscale_pixel(v: f32) -> u8 {
    (((v as f64 + 1.0) * 255.0 / 2.0).round()).clamp(0.0, 255.0) as u8
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn load_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    name: &str,
    split: Split,
    num_classes: usize,
) -> Result<Dataset> {
    let images = read_idx_images(&read(images_path.as_ref())?)?;
    let labels = read_idx_labels(&read(labels_path.as_ref())?)?;
    if images.count != labels.len() {
        return Err(Error::parse(format!(
            "count mismatch: {} images, {} labels",
            images.count,
            labels.len()
        )));
    }
    let pixels = images.pixels.iter().map(|&v| scale_pixel(v)).collect();
    Dataset::new(name, split, (images.height, images.width), num_classes, pixels, labels)
}

/// Load the four MNIST-style files from a directory:
/// `train-images-idx3-ubyte`, `train-labels-idx1-ubyte`,
/// `t10k-images-idx3-ubyte`, `t10k-labels-idx1-ubyte`.
pub fn load_idx_dir(dir: impl AsRef<Path>, num_classes: usize) -> Result<(Dataset, Dataset)> {
    let dir = dir.as_ref();
    let name = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "idx".to_string());
    let train = load_idx(
        dir.join("train-images-idx3-ubyte"),
        dir.join("train-labels-idx1-ubyte"),
        &name,
        Split::Train,
        num_classes,
    )?;
    let test = load_idx(
        dir.join("t10k-images-idx3-ubyte"),
        dir.join("t10k-labels-idx1-ubyte"),
        &name,
        Split::Test,
        num_classes,
    )?;
    Ok((train, test))
}

/// Write a dataset as an IDX image file and an IDX label file.
///
/// Pixels are quantized back to bytes, so reading a written file reproduces
/// any dataset whose pixels already lie on the 256-level grid bit for bit.
pub fn write_idx(dataset: &Dataset, images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<()> {
    let mut img = Vec::with_capacity(16 + dataset.images().len());
    img.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    for d in [dataset.len(), dataset.height(), dataset.width()] {
        img.extend_from_slice(&(d as u32).to_be_bytes());
    }
    img.extend(dataset.images().iter().map(|&v| unscale_pixel(v)));
    let mut lab = Vec::with_capacity(8 + dataset.len());
    lab.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    lab.extend_from_slice(&(dataset.len() as u32).to_be_bytes());
    lab.extend_from_slice(dataset.labels());
    let (ip, lp) = (images_path.as_ref(), labels_path.as_ref());
    fs::write(ip, img).map_err(|e| Error::io(ip, e))?;
    fs::write(lp, lab).map_err(|e| Error::io(lp, e))?;
    Ok(())
}
