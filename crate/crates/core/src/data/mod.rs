//! Image datasets: IDX files, synthetic generation, and subsampling.
//!
//! Pixels are 32-bit floats scaled to [-1, 1]; this is checked whenever a
//! [`Dataset`] is constructed.

mod idx;
mod synthetic;

pub use idx::{load_idx, load_idx_dir, read_idx_images, read_idx_labels, write_idx, IdxImages};
pub use synthetic::{gen_synthetic, SyntheticSpec};

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    split: Split,
    height: usize,
    width: usize,
    num_classes: usize,
    images: Vec<f32>,
    labels: Vec<u8>,
}

impl Dataset {
    /// `images` holds `labels.len()` single-channel images, row-major.
    pub fn new(
        name: impl Into<String>,
        split: Split,
        (height, width): (usize, usize),
        num_classes: usize,
        images: Vec<f32>,
        labels: Vec<u8>,
    ) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::validation("dataset has no examples"));
        }
        if height == 0 || width == 0 || images.len() != labels.len() * height * width {
            return Err(Error::validation(format!(
                "{} pixel values do not form {} images of {height}x{width}",
                images.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y as usize >= num_classes) {
            return Err(Error::validation(format!("label {bad} outside [0, {num_classes})")));
        }
        if let Some(bad) = images.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(Error::validation(format!("pixel value {bad} outside [-1, 1]")));
        }
        Ok(Dataset {
            name: name.into(),
            split,
            height,
            width,
            num_classes,
            images,
            labels,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn split(&self) -> Split {
        self.split
    }
    pub fn len(&self) -> usize {
        self.labels.len()
    }
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn num_classes(&self) -> usize {
        self.num_classes
    }
    pub fn pixels_per_image(&self) -> usize {
        self.height * self.width
    }
    pub fn images(&self) -> &[f32] {
        &self.images
    }
    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn image(&self, i: usize) -> &[f32] {
        let d = self.pixels_per_image();
        &self.images[i * d..(i + 1) * d]
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &y in &self.labels {
            counts[y as usize] += 1;
        }
        counts
    }

    /// A new dataset holding the examples at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Dataset> {
        let d = self.pixels_per_image();
        let mut images = Vec::with_capacity(indices.len() * d);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::validation(format!("index {i} out of range")));
            }
            images.extend_from_slice(self.image(i));
            labels.push(self.labels[i]);
        }
        Dataset::new(self.name.clone(), self.split, (self.height, self.width), self.num_classes, images, labels)
    }

    /// The first `n` examples.
    pub fn head(&self, n: usize) -> Result<Dataset> {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.select(&idx)
    }
}

/// Training-set fractions the sweep draws from.
pub const TRAIN_FRACTIONS: [f64; 4] = [0.1, 0.25, 0.5, 1.0];

/// Uniform sample without replacement of `floor(fraction * n)` examples,
/// kept in their original order.
pub fn subsample(dataset: &Dataset, fraction: f64, seed: u64) -> Result<Dataset> {
    if !TRAIN_FRACTIONS.contains(&fraction) {
        return Err(Error::validation(format!(
            "train fraction {fraction} is not one of {TRAIN_FRACTIONS:?}"
        )));
    }
    if fraction == 1.0 {
        return Ok(dataset.clone());
    }
    let n = dataset.len();
    let k = ((fraction * n as f64).floor() as usize).max(1);
    let mut rng = rng::stream(seed, &[rng::tag::SUBSAMPLE]);
    let mut idx = index::sample(&mut rng, n, k).into_vec();
    idx.sort_unstable();
    dataset.select(&idx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize) -> Dataset {
        let images = (0..n * 4).map(|i| ((i % 7) as f32 / 3.5) - 1.0).collect();
        let labels = (0..n).map(|i| (i % 10) as u8).collect();
        Dataset::new("toy", Split::Train, (2, 2), 10, images, labels).unwrap()
    }

    #[test]
    fn rejects_out_of_range_pixels_and_labels() {
        assert!(Dataset::new("x", Split::Train, (1, 1), 2, vec![1.5], vec![0]).is_err());
        assert!(Dataset::new("x", Split::Train, (1, 1), 10, vec![0.0], vec![11]).is_err());
        assert!(Dataset::new("x", Split::Train, (1, 1), 2, vec![], vec![]).is_err());
    }

    #[test]
    fn subsample_sizes() {
        let d = toy(5000);
        assert_eq!(subsample(&d, 1.0, 3).unwrap(), d);
        assert_eq!(subsample(&d, 0.1, 3).unwrap().len(), 500);
        assert_eq!(subsample(&d, 0.25, 3).unwrap().len(), 1250);
        assert!(subsample(&d, 0.3, 3).is_err());
    }

    #[test]
    fn subsample_is_seeded() {
        let d = toy(1000);
        let a = subsample(&d, 0.5, 9).unwrap();
        let b = subsample(&d, 0.5, 9).unwrap();
        let c = subsample(&d, 0.5, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
