use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Dataset, Split};
use crate::error::{Error, Result};
use crate::rng;

/// Recipe for a synthetic image classification problem.
///
/// Every class owns a prototype made of an oriented bar and a blob, both
/// placed by `pattern_seed`; samples jitter the prototype and add Gaussian
/// pixel noise. Classes are balanced by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    pub samples_per_class: usize,
    pub test_per_class: usize,
    pub image_size: usize,
    pub pattern_seed: u64,
    /// Standard deviation of the additive pixel noise (pixel range is 2).
    pub noise: f64,
}

impl SyntheticSpec {
    pub fn new(num_classes: usize, samples_per_class: usize, image_size: usize, pattern_seed: u64) -> Self {
        SyntheticSpec {
            num_classes,
            samples_per_class,
            test_per_class: (samples_per_class / 2).max(1),
            image_size,
            pattern_seed,
            noise: 0.6,
        }
    }

    pub fn name(&self) -> String {
        format!("synthetic-{}", self.pattern_seed)
    }
}

#[derive(Debug, Clone)]
struct Prototype {
    angle: f64,
    offset: f64,
    blob_x: f64,
    blob_y: f64,
    blob_sign: f64,
}

fn prototypes(spec: &SyntheticSpec) -> Vec<Prototype> {
    let mut rng = rng::stream(spec.pattern_seed, &[rng::tag::SYNTH_PATTERN]);
    let k = spec.num_classes as f64;
    let half = spec.image_size as f64 / 2.0;
    // Spread the orientations evenly, in a seed-dependent order.
    let mut order: Vec<usize> = (0..spec.num_classes).collect();
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    order
        .into_iter()
        .map(|slot| Prototype {
            angle: std::f64::consts::PI * (slot as f64 + rng.random_range(-0.2..0.2)) / k,
            offset: rng.random_range(-0.25..0.25) * half,
            blob_x: rng.random_range(-0.5..0.5) * half,
            blob_y: rng.random_range(-0.5..0.5) * half,
            blob_sign: if rng.random::<bool>() { 1.0 } else { -1.0 },
        })
        .collect()
}

fn render(spec: &SyntheticSpec, proto: &Prototype, rng: &mut ChaCha8Rng, out: &mut Vec<f32>) {
    let s = spec.image_size;
    let center = (s as f64 - 1.0) / 2.0;
    let dx = rng.random_range(-1.0..=1.0);
    let dy = rng.random_range(-1.0..=1.0);
    let angle = proto.angle + rng.random_range(-0.08..0.08);
    let amp = rng.random_range(0.6..1.0);
    let (sin, cos) = angle.sin_cos();
    let bar_width = 0.06 * s as f64;
    let blob_width = 0.1 * s as f64;
    for y in 0..s {
        for x in 0..s {
            let px = x as f64 - center - dx;
            let py = y as f64 - center - dy;
            let d = px * sin - py * cos - proto.offset;
            let bar = (-d * d / (2.0 * bar_width * bar_width)).exp();
            let (bx, by) = (px - proto.blob_x, py - proto.blob_y);
            let blob = proto.blob_sign * 0.8 * (-(bx * bx + by * by) / (2.0 * blob_width * blob_width)).exp();
            let intensity = amp * (bar + blob).clamp(0.0, 1.0);
            let noise: f64 = StandardNormal.sample(rng);
            let v = (2.0 * intensity - 1.0 + spec.noise * noise).clamp(-1.0, 1.0);
            out.push(v as f32);
        }
    }
}

fn make(spec: &SyntheticSpec, protos: &[Prototype], per_class: usize, split: Split) -> Result<Dataset> {
    let stream = match split {
        Split::Train => 0,
        Split::Test => 1,
    };
    let mut rng = rng::stream(spec.pattern_seed, &[rng::tag::SYNTH_SAMPLES, stream]);
    let n = per_class * spec.num_classes;
    let mut images = Vec::with_capacity(n * spec.image_size * spec.image_size);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % spec.num_classes;
        render(spec, &protos[c], &mut rng, &mut images);
        labels.push(c as u8);
    }
    Dataset::new(
        spec.name(),
        split,
        (spec.image_size, spec.image_size),
        spec.num_classes,
        images,
        labels,
    )
}

/// Generate a train/test pair. Labels cycle through the classes, so every
/// prefix of the training set is as balanced as possible.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<(Dataset, Dataset)> {
    if spec.image_size < 8 {
        return Err(Error::validation("synthetic images must be at least 8x8"));
    }
    if spec.num_classes < 2 || spec.num_classes > 256 {
        return Err(Error::validation("synthetic datasets need 2..=256 classes"));
    }
    if spec.samples_per_class == 0 || spec.test_per_class == 0 {
        return Err(Error::validation("synthetic datasets need samples in every class"));
    }
    if !(spec.noise >= 0.0 && spec.noise.is_finite()) {
        return Err(Error::validation("noise must be a non-negative number"));
    }
    let protos = prototypes(spec);
    Ok((
        make(spec, &protos, spec.samples_per_class, Split::Train)?,
        make(spec, &protos, spec.test_per_class, Split::Test)?,
    ))
}
