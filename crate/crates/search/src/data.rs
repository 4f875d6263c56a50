//! Image classification data: a seeded synthetic generator and the raster
//! file format.
//!
//! Raster layout, all little-endian: six `u32` header words (magic, count,
//! classes, channels, height, width), then `count * channels * height * width`
//! `f64` pixels in NCHW order, then `count` `u32` labels.

use std::f64::consts::PI;

use ddarts_autodiff::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::FormatError;

pub const RASTER_MAGIC: u32 = u32::from_le_bytes(*b"DDRS");

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub images: Tensor,
    pub labels: Vec<usize>,
    pub classes: usize,
}

/// Parameters of the synthetic oriented-texture generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub count: usize,
    pub classes: usize,
    pub channels: usize,
    pub size: usize,
    /// Standard deviation of the additive pixel noise.
    pub noise: f64,
    /// Amplitude of the per-class colour offset.
    pub color_bias: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec { count: 256, classes: 2, channels: 3, size: 8, noise: 0.3, color_bias: 0.5, seed: 0 }
    }
}

impl Dataset {
    /// Sample `i` has label `i % classes`: a sinusoidal grating whose
    /// orientation is set by the class, a random phase, a class-dependent
    /// colour offset per channel and Gaussian noise.
    pub fn synthetic(spec: &SyntheticSpec) -> Dataset {
        let SyntheticSpec { count, classes, channels, size, noise, color_bias, seed } = *spec;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = Vec::with_capacity(count * channels * size * size);
        let mut labels = Vec::with_capacity(count);
        let freq = 2.0 * PI / 4.0;
        for i in 0..count {
            let label = i % classes.max(1);
            let theta = PI * label as f64 / classes as f64;
            let phase = rng.gen_range(0.0..2.0 * PI);
            for ch in 0..channels {
                let bias = color_bias * (2.0 * PI * (label + ch) as f64 / classes as f64).cos();
                for y in 0..size {
                    for x in 0..size {
                        let t = freq * (x as f64 * theta.cos() + y as f64 * theta.sin()) + phase;
                        let n: f64 = rng.sample(StandardNormal);
                        data.push(0.8 * t.sin() + bias + noise * n);
                    }
                }
            }
            labels.push(label);
        }
        Dataset {
            images: Tensor::new(vec![count, channels, size, size], data).expect("sizes agree"),
            labels,
            classes,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `(channels, height, width)` of one image.
    pub fn image_shape(&self) -> (usize, usize, usize) {
        let (_, c, h, w) = self.images.dims4();
        (c, h, w)
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            images: self.images.select_batch(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
        }
    }

    /// Disjoint halves: the first `len / 2` samples train, the rest validate.
    pub fn split_halves(&self) -> (Dataset, Dataset) {
        let half = self.len() / 2;
        let train: Vec<usize> = (0..half).collect();
        let val: Vec<usize> = (half..self.len()).collect();
        (self.subset(&train), self.subset(&val))
    }

    pub fn batch(&self, indices: &[usize]) -> (Tensor, Vec<usize>) {
        (self.images.select_batch(indices), indices.iter().map(|&i| self.labels[i]).collect())
    }

    pub fn to_raster(&self) -> Vec<u8> {
        let (c, h, w) = self.image_shape();
        let mut out = Vec::with_capacity(24 + self.images.len() * 8 + self.len() * 4);
        for word in [RASTER_MAGIC, self.len() as u32, self.classes as u32, c as u32, h as u32, w as u32] {
            out.extend_from_slice(&word.to_le_bytes());
        }
        for v in self.images.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for &l in &self.labels {
            out.extend_from_slice(&(l as u32).to_le_bytes());
        }
        out
    }

    pub fn from_raster(bytes: &[u8]) -> Result<Dataset, FormatError> {
        let mut r = Reader::new(bytes);
        let magic = r.u32()?;
        if magic != RASTER_MAGIC {
            return Err(FormatError::Magic { found: magic });
        }
        let [count, classes, c, h, w] = [r.u32()?, r.u32()?, r.u32()?, r.u32()?, r.u32()?].map(|v| v as usize);
        if classes == 0 || c == 0 || h == 0 || w == 0 {
            return Err(FormatError::Invalid("zero-sized raster dimension".into()));
        }
        let pixels = count * c * h * w;
        let mut data = Vec::with_capacity(pixels);
        for _ in 0..pixels {
            data.push(r.f64()?);
        }
        let mut labels = Vec::with_capacity(count);
        for i in 0..count {
            let l = r.u32()? as usize;
            if l >= classes {
                return Err(FormatError::Invalid(format!("label {l} of sample {i} exceeds {classes} classes")));
            }
            labels.push(l);
        }
        if r.remaining() != 0 {
            return Err(FormatError::Invalid(format!("{} trailing bytes", r.remaining())));
        }
        Ok(Dataset { images: Tensor::new(vec![count, c, h, w], data).expect("sizes agree"), labels, classes })
    }
}

/// Little-endian cursor shared by the binary formats.
pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, offset: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        if self.bytes.len() - self.offset < n {
            return Err(FormatError::Truncated { offset: self.offset, needed: n - (self.bytes.len() - self.offset) });
        }
        let s = &self.bytes[self.offset..self.offset + n];
        self.offset += n;
        Ok(s)
    }

    pub(crate) fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("four bytes")))
    }

    pub(crate) fn f64(&mut self) -> Result<f64, FormatError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("eight bytes")))
    }

    pub(crate) fn remaining(&self) -> usize {
        self.bytes.len() - self.offset
    }
}
