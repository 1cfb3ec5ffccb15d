use std::path::Path;

use image::{DynamicImage, GrayImage, RgbImage};
use rand::seq::SliceRandom;

use crate::error::{PinError, Result};
use crate::numerics::Tensor2;
use crate::rng::derive;

use super::SampleBatch;

/// Row-major image with interleaved channels and values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageGrid {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(PinError::param("image must be non-empty"));
        }
        if channels != 1 && channels != 3 {
            return Err(PinError::param(format!("images have 1 or 3 channels, got {channels}")));
        }
        if data.len() != width * height * channels {
            return Err(PinError::shape("pixel buffer does not match image dimensions"));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(PinError::param(format!("pixel value {v} outside [0, 1]")));
        }
        Ok(ImageGrid { width, height, channels, data })
    }

    pub fn constant(width: usize, height: usize, value: &[f64]) -> Result<Self> {
        let data = (0..width * height).flat_map(|_| value.iter().copied()).collect();
        Self::new(width, height, value.len(), data)
    }

    /// Builds an image from model output (one row per pixel), clamping to `[0, 1]`.
    pub fn from_tensor_clamped(width: usize, height: usize, t: &Tensor2) -> Result<Self> {
        t.ensure_shape(width * height, t.cols(), "image tensor")?;
        let data = t.data().iter().map(|v| v.clamp(0.0, 1.0)).collect();
        Self::new(width, height, t.cols(), data)
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let img = image::open(path.as_ref())?;
        Ok(Self::from_dynamic(&img))
    }

    pub fn from_dynamic(img: &DynamicImage) -> Self {
        let (w, h) = (img.width() as usize, img.height() as usize);
        if img.color().has_color() {
            let rgb = img.to_rgb8();
            let data = rgb.as_raw().iter().map(|&v| v as f64 / 255.0).collect();
            ImageGrid { width: w, height: h, channels: 3, data }
        } else {
            let g = img.to_luma8();
            let data = g.as_raw().iter().map(|&v| v as f64 / 255.0).collect();
            ImageGrid { width: w, height: h, channels: 1, data }
        }
    }

    pub fn to_dynamic(&self) -> DynamicImage {
        let bytes: Vec<u8> = self.data.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
        let (w, h) = (self.width as u32, self.height as u32);
        if self.channels == 3 {
            DynamicImage::ImageRgb8(RgbImage::from_raw(w, h, bytes).expect("buffer size"))
        } else {
            DynamicImage::ImageLuma8(GrayImage::from_raw(w, h, bytes).expect("buffer size"))
        }
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_dynamic().save_with_format(path.as_ref(), image::ImageFormat::Png)?;
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn num_pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn pixel(&self, index: usize) -> &[f64] {
        &self.data[index * self.channels..(index + 1) * self.channels]
    }

    /// Per-channel arithmetic mean.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.channels];
        for p in self.data.chunks(self.channels) {
            for (a, v) in m.iter_mut().zip(p) {
                *a += v;
            }
        }
        let n = self.num_pixels() as f64;
        m.iter_mut().for_each(|a| *a /= n);
        m
    }

    /// All pixels as a `num_pixels × channels` tensor.
    pub fn to_tensor(&self) -> Tensor2 {
        Tensor2::from_vec(self.num_pixels(), self.channels, self.data.clone()).expect("image shape")
    }

    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<ImageGrid> {
        if x0 + w > self.width || y0 + h > self.height {
            return Err(PinError::param("crop window exceeds the image"));
        }
        let mut data = Vec::with_capacity(w * h * self.channels);
        for y in y0..y0 + h {
            let start = (y * self.width + x0) * self.channels;
            data.extend_from_slice(&self.data[start..start + w * self.channels]);
        }
        ImageGrid::new(w, h, self.channels, data)
    }
}

/// Pixel-centre coordinates in `[-1, 1]²`, row-major, `x` (column) first.
pub fn pixel_coords(width: usize, height: usize) -> Tensor2 {
    Tensor2::from_fn(width * height, 2, |p, d| {
        let (col, row) = (p % width, p / width);
        if d == 0 {
            (col as f64 + 0.5) / width as f64 * 2.0 - 1.0
        } else {
            (row as f64 + 0.5) / height as f64 * 2.0 - 1.0
        }
    })
}

/// Training pixels and the held-out complement.
#[derive(Debug, Clone)]
pub struct PixelSplit {
    pub train: SampleBatch,
    pub held_out: SampleBatch,
    pub train_indices: Vec<usize>,
    pub held_out_indices: Vec<usize>,
}

/// Draws `floor(fraction · W · H)` distinct pixels uniformly without
/// replacement: the prefix of a seeded permutation. The rest is held out.
pub fn sample_pixels(img: &ImageGrid, fraction: f64, seed: u64) -> Result<PixelSplit> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(PinError::param(format!("sampling fraction {fraction} outside (0, 1]")));
    }
    let n = img.num_pixels();
    let k = (fraction * n as f64).floor() as usize;
    if k == 0 {
        return Err(PinError::param("sampling fraction selects no pixels"));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut derive(seed, 4));
    let held_out_indices = perm.split_off(k);
    let train_indices = perm;
    let coords = pixel_coords(img.width(), img.height());
    let targets = img.to_tensor();
    let batch = |idx: &[usize]| SampleBatch { coords: coords.gather_rows(idx), targets: targets.gather_rows(idx) };
    Ok(PixelSplit {
        train: batch(&train_indices),
        held_out: batch(&held_out_indices),
        train_indices,
        held_out_indices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn ramp(w: usize, h: usize) -> ImageGrid {
        let data = (0..w * h).map(|i| i as f64 / (w * h) as f64).collect();
        ImageGrid::new(w, h, 1, data).unwrap()
    }

    #[test]
    fn full_fraction_covers_every_pixel_once() {
        let img = ramp(7, 5);
        let s = sample_pixels(&img, 1.0, 3).unwrap();
        let set: BTreeSet<_> = s.train_indices.iter().copied().collect();
        assert_eq!(set.len(), 35);
        assert!(s.held_out.is_empty());
    }

    #[test]
    fn partial_fraction_counts_and_uniqueness() {
        let img = ramp(16, 16);
        for (fraction, expect) in [(0.5, 128), (0.1, 25), (0.02, 5)] {
            let s = sample_pixels(&img, fraction, 9).unwrap();
            assert_eq!(s.train.len(), expect);
            let train: BTreeSet<_> = s.train_indices.iter().copied().collect();
            let held: BTreeSet<_> = s.held_out_indices.iter().copied().collect();
            assert_eq!(train.len(), expect);
            assert!(train.is_disjoint(&held));
            assert_eq!(train.union(&held).count(), 256);
            for (row, &p) in s.train_indices.iter().enumerate() {
                assert_eq!(s.train.targets.row(row), img.pixel(p));
            }
        }
    }

    #[test]
    fn bad_fraction() {
        let img = ramp(4, 4);
        assert!(sample_pixels(&img, 0.0, 0).is_err());
        assert!(sample_pixels(&img, 1.5, 0).is_err());
        assert!(sample_pixels(&img, 0.01, 0).is_err());
    }

    #[test]
    fn pixel_centres_are_normalised() {
        let c = pixel_coords(4, 2);
        assert_eq!(c.row(0), &[-0.75, -0.5]);
        assert_eq!(c.row(7), &[0.75, 0.5]);
    }

    #[test]
    fn mean_and_png_roundtrip() {
        let img = ImageGrid::constant(3, 2, &[0.2, 0.4, 1.0]).unwrap();
        let m = img.mean();
        assert!((m[0] - 0.2).abs() < 1e-15 && (m[2] - 1.0).abs() < 1e-15);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.png");
        let q = ImageGrid::new(2, 1, 3, vec![0.0, 0.5, 1.0, 1.0, 0.0, 0.2]).unwrap();
        q.save_png(&p).unwrap();
        let back = ImageGrid::load_png(&p).unwrap();
        assert_eq!(back.channels(), 3);
        for (a, b) in back.data().iter().zip(q.data()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
    }
}
