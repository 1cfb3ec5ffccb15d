//! DFT spectra of per-level residuals.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{PinError, Result};
use crate::model::PinModel;
use crate::numerics::Tensor2;
use crate::tasks::pixel_coords;

/// Dense evaluation grid for a spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumGrid {
    /// `n` evenly spaced points over `[-1, 1]`.
    Line(usize),
    /// Pixel centres of a `width × height` image.
    Image { width: usize, height: usize },
}

impl SpectrumGrid {
    pub fn coords(&self) -> Result<Tensor2> {
        match *self {
            SpectrumGrid::Line(n) if n >= 2 => {
                Ok(Tensor2::from_fn(n, 1, |i, _| -1.0 + 2.0 * i as f64 / (n - 1) as f64))
            }
            SpectrumGrid::Image { width, height } if width >= 1 && height >= 1 => Ok(pixel_coords(width, height)),
            _ => Err(PinError::param(format!("degenerate spectrum grid {self:?}"))),
        }
    }

    fn len(&self) -> usize {
        match *self {
            SpectrumGrid::Line(n) => n,
            SpectrumGrid::Image { width, height } => width * height,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelSpectrum {
    /// One-sided (1D) or radially averaged (2D) DFT magnitude, indexed by
    /// integer frequency.
    pub magnitude: Vec<f64>,
    pub centroid: f64,
    /// `Σ x²` of the weighted residual over the grid, all channels.
    pub energy: f64,
    /// Energy per band; bands follow [`SpectrumReport::band_edges`].
    pub band_energy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    pub grid: SpectrumGrid,
    /// Band `k` covers radial frequencies in `[edges[k], edges[k+1])`; the
    /// last band is closed above.
    pub band_edges: Vec<f64>,
    pub levels: Vec<LevelSpectrum>,
}

impl SpectrumReport {
    pub fn centroids(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.centroid).collect()
    }

    /// Worst relative gap between a level's energy and the sum of its bands.
    pub fn parseval_error(&self) -> f64 {
        self.levels
            .iter()
            .map(|l| {
                let sum: f64 = l.band_energy.iter().sum();
                if l.energy == 0.0 { sum.abs() } else { (sum - l.energy).abs() / l.energy }
            })
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,centroid,energy");
        for k in 0..self.band_edges.len().saturating_sub(1) {
            out.push_str(&format!(",band{k}"));
        }
        out.push('\n');
        for (l, s) in self.levels.iter().enumerate() {
            out.push_str(&format!("{},{:?},{:?}", l + 1, s.centroid, s.energy));
            for e in &s.band_energy {
                out.push_str(&format!(",{e:?}"));
            }
            out.push('\n');
        }
        out
    }
}

/// `Σ f·|F(f)| / Σ |F(f)|`, zero for an all-zero spectrum.
pub fn spectral_centroid(magnitude: &[f64]) -> f64 {
    let total: f64 = magnitude.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    magnitude.iter().enumerate().map(|(f, m)| f as f64 * m).sum::<f64>() / total
}

/// Signed frequency of DFT bin `k` out of `n`.
fn signed_bin(k: usize, n: usize) -> f64 {
    if k <= n / 2 { k as f64 } else { k as f64 - n as f64 }
}

/// Full complex DFT of a real `width × height` field stored row-major.
pub(crate) fn dft2(values: &[f64], width: usize, height: usize) -> Vec<Complex<f64>> {
    let mut planner = FftPlanner::new();
    let mut buf: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
    let row_fft = planner.plan_fft_forward(width);
    for row in buf.chunks_mut(width) {
        row_fft.process(row);
    }
    if height > 1 {
        let col_fft = planner.plan_fft_forward(height);
        let mut col = vec![Complex::new(0.0, 0.0); height];
        for x in 0..width {
            for y in 0..height {
                col[y] = buf[y * width + x];
            }
            col_fft.process(&mut col);
            for y in 0..height {
                buf[y * width + x] = col[y];
            }
        }
    }
    buf
}

/// Per-bin radial frequency, `|F|` and power normalised so the power sums
/// to `Σ x²`.
fn spectrum_bins(values: &[f64], width: usize, height: usize) -> Vec<(f64, f64, f64)> {
    let n = (width * height) as f64;
    dft2(values, width, height)
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let (kx, ky) = (signed_bin(i % width, width), signed_bin(i / width, height));
            let r = (kx * kx + ky * ky).sqrt();
            (r, c.norm() / n, c.norm_sqr() / n)
        })
        .collect()
}

/// One-sided magnitude for 1D (`height == 1`), otherwise the average over
/// integer-radius annuli.
fn radial_magnitude(bins: &[(f64, f64, f64)], width: usize, height: usize) -> Vec<f64> {
    let max_r = if height == 1 {
        width / 2
    } else {
        (((width / 2).pow(2) + (height / 2).pow(2)) as f64).sqrt().round() as usize
    };
    let mut sum = vec![0.0; max_r + 1];
    let mut count = vec![0usize; max_r + 1];
    for &(r, mag, _) in bins {
        let k = r.round() as usize;
        if k <= max_r {
            sum[k] += mag;
            count[k] += 1;
        }
    }
    if height == 1 {
        // Fold the negative frequencies onto the positive ones.
        return sum;
    }
    sum.iter().zip(&count).map(|(s, &c)| if c == 0 { 0.0 } else { s / c as f64 }).collect()
}

/// Spectrum of one field stored row-major with `channels` interleaved
/// components.
pub fn field_spectrum(
    values: &[f64],
    width: usize,
    height: usize,
    channels: usize,
    band_edges: &[f64],
) -> Result<LevelSpectrum> {
    if values.len() != width * height * channels || width == 0 || height == 0 || channels == 0 {
        return Err(PinError::shape(format!(
            "{} values for a {width}x{height}x{channels} field",
            values.len()
        )));
    }
    if band_edges.len() < 2 || band_edges.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(PinError::param("band edges must be strictly increasing, at least two"));
    }
    let mut magnitude: Vec<f64> = Vec::new();
    let mut band_energy = vec![0.0; band_edges.len() - 1];
    let mut energy = 0.0;
    let last = band_edges.len() - 2;
    for ch in 0..channels {
        let plane: Vec<f64> = values.iter().skip(ch).step_by(channels).copied().collect();
        energy += plane.iter().map(|v| v * v).sum::<f64>();
        let bins = spectrum_bins(&plane, width, height);
        for &(r, _, p) in &bins {
            let band = band_edges.windows(2).position(|w| r >= w[0] && r < w[1]);
            let band = band.unwrap_or(if r >= band_edges[last + 1] { last } else { 0 });
            band_energy[band] += p;
        }
        let m = radial_magnitude(&bins, width, height);
        if magnitude.is_empty() {
            magnitude = vec![0.0; m.len()];
        }
        for (acc, v) in magnitude.iter_mut().zip(&m) {
            *acc += v / channels as f64;
        }
    }
    let centroid = spectral_centroid(&magnitude);
    Ok(LevelSpectrum { magnitude, centroid, energy, band_energy })
}

/// Evenly spaced band edges from 0 to the largest radial frequency of the
/// grid.
pub fn default_band_edges(grid: SpectrumGrid, bands: usize) -> Vec<f64> {
    let max_r = match grid {
        SpectrumGrid::Line(n) => (n / 2) as f64,
        SpectrumGrid::Image { width, height } => (((width / 2).pow(2) + (height / 2).pow(2)) as f64).sqrt(),
    };
    (0..=bands).map(|k| max_r * k as f64 / bands as f64).collect()
}

/// Separable Hann taper over a `width × height` grid. The residuals are not
/// periodic on the grid, and without a taper the wrap-around jump leaks a
/// `1/f` tail into every bin that swamps the centroid.
fn hann_taper(width: usize, height: usize) -> Vec<f64> {
    let w1 = |i: usize, n: usize| {
        if n < 2 { 1.0 } else { 0.5 * (1.0 - (std::f64::consts::TAU * i as f64 / (n - 1) as f64).cos()) }
    };
    (0..width * height).map(|k| w1(k % width, width) * w1(k / width, height)).collect()
}

/// Spectra of every weighted residual `w_l·R_l` on a dense grid, tapered by a
/// Hann window. Energies are those of the tapered fields.
pub fn level_spectrum(model: &PinModel, grid: SpectrumGrid, bands: usize) -> Result<SpectrumReport> {
    let x = grid.coords()?;
    let outputs = model.predict_levels(&x)?;
    let band_edges = default_band_edges(grid, bands.max(1));
    let (w, h) = match grid {
        SpectrumGrid::Line(n) => (n, 1),
        SpectrumGrid::Image { width, height } => (width, height),
    };
    debug_assert_eq!(w * h, grid.len());
    let taper = hann_taper(w, h);
    let channels = model.output_dim();
    let levels = outputs
        .residuals
        .iter()
        .zip(model.level_weights())
        .map(|(r, &wl)| {
            let v: Vec<f64> = r.data().iter().enumerate().map(|(i, x)| x * wl * taper[i / channels]).collect();
            field_spectrum(&v, w, h, channels, &band_edges)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectrumReport { grid, band_edges, levels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone(n: usize, k: f64) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * k * i as f64 / n as f64).sin()).collect()
    }

    #[test]
    fn zero_field_has_zero_centroid() {
        let edges = [0.0, 8.0, 16.0];
        let s = field_spectrum(&[0.0; 32], 32, 1, 1, &edges).unwrap();
        assert_eq!(s.centroid, 0.0);
        assert!(s.magnitude.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn pure_tone_peaks_at_its_bin() {
        let edges = [0.0, 4.0, 32.0];
        let s = field_spectrum(&tone(64, 5.0), 64, 1, 1, &edges).unwrap();
        assert!((s.centroid - 5.0).abs() < 1e-9);
        assert!((s.magnitude[5] - 1.0).abs() < 1e-9);
        assert!(s.band_energy[0] < 1e-18 && (s.band_energy[1] - 32.0).abs() < 1e-9);
    }

    #[test]
    fn centroids_increase_with_tone_frequency() {
        let edges = [0.0, 32.0];
        let c: Vec<f64> = [1.0, 3.0, 7.0, 15.0]
            .iter()
            .map(|&k| field_spectrum(&tone(64, k), 64, 1, 1, &edges).unwrap().centroid)
            .collect();
        assert!(c.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn parseval_holds_for_random_2d_fields() {
        let (w, h) = (12, 10);
        let values: Vec<f64> = (0..w * h * 3).map(|i| ((i * 7919) % 101) as f64 / 50.0 - 1.0).collect();
        let edges = default_band_edges(SpectrumGrid::Image { width: w, height: h }, 4);
        let s = field_spectrum(&values, w, h, 3, &edges).unwrap();
        let sum: f64 = s.band_energy.iter().sum();
        assert!((sum - s.energy).abs() / s.energy < 1e-12);
    }

    #[test]
    fn radial_average_of_2d_tone() {
        let (w, h) = (16, 16);
        let values: Vec<f64> = (0..w * h).map(|i| (2.0 * PI * 3.0 * (i % w) as f64 / w as f64).cos()).collect();
        let edges = default_band_edges(SpectrumGrid::Image { width: w, height: h }, 2);
        let s = field_spectrum(&values, w, h, 1, &edges).unwrap();
        let peak = s.magnitude.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert_eq!(peak, 3);
    }

    #[test]
    fn bad_inputs() {
        assert!(field_spectrum(&[0.0; 5], 4, 1, 1, &[0.0, 1.0]).is_err());
        assert!(field_spectrum(&[0.0; 4], 4, 1, 1, &[1.0, 1.0]).is_err());
    }
}
