//! Mapping encoding frequencies onto the DFT grid of an image.

use crate::encoding::FrequencyBank;
use crate::error::{PinError, Result};
use crate::tasks::ImageGrid;

use super::spectrum::dft2;

/// Signed DFT bin for one frequency. `clamped` is set when the raw bin lay
/// outside `[-M/2, M/2]` (per axis) and was pulled onto the border.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DftBin {
    pub bin: Vec<i64>,
    pub clamped: bool,
}

/// Bin `m = round(f·M)` per axis, with `f` in cycles per unit domain length
/// and `M` the number of samples along that axis.
pub fn dft_bin_of_frequency(f: &[f64], dims: &[usize]) -> Result<DftBin> {
    if f.len() != dims.len() || dims.iter().any(|&d| d == 0) {
        return Err(PinError::param(format!("frequency {f:?} does not match dims {dims:?}")));
    }
    let mut clamped = false;
    let bin = f
        .iter()
        .zip(dims)
        .map(|(&fi, &m)| {
            let half = (m / 2) as i64;
            let raw = (fi * m as f64).round();
            if raw.abs() > half as f64 || !raw.is_finite() {
                clamped = true;
                if raw.is_sign_negative() { -half } else { half }
            } else {
                raw as i64
            }
        })
        .collect();
    Ok(DftBin { bin, clamped })
}

/// Bins of every frequency in the bank for a `width × height` image.
pub fn bank_bins(bank: &FrequencyBank, width: usize, height: usize) -> Result<Vec<DftBin>> {
    if bank.input_dim() != 2 {
        return Err(PinError::param("DFT overlay needs a 2D frequency bank"));
    }
    (0..bank.num_features())
        .map(|i| dft_bin_of_frequency(&bank.frequency_cycles(i), &[width, height]))
        .collect()
}

/// Centred, log-scaled DFT magnitude of the channel mean, as RGB so
/// overlays can be coloured.
pub fn dft_magnitude_image(img: &ImageGrid) -> Result<ImageGrid> {
    let (w, h, c) = (img.width(), img.height(), img.channels());
    let gray: Vec<f64> = (0..w * h).map(|i| img.pixel(i).iter().sum::<f64>() / c as f64).collect();
    let buf = dft2(&gray, w, h);
    let logmag: Vec<f64> = buf.iter().map(|z| (1.0 + z.norm()).ln()).collect();
    let max = logmag.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut data = vec![0.0; w * h * 3];
    for y in 0..h {
        for x in 0..w {
            // Shift so that frequency zero sits at (w/2, h/2).
            let (sx, sy) = ((x + w / 2) % w, (y + h / 2) % h);
            let v = logmag[y * w + x] / max;
            data[(sy * w + sx) * 3..(sy * w + sx) * 3 + 3].fill(v);
        }
    }
    ImageGrid::new(w, h, 3, data)
}

/// Marks every bin and its mirror on a centred spectrum image: red when in
/// range, yellow when clamped.
pub fn overlay_bins(spectrum: &mut ImageGrid, bins: &[DftBin]) -> Result<()> {
    if spectrum.channels() != 3 {
        return Err(PinError::param("overlay needs an RGB image"));
    }
    let (w, h) = (spectrum.width() as i64, spectrum.height() as i64);
    let mut data = spectrum.data().to_vec();
    for b in bins {
        let colour = if b.clamped { [1.0, 1.0, 0.0] } else { [1.0, 0.0, 0.0] };
        for sign in [1, -1] {
            let x = (w / 2 + sign * b.bin[0]).clamp(0, w - 1) as usize;
            let y = (h / 2 + sign * b.bin[1]).clamp(0, h - 1) as usize;
            let i = (y * w as usize + x) * 3;
            data[i..i + 3].copy_from_slice(&colour);
        }
    }
    *spectrum = ImageGrid::new(spectrum.width(), spectrum.height(), 3, data)?;
    Ok(())
}
