//! Reconstruction metrics.

use crate::error::{PinError, Result};
use crate::numerics::Tensor2;
use crate::tasks::ImageGrid;

/// Mean squared error over all entries.
pub fn mse(pred: &Tensor2, target: &Tensor2) -> Result<f64> {
    target.ensure_shape(pred.rows(), pred.cols(), "mse target")?;
    mse_slices(pred.data(), target.data())
}

pub fn mse_slices(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(PinError::shape(format!("{} predictions vs {} targets", pred.len(), target.len())));
    }
    if pred.is_empty() {
        return Err(PinError::param("mse of an empty set"));
    }
    let sum: f64 = pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(sum / pred.len() as f64)
}

/// PSNR in dB for values in `[0, 1]`. A perfect match yields `f64::INFINITY`.
pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (1.0 / mse).log10()
    }
}

pub fn psnr(pred: &ImageGrid, target: &ImageGrid) -> Result<f64> {
    if (pred.width(), pred.height(), pred.channels()) != (target.width(), target.height(), target.channels()) {
        return Err(PinError::shape(format!(
            "image {}x{}x{} vs {}x{}x{}",
            pred.width(),
            pred.height(),
            pred.channels(),
            target.width(),
            target.height(),
            target.channels()
        )));
    }
    Ok(psnr_from_mse(mse_slices(pred.data(), target.data())?))
}
