//! Training data for the three task families.

mod image;
mod signal;
mod tsdf;

pub use image::{pixel_coords, sample_pixels, ImageGrid, PixelSplit};
pub use signal::{sample_signal, SineTerm, Signal1D};
pub use tsdf::{sample_tsdf, sample_tsdf_cached, SampleMix, SdfSampleSet, TsdfParams};

use crate::error::{PinError, Result};
use crate::numerics::Tensor2;

/// Coordinates in `[-1, 1]^D` with their targets, one row each.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub coords: Tensor2,
    pub targets: Tensor2,
}

impl SampleBatch {
    pub fn new(coords: Tensor2, targets: Tensor2) -> Result<Self> {
        if coords.rows() != targets.rows() {
            return Err(PinError::shape(format!(
                "{} coordinates but {} targets",
                coords.rows(),
                targets.rows()
            )));
        }
        Ok(SampleBatch { coords, targets })
    }

    pub fn len(&self) -> usize {
        self.coords.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.rows() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.coords.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.targets.cols()
    }

    pub fn check_model(&self, input_dim: usize, output_dim: usize) -> Result<()> {
        if self.input_dim() != input_dim || self.output_dim() != output_dim {
            return Err(PinError::shape(format!(
                "samples are {}D → {}D, model is {input_dim}D → {output_dim}D",
                self.input_dim(),
                self.output_dim()
            )));
        }
        Ok(())
    }

    pub fn coords_in_unit_cube(&self) -> bool {
        self.coords.data().iter().all(|v| (-1.0..=1.0).contains(v))
    }
}
