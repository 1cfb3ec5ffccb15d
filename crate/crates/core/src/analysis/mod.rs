//! Metrics, spectra of per-level outputs, encoding-frequency analysis and
//! parameter sweeps.

mod dft;
mod experiment;
mod metrics;
pub mod plot;
mod spectrum;
mod sweep;

pub use dft::{bank_bins, dft_bin_of_frequency, dft_magnitude_image, overlay_bins, DftBin};
pub use experiment::{evaluate, extract_mesh, run_fit, run_fit_observed, shape_chamfer, BaseC, Experiment, FitOutcome, FitTask};
pub use metrics::{mse, mse_slices, psnr, psnr_from_mse};
pub use spectrum::{
    default_band_edges, field_spectrum, level_spectrum, spectral_centroid, LevelSpectrum, SpectrumGrid, SpectrumReport,
};
pub use sweep::{best_value, sweep, SweepKind, SweepRecord, SweepResult, SweepSummary};
