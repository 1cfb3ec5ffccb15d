use std::f64::consts::TAU;

use crate::error::{PinError, Result};
use crate::numerics::Tensor2;

use super::SampleBatch;

/// `amplitude · sin(2π · frequency · x + phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SineTerm {
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
}

/// Sum of sinusoids on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal1D {
    terms: Vec<SineTerm>,
}

impl Signal1D {
    pub fn new(terms: Vec<SineTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(PinError::param("a signal needs at least one term"));
        }
        Ok(Signal1D { terms })
    }

    pub fn tone(frequency: f64) -> Self {
        Signal1D { terms: vec![SineTerm { amplitude: 1.0, frequency, phase: 0.0 }] }
    }

    pub fn terms(&self) -> &[SineTerm] {
        &self.terms
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.terms.iter().map(|t| t.amplitude * (TAU * t.frequency * x + t.phase).sin()).sum()
    }

    /// Evaluates at the given coordinates.
    pub fn batch_at(&self, xs: &[f64]) -> SampleBatch {
        let coords = Tensor2::from_fn(xs.len(), 1, |i, _| xs[i]);
        let targets = Tensor2::from_fn(xs.len(), 1, |i, _| self.eval(xs[i]));
        SampleBatch { coords, targets }
    }

    /// Midpoints between consecutive points of the `n`-point grid, which
    /// never coincide with training samples.
    pub fn held_out(&self, n: usize) -> SampleBatch {
        let step = 2.0 / (n - 1) as f64;
        let xs: Vec<f64> = (0..n - 1).map(|i| -1.0 + (i as f64 + 0.5) * step).collect();
        self.batch_at(&xs)
    }
}

/// `n` uniformly spaced samples over `[-1, 1]`, endpoints included.
pub fn sample_signal(sig: &Signal1D, n: usize) -> Result<SampleBatch> {
    if n < 2 {
        return Err(PinError::param("at least two samples are required"));
    }
    let step = 2.0 / (n - 1) as f64;
    let xs: Vec<f64> = (0..n).map(|i| (-1.0 + i as f64 * step).clamp(-1.0, 1.0)).collect();
    Ok(sig.batch_at(&xs))
}
