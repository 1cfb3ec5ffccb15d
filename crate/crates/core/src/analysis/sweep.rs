//! Parameter sweeps over independent (value, seed) cells.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{PinError, Result};

use super::experiment::{run_fit, Experiment, FitTask};
use super::plot::LinePlot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepKind {
    /// Encoding standard deviation σ.
    Sigma,
    /// Number of encoding frequencies.
    Density,
    Levels,
    /// Hidden width.
    ModelSize,
    /// Fraction of image pixels used for training.
    Sparsity,
}

impl SweepKind {
    pub fn name(self) -> &'static str {
        match self {
            SweepKind::Sigma => "sigma",
            SweepKind::Density => "density",
            SweepKind::Levels => "levels",
            SweepKind::ModelSize => "model_size",
            SweepKind::Sparsity => "sparsity",
        }
    }

    /// Experiment with the swept parameter set to `value`.
    pub fn apply(self, exp: &Experiment, value: f64) -> Result<Experiment> {
        let mut e = exp.clone();
        let count = |what: &str| {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(PinError::param(format!("{what} must be a positive integer, got {value}")))
            }
        };
        match self {
            SweepKind::Sigma => e.model.sigma = value,
            SweepKind::Density => e.model.num_features = count("frequency count")?,
            SweepKind::Levels => e.model.levels = count("level count")?,
            SweepKind::ModelSize => e.model.arch.hidden = count("hidden width")?,
            SweepKind::Sparsity => match &mut e.task {
                FitTask::Image { fraction, .. } => *fraction = value,
                _ => return Err(PinError::param("sparsity sweeps need an image task")),
            },
        }
        Ok(e)
    }
}

impl fmt::Display for SweepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepKind {
    type Err = PinError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "sigma" => SweepKind::Sigma,
            "density" => SweepKind::Density,
            "levels" => SweepKind::Levels,
            "model_size" => SweepKind::ModelSize,
            "sparsity" => SweepKind::Sparsity,
            other => return Err(PinError::param(format!("unknown sweep kind `{other}`"))),
        })
    }
}

/// Outcome of one (value, seed) cell. Failures are kept, not propagated.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub value: f64,
    pub seed: u64,
    pub metric: Option<f64>,
    pub final_loss: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub kind: SweepKind,
    pub metric_name: &'static str,
    /// Sorted by value, then seed.
    pub records: Vec<SweepRecord>,
}

/// Per-value aggregate over the successful seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub value: f64,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl SweepResult {
    /// Columns: `kind,value,seed,<metric>,final_loss,error`.
    pub fn to_csv(&self) -> String {
        let mut out = format!("kind,value,seed,{},final_loss,error\n", self.metric_name);
        let opt = |v: Option<f64>| v.map(|v| format!("{v:?}")).unwrap_or_default();
        for r in &self.records {
            let err = r.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
            out.push_str(&format!(
                "{},{:?},{},{},{},{}\n",
                self.kind,
                r.value,
                r.seed,
                opt(r.metric),
                opt(r.final_loss),
                err
            ));
        }
        out
    }

    pub fn summary(&self) -> Vec<SweepSummary> {
        let mut values: Vec<f64> = self.records.iter().map(|r| r.value).collect();
        values.dedup();
        values
            .into_iter()
            .map(|value| {
                let m: Vec<f64> = self.records.iter().filter(|r| r.value == value).filter_map(|r| r.metric).collect();
                let n = m.len();
                let mean = if n == 0 { f64::NAN } else { m.iter().sum::<f64>() / n as f64 };
                let std = if n < 2 {
                    0.0
                } else {
                    (m.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
                };
                SweepSummary { value, mean, std, count: n }
            })
            .collect()
    }

    /// Mean metric against the swept value.
    pub fn plot(&self) -> LinePlot {
        let mut p = LinePlot::new(640, 400);
        p.log_x = matches!(self.kind, SweepKind::Sigma | SweepKind::Density | SweepKind::Sparsity)
            && self.records.iter().all(|r| r.value > 0.0);
        p.add(self.summary().iter().map(|s| (s.value, s.mean)).collect());
        p
    }
}

/// Trains and evaluates every (value, seed) cell. Cells run in parallel;
/// the result is sorted, so it does not depend on scheduling.
pub fn sweep(exp: &Experiment, kind: SweepKind, values: &[f64], seeds: &[u64]) -> Result<SweepResult> {
    if values.is_empty() || seeds.is_empty() {
        return Err(PinError::param("sweep needs at least one value and one seed"));
    }
    let cells: Vec<(f64, u64)> = values.iter().flat_map(|&v| seeds.iter().map(move |&s| (v, s))).collect();
    let mut records: Vec<SweepRecord> = cells
        .par_iter()
        .map(|&(value, seed)| {
            let outcome = kind.apply(exp, value).and_then(|e| run_fit(&e, seed));
            match outcome {
                Ok(o) => SweepRecord {
                    value,
                    seed,
                    metric: Some(o.metric),
                    final_loss: o.history.final_record().map(|r| r.recon),
                    error: None,
                },
                Err(e) => SweepRecord { value, seed, metric: None, final_loss: None, error: Some(e.to_string()) },
            }
        })
        .collect();
    records.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.seed.cmp(&b.seed)));
    Ok(SweepResult { kind, metric_name: exp.task.metric_name(), records })
}

/// The best value per the task metric (max PSNR, min Chamfer),
/// ignoring failed cells.
pub fn best_value(summary: &[SweepSummary], higher_is_better: bool) -> Option<f64> {
    summary
        .iter()
        .filter(|s| s.mean.is_finite() || (higher_is_better && s.mean == f64::INFINITY))
        .max_by(|a, b| if higher_is_better { a.mean.total_cmp(&b.mean) } else { b.mean.total_cmp(&a.mean) })
        .map(|s| s.value)
}
