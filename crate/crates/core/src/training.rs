//! Losses and the training loop.
//!
//! The objective for the progressive model is
//! `L_r(S_L, target) + λ · Σ_{l<L} L_r(S_l, target)`: the reconstruction loss
//! on the final composite plus a regulariser pulling every intermediate
//! composite towards the target. The final level is not repeated inside the
//! regulariser.

use std::time::Instant;

use rand::Rng;

use crate::error::{PinError, Result};
use crate::model::{BaselineModel, LevelOutputs, PinModel};
use crate::numerics::{AdamConfig, Parameterized, Tensor2};
use crate::rng::derive;
use crate::tasks::SampleBatch;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    L1,
    L2,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::L1 => "l1",
            LossKind::L2 => "l2",
        }
    }
}

fn check_congruent(pred: &Tensor2, target: &Tensor2) -> Result<()> {
    if !pred.same_shape(target) {
        return Err(PinError::shape(format!(
            "prediction is {:?} but target is {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    Ok(())
}

/// Mean of `|d|` or `d²` over all elements.
pub fn reconstruction_loss(pred: &Tensor2, target: &Tensor2, kind: LossKind) -> Result<f64> {
    check_congruent(pred, target)?;
    let n = pred.data().len().max(1) as f64;
    let sum: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| match kind {
            LossKind::L1 => (p - t).abs(),
            LossKind::L2 => (p - t) * (p - t),
        })
        .sum();
    Ok(sum / n)
}

/// `scale · ∂L_r/∂pred`.
fn reconstruction_grad(pred: &Tensor2, target: &Tensor2, kind: LossKind, scale: f64) -> Tensor2 {
    let n = pred.data().len().max(1) as f64;
    Tensor2::from_fn(pred.rows(), pred.cols(), |i, j| {
        let d = pred.get(i, j) - target.get(i, j);
        let g = match kind {
            LossKind::L1 => {
                if d > 0.0 {
                    1.0
                } else if d < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            LossKind::L2 => 2.0 * d,
        };
        scale * g / n
    })
}

/// Sum of reconstruction losses of the intermediate composites `S_1..S_{L-1}`.
pub fn regularization_loss(outputs: &LevelOutputs, target: &Tensor2, kind: LossKind) -> Result<f64> {
    let n = outputs.composites.len();
    let mut sum = 0.0;
    for s in outputs.composites.iter().take(n.saturating_sub(1)) {
        sum += reconstruction_loss(s, target, kind)?;
    }
    Ok(sum)
}

pub fn total_loss(outputs: &LevelOutputs, target: &Tensor2, kind: LossKind, reg_weight: f64) -> Result<f64> {
    Ok(reconstruction_loss(outputs.final_output(), target, kind)? + reg_weight * regularization_loss(outputs, target, kind)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub recon: f64,
    pub reg: f64,
    /// Reconstruction loss of every composite, `S_1` first.
    pub per_level: Vec<f64>,
}

/// A model the training loop can optimise.
pub trait FieldModel: Parameterized + Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    /// Final field values for arbitrarily many rows.
    fn predict(&self, x: &Tensor2) -> Result<Tensor2>;
    /// Loss on one batch; with `grad` set the gradients are accumulated into
    /// the parameter store.
    fn batch_loss(&mut self, x: &Tensor2, target: &Tensor2, kind: LossKind, reg_weight: f64, grad: bool) -> Result<LossParts>;
}

impl FieldModel for PinModel {
    fn input_dim(&self) -> usize {
        PinModel::input_dim(self)
    }

    fn output_dim(&self) -> usize {
        PinModel::output_dim(self)
    }

    fn predict(&self, x: &Tensor2) -> Result<Tensor2> {
        PinModel::predict(self, x)
    }

    fn batch_loss(&mut self, x: &Tensor2, target: &Tensor2, kind: LossKind, reg_weight: f64, grad: bool) -> Result<LossParts> {
        let (outputs, trace) = if grad {
            let (o, t) = self.forward_traced(x)?;
            (o, Some(t))
        } else {
            (self.forward(x)?, None)
        };
        let per_level = outputs
            .composites
            .iter()
            .map(|s| reconstruction_loss(s, target, kind))
            .collect::<Result<Vec<_>>>()?;
        let recon = *per_level.last().expect("at least one level");
        let reg: f64 = per_level[..per_level.len() - 1].iter().sum();
        if let Some(trace) = trace {
            let last = outputs.composites.len() - 1;
            let upstream: Vec<Tensor2> = outputs
                .composites
                .iter()
                .enumerate()
                .map(|(l, s)| {
                    if l == last {
                        reconstruction_grad(s, target, kind, 1.0)
                    } else if reg_weight == 0.0 {
                        Tensor2::zeros(s.rows(), s.cols())
                    } else {
                        reconstruction_grad(s, target, kind, reg_weight)
                    }
                })
                .collect();
            self.backward(trace, &upstream, false)?;
        }
        Ok(LossParts { total: recon + reg_weight * reg, recon, reg, per_level })
    }
}

impl FieldModel for BaselineModel {
    fn input_dim(&self) -> usize {
        BaselineModel::input_dim(self)
    }

    fn output_dim(&self) -> usize {
        BaselineModel::output_dim(self)
    }

    fn predict(&self, x: &Tensor2) -> Result<Tensor2> {
        BaselineModel::predict(self, x)
    }

    fn batch_loss(&mut self, x: &Tensor2, target: &Tensor2, kind: LossKind, _reg_weight: f64, grad: bool) -> Result<LossParts> {
        let (pred, trace) = if grad {
            let (p, t) = self.forward_traced(x)?;
            (p, Some(t))
        } else {
            (self.forward(x)?, None)
        };
        let recon = reconstruction_loss(&pred, target, kind)?;
        if let Some(trace) = trace {
            self.backward(trace, &reconstruction_grad(&pred, target, kind, 1.0))?;
        }
        Ok(LossParts { total: recon, recon, reg: 0.0, per_level: vec![recon] })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub iterations: u64,
    /// `None` trains on the full sample set every step.
    pub batch_size: Option<usize>,
    pub adam: AdamConfig,
    pub reg_weight: f64,
    pub loss: LossKind,
    pub seed: u64,
    /// Evaluation period in steps; 0 records only the start and the end.
    pub eval_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 1000,
            batch_size: None,
            adam: AdamConfig::default(),
            reg_weight: 0.01,
            loss: LossKind::L2,
            seed: 0,
            eval_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.reg_weight >= 0.0) {
            return Err(PinError::param("regularisation weight must be non-negative"));
        }
        if self.batch_size == Some(0) {
            return Err(PinError::param("batch size must be positive"));
        }
        if !(self.adam.lr > 0.0) {
            return Err(PinError::param("learning rate must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub step: u64,
    pub total: f64,
    pub recon: f64,
    pub reg: f64,
    pub metric: Option<f64>,
    /// Mean wall-clock time of the steps since the previous record.
    pub ms_per_step: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub records: Vec<EvalRecord>,
    /// Total batch loss of every optimisation step.
    pub step_losses: Vec<f64>,
}

impl TrainHistory {
    /// `step,total,recon,reg,metric,ms_per_step`. Timing is wall-clock and
    /// therefore left empty unless `include_timing` is set.
    pub fn to_csv(&self, include_timing: bool) -> String {
        let mut s = String::from("step,total,recon,reg,metric,ms_per_step\n");
        for r in &self.records {
            let metric = r.metric.map(fmt_f64).unwrap_or_default();
            let ms = if include_timing { format!("{:.4}", r.ms_per_step) } else { String::new() };
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.step,
                fmt_f64(r.total),
                fmt_f64(r.recon),
                fmt_f64(r.reg),
                metric,
                ms
            ));
        }
        s
    }

    /// Moving average of the step losses over `window` steps ending at `step`.
    pub fn smoothed_loss(&self, step: usize, window: usize) -> Option<f64> {
        if self.step_losses.is_empty() || step >= self.step_losses.len() {
            return None;
        }
        let lo = (step + 1).saturating_sub(window.max(1));
        let w = &self.step_losses[lo..=step];
        Some(w.iter().sum::<f64>() / w.len() as f64)
    }

    pub fn final_record(&self) -> Option<&EvalRecord> {
        self.records.last()
    }
}

/// Shortest round-trip representation, so CSVs are byte-stable.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Metric evaluated at every record (e.g. held-out PSNR).
pub type MetricFn<'a, M> = &'a (dyn Fn(&M) -> Result<f64> + Sync);

/// Runs `cfg.iterations` steps of batch sampling, forward, loss, backward
/// and Adam. Batches are drawn uniformly with replacement from a dedicated
/// ChaCha stream, so two runs with the same configuration are identical.
pub fn train<M: FieldModel>(
    model: &mut M,
    data: &SampleBatch,
    cfg: &TrainConfig,
    metric: Option<MetricFn<'_, M>>,
) -> Result<TrainHistory> {
    train_observed(model, data, cfg, metric, &mut |_, _| {})
}

/// [`train`] that also hands the model to `observer` after every record.
pub fn train_observed<M: FieldModel>(
    model: &mut M,
    data: &SampleBatch,
    cfg: &TrainConfig,
    metric: Option<MetricFn<'_, M>>,
    observer: &mut dyn FnMut(u64, &M),
) -> Result<TrainHistory> {
    cfg.validate()?;
    data.check_model(model.input_dim(), model.output_dim())?;
    if data.is_empty() {
        return Err(PinError::param("training set is empty"));
    }
    let n = data.len();
    let mut rng = derive(cfg.seed, 3);
    let mut history = TrainHistory::default();

    let record = |model: &mut M, step: u64, ms: f64, history: &mut TrainHistory| -> Result<()> {
        let parts = model.batch_loss(&data.coords, &data.targets, cfg.loss, cfg.reg_weight, false)?;
        let metric = metric.map(|f| f(model)).transpose()?;
        history.records.push(EvalRecord {
            step,
            total: parts.total,
            recon: parts.recon,
            reg: parts.reg,
            metric,
            ms_per_step: ms,
        });
        Ok(())
    };
    record(model, 0, 0.0, &mut history)?;
    observer(0, model);

    model.params_mut().zero_grad();
    let mut since = Instant::now();
    let mut steps_since = 0u64;
    for step in 1..=cfg.iterations {
        let parts = match cfg.batch_size {
            Some(b) => {
                let idx: Vec<usize> = (0..b).map(|_| rng.random_range(0..n)).collect();
                let x = data.coords.gather_rows(&idx);
                let t = data.targets.gather_rows(&idx);
                model.batch_loss(&x, &t, cfg.loss, cfg.reg_weight, true)?
            }
            _ => model.batch_loss(&data.coords, &data.targets, cfg.loss, cfg.reg_weight, true)?,
        };
        if !parts.total.is_finite() {
            return Err(PinError::Training { step, reason: format!("loss became {}", parts.total) });
        }
        history.step_losses.push(parts.total);
        model.params_mut().adam_step(&cfg.adam).map_err(|e| PinError::Training { step, reason: e.to_string() })?;
        steps_since += 1;
        let due = step == cfg.iterations || (cfg.eval_every > 0 && step % cfg.eval_every == 0);
        if due {
            let ms = since.elapsed().as_secs_f64() * 1e3 / steps_since as f64;
            record(model, step, ms, &mut history)?;
            observer(step, model);
            since = Instant::now();
            steps_since = 0;
        }
    }
    Ok(history)
}
