//! One train-and-evaluate run for each task family.

use std::sync::Arc;

use crate::error::{PinError, Result};
use crate::geometry::{chamfer_distance, marching_cubes, ScalarGrid, SurfaceShape, TriMesh};
use crate::model::{PinConfig, PinModel};
use crate::numerics::Tensor2;
use crate::rng::derive;
use crate::tasks::{sample_pixels, sample_signal, sample_tsdf, ImageGrid, SampleBatch, Signal1D, TsdfParams};
use crate::training::{train_observed, TrainConfig, TrainHistory};

use super::metrics::{mse, psnr_from_mse};

const EVAL_SURFACE_STREAM: u64 = 6;
const EVAL_MESH_STREAM: u64 = 7;

/// How the base component is initialised.
#[derive(Debug, Clone, PartialEq)]
pub enum BaseC {
    Zero,
    /// Image mean for images, mean training target otherwise.
    Mean,
    Value(Vec<f64>),
}

#[derive(Clone)]
pub enum FitTask {
    Signal {
        signal: Signal1D,
        samples: usize,
    },
    Image {
        image: ImageGrid,
        fraction: f64,
    },
    Shape {
        shape: Arc<dyn SurfaceShape + Send>,
        tsdf: TsdfParams,
        grid_res: usize,
        iso: f64,
        /// Surface samples per side for the Chamfer evaluation.
        eval_samples: usize,
    },
}

impl std::fmt::Debug for FitTask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FitTask::Signal { signal, samples } => {
                f.debug_struct("Signal").field("signal", signal).field("samples", samples).finish()
            }
            FitTask::Image { image, fraction } => f
                .debug_struct("Image")
                .field("width", &image.width())
                .field("height", &image.height())
                .field("fraction", fraction)
                .finish(),
            FitTask::Shape { tsdf, grid_res, iso, .. } => f
                .debug_struct("Shape")
                .field("tsdf", tsdf)
                .field("grid_res", grid_res)
                .field("iso", iso)
                .finish(),
        }
    }
}

impl FitTask {
    /// `psnr` for signals and images (higher is better), `chamfer` for shapes.
    pub fn metric_name(&self) -> &'static str {
        match self {
            FitTask::Shape { .. } => "chamfer",
            _ => "psnr",
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            FitTask::Signal { .. } => 1,
            FitTask::Image { .. } => 2,
            FitTask::Shape { .. } => 3,
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            FitTask::Image { image, .. } => image.channels(),
            _ => 1,
        }
    }

    /// Training samples and, for signals and images, the held-out set.
    pub fn data(&self, seed: u64) -> Result<(SampleBatch, Option<SampleBatch>)> {
        match self {
            FitTask::Signal { signal, samples } => Ok((sample_signal(signal, *samples)?, Some(signal.held_out(*samples)))),
            FitTask::Image { image, fraction } => {
                let split = sample_pixels(image, *fraction, seed)?;
                let held = (!split.held_out.is_empty()).then_some(split.held_out);
                Ok((split.train, held))
            }
            FitTask::Shape { shape, tsdf, .. } => {
                let params = TsdfParams { seed, ..*tsdf };
                Ok((sample_tsdf(shape.as_ref(), &params)?.to_batch()?, None))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub task: FitTask,
    pub model: PinConfig,
    pub base_c: BaseC,
    pub train: TrainConfig,
}

impl Experiment {
    /// Model and training configuration for one seed.
    pub fn resolved(&self, seed: u64, data: &SampleBatch) -> Result<(PinConfig, TrainConfig)> {
        let mut cfg = self.model.clone();
        cfg.input_dim = self.task.input_dim();
        cfg.arch.output_dim = self.task.output_dim();
        cfg.seed = seed;
        cfg.base_c = match &self.base_c {
            BaseC::Zero => vec![0.0; cfg.arch.output_dim],
            BaseC::Mean => match &self.task {
                FitTask::Image { image, .. } => image.mean(),
                _ => data.targets.column_sums().iter().map(|s| s / data.len() as f64).collect(),
            },
            BaseC::Value(v) if v.len() == 1 => vec![v[0]; cfg.arch.output_dim],
            BaseC::Value(v) => v.clone(),
        };
        let train = TrainConfig { seed, ..self.train.clone() };
        Ok((cfg, train))
    }
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: PinModel,
    pub history: TrainHistory,
    /// Held-out PSNR, or Chamfer distance for shapes.
    pub metric: f64,
    /// Held-out MSE for signals and images.
    pub held_out_mse: Option<f64>,
}

/// Trains one model and evaluates it. `observer` sees the model after every
/// recorded step.
pub fn run_fit_observed(exp: &Experiment, seed: u64, observer: &mut dyn FnMut(u64, &PinModel)) -> Result<FitOutcome> {
    let (data, held_out) = exp.task.data(seed)?;
    let (cfg, train_cfg) = exp.resolved(seed, &data)?;
    let mut model = PinModel::new(&cfg)?;
    let history = train_observed(&mut model, &data, &train_cfg, None, observer)?;
    let (metric, held_out_mse) = evaluate(&exp.task, &model, held_out.as_ref(), seed)?;
    Ok(FitOutcome { model, history, metric, held_out_mse })
}

pub fn run_fit(exp: &Experiment, seed: u64) -> Result<FitOutcome> {
    run_fit_observed(exp, seed, &mut |_, _| {})
}

/// The task metric of a trained model. Signals and images without a
/// held-out set are scored on their training samples.
pub fn evaluate(task: &FitTask, model: &PinModel, held_out: Option<&SampleBatch>, seed: u64) -> Result<(f64, Option<f64>)> {
    match task {
        FitTask::Shape { shape, grid_res, iso, eval_samples, .. } => {
            let mesh = extract_mesh(model, model.num_levels(), *grid_res, *iso)?;
            Ok((shape_chamfer(shape.as_ref(), &mesh, *eval_samples, seed)?, None))
        }
        _ => {
            let owned;
            let batch = match held_out {
                Some(b) => b,
                None => {
                    owned = task.data(seed)?.0;
                    &owned
                }
            };
            let e = mse(&model.predict(&batch.coords)?, &batch.targets)?;
            Ok((psnr_from_mse(e), Some(e)))
        }
    }
}

/// Level set `S_level = iso` of a 3D model on a `res³` grid over `[-1, 1]³`.
pub fn extract_mesh(model: &PinModel, level: usize, res: usize, iso: f64) -> Result<TriMesh> {
    if model.input_dim() != 3 || model.output_dim() != 1 {
        return Err(PinError::param("mesh extraction needs a 3D scalar model"));
    }
    let (pts, dims, origin, spacing) = ScalarGrid::cube_points(res, -1.0, 1.0)?;
    let x = Tensor2::from_vec(pts.len(), 3, pts.into_iter().flatten().collect())?;
    let values = model.predict_partial(&x, level)?.into_vec();
    marching_cubes(&ScalarGrid::new(dims, origin, spacing, values)?, iso)
}

/// Point-set Chamfer distance between `n` area-uniform samples of the true
/// surface and of the extracted mesh.
pub fn shape_chamfer(shape: &dyn SurfaceShape, mesh: &TriMesh, n: usize, seed: u64) -> Result<f64> {
    if mesh.is_empty() {
        return Err(PinError::Geometry("extracted mesh is empty".into()));
    }
    let mut rng = derive(seed, EVAL_SURFACE_STREAM);
    let truth: Vec<_> = (0..n).map(|_| shape.sample_surface(&mut rng).0).collect();
    let mut rng = derive(seed, EVAL_MESH_STREAM);
    let recon: Vec<_> = mesh.sample_surface(n, &mut rng)?.into_iter().map(|(p, _)| p).collect();
    chamfer_distance(&truth, &recon)
}
