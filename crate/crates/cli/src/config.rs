//! Run configuration: a TOML file with one section per concern. Unknown keys
//! are rejected.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use pin_core::analysis::{BaseC, Experiment, FitTask, SweepKind};
use pin_core::geometry::{MeshSdf, Sphere, SurfaceShape, TriMesh};
use pin_core::model::{PinArchitecture, PinConfig, WeightProfile};
use pin_core::numerics::AdamConfig;
use pin_core::tasks::{ImageGrid, SampleMix, Signal1D, SineTerm, TsdfParams};
use pin_core::training::{LossKind, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Fit1d,
    Fit2d,
    Fit3d,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: TaskKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub io: IoSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal: Option<SignalSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<ImageSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<ShapeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learn_c: Option<LearnCSection>,
}

/// `"harmonic"`, `"equal"`, or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightsSpec {
    Named(String),
    Custom(Vec<f64>),
}

/// `"zero"`, `"mean"`, a scalar, or one value per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BaseCSpec {
    Named(String),
    Scalar(f64),
    PerChannel(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub levels: usize,
    pub hidden: usize,
    pub depth: usize,
    pub head_depth: usize,
    pub sigma: f64,
    pub num_features: usize,
    pub weights: WeightsSpec,
    pub conditioning: bool,
    pub raw_coords: bool,
    pub base_c: BaseCSpec,
    pub learnable_c: bool,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            levels: 3,
            hidden: 256,
            depth: 2,
            head_depth: 2,
            sigma: 15.0,
            num_features: 256,
            weights: WeightsSpec::Named("harmonic".into()),
            conditioning: true,
            raw_coords: true,
            base_c: BaseCSpec::Named("zero".into()),
            learnable_c: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub iterations: u64,
    /// Absent means full batch.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub reg_weight: f64,
    pub loss: String,
    pub eval_every: u64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainSection {
            iterations: d.iterations,
            batch_size: d.batch_size,
            lr: d.adam.lr,
            beta1: d.adam.beta1,
            beta2: d.adam.beta2,
            eps: d.adam.eps,
            reg_weight: d.reg_weight,
            loss: "l2".into(),
            eval_every: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IoSection {
    pub output_dir: PathBuf,
    /// Write per-level artefacts after `fit`.
    pub export_levels: bool,
    /// Fill the `ms_per_step` column of the history CSV. Off by default so
    /// the CSV is byte-reproducible.
    pub record_timing: bool,
    pub grid_res: usize,
    pub iso: f64,
}

impl Default for IoSection {
    fn default() -> Self {
        IoSection { output_dir: PathBuf::from("out"), export_levels: true, record_timing: false, grid_res: 128, iso: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub amplitude: f64,
    pub frequency: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSection {
    pub samples: usize,
    pub terms: Vec<TermSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageSection {
    /// PNG path, relative to the config file.
    pub path: PathBuf,
    #[serde(default = "default_fraction")]
    pub fraction: f64,
}

fn default_fraction() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShapeSection {
    /// `"sphere"` or `"mesh"`.
    pub kind: String,
    pub radius: f64,
    pub center: [f64; 3],
    /// OBJ path for meshes, relative to the config file. The mesh is scaled
    /// into `[-1, 1]³` with `margin` to spare.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mesh: Option<PathBuf>,
    pub margin: f64,
    pub samples: usize,
    pub surface: f64,
    pub near: f64,
    pub uniform: f64,
    pub noise_std: f64,
    pub tau_max: f64,
    pub eval_samples: usize,
}

impl Default for ShapeSection {
    fn default() -> Self {
        let t = TsdfParams::default();
        ShapeSection {
            kind: "sphere".into(),
            radius: 0.5,
            center: [0.0; 3],
            mesh: None,
            margin: 0.05,
            samples: t.n_total,
            surface: t.mix.surface,
            near: t.mix.near,
            uniform: t.mix.uniform,
            noise_std: t.noise_std,
            tau_max: t.tau_max,
            eval_samples: 200_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub kind: String,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnCSection {
    #[serde(default = "default_inits")]
    pub inits: Vec<f64>,
}

fn default_inits() -> Vec<f64> {
    vec![0.1, 0.5, 0.9]
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config; relative input paths are resolved against the file's
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(img) = &mut cfg.image {
            if img.path.is_relative() {
                img.path = base.join(&img.path);
            }
        }
        if let Some(mesh) = cfg.shape.as_mut().and_then(|s| s.mesh.as_mut()) {
            if mesh.is_relative() {
                *mesh = base.join(&*mesh);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        let m = &self.model;
        if m.levels == 0 || m.hidden == 0 || m.depth == 0 || m.head_depth == 0 || m.num_features == 0 {
            return bad("model sizes must be positive".into());
        }
        if !(m.sigma > 0.0) {
            return bad(format!("sigma must be positive, got {}", m.sigma));
        }
        self.weight_profile()?;
        self.base_c()?;
        self.loss()?;
        if self.train.batch_size == Some(0) {
            return bad("batch_size must be positive".into());
        }
        match self.task {
            TaskKind::Fit1d if self.signal.is_none() => return bad("fit1d needs a [signal] section".into()),
            TaskKind::Fit2d if self.image.is_none() => return bad("fit2d needs an [image] section".into()),
            TaskKind::Fit3d if self.shape.is_none() => return bad("fit3d needs a [shape] section".into()),
            _ => {}
        }
        if let Some(s) = &self.shape {
            if s.kind != "sphere" && s.kind != "mesh" {
                return bad(format!("unknown shape kind `{}`", s.kind));
            }
            if s.kind == "mesh" && s.mesh.is_none() {
                return bad("shape kind `mesh` needs a `mesh` path".into());
            }
        }
        if let Some(s) = &self.sweep {
            s.kind.parse::<SweepKind>().map_err(|e| CliError::Config(e.to_string()))?;
        }
        if self.io.grid_res < 2 {
            return bad("grid_res must be at least 2".into());
        }
        Ok(())
    }

    pub fn weight_profile(&self) -> Result<WeightProfile> {
        match &self.model.weights {
            WeightsSpec::Named(s) if s == "harmonic" => Ok(WeightProfile::Harmonic),
            WeightsSpec::Named(s) if s == "equal" => Ok(WeightProfile::Equal),
            WeightsSpec::Named(s) => Err(CliError::Config(format!("unknown weights profile `{s}`"))),
            WeightsSpec::Custom(w) => Ok(WeightProfile::Custom(w.clone())),
        }
    }

    pub fn base_c(&self) -> Result<BaseC> {
        match &self.model.base_c {
            BaseCSpec::Named(s) if s == "zero" => Ok(BaseC::Zero),
            BaseCSpec::Named(s) if s == "mean" => Ok(BaseC::Mean),
            BaseCSpec::Named(s) => Err(CliError::Config(format!("unknown base_c mode `{s}`"))),
            BaseCSpec::Scalar(v) => Ok(BaseC::Value(vec![*v])),
            BaseCSpec::PerChannel(v) => Ok(BaseC::Value(v.clone())),
        }
    }

    pub fn loss(&self) -> Result<LossKind> {
        match self.train.loss.as_str() {
            "l2" => Ok(LossKind::L2),
            "l1" => Ok(LossKind::L1),
            other => Err(CliError::Config(format!("unknown loss `{other}`"))),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self.task {
            TaskKind::Fit1d => 1,
            TaskKind::Fit2d => 2,
            TaskKind::Fit3d => 3,
        }
    }

    pub fn pin_config(&self, output_dim: usize) -> Result<PinConfig> {
        let m = &self.model;
        Ok(PinConfig {
            input_dim: self.input_dim(),
            levels: m.levels,
            num_features: m.num_features,
            sigma: m.sigma,
            arch: PinArchitecture {
                output_dim,
                hidden: m.hidden,
                depth: m.depth,
                head_depth: m.head_depth,
                conditioning: m.conditioning,
                raw_coords: m.raw_coords,
            },
            weights: self.weight_profile()?,
            base_c: vec![0.0; output_dim],
            learnable_c: m.learnable_c,
            seed: self.seed,
        })
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let t = &self.train;
        Ok(TrainConfig {
            iterations: t.iterations,
            batch_size: t.batch_size,
            adam: AdamConfig { lr: t.lr, beta1: t.beta1, beta2: t.beta2, eps: t.eps },
            reg_weight: t.reg_weight,
            loss: self.loss()?,
            seed: self.seed,
            eval_every: t.eval_every,
        })
    }

    pub fn shape(&self) -> Result<Arc<dyn SurfaceShape + Send>> {
        let s = self.shape.as_ref().ok_or_else(|| CliError::Config("missing [shape] section".into()))?;
        if s.kind == "sphere" {
            return Ok(Arc::new(Sphere::new(s.center, s.radius)?));
        }
        let path = s.mesh.as_ref().ok_or_else(|| CliError::Config("missing mesh path".into()))?;
        let (mesh, _) = TriMesh::load_obj(path)?.normalized(s.margin)?;
        Ok(Arc::new(MeshSdf::new(mesh)?))
    }

    pub fn task(&self) -> Result<FitTask> {
        Ok(match self.task {
            TaskKind::Fit1d => {
                let s = self.signal.as_ref().ok_or_else(|| CliError::Config("missing [signal] section".into()))?;
                let terms = s
                    .terms
                    .iter()
                    .map(|t| SineTerm { amplitude: t.amplitude, frequency: t.frequency, phase: t.phase })
                    .collect();
                FitTask::Signal { signal: Signal1D::new(terms)?, samples: s.samples }
            }
            TaskKind::Fit2d => {
                let s = self.image.as_ref().ok_or_else(|| CliError::Config("missing [image] section".into()))?;
                FitTask::Image { image: ImageGrid::load_png(&s.path)?, fraction: s.fraction }
            }
            TaskKind::Fit3d => {
                let s = self.shape.as_ref().ok_or_else(|| CliError::Config("missing [shape] section".into()))?;
                FitTask::Shape {
                    shape: self.shape()?,
                    tsdf: TsdfParams {
                        n_total: s.samples,
                        mix: SampleMix { surface: s.surface, near: s.near, uniform: s.uniform },
                        noise_std: s.noise_std,
                        tau_max: s.tau_max,
                        seed: self.seed,
                    },
                    grid_res: self.io.grid_res,
                    iso: self.io.iso,
                    eval_samples: s.eval_samples,
                }
            }
        })
    }

    pub fn experiment(&self) -> Result<Experiment> {
        let task = self.task()?;
        Ok(Experiment {
            model: self.pin_config(task.output_dim())?,
            base_c: self.base_c()?,
            train: self.train_config()?,
            task,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
task = "fit1d"
[signal]
samples = 64
terms = [{ amplitude = 1.0, frequency = 2.0 }]
"#;

    #[test]
    fn defaults_fill_in() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.model.levels, 3);
        assert_eq!(cfg.train.lr, 1e-3);
        assert_eq!(cfg.weight_profile().unwrap(), WeightProfile::Harmonic);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{MINIMAL}\n[model]\nlevls = 3\n");
        assert!(matches!(RunConfig::parse(&text), Err(CliError::Config(_))));
        assert!(RunConfig::parse("task = \"fit1d\"\nbogus = 1\n").is_err());
    }

    #[test]
    fn missing_task_section() {
        assert!(RunConfig::parse("task = \"fit2d\"\n").is_err());
    }

    #[test]
    fn roundtrip_through_toml() {
        let mut cfg = RunConfig::parse(MINIMAL).unwrap();
        cfg.model.weights = WeightsSpec::Custom(vec![0.5, 0.25, 0.25]);
        cfg.model.base_c = BaseCSpec::PerChannel(vec![0.1, 0.2]);
        cfg.train.batch_size = Some(32);
        assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn bad_enums() {
        let text = format!("{MINIMAL}\n[model]\nweights = \"geometric\"\n");
        assert!(RunConfig::parse(&text).is_err());
        let text = format!("{MINIMAL}\n[train]\nloss = \"huber\"\n");
        assert!(RunConfig::parse(&text).is_err());
    }
}
