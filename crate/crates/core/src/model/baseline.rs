use crate::encoding::FrequencyBank;
use crate::error::{PinError, Result};
use crate::numerics::Init;
use crate::numerics::{Activation, Dense, Mlp, MlpTrace, ParamStore, Parameterized, Tensor2};
use crate::rng::derive;

use super::{PinConfig, PinModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BaselineKind {
    /// ReLU MLP over the full, unpartitioned Fourier-feature encoding.
    FfNet,
    /// Sine-activated MLP over raw coordinates.
    Siren { omega0: f64 },
}

/// Single-MLP comparison model.
#[derive(Debug, Clone)]
pub struct BaselineModel {
    kind: BaselineKind,
    input_dim: usize,
    bank: Option<FrequencyBank>,
    mlp: Mlp,
    params: ParamStore,
}

impl BaselineModel {
    /// `layers` affine layers of width `hidden`; the last one is linear.
    pub fn new(
        kind: BaselineKind,
        input_dim: usize,
        bank: Option<FrequencyBank>,
        hidden: usize,
        layers: usize,
        output_dim: usize,
        seed: u64,
    ) -> Result<Self> {
        if layers < 2 || hidden == 0 {
            return Err(PinError::param("baseline needs at least two layers and a positive width"));
        }
        let in_width = match (kind, &bank) {
            (BaselineKind::FfNet, Some(b)) => {
                if b.input_dim() != input_dim {
                    return Err(PinError::shape("bank dimension differs from input dimension"));
                }
                b.num_features()
            }
            (BaselineKind::FfNet, None) => return Err(PinError::param("FF Net requires a frequency bank")),
            (BaselineKind::Siren { .. }, _) => input_dim,
        };
        let mut rng = derive(seed, 2);
        let mut params = ParamStore::new();
        let mut dense = Vec::with_capacity(layers);
        let mut width = in_width;
        for k in 0..layers {
            let out = if k + 1 == layers { output_dim } else { hidden };
            let init = match kind {
                BaselineKind::FfNet => Init::KaimingUniform,
                BaselineKind::Siren { .. } if k == 0 => Init::SirenFirst,
                BaselineKind::Siren { omega0 } => Init::SirenHidden { omega0 },
            };
            dense.push(Dense::new(&mut params, &format!("mlp.layer{k}"), width, out, init, &mut rng));
            width = out;
        }
        let activation = match kind {
            BaselineKind::FfNet => Activation::Relu,
            BaselineKind::Siren { omega0 } => Activation::Sine { omega0 },
        };
        let bank = match kind {
            BaselineKind::FfNet => bank,
            BaselineKind::Siren { .. } => None,
        };
        Ok(BaselineModel {
            kind,
            input_dim,
            bank,
            mlp: Mlp { layers: dense, activation, activate_last: false },
            params,
        })
    }

    /// A baseline with the same depth as the longest path through the
    /// progressive model (`L·depth + head_depth` layers) and the width that
    /// brings its parameter count closest to the progressive model's.
    pub fn matched(cfg: &PinConfig, kind: BaselineKind) -> Result<Self> {
        let pin_params = PinModel::new(cfg)?.num_params();
        let layers = cfg.levels * cfg.arch.depth + cfg.arch.head_depth;
        let in_width = match kind {
            BaselineKind::FfNet => cfg.num_features,
            BaselineKind::Siren { .. } => cfg.input_dim,
        };
        let count = |h: usize| -> usize {
            (in_width + 1) * h + (layers - 2) * (h + 1) * h + (h + 1) * cfg.arch.output_dim
        };
        let hidden = (1..=4 * cfg.arch.hidden.max(1))
            .min_by_key(|&h| count(h).abs_diff(pin_params))
            .expect("non-empty search range");
        let bank = match kind {
            BaselineKind::FfNet => {
                // Same frequencies as the progressive model, as one band.
                let b = FrequencyBank::sample(cfg.input_dim, cfg.num_features, 1, cfg.sigma, cfg.seed)?;
                Some(b)
            }
            BaselineKind::Siren { .. } => None,
        };
        Self::new(kind, cfg.input_dim, bank, hidden, layers, cfg.arch.output_dim, cfg.seed)
    }

    pub fn kind(&self) -> BaselineKind {
        self.kind
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn bank(&self) -> Option<&FrequencyBank> {
        self.bank.as_ref()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.mlp.out_dim()
    }

    pub fn hidden(&self) -> usize {
        self.mlp.layers[0].out_dim
    }

    fn network_input(&self, x: &Tensor2) -> Result<Tensor2> {
        if x.cols() != self.input_dim {
            return Err(PinError::shape(format!(
                "coordinates have {} columns, model expects {}",
                x.cols(),
                self.input_dim
            )));
        }
        match &self.bank {
            Some(b) => b.encode_all_batch(x),
            None => Ok(x.clone()),
        }
    }

    pub fn forward(&self, x: &Tensor2) -> Result<Tensor2> {
        self.mlp.forward(&self.params, &self.network_input(x)?)
    }

    pub fn forward_traced(&self, x: &Tensor2) -> Result<(Tensor2, MlpTrace)> {
        self.mlp.forward_traced(&self.params, &self.network_input(x)?)
    }

    pub fn backward(&mut self, trace: MlpTrace, upstream: &Tensor2) -> Result<()> {
        self.mlp.backward(&mut self.params, trace, upstream, false)?;
        Ok(())
    }

    pub fn predict(&self, x: &Tensor2) -> Result<Tensor2> {
        super::chunked(x, self.output_dim(), |chunk| self.forward(chunk))
    }
}

impl Parameterized for BaselineModel {
    fn params(&self) -> &ParamStore {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }
}
