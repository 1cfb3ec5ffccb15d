use crate::encoding::FrequencyBank;
use crate::error::{PinError, Result};
use crate::numerics::{Activation, Dense, Mlp, MlpTrace, ParamStore, Parameterized, Tensor2};
use crate::numerics::BlockId;
use crate::rng::derive;

use crate::numerics::Init;

/// How residuals are weighted in the composition.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightProfile {
    /// `w_l = 1/(l+2)`.
    Harmonic,
    /// `w_l = 1/L`.
    Equal,
    Custom(Vec<f64>),
}

impl WeightProfile {
    pub fn weights(&self, levels: usize) -> Result<Vec<f64>> {
        match self {
            WeightProfile::Harmonic => Ok((1..=levels).map(|l| 1.0 / (l as f64 + 2.0)).collect()),
            WeightProfile::Equal => Ok(vec![1.0 / levels as f64; levels]),
            WeightProfile::Custom(w) if w.len() == levels => Ok(w.clone()),
            WeightProfile::Custom(w) => Err(PinError::param(format!(
                "{} custom weights given for {levels} levels",
                w.len()
            ))),
        }
    }
}

/// Layer sizes and wiring, everything but the bank and the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PinArchitecture {
    pub output_dim: usize,
    pub hidden: usize,
    /// Affine+ReLU layers per level MLP.
    pub depth: usize,
    /// Layers in the shared head; the last one is linear.
    pub head_depth: usize,
    /// Level `l > 1` also consumes `T_{l-1}`.
    pub conditioning: bool,
    /// Level 1 also consumes the raw coordinates.
    pub raw_coords: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PinConfig {
    pub input_dim: usize,
    pub levels: usize,
    pub num_features: usize,
    pub sigma: f64,
    pub arch: PinArchitecture,
    pub weights: WeightProfile,
    pub base_c: Vec<f64>,
    pub learnable_c: bool,
    pub seed: u64,
}

impl PinConfig {
    /// Defaults for a task: 3 levels, 256 features, width 256, σ = 15,
    /// two layers per level and a two-layer head.
    pub fn new(input_dim: usize, output_dim: usize) -> Self {
        PinConfig {
            input_dim,
            levels: 3,
            num_features: 256,
            sigma: 15.0,
            arch: PinArchitecture {
                output_dim,
                hidden: 256,
                depth: 2,
                head_depth: 2,
                conditioning: true,
                raw_coords: true,
            },
            weights: WeightProfile::Harmonic,
            base_c: vec![0.0; output_dim],
            learnable_c: false,
            seed: 0,
        }
    }
}

/// Everything a forward pass produces.
#[derive(Debug, Clone)]
pub struct LevelOutputs {
    /// `T_l`, one per evaluated level.
    pub features: Vec<Tensor2>,
    /// `R_l = head(T_l)`.
    pub residuals: Vec<Tensor2>,
    /// `S_l = c + Σ_{k≤l} w_k R_k`.
    pub composites: Vec<Tensor2>,
}

impl LevelOutputs {
    pub fn final_output(&self) -> &Tensor2 {
        self.composites.last().expect("at least one level")
    }
}

/// Activations recorded by [`PinModel::forward_traced`].
#[derive(Debug)]
pub struct PinTrace {
    x: Tensor2,
    levels: Vec<MlpTrace>,
    heads: Vec<MlpTrace>,
}

#[derive(Debug, Clone)]
pub struct PinModel {
    bank: FrequencyBank,
    arch: PinArchitecture,
    level_weights: Vec<f64>,
    levels: Vec<Mlp>,
    head: Mlp,
    base_c: BlockId,
    params: ParamStore,
}

fn level_name(l: usize, k: usize) -> String {
    format!("level{l}.layer{k}")
}

fn head_name(k: usize) -> String {
    format!("head.layer{k}")
}

impl PinModel {
    pub fn new(cfg: &PinConfig) -> Result<Self> {
        let arch = &cfg.arch;
        if arch.hidden == 0 || arch.depth == 0 || arch.head_depth == 0 || arch.output_dim == 0 {
            return Err(PinError::param("hidden width, depths and output dimension must be positive"));
        }
        if cfg.base_c.len() != arch.output_dim {
            return Err(PinError::param("base component length must equal the output dimension"));
        }
        let bank = FrequencyBank::sample(cfg.input_dim, cfg.num_features, cfg.levels, cfg.sigma, cfg.seed)?;
        let level_weights = cfg.weights.weights(cfg.levels)?;
        let mut rng = derive(cfg.seed, 1);
        let mut params = ParamStore::new();
        for l in 1..=cfg.levels {
            let mut width = Self::prev_width(arch, cfg.input_dim, l) + bank.level_size(l)?;
            for k in 0..arch.depth {
                Dense::new(&mut params, &level_name(l, k), width, arch.hidden, Init::KaimingUniform, &mut rng);
                width = arch.hidden;
            }
        }
        for k in 0..arch.head_depth {
            let out = if k + 1 == arch.head_depth { arch.output_dim } else { arch.hidden };
            Dense::new(&mut params, &head_name(k), arch.hidden, out, Init::KaimingUniform, &mut rng);
        }
        let c = params.add("base_c", 1, arch.output_dim, cfg.base_c.clone());
        params.set_trainable(c, cfg.learnable_c);
        Self::assemble(bank, arch.clone(), level_weights, params)
    }

    /// Binds an architecture to an existing parameter store, e.g. one loaded
    /// from disk. Block names follow `level{l}.layer{k}`, `head.layer{k}` and
    /// `base_c`.
    pub fn assemble(
        bank: FrequencyBank,
        arch: PinArchitecture,
        level_weights: Vec<f64>,
        params: ParamStore,
    ) -> Result<Self> {
        let num_levels = bank.num_levels();
        if level_weights.len() != num_levels {
            return Err(PinError::param(format!(
                "{} level weights for {num_levels} levels",
                level_weights.len()
            )));
        }
        let mut levels = Vec::with_capacity(num_levels);
        for l in 1..=num_levels {
            let layers = (0..arch.depth)
                .map(|k| Dense::bind(&params, &level_name(l, k)))
                .collect::<Result<Vec<_>>>()?;
            let expect_in = Self::prev_width(&arch, bank.input_dim(), l) + bank.level_size(l)?;
            let mut width = expect_in;
            for layer in &layers {
                if layer.in_dim != width || layer.out_dim != arch.hidden {
                    return Err(PinError::shape(format!("level {l} layer widths do not match the architecture")));
                }
                width = arch.hidden;
            }
            levels.push(Mlp { layers, activation: Activation::Relu, activate_last: true });
        }
        let head_layers = (0..arch.head_depth)
            .map(|k| Dense::bind(&params, &head_name(k)))
            .collect::<Result<Vec<_>>>()?;
        let head = Mlp { layers: head_layers, activation: Activation::Relu, activate_last: false };
        if head.in_dim() != arch.hidden || head.out_dim() != arch.output_dim {
            return Err(PinError::shape("shared head does not match the architecture"));
        }
        let base_c = params.find("base_c").ok_or_else(|| PinError::param("missing `base_c` block"))?;
        if params.block(base_c).len() != arch.output_dim {
            return Err(PinError::shape("base component has the wrong length"));
        }
        Ok(PinModel { bank, arch, level_weights, levels, head, base_c, params })
    }

    fn prev_width(arch: &PinArchitecture, input_dim: usize, level: usize) -> usize {
        match level {
            1 if arch.raw_coords => input_dim,
            1 => 0,
            _ if arch.conditioning => arch.hidden,
            _ => 0,
        }
    }

    pub fn bank(&self) -> &FrequencyBank {
        &self.bank
    }

    pub fn arch(&self) -> &PinArchitecture {
        &self.arch
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level_weights(&self) -> &[f64] {
        &self.level_weights
    }

    pub fn set_level_weights(&mut self, w: Vec<f64>) -> Result<()> {
        if w.len() != self.num_levels() {
            return Err(PinError::param("one weight per level required"));
        }
        self.level_weights = w;
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.bank.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.arch.output_dim
    }

    pub fn base_c(&self) -> &[f64] {
        self.params.value(self.base_c)
    }

    pub fn base_c_learnable(&self) -> bool {
        self.params.block(self.base_c).trainable
    }

    pub fn set_base_c(&mut self, c: &[f64]) -> Result<()> {
        let id = self.base_c;
        let n = self.output_dim();
        self.params.load_values("base_c", 1, n, c.to_vec())?;
        debug_assert_eq!(self.params.find("base_c"), Some(id));
        Ok(())
    }

    pub fn level_mlp(&self, level: usize) -> &Mlp {
        &self.levels[level - 1]
    }

    pub fn head(&self) -> &Mlp {
        &self.head
    }

    fn check_cutoff(&self, cutoff: usize) -> Result<()> {
        if cutoff == 0 || cutoff > self.num_levels() {
            return Err(PinError::param(format!(
                "level cutoff {cutoff} outside 1..={}",
                self.num_levels()
            )));
        }
        Ok(())
    }

    fn level_input(&self, level: usize, x: &Tensor2, prev: Option<&Tensor2>) -> Result<Tensor2> {
        let enc = self.bank.encode_level_batch(level, x)?;
        let lead = match level {
            1 if self.arch.raw_coords => Some(x),
            1 => None,
            _ if self.arch.conditioning => prev,
            _ => None,
        };
        match lead {
            Some(p) => Tensor2::hconcat(p, &enc),
            None => Ok(enc),
        }
    }

    fn run(&self, x: &Tensor2, cutoff: usize, traced: bool) -> Result<(LevelOutputs, Option<PinTrace>)> {
        self.check_cutoff(cutoff)?;
        if x.cols() != self.input_dim() {
            return Err(PinError::shape(format!(
                "coordinates have {} columns, model expects {}",
                x.cols(),
                self.input_dim()
            )));
        }
        let mut out = LevelOutputs { features: Vec::new(), residuals: Vec::new(), composites: Vec::new() };
        let mut level_traces = Vec::new();
        let mut head_traces = Vec::new();
        let c = self.base_c();
        for l in 1..=cutoff {
            let input = self.level_input(l, x, out.features.last())?;
            let mlp = &self.levels[l - 1];
            let (t, r) = if traced {
                let (t, lt) = mlp.forward_traced(&self.params, &input)?;
                let (r, ht) = self.head.forward_traced(&self.params, &t)?;
                level_traces.push(lt);
                head_traces.push(ht);
                (t, r)
            } else {
                let t = mlp.forward(&self.params, &input)?;
                let r = self.head.forward(&self.params, &t)?;
                (t, r)
            };
            let w = self.level_weights[l - 1];
            // S_1 = c + w_1 R_1, S_l = S_{l-1} + w_l R_l.
            let s = match out.composites.last() {
                None => Tensor2::from_fn(r.rows(), r.cols(), |i, j| c[j] + w * r.get(i, j)),
                Some(prev) => Tensor2::from_fn(r.rows(), r.cols(), |i, j| prev.get(i, j) + w * r.get(i, j)),
            };
            out.features.push(t);
            out.residuals.push(r);
            out.composites.push(s);
        }
        let trace = traced.then(|| PinTrace { x: x.clone(), levels: level_traces, heads: head_traces });
        Ok((out, trace))
    }

    /// Full evaluation of every level.
    pub fn forward(&self, x: &Tensor2) -> Result<LevelOutputs> {
        Ok(self.run(x, self.num_levels(), false)?.0)
    }

    pub fn forward_traced(&self, x: &Tensor2) -> Result<(LevelOutputs, PinTrace)> {
        let (out, trace) = self.run(x, self.num_levels(), true)?;
        Ok((out, trace.expect("traced run")))
    }

    /// `S_cutoff`, touching only levels `1..=cutoff`.
    pub fn forward_partial(&self, x: &Tensor2, cutoff: usize) -> Result<Tensor2> {
        let (mut out, _) = self.run(x, cutoff, false)?;
        Ok(out.composites.pop().expect("cutoff >= 1"))
    }

    /// `S_L` over arbitrarily many rows, evaluated in chunks.
    pub fn predict(&self, x: &Tensor2) -> Result<Tensor2> {
        self.predict_partial(x, self.num_levels())
    }

    pub fn predict_partial(&self, x: &Tensor2, cutoff: usize) -> Result<Tensor2> {
        self.check_cutoff(cutoff)?;
        super::chunked(x, self.output_dim(), |chunk| self.forward_partial(chunk, cutoff))
    }

    /// Residuals and composites of every level over arbitrarily many rows.
    /// Feature tensors are not kept.
    pub fn predict_levels(&self, x: &Tensor2) -> Result<LevelOutputs> {
        let n = self.num_levels();
        let od = self.output_dim();
        // Residuals and composites are packed side by side per chunk.
        let packed = super::chunked(x, 2 * n * od, |chunk| {
            let out = self.forward(chunk)?;
            let mut row = Vec::with_capacity(chunk.rows() * 2 * n * od);
            for i in 0..chunk.rows() {
                for t in out.residuals.iter().chain(&out.composites) {
                    row.extend_from_slice(t.row(i));
                }
            }
            Tensor2::from_vec(chunk.rows(), 2 * n * od, row)
        })?;
        let unpack = |k: usize| Tensor2::from_fn(x.rows(), od, |i, j| packed.get(i, k * od + j));
        Ok(LevelOutputs {
            features: Vec::new(),
            residuals: (0..n).map(unpack).collect(),
            composites: (n..2 * n).map(unpack).collect(),
        })
    }

    /// Backpropagates `∂loss/∂S_l` for every composite (one tensor per level,
    /// `S_L` last) into the parameter gradients.
    ///
    /// Returns `∂loss/∂x` when `need_input_grad` is set, including the path
    /// through the Fourier features.
    pub fn backward(
        &mut self,
        trace: PinTrace,
        upstream: &[Tensor2],
        need_input_grad: bool,
    ) -> Result<Option<Tensor2>> {
        let n_levels = trace.levels.len();
        if upstream.len() != n_levels || trace.heads.len() != n_levels {
            return Err(PinError::shape(format!(
                "{} upstream tensors for {n_levels} traced levels",
                upstream.len()
            )));
        }
        let n = trace.x.rows();
        let od = self.output_dim();
        for u in upstream {
            u.ensure_shape(n, od, "composite upstream")?;
        }

        // ∂S_k/∂c = 1 for every k.
        let mut dc = vec![0.0; od];
        for u in upstream {
            for (d, s) in dc.iter_mut().zip(u.column_sums()) {
                *d += s;
            }
        }
        for (g, d) in self.params.grad_mut(self.base_c).iter_mut().zip(dc) {
            *g += d;
        }

        // R_l feeds every S_k with k ≥ l, scaled by w_l.
        let mut suffix = Tensor2::zeros(n, od);
        let mut d_residual = vec![Tensor2::zeros(0, 0); n_levels];
        for l in (0..n_levels).rev() {
            suffix.add_scaled(&upstream[l], 1.0)?;
            d_residual[l] = suffix.scale(self.level_weights[l]);
        }

        let PinTrace { x, levels, heads } = trace;
        let mut dx = need_input_grad.then(|| Tensor2::zeros(n, x.cols()));
        let mut d_next: Option<Tensor2> = None;
        let level_traces: Vec<_> = levels.into_iter().zip(heads).collect();
        for (idx, (lt, ht)) in level_traces.into_iter().enumerate().rev() {
            let l = idx + 1;
            let mut dt = self
                .head
                .backward(&mut self.params, ht, &d_residual[idx], true)?
                .expect("head input gradient requested");
            if let Some(g) = d_next.take() {
                dt.add_scaled(&g, 1.0)?;
            }
            let prev_w = Self::prev_width(&self.arch, x.cols(), l);
            let want_input = (l > 1 && prev_w > 0) || need_input_grad;
            let d_in = self.levels[idx].backward(&mut self.params, lt, &dt, want_input)?;
            let Some(d_in) = d_in else { continue };
            let (d_prev, d_enc) = d_in.split_cols(prev_w);
            if l > 1 && prev_w > 0 {
                d_next = Some(d_prev.clone());
            }
            if let Some(dx) = dx.as_mut() {
                if l == 1 && prev_w > 0 {
                    dx.add_scaled(&d_prev, 1.0)?;
                }
                dx.add_scaled(&self.bank.encode_level_vjp(l, &x, &d_enc)?, 1.0)?;
            }
        }
        Ok(dx)
    }

    /// Standalone model with only levels `1..=cutoff`, the shared head and
    /// the base component.
    pub fn truncate(&self, cutoff: usize) -> Result<PinModel> {
        self.check_cutoff(cutoff)?;
        let bank = self.bank.truncated(cutoff)?;
        let mut params = ParamStore::new();
        for b in self.params.blocks() {
            let keep = match b.name.strip_prefix("level") {
                Some(rest) => {
                    let l: usize = rest.split('.').next().and_then(|s| s.parse().ok()).unwrap_or(usize::MAX);
                    l <= cutoff
                }
                None => true,
            };
            if keep {
                let id = params.add(b.name.clone(), b.rows, b.cols, b.value.clone());
                params.set_trainable(id, b.trainable);
            }
        }
        params.set_step(self.params.step());
        PinModel::assemble(bank, self.arch.clone(), self.level_weights[..cutoff].to_vec(), params)
    }
}

impl Parameterized for PinModel {
    fn params(&self) -> &ParamStore {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }
}
