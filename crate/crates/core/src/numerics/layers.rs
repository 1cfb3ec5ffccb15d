use rand::Rng;

use crate::error::{PinError, Result};
use crate::rng::PinRng;

use super::tensor::gemm;
use super::{BlockId, ParamStore, Tensor2};

pub fn relu_forward(x: &Tensor2) -> Tensor2 {
    // Not `v.max(0.0)`: that maps NaN to 0 and hides divergence.
    x.map(|v| if v < 0.0 { 0.0 } else { v })
}

/// Gradient through ReLU given the pre-activation `z`. The derivative at 0 is taken as 0.
pub fn relu_backward(z: &Tensor2, upstream: &Tensor2) -> Tensor2 {
    let mut out = upstream.clone();
    for (g, &zi) in out.data_mut().iter_mut().zip(z.data()) {
        if zi <= 0.0 {
            *g = 0.0;
        }
    }
    out
}

pub fn sine_forward(omega0: f64, x: &Tensor2) -> Tensor2 {
    x.map(|v| (omega0 * v).sin())
}

pub fn sine_backward(omega0: f64, z: &Tensor2, upstream: &Tensor2) -> Tensor2 {
    let mut out = upstream.clone();
    for (g, &zi) in out.data_mut().iter_mut().zip(z.data()) {
        *g *= omega0 * (omega0 * zi).cos();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Relu,
    Sine { omega0: f64 },
}

impl Activation {
    fn forward(self, z: &Tensor2) -> Tensor2 {
        match self {
            Activation::Relu => relu_forward(z),
            Activation::Sine { omega0 } => sine_forward(omega0, z),
        }
    }

    fn backward(self, z: &Tensor2, upstream: &Tensor2) -> Tensor2 {
        match self {
            Activation::Relu => relu_backward(z, upstream),
            Activation::Sine { omega0 } => sine_backward(omega0, z, upstream),
        }
    }
}

/// Weight initialisation schemes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// `U(±sqrt(6/fan_in))` weights, `U(±1/sqrt(fan_in))` biases.
    KaimingUniform,
    /// First SIREN layer: `U(±1/fan_in)`.
    SirenFirst,
    /// Later SIREN layers: `U(±sqrt(6/fan_in)/omega0)`.
    SirenHidden { omega0: f64 },
    Zero,
}

/// Affine layer `y = x·Wᵀ + b` whose weights live in a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: BlockId,
    pub bias: BlockId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Dense {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        init: Init,
        rng: &mut PinRng,
    ) -> Self {
        let fan_in = in_dim.max(1) as f64;
        let (wb, bb) = match init {
            Init::KaimingUniform => ((6.0 / fan_in).sqrt(), 1.0 / fan_in.sqrt()),
            Init::SirenFirst => (1.0 / fan_in, 1.0 / fan_in.sqrt()),
            Init::SirenHidden { omega0 } => ((6.0 / fan_in).sqrt() / omega0, 1.0 / fan_in.sqrt()),
            Init::Zero => (0.0, 0.0),
        };
        let mut draw = |bound: f64, n: usize| -> Vec<f64> {
            if bound == 0.0 {
                vec![0.0; n]
            } else {
                (0..n).map(|_| rng.random_range(-bound..bound)).collect()
            }
        };
        let w = draw(wb, in_dim * out_dim);
        let b = draw(bb, out_dim);
        let weight = store.add(format!("{name}.weight"), out_dim, in_dim, w);
        let bias = store.add(format!("{name}.bias"), 1, out_dim, b);
        Dense { weight, bias, in_dim, out_dim }
    }

    /// Re-binds a layer to blocks already present in `store` by name.
    pub fn bind(store: &ParamStore, name: &str) -> Result<Self> {
        let missing = |what: &str| PinError::param(format!("missing parameter block `{name}.{what}`"));
        let weight = store.find(&format!("{name}.weight")).ok_or_else(|| missing("weight"))?;
        let bias = store.find(&format!("{name}.bias")).ok_or_else(|| missing("bias"))?;
        let wb = store.block(weight);
        let bb = store.block(bias);
        if bb.rows != 1 || bb.cols != wb.rows {
            return Err(PinError::shape(format!("bias of `{name}` does not match its weight")));
        }
        Ok(Dense { weight, bias, in_dim: wb.cols, out_dim: wb.rows })
    }

    pub fn forward(&self, store: &ParamStore, x: &Tensor2) -> Result<Tensor2> {
        if x.cols() != self.in_dim {
            return Err(PinError::shape(format!(
                "dense layer expects width {}, got {}",
                self.in_dim,
                x.cols()
            )));
        }
        let n = x.rows();
        let bias = store.value(self.bias);
        let mut y = Tensor2::zeros(n, self.out_dim);
        for i in 0..n {
            y.row_mut(i).copy_from_slice(bias);
        }
        gemm(
            n, self.in_dim, self.out_dim,
            x.data(), (self.in_dim as isize, 1),
            store.value(self.weight), (1, self.in_dim as isize),
            1.0, y.data_mut(), (self.out_dim as isize, 1),
        );
        Ok(y)
    }

    /// Accumulates `dW += dyᵀ·x`, `db += Σ dy` and optionally returns `dx = dy·W`.
    pub fn backward(
        &self,
        store: &mut ParamStore,
        x: &Tensor2,
        dy: &Tensor2,
        need_dx: bool,
    ) -> Result<Option<Tensor2>> {
        dy.ensure_shape(x.rows(), self.out_dim, "dense upstream")?;
        x.ensure_shape(dy.rows(), self.in_dim, "dense input")?;
        dy.t_matmul_acc(x, store.grad_mut(self.weight))?;
        for (g, s) in store.grad_mut(self.bias).iter_mut().zip(dy.column_sums()) {
            *g += s;
        }
        if !need_dx {
            return Ok(None);
        }
        let mut dx = Tensor2::zeros(x.rows(), self.in_dim);
        gemm(
            x.rows(), self.out_dim, self.in_dim,
            dy.data(), (self.out_dim as isize, 1),
            store.value(self.weight), (self.in_dim as isize, 1),
            0.0, dx.data_mut(), (self.in_dim as isize, 1),
        );
        Ok(Some(dx))
    }

    pub fn num_params(&self) -> usize {
        self.out_dim * (self.in_dim + 1)
    }
}

/// Recorded activations of one [`Mlp`] forward pass.
#[derive(Debug)]
pub struct MlpTrace {
    inputs: Vec<Tensor2>,
    pre: Vec<Tensor2>,
}

/// Stack of dense layers with a shared activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub activation: Activation,
    /// Whether the activation is also applied after the last layer.
    pub activate_last: bool,
}

impl Mlp {
    pub fn in_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.in_dim)
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim)
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Dense::num_params).sum()
    }

    fn activates(&self, k: usize) -> bool {
        k + 1 < self.layers.len() || self.activate_last
    }

    pub fn forward(&self, store: &ParamStore, x: &Tensor2) -> Result<Tensor2> {
        let mut h = x.clone();
        for (k, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(store, &h)?;
            h = if self.activates(k) { self.activation.forward(&z) } else { z };
        }
        Ok(h)
    }

    pub fn forward_traced(&self, store: &ParamStore, x: &Tensor2) -> Result<(Tensor2, MlpTrace)> {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for (k, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(store, &h)?;
            let next = if self.activates(k) { self.activation.forward(&z) } else { z.clone() };
            inputs.push(h);
            pre.push(z);
            h = next;
        }
        Ok((h, MlpTrace { inputs, pre }))
    }

    /// Consumes the trace; accumulates parameter gradients and optionally
    /// returns the gradient with respect to the input.
    pub fn backward(
        &self,
        store: &mut ParamStore,
        trace: MlpTrace,
        upstream: &Tensor2,
        need_dx: bool,
    ) -> Result<Option<Tensor2>> {
        if trace.pre.len() != self.layers.len() {
            return Err(PinError::shape("trace was not produced by this network"));
        }
        let mut grad = upstream.clone();
        let MlpTrace { inputs, pre } = trace;
        for (k, (layer, (x, z))) in self.layers.iter().zip(inputs.iter().zip(&pre)).enumerate().rev() {
            if self.activates(k) {
                grad = self.activation.backward(z, &grad);
            }
            let want_dx = k > 0 || need_dx;
            match layer.backward(store, x, &grad, want_dx)? {
                Some(dx) => grad = dx,
                None => return Ok(None),
            }
        }
        Ok(Some(grad))
    }
}
