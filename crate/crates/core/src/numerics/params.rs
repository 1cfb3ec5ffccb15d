use crate::error::{PinError, Result};

use super::Tensor2;

/// Index of a block inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BlockId(pub(crate) usize);

/// One named parameter tensor with its gradient and Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBlock {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    /// Frozen blocks receive gradients but are skipped by the optimizer.
    pub trainable: bool,
}

impl ParamBlock {
    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn as_tensor(&self) -> Tensor2 {
        Tensor2::from_vec(self.rows, self.cols, self.value.clone()).expect("block shape")
    }
}

/// Flat container of all parameters of a model.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    blocks: Vec<ParamBlock>,
    pub(crate) step: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, rows: usize, cols: usize, value: Vec<f64>) -> BlockId {
        let name = name.into();
        assert_eq!(value.len(), rows * cols, "block `{name}` has wrong length");
        assert!(self.find(&name).is_none(), "duplicate block `{name}`");
        let n = value.len();
        self.blocks.push(ParamBlock {
            name,
            rows,
            cols,
            value,
            grad: vec![0.0; n],
            m: vec![0.0; n],
            v: vec![0.0; n],
            trainable: true,
        });
        BlockId(self.blocks.len() - 1)
    }

    pub fn find(&self, name: &str) -> Option<BlockId> {
        self.blocks.iter().position(|b| b.name == name).map(BlockId)
    }

    pub fn block(&self, id: BlockId) -> &ParamBlock {
        &self.blocks[id.0]
    }

    pub fn block_mut(&mut self, id: BlockId) -> &mut ParamBlock {
        &mut self.blocks[id.0]
    }

    pub fn blocks(&self) -> &[ParamBlock] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [ParamBlock] {
        &mut self.blocks
    }

    pub fn value(&self, id: BlockId) -> &[f64] {
        &self.blocks[id.0].value
    }

    pub fn grad_mut(&mut self, id: BlockId) -> &mut [f64] {
        &mut self.blocks[id.0].grad
    }

    pub fn set_trainable(&mut self, id: BlockId, trainable: bool) {
        self.blocks[id.0].trainable = trainable;
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn set_step(&mut self, step: u64) {
        self.step = step;
    }

    /// Total number of scalar parameters, frozen blocks included.
    pub fn num_params(&self) -> usize {
        self.blocks.iter().map(ParamBlock::len).sum()
    }

    pub fn zero_grad(&mut self) {
        for b in &mut self.blocks {
            b.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    /// Replaces the values of the block called `name`, checking the shape.
    pub fn load_values(&mut self, name: &str, rows: usize, cols: usize, value: Vec<f64>) -> Result<()> {
        let id = self
            .find(name)
            .ok_or_else(|| PinError::param(format!("unknown parameter block `{name}`")))?;
        let b = &mut self.blocks[id.0];
        if (b.rows, b.cols) != (rows, cols) || value.len() != rows * cols {
            return Err(PinError::shape(format!(
                "block `{name}` is {}x{}, got {rows}x{cols}",
                b.rows, b.cols
            )));
        }
        b.value = value;
        Ok(())
    }

    pub fn first_non_finite_grad(&self) -> Option<&str> {
        self.blocks
            .iter()
            .find(|b| b.grad.iter().any(|g| !g.is_finite()))
            .map(|b| b.name.as_str())
    }
}

/// Anything that owns a [`ParamStore`].
pub trait Parameterized {
    fn params(&self) -> &ParamStore;
    fn params_mut(&mut self) -> &mut ParamStore;

    fn num_params(&self) -> usize {
        self.params().num_params()
    }
}

impl Parameterized for ParamStore {
    fn params(&self) -> &ParamStore {
        self
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        self
    }
}
