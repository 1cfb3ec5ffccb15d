//! The progressive implicit network and the two baselines it is compared
//! against.

mod baseline;
mod pin;

pub use baseline::{BaselineKind, BaselineModel};
pub use pin::{LevelOutputs, PinArchitecture, PinConfig, PinModel, PinTrace, WeightProfile};

use crate::error::Result;
use crate::numerics::Tensor2;

/// Rows per chunk when evaluating large coordinate sets.
pub const EVAL_CHUNK: usize = 4096;

/// Evaluates `f` over row chunks of `x` in parallel and stacks the results.
pub(crate) fn chunked<F>(x: &Tensor2, out_dim: usize, f: F) -> Result<Tensor2>
where
    F: Fn(&Tensor2) -> Result<Tensor2> + Sync,
{
    use rayon::prelude::*;
    if x.rows() <= EVAL_CHUNK {
        return f(x);
    }
    let starts: Vec<usize> = (0..x.rows()).step_by(EVAL_CHUNK).collect();
    let parts: Vec<Tensor2> = starts
        .par_iter()
        .map(|&s| {
            let idx: Vec<usize> = (s..(s + EVAL_CHUNK).min(x.rows())).collect();
            f(&x.gather_rows(&idx))
        })
        .collect::<Result<_>>()?;
    let mut data = Vec::with_capacity(x.rows() * out_dim);
    for p in parts {
        data.extend_from_slice(p.data());
    }
    Tensor2::from_vec(x.rows(), out_dim, data)
}
