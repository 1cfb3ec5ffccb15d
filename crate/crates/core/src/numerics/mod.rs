//! Dense linear algebra, the layer vocabulary used by every model, and the
//! optimizer.
//!
//! Gradients are derived by hand for a closed set of operations (affine,
//! ReLU, sine, concatenation, weighted sum); there is no general autodiff.

mod adam;
mod gradcheck;
mod layers;
mod params;
mod tensor;

pub use adam::AdamConfig;
pub use gradcheck::{finite_difference_check, GradCheck};
pub use layers::{relu_backward, relu_forward, sine_backward, sine_forward, Activation, Dense, Init, Mlp, MlpTrace};
pub use params::{BlockId, ParamBlock, ParamStore, Parameterized};
pub use tensor::{affine_forward, Tensor2};
