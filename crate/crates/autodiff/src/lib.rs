//! Reverse-mode automatic differentiation for small convolutional networks.
//!
//! Values are `f64` throughout. A [`Tape`] records operations as they run;
//! [`Tape::backward`] then fills gradients for every node that asked for one.
//! Layers ([`layers`]) keep their weights in a [`ParamStore`] and take the
//! tape-bound variables as an argument, which lets [`gradcheck`] perturb
//! parameters directly.
//!
//! ```
//! use handpose_autodiff::{Tape, Tensor};
//!
//! let mut tape = Tape::new();
//! let x = tape.leaf(Tensor::new(vec![2], vec![3.0, -1.0]).unwrap().with_requires_grad(true));
//! let sq = tape.mul(x, x).unwrap();
//! let y = tape.sum(sq);
//! tape.backward(y).unwrap();
//! assert_eq!(tape.grad(x).unwrap(), &[6.0, -2.0]);
//! ```

pub mod checkpoint;
pub mod error;
pub mod gradcheck;
mod kernels;
pub mod layers;
pub mod optim;
pub mod tape;
pub mod tensor;

pub use checkpoint::{Archive, ArchiveEntry};
pub use error::{Result, TensorError};
pub use gradcheck::{gradient_check, gradient_check_report, Coordinates, GradCheckReport};
pub use kernels::ConvGeometry;
pub use layers::{Conv2d, Linear, ParamStore, ResidualBlock};
pub use optim::{Adam, Sgd};
pub use tape::{Tape, Var};
pub use tensor::{weight_penalty, Parameter, Tensor};
