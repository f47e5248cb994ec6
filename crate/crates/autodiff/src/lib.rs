//! Reverse-mode differentiation for small recurrent-convolutional text
//! models.
//!
//! Values live on a [`Tape`]; trainable arrays live in a [`ParamSet`] and are
//! bound to a fresh tape for every forward pass. After
//! [`Tape::backward`], [`Gradients::accumulate_into`] moves parameter
//! gradients back into the set, where [`Adam`] consumes them.
//!
//! ```
//! use autodiff::{ParamSet, Tape, Tensor};
//!
//! let mut params = ParamSet::new();
//! let w = params.add("w", Tensor::new(vec![2, 1], vec![0.5, -1.0]).unwrap()).unwrap();
//! let mut tape = Tape::new();
//! let x = tape.constant(Tensor::new(vec![1, 2], vec![2.0, 3.0]).unwrap());
//! let wv = tape.param(&params, w);
//! let y = tape.matmul(x, wv).unwrap();
//! let loss = tape.sum(y);
//! let grads = tape.backward(loss).unwrap();
//! assert_eq!(grads.param(w).unwrap(), vec![2.0, 3.0]);
//! ```

mod error;
mod gradcheck;
mod linalg;
pub mod nn;
mod optim;
mod param;
mod tape;
mod tensor;

pub use error::{AutodiffError, Result};
pub use gradcheck::{gradient_check, GradCheckOptions, GradCheckReport};
pub use optim::{Adam, AdamConfig};
pub use param::{ParamId, ParamSet, Parameter};
pub use tape::{log_sum_exp, pool_positions, sigmoid, softmax_rows, Gradients, KinkSummary, Tape, Var};
pub use tensor::Tensor;
