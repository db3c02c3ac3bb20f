//! Single-source domain generalization with a gradient-trained proxy model,
//! a parameter-averaged task model, and an entropy regularizer that ties the
//! two together in feature space.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is a pure
//! function of its inputs and seeds; file formats, configuration parsing and
//! the command line live in the `peerlab` crate.
//!
//! Module map:
//!
//! - [`tensor`]: dense row-major matrices and the finite-difference oracle.
//! - [`nets`]: encoder / classifier / projection-head MLPs with manual
//!   backward passes, parameter vectors and parameter-space arithmetic.
//! - [`synthdata`]: the procedural glyph benchmark and augmentation policies.
//! - [`losses`]: cross-entropy, Barlow Twins, InfoNCE and the proxy objective.
//! - [`optim`]: Adam.
//! - [`trainer`]: the training loop for every method variant.
//! - [`diagnostics`]: CKA, loss barriers, fluctuation, Sinkhorn and the
//!   dataset distance.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod diagnostics;
pub mod error;
pub mod losses;
pub mod nets;
pub mod optim;
pub mod seed;
pub mod synthdata;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
pub use nets::{Checkpoint, MlpSpec, ParameterVector};
pub use tensor::Tensor;
