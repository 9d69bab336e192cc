//! Desk-scale salient object detection toolkit.
//!
//! Dense f64 tensors with hand-written backward passes, the fire / channel
//! attention decoder blocks, a miniature U-shaped network with side outputs,
//! Adam/AdaX and comparison optimizers, saliency metrics and a deterministic
//! synthetic dataset. IO lives in the `csod` crate; this crate only needs
//! `alloc`.
#![no_std]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod bench;
pub mod blocks;
pub mod error;
pub mod layers;
pub mod metrics;
pub mod net;
pub mod ops;
pub mod optim;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{Param, ParamId, ParamKind, Parameterized, Shape, Tensor};
