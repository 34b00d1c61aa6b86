//! Dense one-stage object detection from first principles.
//!
//! The crate is `no_std` (with `alloc`) and carries every algorithmic piece of
//! the detector: a small dense [`Tensor`] type with a reverse-mode autodiff
//! [`Graph`], SGD with momentum, the TinyNet backbone with a feature pyramid,
//! anchors and matching, focal / hard-negative / smooth-L1 losses, the
//! normalized-loss CDF diagnostic, NMS, average precision and the FPS harness.
//! File formats, IO and the command line live in the `ddet` crate.

#![no_std]
// Negated float comparisons are how NaN gets rejected in validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod anchors;
pub mod boxes;
pub mod cdf;
pub mod data;
pub mod error;
pub mod eval;
pub mod graph;
pub mod losses;
pub mod matching;
pub mod model;
pub mod nms;
pub mod ops;
pub mod optim;
pub mod render;
pub mod scalar;
pub mod tensor;
pub mod train;

pub use anchors::{AnchorSet, PyramidConfig};
pub use boxes::BBox;
pub use error::{Error, Result};
pub use graph::{Gradients, Graph, NodeId};
pub use losses::{ClsMode, LossReport};
pub use matching::{AnchorLabel, MatchResult};
pub use model::{Detection, DetectorConfig, Params};
pub use optim::{SgdState, TrainConfig};
pub use scalar::{DType, Scalar};
pub use tensor::Tensor;
