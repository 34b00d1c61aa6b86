use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        op: &'static str,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("invalid shape {shape:?}: {reason}")]
    InvalidShape { shape: Vec<usize>, reason: String },
    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),
    #[error("loss node must be scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("invalid argument `{arg}`: {reason}")]
    InvalidArgument { arg: &'static str, reason: String },
    #[error("missing parameter `{0}`")]
    MissingParam(String),
    #[error("image size {h}x{w} is not divisible by {stride}")]
    IndivisibleImage { h: usize, w: usize, stride: usize },
    #[error("anchor set is empty")]
    EmptyAnchors,
    #[error("non-positive box size on encode: {w} x {h}")]
    DegenerateBox { w: f64, h: f64 },
    #[error("empty input to {0}")]
    Empty(&'static str),
    #[error("all losses are zero; cumulative share undefined")]
    ZeroLoss,
    #[error("no class has ground truth")]
    NoGroundTruth,
    #[error("clock reported a non-positive duration ({0} s)")]
    ZeroDuration(f64),
    #[error("could not place object {object} in image {image} after {attempts} attempts")]
    Placement {
        image: usize,
        object: usize,
        attempts: usize,
    },
}

pub(crate) fn invalid(arg: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidArgument {
        arg,
        reason: reason.into(),
    }
}
