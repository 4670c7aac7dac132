//! Reverse-mode differentiation over a recorded tape of dense vector values.
//!
//! Every node holds a flat row-major value with a `(rows, cols)` shape;
//! vectors are single rows and scalars are `1 × 1`. Binary element-wise ops
//! broadcast a scalar operand. Operands are always recorded before their
//! consumers, so the tape order is a topological order and the backward pass
//! walks it in reverse.

mod gradcheck;
mod tape;

use thiserror::Error;

pub use gradcheck::{grad_check, GradCheck};
pub use tape::{Gradients, ParamValue, Tape, Var, DENOMINATOR_GUARD};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdError {
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("domain error in {op}: {detail}")]
    DomainError { op: &'static str, detail: String },
    #[error("backward needs a scalar output, got {len} values")]
    NotScalar { len: usize },
    #[error("parameter `{0}` registered twice")]
    DuplicateParameter(String),
}
