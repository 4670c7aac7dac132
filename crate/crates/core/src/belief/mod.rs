//! Finite-frame belief-function algebra.
//!
//! Frames are ordered class lists and subsets are bitmasks over them. Mass
//! functions are always normalized (no mass on the empty set) and are combined
//! with Dempster's rule. Frames of different granularity are related through
//! refinings, along which mass functions are carried by vacuous extension.

mod error;
mod frame;
mod mass;
mod pignistic;
mod refining;
mod subset;

pub use error::BeliefError;
pub use frame::{Frame, DEFAULT_MAX_CLASSES};
pub use mass::{
    belief, combine, combine_all, conflict_degree, make_mass, plausibility, MassFunction, CONFLICT_THRESHOLD,
    NORMALIZATION_TOLERANCE,
};
pub use pignistic::{decide, pignistic, PignisticDistribution};
pub use refining::{make_refining, vacuous_extend, Refining};
pub use subset::ClassSubset;

pub(crate) use pignistic::argmax;
