//! Petri-net workflow engine with two workflows built on it: symmetric
//! chamber traversal of hyperplane arrangements and a tree-of-charts
//! smoothness search.
//!
//! The engine ([`petri`], [`runtime`]) is generic. The geometry and algebra
//! kernels ([`arrangement`], [`symmetry`], [`poly`]) are exact over the
//! rationals. [`traversal`] and [`charts`] wire them into nets.

pub mod petri;
pub mod runtime;
pub mod sign;
pub mod symmetry;
pub mod arrangement;
pub mod poly;
pub mod cost;
pub mod traversal;
pub mod charts;

pub use arrangement::{Arrangement, Chamber, Rational};
pub use petri::{Binding, Marking, NetArc, PetriNet, Place, Registry, TokenId, TokenValue, Transition};
pub use runtime::{run, run_deterministic, FiringRecord, RunConfig, RunResult, RunVerdict};
pub use sign::{Sign, SignVector};
pub use symmetry::{Group, SignedPermutation};
