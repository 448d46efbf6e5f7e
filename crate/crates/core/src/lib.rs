//! Exact-arithmetic laboratory for harmonic functions on graphs and groups:
//! harmonic-space dimensions, Garden-of-Eden style duality for local linear
//! maps, taboo decompositions of random walks, and constructions of
//! harmonic functions with controlled growth.

pub mod construct;
pub mod error;
pub mod family;
pub mod field;
pub mod graphs;
pub mod groups;
pub mod laplace;
pub mod lca;
pub mod linalg;
pub mod rational;
pub mod report;
pub mod walks;

pub use error::{Error, Result};
pub use family::GraphFamily;
pub use field::{Field, PrimeField, Rationals};
pub use graphs::{GraphBuilder, VertexSet, WeightedGraph};
pub use groups::{Element, GroupModel, SymmetricMeasure};
pub use rational::Q;
pub use report::{Claim, ClaimKind, Report, Status, Table};
