//! Shared fixtures for the benchmarks in `benches/`.

use std::collections::BTreeMap;

use harmlab::family::within;
use harmlab::graphs::VertexSet;
use harmlab::laplace::BoundaryValueProblem;
use harmlab::rational::qi;
use harmlab::{GraphFamily, GroupModel, SymmetricMeasure, WeightedGraph};

/// The simple random walk on `Z^d`.
pub fn lattice(d: usize) -> GraphFamily {
    let g = GroupModel::free_abelian(d).expect("positive rank");
    let mu = SymmetricMeasure::standard(&g).expect("standard measure");
    GraphFamily::cayley(g, mu)
}

/// Dirichlet problem on `B(r-1)` of a loaded ball, boundary values `±1`
/// alternating along the vertex order.
pub fn sphere_problem(g: &WeightedGraph, r: usize) -> BoundaryValueProblem {
    let region: VertexSet = within(g, r - 1).into_iter().collect();
    let boundary: BTreeMap<_, _> =
        g.outer_boundary(&region).into_iter().enumerate().map(|(i, v)| (v, qi(if i % 2 == 0 { 1 } else { -1 }))).collect();
    BoundaryValueProblem { region, boundary, default_boundary: None, absorbing_frontier: None }
}
