//! Laplacian and transpose operators, the exact Dirichlet solver, the
//! harmonic-dimension estimator and the finite harmonic-extension duality
//! test.
//!
//! For a graph with hold probability `h` (lazy walks) the operator is
//! `Δf(x) = (1-h)·(f(x) - Σ_y ω_xy f(y) / deg x)`, which for Cayley balls is
//! exactly `f(x) - Σ_s μ(s) f(xs)`. The transpose replaces `deg x` by
//! `deg y`.

use std::collections::{BTreeMap, HashMap};

use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::family::{within, GraphFamily};
use crate::field::Rationals;
use crate::graphs::{VertexSet, WeightedGraph};
use crate::linalg::{projected_rank, solve, Echelon, SparseMatrix, SparseRow};
use crate::rational::{fmt_q, Q};

/// Row of `Δ` (or `Δ'`) at `x` as `(column, coefficient)` pairs, without
/// checking that the neighbourhood of `x` is fully loaded.
pub fn row_entries(g: &WeightedGraph, x: usize, transpose: bool) -> SparseRow<Q> {
    let s = Q::one() - g.hold();
    let dx = g.degree(x);
    let mut row = vec![(x, s.clone())];
    for (y, w) in g.neighbours(x) {
        let d = if transpose { g.degree(*y) } else { dx.clone() };
        row.push((*y, -(&s * w / d)));
    }
    row.sort_by_key(|(c, _)| *c);
    row
}

/// Row of `Δ` (or `Δ'`) at `x`; fails when `x` lies on the truncation
/// frontier, where the row is not known.
pub fn laplacian_row(g: &WeightedGraph, x: usize, transpose: bool) -> Result<SparseRow<Q>> {
    if !g.is_complete(x) {
        return Err(Error::Domain(format!("{} (neighbourhood truncated)", g.id(x))));
    }
    Ok(row_entries(g, x, transpose))
}

fn apply(g: &WeightedGraph, f: &BTreeMap<usize, Q>, at: &VertexSet, transpose: bool) -> Result<BTreeMap<usize, Q>> {
    g.check_subset(at)?;
    let mut out = BTreeMap::new();
    for &x in at {
        let mut acc = Q::zero();
        for (y, c) in laplacian_row(g, x, transpose)? {
            let v = f.get(&y).ok_or_else(|| Error::Domain(g.id(y).to_string()))?;
            acc += c * v;
        }
        out.insert(x, acc);
    }
    Ok(out)
}

/// `Δf` on `at`; `f` must be defined on `at⁺`.
pub fn apply_laplacian(g: &WeightedGraph, f: &BTreeMap<usize, Q>, at: &VertexSet) -> Result<BTreeMap<usize, Q>> {
    apply(g, f, at, false)
}

/// `Δ'f` on `at`; `f` must be defined on `at⁺`.
pub fn apply_transpose(g: &WeightedGraph, f: &BTreeMap<usize, Q>, at: &VertexSet) -> Result<BTreeMap<usize, Q>> {
    apply(g, f, at, true)
}

/// Matrix of `Δ` or `Δ'` with the given rows and columns (both as vertex
/// lists); row `i` is vertex `rows[i]`, column `j` is vertex `cols[j]`.
/// Entries in columns outside `cols` are dropped.
pub fn laplacian_slice(g: &WeightedGraph, rows: &[usize], cols: &[usize], transpose: bool) -> Result<SparseMatrix<Q>> {
    let index: HashMap<usize, usize> = cols.iter().enumerate().map(|(j, &c)| (c, j)).collect();
    let mut m = SparseMatrix::new(cols.len());
    for &x in rows {
        let row = if transpose { row_entries(g, x, true) } else { laplacian_row(g, x, false)? };
        m.push_row(row.into_iter().filter_map(|(y, c)| index.get(&y).map(|&j| (j, c))).collect());
    }
    Ok(m)
}

fn ids(g: &WeightedGraph, vs: impl IntoIterator<Item = usize>) -> Vec<String> {
    vs.into_iter().map(|v| g.id(v).to_string()).collect()
}

// ---------------------------------------------------------------------------
// Dirichlet problems
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Default)]
pub struct BoundaryValueProblem {
    /// Finite region `A` on which the solution is harmonic.
    pub region: VertexSet,
    /// Values on `∂⁺A`.
    pub boundary: BTreeMap<usize, Q>,
    /// Value used on `∂⁺A` vertices missing from `boundary`.
    pub default_boundary: Option<Q>,
    /// When set, weight leaving the loaded graph from a vertex of `A` is
    /// treated as an edge to a sink carrying this value. Without it, a region
    /// touching the truncation frontier is rejected.
    pub absorbing_frontier: Option<Q>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DirichletSolution {
    /// Values on `A⁺`.
    #[serde(skip)]
    pub values: BTreeMap<usize, Q>,
    /// Number of connected components of `A`, each checked separately for the
    /// maximum principle.
    pub components: usize,
    pub max_principle_ok: bool,
}

/// Boundary data of `p` resolved on `∂⁺A`.
fn resolved_boundary(g: &WeightedGraph, p: &BoundaryValueProblem) -> Result<BTreeMap<usize, Q>> {
    let outer = g.outer_boundary(&p.region);
    if let Some(v) = p.boundary.keys().find(|v| !outer.contains(v)) {
        return Err(Error::Precondition(format!("boundary value given at {}, which is not in the outer boundary", g.id(*v))));
    }
    let mut out = BTreeMap::new();
    for &b in &outer {
        let v = match (p.boundary.get(&b), &p.default_boundary) {
            (Some(v), _) => v.clone(),
            (None, Some(d)) => d.clone(),
            (None, None) => return Err(Error::Precondition(format!("missing boundary value at {}", g.id(b)))),
        };
        out.insert(b, v);
    }
    Ok(out)
}

/// Solves `Δf = 0` on `A`, `f = f₀` on `∂⁺A`, exactly. Every solution is
/// re-checked: the residual must vanish and, on each component `C` of `A`,
/// the values must lie between the extreme boundary values seen by `C`,
/// strictly unless that boundary data is constant.
pub fn dirichlet_solve(g: &WeightedGraph, p: &BoundaryValueProblem) -> Result<DirichletSolution> {
    g.check_subset(&p.region)?;
    if p.region.is_empty() {
        return Err(Error::Precondition("empty region".into()));
    }
    let f0 = resolved_boundary(g, p)?;
    if p.absorbing_frontier.is_none() {
        if let Some(x) = p.region.iter().find(|&&x| !g.is_complete(x)) {
            return Err(Error::Precondition(format!(
                "region touches the truncation frontier at {}; declare the frontier absorbing",
                g.id(*x)
            )));
        }
    }
    let comps = g.components(&p.region);
    for c in &comps {
        let touches = !g.outer_boundary(c).is_empty() || (p.absorbing_frontier.is_some() && c.iter().any(|&x| !g.is_complete(x)));
        if !touches {
            return Err(Error::Precondition(format!(
                "component containing {} has no boundary; the problem is singular",
                g.id(*c.iter().next().expect("components are nonempty"))
            )));
        }
    }

    let vars: Vec<usize> = p.region.iter().copied().collect();
    let index: HashMap<usize, usize> = vars.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let sink = p.absorbing_frontier.clone().unwrap_or_else(Q::zero);
    let mut m = SparseMatrix::new(vars.len());
    let mut rhs = Vec::with_capacity(vars.len());
    for &x in &vars {
        let d = g.degree(x);
        let mut row = vec![(index[&x], Q::one())];
        let mut b = g.outside_weight(x) / &d * &sink;
        for (y, w) in g.neighbours(x) {
            match index.get(y) {
                Some(&j) => row.push((j, -(w / &d))),
                None => b += w / &d * &f0[y],
            }
        }
        m.push_row(row);
        rhs.push(b);
    }
    let sol = solve(&Rationals, &m, &rhs).ok_or_else(|| Error::Invariant("Dirichlet system is inconsistent".into()))?;
    if !sol.kernel.is_empty() {
        return Err(Error::Invariant("Dirichlet system is singular".into()));
    }
    let mut values = f0.clone();
    for (i, v) in sol.particular.into_iter().enumerate() {
        values.insert(vars[i], v);
    }

    // residual: harmonic on A (with the sink as an extra neighbour)
    for &x in &vars {
        let d = g.degree(x);
        let mut avg = g.outside_weight(x) / &d * &sink;
        for (y, w) in g.neighbours(x) {
            avg += w / &d * &values[y];
        }
        if avg != values[&x] {
            return Err(Error::Invariant(format!("solution is not harmonic at {}", g.id(x))));
        }
    }

    let mut max_principle_ok = true;
    for c in &comps {
        let mut data: Vec<&Q> = g.outer_boundary(c).iter().map(|b| &f0[b]).collect();
        if p.absorbing_frontier.is_some() && c.iter().any(|&x| !g.is_complete(x)) {
            data.push(&sink);
        }
        let lo = data.iter().min().expect("component has boundary");
        let hi = data.iter().max().expect("component has boundary");
        for x in c {
            let v = &values[x];
            let ok = if lo == hi { v == *lo } else { *lo < v && v < *hi };
            max_principle_ok &= ok;
        }
    }
    if !max_principle_ok {
        return Err(Error::Invariant("maximum principle violated".into()));
    }
    Ok(DirichletSolution { values, components: comps.len(), max_principle_ok })
}

/// Domination check for two problems on the same region: if the boundary
/// data of `p1` dominate those of `p2` then the solution `s1` must dominate
/// `s2` on `A⁺`. Returns whether it does; fails if the data are not ordered.
pub fn check_domination(
    g: &WeightedGraph,
    p1: &BoundaryValueProblem,
    s1: &DirichletSolution,
    p2: &BoundaryValueProblem,
    s2: &DirichletSolution,
) -> Result<bool> {
    if p1.region != p2.region {
        return Err(Error::Precondition("domination compares problems on the same region".into()));
    }
    let (b1, b2) = (resolved_boundary(g, p1)?, resolved_boundary(g, p2)?);
    let ordered = b1.iter().all(|(v, x)| x >= &b2[v])
        && match (&p1.absorbing_frontier, &p2.absorbing_frontier) {
            (Some(a), Some(b)) => a >= b,
            (None, None) => true,
            _ => false,
        };
    if !ordered {
        return Err(Error::Precondition("boundary data are not ordered".into()));
    }
    Ok(s1.values.iter().all(|(v, x)| x >= &s2.values[v]))
}

// ---------------------------------------------------------------------------
// Harmonic restriction dimension
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct HarmDimReport {
    pub family: String,
    pub window: usize,
    pub stall: usize,
    pub max_depth: usize,
    /// `(m, d_n(m))` for each depth examined.
    pub dims: Vec<(usize, usize)>,
    /// The common value of the last `stall` dimensions, when they agree.
    pub stabilized: Option<usize>,
    /// `d_n(m)` never increased along the sweep.
    pub monotone: bool,
}

/// `d_n(m) = dim { f|B(n) : f: B(m)⁺ → Q, Δf = 0 on B(m) }` for
/// `m = n, n+1, ...` until `stall` consecutive depths agree or `max_depth`
/// is reached. No stabilization within `max_depth` is reported, not guessed.
pub fn harmonic_restriction_dimension(fam: &GraphFamily, n: usize, max_depth: usize, stall: usize) -> Result<HarmDimReport> {
    if stall == 0 {
        return Err(Error::Precondition("stall must be positive".into()));
    }
    let mut dims = Vec::new();
    let mut stabilized = None;
    for m in n..=max_depth {
        let d = restriction_dim(fam, n, m)?;
        dims.push((m, d));
        if dims.len() >= stall && dims[dims.len() - stall..].iter().all(|&(_, x)| x == d) {
            stabilized = Some(d);
            break;
        }
    }
    let monotone = dims.windows(2).all(|w| w[1].1 <= w[0].1);
    Ok(HarmDimReport { family: fam.name(), window: n, stall, max_depth, dims, stabilized, monotone })
}

/// One term `d_n(m)` of the harmonic restriction sequence.
pub fn restriction_dim(fam: &GraphFamily, n: usize, m: usize) -> Result<usize> {
    let ball = fam.ball(m + 1)?;
    let rows = within(&ball, m);
    let mut e = Echelon::new(Rationals, ball.len());
    for &x in &rows {
        let row = laplacian_row(&ball, x, false).map_err(|_| {
            Error::Truncation(format!("vertex {} at depth {m} has a truncated neighbourhood", ball.id(x)))
        })?;
        e.insert(&row);
    }
    let kernel = e.nullspace();
    Ok(projected_rank(&Rationals, &kernel, &within(&ball, n)))
}

// ---------------------------------------------------------------------------
// Harmonic-extension duality
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct ExtensionResult {
    pub vertex: String,
    pub extends: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct DualityReport {
    pub depth: usize,
    pub x: Vec<String>,
    /// A nonzero function supported in `B(depth)` with `Δ'` vanishing off X.
    pub witness: Option<BTreeMap<String, String>>,
    pub witness_space_dim: usize,
    /// Solvability of `Δh = 0` on `B(depth)`, `h|X = δ_v`, for each `v ∈ X`.
    pub extensions: Vec<ExtensionResult>,
    pub all_extend: bool,
    /// Witness found exactly when some datum fails to extend.
    pub consistent: bool,
    pub note: String,
}

/// Finite-depth test of the equivalence between "every function on X
/// extends to a harmonic function" and "no nonzero finitely supported
/// function has `Δ'` supported in X". Both sides are computed exactly at
/// depth `m`; by linear duality they agree at every depth.
pub fn duality_test(fam: &GraphFamily, x_ids: &[String], m: usize) -> Result<DualityReport> {
    if x_ids.is_empty() {
        return Err(Error::Precondition("X must be nonempty".into()));
    }
    if m < 2 {
        return Err(Error::Precondition("depth must be at least 2".into()));
    }
    let ball = fam.ball(m + 1)?;
    let dist = ball.dist_tags().expect("balls carry distance tags").to_vec();
    let mut xs = VertexSet::new();
    for id in x_ids {
        let v = ball
            .vertex(id)
            .map_err(|_| Error::Precondition(format!("X vertex {id} is not inside B({})", m - 2)))?;
        if dist[v] + 2 > m {
            return Err(Error::Precondition(format!("X vertex {id} is not inside B({})", m - 2)));
        }
        xs.insert(v);
    }

    // witness: columns B(m), rows of Δ' at every loaded vertex outside X
    let cols = within(&ball, m);
    let rows: Vec<usize> = (0..ball.len()).filter(|v| !xs.contains(v)).collect();
    let slice = laplacian_slice(&ball, &rows, &cols, true)?;
    let mut e = Echelon::new(Rationals, cols.len());
    for r in &slice.rows {
        e.insert(r);
    }
    let kernel = e.nullspace();
    let witness = kernel.first().map(|v| {
        let lead = v.iter().find(|c| !c.is_zero()).expect("basis vectors are nonzero").clone();
        v.iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(j, c)| (ball.id(cols[j]).to_string(), fmt_q(&(c / &lead))))
            .collect::<BTreeMap<_, _>>()
    });

    // extensions: unknowns on B(m+1), Δh = 0 on B(m), h|X = δ_v
    let harmonic_rows = within(&ball, m);
    let all: Vec<usize> = (0..ball.len()).collect();
    let base = laplacian_slice(&ball, &harmonic_rows, &all, false)?;
    let mut extensions = Vec::new();
    for &v in &xs {
        let mut sys = base.clone();
        let mut rhs = vec![Q::zero(); base.nrows()];
        for &u in &xs {
            sys.push_row(vec![(u, Q::one())]);
            rhs.push(if u == v { Q::one() } else { Q::zero() });
        }
        let extends = solve(&Rationals, &sys, &rhs).is_some();
        extensions.push(ExtensionResult { vertex: ball.id(v).to_string(), extends });
    }
    let all_extend = extensions.iter().all(|e| e.extends);
    let consistent = witness.is_some() != all_extend;
    let note = if witness.is_some() {
        format!("witness found at depth {m}: conclusive")
    } else {
        format!("no witness supported in B({m}); absence is not conclusive beyond this depth")
    };
    Ok(DualityReport {
        depth: m,
        x: ids(&ball, xs.iter().copied()),
        witness,
        witness_space_dim: kernel.len(),
        extensions,
        all_extend,
        consistent,
        note,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{asym_hitting_graph, cycle, path};
    use crate::groups::{GroupModel, SymmetricMeasure};
    use crate::rational::{q, qi};

    fn z_family(spec: &str) -> GraphFamily {
        let z = GroupModel::integers();
        let mu = SymmetricMeasure::parse_shorthand(&z, spec).unwrap();
        GraphFamily::cayley(z, mu)
    }

    fn by_id(g: &WeightedGraph, f: impl Fn(i64) -> Q) -> BTreeMap<usize, Q> {
        (0..g.len()).map(|v| (v, f(g.id(v).parse().unwrap()))).collect()
    }

    #[test]
    fn laplacian_of_delta_on_z() {
        let g = path(-5, 5);
        let f = by_id(&g, |x| if x == 0 { qi(1) } else { qi(0) });
        let at: VertexSet = (0..g.len()).filter(|&v| g.is_complete(v)).collect();
        let out = apply_laplacian(&g, &f, &at).unwrap();
        for (v, val) in out {
            let x: i64 = g.id(v).parse().unwrap();
            let expect = match x {
                0 => qi(1),
                -1 | 1 => q(-1, 2),
                _ => qi(0),
            };
            assert_eq!(val, expect, "at {x}");
        }
    }

    #[test]
    fn missing_value_is_a_domain_error() {
        let g = path(0, 4);
        let mut f = by_id(&g, qi);
        f.remove(&g.vertex("3").unwrap());
        let at = VertexSet::from([g.vertex("2").unwrap()]);
        assert!(matches!(apply_laplacian(&g, &f, &at), Err(Error::Domain(m)) if m == "3"));
    }

    #[test]
    fn transpose_of_degree_vanishes() {
        let g = asym_hitting_graph(3).unwrap();
        let f: BTreeMap<usize, Q> = (0..g.len()).map(|v| (v, g.degree(v))).collect();
        let at: VertexSet = g.interior(&(0..g.len()).collect());
        assert!(apply_transpose(&g, &f, &at).unwrap().values().all(|v| v.is_zero()));
    }

    #[test]
    fn dirichlet_on_path_is_affine() {
        let g = path(0, 10);
        let region: VertexSet = (1..10).map(|k| g.vertex(&k.to_string()).unwrap()).collect();
        let p = BoundaryValueProblem {
            region,
            boundary: BTreeMap::from([(g.vertex("0").unwrap(), qi(0)), (g.vertex("10").unwrap(), qi(1))]),
            ..Default::default()
        };
        let s = dirichlet_solve(&g, &p).unwrap();
        for k in 0..=10 {
            assert_eq!(s.values[&g.vertex(&k.to_string()).unwrap()], q(k, 10));
        }
    }

    #[test]
    fn dirichlet_rejects_frontier_and_closed_regions() {
        let g = path(0, 4);
        let all: VertexSet = (0..g.len()).collect();
        let p = BoundaryValueProblem { region: all, ..Default::default() };
        assert!(matches!(dirichlet_solve(&g, &p), Err(Error::Precondition(_))));
        let c = cycle(5).unwrap();
        let ball = c.ball(1).unwrap();
        let p = BoundaryValueProblem { region: (0..ball.len()).collect(), ..Default::default() };
        assert!(matches!(dirichlet_solve(&ball, &p), Err(Error::Precondition(_))));
    }

    #[test]
    fn harmdim_small_cases() {
        let r = harmonic_restriction_dimension(&z_family("standard"), 2, 20, 4).unwrap();
        assert_eq!(r.stabilized, Some(2));
        let r = harmonic_restriction_dimension(&z_family("uniform:pm1,pm2"), 3, 20, 4).unwrap();
        assert_eq!(r.stabilized, Some(4));
        let r = harmonic_restriction_dimension(&GraphFamily::Trofimov, 2, 30, 4).unwrap();
        assert_eq!(r.stabilized, Some(1));
        assert!(r.monotone);
    }

    #[test]
    fn duality_on_z() {
        let fam = z_family("standard");
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        let r = duality_test(&fam, &s(&["0", "1", "2"]), 8).unwrap();
        assert_eq!(r.witness, Some(BTreeMap::from([("1".to_string(), "1/1".to_string())])));
        assert!(!r.all_extend && r.consistent);
        let r = duality_test(&fam, &s(&["0"]), 8).unwrap();
        assert!(r.witness.is_none() && r.all_extend && r.consistent);
        assert!(duality_test(&fam, &s(&["7"]), 8).is_err());
    }
}
