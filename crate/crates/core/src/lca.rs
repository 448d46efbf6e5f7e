//! Locally specifiable linear maps over the alphabet `V = K^r`.
//!
//! A map is specified either on a group (`τ(f)(x) = Σ_s C_s f(xs)` with
//! `r × r` coefficient blocks `C_s`), as the Laplacian of a graph family, or
//! explicitly on a finite graph. Everything is evaluated through finite
//! ball slices `τ_B^A` whose rows are checked to be fully known before use.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{within, GraphFamily};
use crate::field::{Field, PrimeField};
use crate::graphs::WeightedGraph;
use crate::groups::{cayley_ball, Element, Family, GroupModel, GroupSpec, SymmetricMeasure};
use crate::laplace::row_entries;
use crate::linalg::{solve, Echelon, SparseMatrix, SparseRow};
use crate::rational::{parse_q, Q};

/// Dense `r × r` block.
pub type Block<E> = Vec<Vec<E>>;

fn block_transpose<E: Clone>(b: &Block<E>) -> Block<E> {
    let r = b.len();
    (0..r).map(|i| (0..r).map(|j| b[j][i].clone()).collect()).collect()
}

fn block_is_zero<F: Field>(field: &F, b: &Block<F::Elem>) -> bool {
    b.iter().flatten().all(|x| field.is_zero(x))
}

/// A locally specifiable map materialized on a finite graph: for each row
/// vertex `x`, the blocks linking `x` to itself and its neighbours.
#[derive(Clone, Debug)]
pub struct LocalLinearMap<F: Field> {
    field: F,
    r: usize,
    graph: WeightedGraph,
    rows: Vec<Vec<(usize, Block<F::Elem>)>>,
    complete: Vec<bool>,
}

impl<F: Field> LocalLinearMap<F> {
    /// Validates block shapes and locality (entries only at `x` and its
    /// neighbours). `complete[x]` says whether row `x` is fully known.
    pub fn new(
        field: F,
        r: usize,
        graph: WeightedGraph,
        mut rows: Vec<Vec<(usize, Block<F::Elem>)>>,
        complete: Vec<bool>,
    ) -> Result<Self> {
        if r == 0 {
            return Err(Error::Precondition("alphabet dimension must be positive".into()));
        }
        if rows.len() != graph.len() || complete.len() != graph.len() {
            return Err(Error::Structural("one coefficient row per vertex is required".into()));
        }
        for (x, row) in rows.iter_mut().enumerate() {
            row.sort_by_key(|(y, _)| *y);
            for (y, b) in row.iter() {
                if b.len() != r || b.iter().any(|l| l.len() != r) {
                    return Err(Error::Structural(format!("block at ({}, {}) is not {r}x{r}", graph.id(x), graph.id(*y))));
                }
                if *y != x && graph.weight(x, *y).is_none() {
                    return Err(Error::Structural(format!("{} and {} are not adjacent", graph.id(x), graph.id(*y))));
                }
            }
            if row.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::Structural(format!("duplicate block in row {}", graph.id(x))));
            }
        }
        Ok(Self { field, r, graph, rows, complete })
    }

    pub fn field(&self) -> &F {
        &self.field
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn graph(&self) -> &WeightedGraph {
        &self.graph
    }

    pub fn is_complete(&self, x: usize) -> bool {
        self.complete[x]
    }

    pub fn blocks(&self, x: usize) -> &[(usize, Block<F::Elem>)] {
        &self.rows[x]
    }

    /// Transpose: block'(x, y) = block(y, x)ᵀ. Row `x` of the transpose is
    /// known when `x` and all its neighbours have known rows.
    pub fn transpose(&self) -> Self {
        let n = self.graph.len();
        let mut rows: Vec<Vec<(usize, Block<F::Elem>)>> = vec![Vec::new(); n];
        for (y, row) in self.rows.iter().enumerate() {
            for (x, b) in row {
                rows[*x].push((y, block_transpose(b)));
            }
        }
        for row in rows.iter_mut() {
            row.sort_by_key(|(y, _)| *y);
        }
        let complete = (0..n)
            .map(|x| {
                self.graph.is_complete(x) && self.complete[x] && self.graph.neighbours(x).iter().all(|(y, _)| self.complete[*y])
            })
            .collect();
        Self { field: self.field.clone(), r: self.r, graph: self.graph.clone(), rows, complete }
    }

    /// `τ_B^A`: rows `(x, i)` for `x ∈ B`, columns `(y, j)` for `y ∈ A`, in
    /// the given vertex orders. Fails if some row of `B` is not fully known.
    pub fn slice(&self, rows: &[usize], cols: &[usize]) -> Result<SparseMatrix<F::Elem>> {
        let r = self.r;
        let index: HashMap<usize, usize> = cols.iter().enumerate().map(|(j, &c)| (c, j)).collect();
        let mut m = SparseMatrix::new(cols.len() * r);
        for &x in rows {
            if !self.complete[x] {
                return Err(Error::Truncation(format!("row {} is not fully loaded", self.graph.id(x))));
            }
            for i in 0..r {
                let mut row = Vec::new();
                for (y, b) in &self.rows[x] {
                    if let Some(&j) = index.get(y) {
                        for (k, v) in b[i].iter().enumerate() {
                            if !self.field.is_zero(v) {
                                row.push((j * r + k, v.clone()));
                            }
                        }
                    }
                }
                m.push_row(row);
            }
        }
        Ok(m)
    }

    /// `τ(f)` at the given vertices; `f[v]` is the vector at vertex `v`.
    pub fn apply(&self, f: &[Vec<F::Elem>], at: &[usize]) -> Result<Vec<Vec<F::Elem>>> {
        let fld = &self.field;
        at.iter()
            .map(|&x| {
                if !self.complete[x] {
                    return Err(Error::Truncation(format!("row {} is not fully loaded", self.graph.id(x))));
                }
                let mut out = vec![fld.zero(); self.r];
                for (y, b) in &self.rows[x] {
                    for (i, o) in out.iter_mut().enumerate() {
                        for (k, v) in b[i].iter().enumerate() {
                            *o = fld.add(o, &fld.mul(v, &f[*y][k]));
                        }
                    }
                }
                Ok(out)
            })
            .collect()
    }
}

/// Infinite (or finite) locally specifiable maps, evaluated on balls.
#[derive(Clone, Debug)]
pub enum AutomatonKind<F: Field> {
    /// `τ(f)(x) = Σ_s C_s f(xs)`.
    Group { group: GroupModel, coeffs: Vec<(Element, Block<F::Elem>)> },
    /// `Δ` or `Δ'` of a graph family (r = 1).
    GraphLaplacian { family: GraphFamily, transpose: bool },
    /// An explicit map on a finite graph.
    Fixed(LocalLinearMap<F>),
}

#[derive(Clone, Debug)]
pub struct Automaton<F: Field> {
    pub field: F,
    pub r: usize,
    pub kind: AutomatonKind<F>,
}

impl<F: Field> Automaton<F> {
    pub fn group(field: F, r: usize, group: GroupModel, coeffs: Vec<(Element, Block<F::Elem>)>) -> Result<Self> {
        let mut merged: BTreeMap<Element, Block<F::Elem>> = BTreeMap::new();
        for (s, b) in coeffs {
            group.check(&s)?;
            if b.len() != r || b.iter().any(|l| l.len() != r) {
                return Err(Error::Structural(format!("coefficient at {} is not {r}x{r}", group.format(&s))));
            }
            match merged.get_mut(&s) {
                Some(acc) => {
                    for (i, row) in b.iter().enumerate() {
                        for (j, v) in row.iter().enumerate() {
                            acc[i][j] = field.add(&acc[i][j], v);
                        }
                    }
                }
                None => {
                    merged.insert(s, b);
                }
            }
        }
        let coeffs = merged.into_iter().filter(|(_, b)| !block_is_zero(&field, b)).collect();
        Ok(Self { field, r, kind: AutomatonKind::Group { group, coeffs } })
    }

    /// `Δ_μ` as a group automaton: `C_e = 1 - μ(e)`, `C_s = -μ(s)`.
    pub fn group_laplacian(field: F, group: GroupModel, mu: &SymmetricMeasure) -> Result<Self> {
        let e = group.identity();
        let mut coeffs = vec![(e.clone(), vec![vec![field.from_q(&(Q::from_integer(1.into()) - mu.hold(&group)))?]])];
        for (s, w) in mu.moves(&group) {
            coeffs.push((s.clone(), vec![vec![field.from_q(&-w)?]]));
        }
        Self::group(field, 1, group, coeffs)
    }

    pub fn graph_laplacian(field: F, family: GraphFamily) -> Self {
        Self { field, r: 1, kind: AutomatonKind::GraphLaplacian { family, transpose: false } }
    }

    pub fn fixed(map: LocalLinearMap<F>) -> Self {
        Self { field: map.field.clone(), r: map.r, kind: AutomatonKind::Fixed(map) }
    }

    pub fn transpose(&self) -> Self {
        let kind = match &self.kind {
            AutomatonKind::Group { group, coeffs } => {
                let mut c: Vec<(Element, Block<F::Elem>)> =
                    coeffs.iter().map(|(s, b)| (group.inv(s), block_transpose(b))).collect();
                c.sort_by(|a, b| a.0.cmp(&b.0));
                AutomatonKind::Group { group: group.clone(), coeffs: c }
            }
            AutomatonKind::GraphLaplacian { family, transpose } => {
                AutomatonKind::GraphLaplacian { family: family.clone(), transpose: !transpose }
            }
            AutomatonKind::Fixed(m) => AutomatonKind::Fixed(m.transpose()),
        };
        Self { field: self.field.clone(), r: self.r, kind }
    }

    /// Steps of the ball metric for a group automaton: the group generators
    /// and the memory set, closed under inverses.
    fn metric_measure(group: &GroupModel, coeffs: &[(Element, Block<F::Elem>)]) -> Result<SymmetricMeasure> {
        let e = group.identity();
        let mut moves: BTreeSet<Element> = BTreeSet::new();
        for g in group.generators().iter().map(|(_, g)| g.clone()).chain(coeffs.iter().map(|(s, _)| s.clone())) {
            if g != e {
                moves.insert(group.inv(&g));
                moves.insert(g);
            }
        }
        SymmetricMeasure::uniform(group, moves.into_iter().collect(), false)
    }

    /// The map on the ball of radius `radius` (with distance tags).
    pub fn materialize(&self, radius: usize) -> Result<LocalLinearMap<F>> {
        match &self.kind {
            AutomatonKind::Group { group, coeffs } => {
                let mu = Self::metric_measure(group, coeffs)?;
                let ball = cayley_ball(group, &mu, radius)?;
                let n = ball.elements.len();
                let mut rows = Vec::with_capacity(n);
                let mut complete = Vec::with_capacity(n);
                for x in &ball.elements {
                    let mut row: BTreeMap<usize, Block<F::Elem>> = BTreeMap::new();
                    let mut ok = true;
                    for (s, b) in coeffs {
                        match ball.vertex(&group.mul(x, s)) {
                            Some(y) => {
                                row.insert(y, b.clone());
                            }
                            None => ok = false,
                        }
                    }
                    rows.push(row.into_iter().collect());
                    complete.push(ok);
                }
                LocalLinearMap::new(self.field.clone(), self.r, ball.graph, rows, complete)
            }
            AutomatonKind::GraphLaplacian { family, transpose } => {
                let ball = family.ball(radius)?;
                let mut rows = Vec::with_capacity(ball.len());
                for x in 0..ball.len() {
                    let mut row = Vec::new();
                    for (y, c) in row_entries(&ball, x, *transpose) {
                        row.push((y, vec![vec![self.field.from_q(&c)?]]));
                    }
                    rows.push(row);
                }
                let complete = (0..ball.len()).map(|x| ball.is_complete(x)).collect();
                LocalLinearMap::new(self.field.clone(), 1, ball, rows, complete)
            }
            AutomatonKind::Fixed(m) => {
                let ball = m.graph.ball(radius)?;
                let old: Vec<usize> = ball.ids().iter().map(|id| m.graph.vertex(id).expect("ball of own graph")).collect();
                let back: HashMap<usize, usize> = old.iter().enumerate().map(|(i, &o)| (o, i)).collect();
                let mut rows = Vec::new();
                let mut complete = Vec::new();
                for &o in &old {
                    let mut ok = m.complete[o];
                    let mut row = Vec::new();
                    for (y, b) in &m.rows[o] {
                        match back.get(y) {
                            Some(&ny) => row.push((ny, b.clone())),
                            None => ok = false,
                        }
                    }
                    rows.push(row);
                    complete.push(ok);
                }
                LocalLinearMap::new(self.field.clone(), self.r, ball, rows, complete)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Ball-level checks
// ---------------------------------------------------------------------------

fn sparse_vector<F: Field>(
    field: &F,
    g: &WeightedGraph,
    cols: &[usize],
    r: usize,
    v: &[F::Elem],
) -> BTreeMap<String, Vec<String>> {
    let mut out = BTreeMap::new();
    for (j, &c) in cols.iter().enumerate() {
        let block = &v[j * r..(j + 1) * r];
        if block.iter().any(|x| !field.is_zero(x)) {
            out.insert(g.id(c).to_string(), block.iter().map(|x| field.format(x)).collect());
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct SurjectivityReport {
    pub radius: usize,
    pub rank: usize,
    pub target_dim: usize,
    pub surjective_on_ball: bool,
    /// A nonzero functional on `V^{B(n-1)}` vanishing on the image, i.e. a
    /// kernel vector of the transpose slice, when the slice is not onto.
    pub certificate: Option<BTreeMap<String, Vec<String>>>,
}

/// Rank of `τ_n : V^{B(n)} → V^{B(n-1)}`.
pub fn ball_surjectivity<F: Field>(tau: &Automaton<F>, n: usize) -> Result<SurjectivityReport> {
    if n == 0 {
        return Err(Error::Precondition("radius must be at least 1".into()));
    }
    let map = tau.materialize(n)?;
    let rows = within(&map.graph, n - 1);
    let cols = within(&map.graph, n);
    let slice = map.slice(&rows, &cols)?;
    let mut e = Echelon::new(tau.field.clone(), slice.ncols);
    for r in &slice.rows {
        e.insert(r);
    }
    let rank = e.rank();
    let target_dim = rows.len() * tau.r;
    let certificate = if rank < target_dim {
        let t = slice.transpose();
        let mut et = Echelon::new(tau.field.clone(), t.ncols);
        for r in &t.rows {
            et.insert(r);
        }
        et.nullspace().first().map(|v| sparse_vector(&tau.field, &map.graph, &rows, tau.r, v))
    } else {
        None
    };
    Ok(SurjectivityReport { radius: n, rank, target_dim, surjective_on_ball: rank == target_dim, certificate })
}

#[derive(Clone, Debug, Serialize)]
pub struct WitnessReport {
    pub radius: usize,
    pub kernel_dim: usize,
    /// A nonzero `w` supported in `B(n)` with `τ(w) = 0` everywhere.
    pub witness: Option<BTreeMap<String, Vec<String>>>,
    pub note: String,
}

/// Nullspace of `τ_{B(n+1)}^{B(n)}`: finitely supported configurations in
/// `B(n)` mapped to zero. An empty result only means "no witness supported
/// in `B(n)`".
pub fn kernel_witness_search<F: Field>(tau: &Automaton<F>, n: usize) -> Result<WitnessReport> {
    let map = tau.materialize(n + 2)?;
    let rows = within(&map.graph, n + 1);
    let cols = within(&map.graph, n);
    let slice = map.slice(&rows, &cols)?;
    let mut e = Echelon::new(tau.field.clone(), slice.ncols);
    for r in &slice.rows {
        e.insert(r);
    }
    let kernel = e.nullspace();
    let witness = kernel.first().map(|v| sparse_vector(&tau.field, &map.graph, &cols, tau.r, v));
    let note = if witness.is_some() {
        format!("not pre-injective: witness supported in B({n})")
    } else {
        format!("no witness supported in B({n}); larger supports untested")
    };
    Ok(WitnessReport { radius: n, kernel_dim: kernel.len(), witness, note })
}

#[derive(Clone, Debug, Serialize)]
pub struct PreinjReport {
    pub radius: usize,
    pub tau_witness: bool,
    pub transpose_witness: bool,
    /// "agree" when both searches find a witness or both find none;
    /// otherwise "inconclusive at radius n" (never a refutation).
    pub verdict: String,
}

/// Runs the witness search for `τ` and `τ'` at the same radius.
pub fn preinj_equivalence_check<F: Field>(tau: &Automaton<F>, n: usize) -> Result<PreinjReport> {
    let a = kernel_witness_search(tau, n)?.witness.is_some();
    let b = kernel_witness_search(&tau.transpose(), n)?.witness.is_some();
    let verdict = if a == b { "agree".to_string() } else { format!("inconclusive at radius {n}") };
    Ok(PreinjReport { radius: n, tau_witness: a, transpose_witness: b, verdict })
}

// ---------------------------------------------------------------------------
// Preimages through the stabilizing chain
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct PreimageReport {
    pub depth: usize,
    /// Depth `M` at which `dim K_{depth,m}` had been constant for `stall`
    /// consecutive `m`; the chain is cut there.
    pub chain_depth: usize,
    pub stabilized: bool,
    /// `(m, dim K_{depth,m})` along the sweep.
    pub chain_dims: Vec<(usize, usize)>,
    /// `w` on `B(depth)` (nonzero entries only).
    pub w: BTreeMap<String, Vec<String>>,
    pub residual_zero: bool,
}

struct Affine<E> {
    particular: Vec<E>,
    kernel: Vec<Vec<E>>,
}

/// Canonical representative of `p + span(dirs)` in the given coordinates:
/// reduce `p` against the echelon form of the directions.
fn canonical<F: Field>(field: &F, p: &[F::Elem], dirs: &[Vec<F::Elem>], coords: &[usize]) -> Vec<F::Elem> {
    let project = |v: &[F::Elem]| -> SparseRow<F::Elem> {
        coords
            .iter()
            .enumerate()
            .filter(|(_, &c)| !field.is_zero(&v[c]))
            .map(|(k, &c)| (k, v[c].clone()))
            .collect()
    };
    let mut e = Echelon::new(field.clone(), coords.len());
    for d in dirs {
        e.insert(&project(d));
    }
    let mut out = vec![field.zero(); coords.len()];
    for (k, v) in e.reduce(&project(p)) {
        out[k] = v;
    }
    out
}

/// Vertices of `B(k)` ordered by (distance, id), an order that does not
/// depend on how large a ball was loaded.
fn canonical_order(g: &WeightedGraph, k: usize) -> Vec<usize> {
    let d = g.dist_tags().expect("balls carry distance tags");
    let mut v = within(g, k);
    v.sort_by(|a, b| (d[*a], g.id(*a)).cmp(&(d[*b], g.id(*b))));
    v
}

/// Constructs `w` on `B(depth)` with `τ(w) = f` on `B(depth-1)`, where `f`
/// is finitely supported (vertices missing from `f` carry 0).
///
/// `L_m` is the affine space of solutions on `B(m)`, `K_{n,m}` its image in
/// `V^{B(n)}`. The sweep over `m` stops once `dim K_{depth,m}` has been
/// constant for `stall` steps, giving `M`; then `w` is built shell by shell:
/// `w_k` is the canonical element of `K_{k,M}` restricting to `w_{k-1}`.
/// Shallower calls therefore agree with deeper ones on their ball.
pub fn preimage_construct<F: Field>(
    tau: &Automaton<F>,
    f: &BTreeMap<String, Vec<F::Elem>>,
    depth: usize,
    stall: usize,
    max_depth: usize,
) -> Result<PreimageReport> {
    if depth == 0 || stall == 0 {
        return Err(Error::Precondition("depth and stall must be positive".into()));
    }
    let field = &tau.field;
    let r = tau.r;
    for v in f.values() {
        if v.len() != r {
            return Err(Error::Precondition(format!("target vectors must have length {r}")));
        }
    }

    // affine solution space L_m on the loaded ball of radius m
    let solve_on = |map: &LocalLinearMap<F>, m: usize, pins: &[(usize, F::Elem)]| -> Result<Option<Affine<F::Elem>>> {
        let rows = within(&map.graph, m - 1);
        let cols: Vec<usize> = (0..map.graph.len()).collect();
        let mut sys = map.slice(&rows, &cols)?;
        let mut rhs = Vec::new();
        for &x in &rows {
            let target = f.get(map.graph.id(x));
            for i in 0..r {
                rhs.push(target.map(|t| t[i].clone()).unwrap_or_else(|| field.zero()));
            }
        }
        for (c, v) in pins {
            sys.push_row(vec![(*c, field.one())]);
            rhs.push(v.clone());
        }
        Ok(solve(field, &sys, &rhs).map(|s| Affine { particular: s.particular, kernel: s.kernel }))
    };
    let coords_of = |g: &WeightedGraph, k: usize| -> Vec<usize> {
        canonical_order(g, k).into_iter().flat_map(|v| (0..r).map(move |i| v * r + i)).collect()
    };

    let mut chain_dims = Vec::new();
    let mut stabilized = false;
    let mut m = depth;
    loop {
        let map = tau.materialize(m)?;
        let sol = solve_on(&map, m, &[])?.ok_or_else(|| {
            Error::Truncation(format!("no preimage at this truncation: L_{m} is empty"))
        })?;
        let coords = coords_of(&map.graph, depth);
        let dim = crate::linalg::projected_rank(field, &sol.kernel, &coords);
        chain_dims.push((m, dim));
        if chain_dims.len() >= stall && chain_dims[chain_dims.len() - stall..].iter().all(|&(_, d)| d == dim) {
            stabilized = true;
            break;
        }
        if m >= max_depth {
            break;
        }
        m += 1;
    }
    let big = m;
    let map = tau.materialize(big)?;
    let g = map.graph.clone();

    // shell-by-shell canonical choice
    let mut pins: Vec<(usize, F::Elem)> = Vec::new();
    for k in 0..=depth {
        let sol = solve_on(&map, big, &pins)?
            .ok_or_else(|| Error::Invariant(format!("chain is not consistent at shell {k}")))?;
        let coords = coords_of(&g, k);
        let w = canonical(field, &sol.particular, &sol.kernel, &coords);
        pins = coords.iter().copied().zip(w).collect();
    }

    // residual on B(depth-1)
    let mut full = vec![vec![field.zero(); r]; g.len()];
    for (c, v) in &pins {
        full[c / r][c % r] = v.clone();
    }
    let check_rows = within(&g, depth - 1);
    let image = map.apply(&full, &check_rows)?;
    let residual_zero = check_rows.iter().zip(&image).all(|(&x, got)| {
        let want = f.get(g.id(x));
        (0..r).all(|i| got[i] == want.map(|t| t[i].clone()).unwrap_or_else(|| field.zero()))
    });
    let mut w = BTreeMap::new();
    for v in within(&g, depth) {
        if full[v].iter().any(|x| !field.is_zero(x)) {
            w.insert(g.id(v).to_string(), full[v].iter().map(|x| field.format(x)).collect());
        }
    }
    Ok(PreimageReport { depth, chain_depth: big, stabilized, chain_dims, w, residual_zero })
}

// ---------------------------------------------------------------------------
// Mean dimension over boxes
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct MdimRow {
    pub n: usize,
    pub box_size: usize,
    pub rank: usize,
    pub ratio: String,
    pub transpose_rank: usize,
    pub transpose_ratio: String,
    /// `rank(Ω⁺ → Ω⁺⁺) - rank(Ω → Ω⁺)`.
    pub gap: i64,
    /// `r·|∂⁺Ω|`.
    pub gap_bound: usize,
}

fn box_elements(d: usize, n: i64) -> Vec<Element> {
    let mut out = vec![vec![]];
    for _ in 0..d {
        out = out.into_iter().flat_map(|v: Vec<i64>| (-n..=n).map(move |x| [v.clone(), vec![x]].concat())).collect();
    }
    out.into_iter().map(Element::Abelian).collect()
}

fn group_slice_rank<F: Field>(
    field: &F,
    group: &GroupModel,
    coeffs: &[(Element, Block<F::Elem>)],
    r: usize,
    rows: &[Element],
    cols: &BTreeMap<Element, usize>,
) -> Result<usize> {
    let mut e = Echelon::new(field.clone(), cols.len() * r);
    for x in rows {
        for i in 0..r {
            let mut row = Vec::new();
            for (s, b) in coeffs {
                let j = *cols
                    .get(&group.mul(x, s))
                    .ok_or_else(|| Error::Invariant("neighbourhood not closed".into()))?;
                for (k, v) in b[i].iter().enumerate() {
                    if !field.is_zero(v) {
                        row.push((j * r + k, v.clone()));
                    }
                }
            }
            row.sort_by_key(|(c, _)| *c);
            e.insert(&row);
        }
    }
    Ok(e.rank())
}

/// `dim τ(V^G)_{Ω_n} / |Ω_n|` for boxes `Ω_n = [-n, n]^d` in `Z^d`, computed
/// as the rank of `τ_{Ω_n}^{Ω_n⁺}`, together with the transpose ratio and
/// the boundary gap.
pub fn mean_dimension_estimate<F: Field>(tau: &Automaton<F>, n_max: usize) -> Result<Vec<MdimRow>> {
    let AutomatonKind::Group { group, coeffs } = &tau.kind else {
        return Err(Error::Unsupported("mean dimension needs a group automaton".into()));
    };
    let Family::FreeAbelian { d } = group.family() else {
        return Err(Error::Unsupported(format!("mean dimension boxes are built for free abelian groups, not {}", group.name())));
    };
    let tr = tau.transpose();
    let AutomatonKind::Group { coeffs: tcoeffs, .. } = &tr.kind else { unreachable!("transpose keeps the kind") };
    let mut steps: BTreeSet<Element> = coeffs.iter().map(|(s, _)| s.clone()).collect();
    steps.extend(coeffs.iter().map(|(s, _)| group.inv(s)));
    let plus = |set: &BTreeSet<Element>| -> BTreeSet<Element> {
        let mut out = set.clone();
        for x in set {
            for s in &steps {
                out.insert(group.mul(x, s));
            }
        }
        out
    };
    let index = |set: &BTreeSet<Element>| -> BTreeMap<Element, usize> { set.iter().cloned().enumerate().map(|(i, x)| (x, i)).collect() };
    let mut out = Vec::new();
    for n in 0..=n_max {
        let omega: BTreeSet<Element> = box_elements(*d, n as i64).into_iter().collect();
        let op = plus(&omega);
        let opp = plus(&op);
        let rows: Vec<Element> = omega.iter().cloned().collect();
        let rows_p: Vec<Element> = op.iter().cloned().collect();
        let rank = group_slice_rank(&tau.field, group, coeffs, tau.r, &rows, &index(&op))?;
        let rank_p = group_slice_rank(&tau.field, group, coeffs, tau.r, &rows_p, &index(&opp))?;
        let trank = group_slice_rank(&tau.field, group, tcoeffs, tau.r, &rows, &index(&op))?;
        let size = omega.len();
        let ratio = |k: usize| crate::rational::fmt_q(&Q::new((k as i64).into(), (size as i64).into()));
        out.push(MdimRow {
            n,
            box_size: size,
            rank,
            ratio: ratio(rank),
            transpose_rank: trank,
            transpose_ratio: ratio(trank),
            gap: rank_p as i64 - rank as i64,
            gap_bound: tau.r * (op.len() - size),
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Automaton specification
// ---------------------------------------------------------------------------

/// `{"field": "Q" | "GF(p)", "r": 1, "group": {...}, "laplacian": true}` or
/// with `"coefficients": [["word", [["1","0"],["0","1"]]], ...]`; or
/// `{"graph": "gallery:asym", "laplacian": true}`. `"transpose": true`
/// replaces the map by its transpose.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AutomatonSpec {
    #[serde(default = "default_field")]
    pub field: String,
    #[serde(default = "default_r")]
    pub r: usize,
    #[serde(default)]
    pub group: Option<GroupSpec>,
    #[serde(default)]
    pub graph: Option<String>,
    #[serde(default)]
    pub laplacian: bool,
    #[serde(default)]
    pub coefficients: Option<Vec<(String, Vec<Vec<String>>)>>,
    #[serde(default)]
    pub transpose: bool,
}

fn default_field() -> String {
    "Q".into()
}

fn default_r() -> usize {
    1
}

/// The scalar field named in a specification.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldChoice {
    Rationals,
    Prime(u64),
}

impl AutomatonSpec {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("automaton spec: {e}")))
    }

    pub fn field_choice(&self) -> Result<FieldChoice> {
        parse_field(&self.field)
    }

    pub fn build<F: Field>(&self, field: F) -> Result<Automaton<F>> {
        let a = match (&self.group, &self.graph, self.laplacian, &self.coefficients) {
            (Some(gs), None, true, None) => {
                let (g, mu) = gs.build()?;
                Automaton::group_laplacian(field, g, &mu)?
            }
            (Some(gs), None, false, Some(cs)) => {
                let (g, _) = gs.build()?;
                let mut coeffs = Vec::new();
                for (w, m) in cs {
                    let s = g.parse_word(w)?;
                    let b = m
                        .iter()
                        .map(|row| row.iter().map(|x| field.parse(x)).collect::<Result<Vec<_>>>())
                        .collect::<Result<Vec<_>>>()?;
                    coeffs.push((s, b));
                }
                Automaton::group(field, self.r, g, coeffs)?
            }
            (None, Some(gr), true, None) => Automaton::graph_laplacian(field, GraphFamily::parse(gr)?),
            _ => {
                return Err(Error::Parse(
                    "automaton spec needs a group with either laplacian or coefficients, or a graph with laplacian".into(),
                ))
            }
        };
        Ok(if self.transpose { a.transpose() } else { a })
    }
}

pub fn parse_field(s: &str) -> Result<FieldChoice> {
    let s = s.trim();
    if s == "Q" || s == "rationals" {
        return Ok(FieldChoice::Rationals);
    }
    let p = s
        .strip_prefix("GF(")
        .and_then(|x| x.strip_suffix(')'))
        .and_then(|x| x.parse::<u64>().ok())
        .ok_or_else(|| Error::Parse(format!("unknown field {s:?}")))?;
    PrimeField::new(p)?;
    Ok(FieldChoice::Prime(p))
}

/// Parses a target function `{"vertex": ["p/q", ...]}` into field elements.
pub fn parse_target<F: Field>(field: &F, m: &BTreeMap<String, Vec<String>>) -> Result<BTreeMap<String, Vec<F::Elem>>> {
    m.iter()
        .map(|(k, v)| Ok((k.clone(), v.iter().map(|x| field.parse(x)).collect::<Result<Vec<_>>>()?)))
        .collect()
}

/// `δ_v` with `r = 1` over the rationals.
pub fn delta(id: &str) -> BTreeMap<String, Vec<Q>> {
    BTreeMap::from([(id.to_string(), vec![parse_q("1").expect("literal")])])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Rationals;
    use crate::groups::zv;
    use crate::rational::qi;

    fn z_laplacian() -> Automaton<Rationals> {
        let z = GroupModel::integers();
        let mu = SymmetricMeasure::standard(&z).unwrap();
        Automaton::group_laplacian(Rationals, z, &mu).unwrap()
    }

    #[test]
    fn laplacian_on_z_is_surjective_on_balls() {
        let r = ball_surjectivity(&z_laplacian(), 5).unwrap();
        assert_eq!((r.rank, r.target_dim, r.surjective_on_ball), (9, 9, true));
        assert!(kernel_witness_search(&z_laplacian().transpose(), 8).unwrap().witness.is_none());
    }

    #[test]
    fn zero_map_certificate_is_delta_e() {
        let z = GroupModel::integers();
        let zero = Automaton::group(Rationals, 1, z, vec![]).unwrap();
        let r = ball_surjectivity(&zero, 3).unwrap();
        assert!(!r.surjective_on_ball);
        assert_eq!(r.certificate, Some(BTreeMap::from([("0".to_string(), vec!["1/1".to_string()])])));
    }

    #[test]
    fn shift_minus_identity_is_preinjective_both_ways() {
        let z = GroupModel::integers();
        let tau = Automaton::group(Rationals, 1, z, vec![(zv(&[0]), vec![vec![qi(1)]]), (zv(&[1]), vec![vec![qi(-1)]])])
            .unwrap();
        let rep = preinj_equivalence_check(&tau, 6).unwrap();
        assert!(!rep.tau_witness && !rep.transpose_witness);
        assert_eq!(rep.verdict, "agree");
    }

    #[test]
    fn preimage_of_delta_on_z() {
        let rep = preimage_construct(&z_laplacian(), &delta("0"), 6, 4, 30).unwrap();
        assert!(rep.residual_zero && rep.stabilized);
        let rep4 = preimage_construct(&z_laplacian(), &delta("0"), 4, 4, 30).unwrap();
        for (k, v) in &rep4.w {
            assert_eq!(rep.w.get(k), Some(v));
        }
    }

    #[test]
    fn mean_dimension_of_laplacian_on_z() {
        let rows = mean_dimension_estimate(&z_laplacian(), 4).unwrap();
        for r in rows {
            assert_eq!(r.ratio, "1/1");
            assert_eq!(r.transpose_ratio, "1/1");
            assert!(r.gap <= r.gap_bound as i64);
        }
    }

    #[test]
    fn spec_round_trip() {
        let s = AutomatonSpec::parse(r#"{"field":"GF(2)","r":1,"group":{"family":"integers"},
            "coefficients":[["e",[["1"]]],["e1",[["1"]]]]}"#)
        .unwrap();
        let FieldChoice::Prime(p) = s.field_choice().unwrap() else { panic!() };
        let a = s.build(PrimeField::new(p).unwrap()).unwrap();
        // f(x) + f(x+1) over GF(2): δ-free kernel on finite support is trivial
        assert!(kernel_witness_search(&a, 5).unwrap().witness.is_none());
    }
}
