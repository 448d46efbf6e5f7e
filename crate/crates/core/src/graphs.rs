//! Finite weighted graphs, vertex-set calculus, JSON interchange and the
//! gallery of named examples.
//!
//! A [`WeightedGraph`] may be a finite piece of an infinite graph. Vertices
//! whose neighbourhood was cut off carry an *outside weight*: the total weight
//! of the edges that lead out of the loaded piece. Those vertices form the
//! truncation frontier. Degrees always include the outside weight, so local
//! quantities at complete vertices agree with the infinite graph.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{fmt_q, parse_q, qi, Q};

pub type VertexSet = BTreeSet<usize>;

#[derive(Clone, Debug)]
pub struct WeightedGraph {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    adj: Vec<Vec<(usize, Q)>>,
    outside: Vec<Q>,
    base: usize,
    hold: Q,
    transitive: bool,
    dist: Option<Vec<usize>>,
    marks: BTreeMap<String, usize>,
}

/// Incremental constructor enforcing the graph invariants.
#[derive(Clone, Debug, Default)]
pub struct GraphBuilder {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    edges: BTreeMap<(usize, usize), Q>,
    outside: BTreeMap<usize, Q>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn vertex(&mut self, id: &str) -> usize {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        let i = self.ids.len();
        self.ids.push(id.to_string());
        self.index.insert(id.to_string(), i);
        i
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn edge(&mut self, u: &str, v: &str, w: Q) -> Result<()> {
        let a = self.vertex(u);
        let b = self.vertex(v);
        self.edge_ix(a, b, w)
    }

    pub fn edge_ix(&mut self, a: usize, b: usize, w: Q) -> Result<()> {
        if a == b {
            return Err(Error::Structural(format!("loop edge at {}", self.ids[a])));
        }
        if !w.is_positive() {
            return Err(Error::Structural(format!(
                "edge {}-{} has non-positive weight {}",
                self.ids[a],
                self.ids[b],
                fmt_q(&w)
            )));
        }
        let key = (a.min(b), a.max(b));
        if let Some(old) = self.edges.get(&key) {
            let kind = if *old == w { "duplicate" } else { "asymmetric duplicate" };
            return Err(Error::Structural(format!("{kind} edge {}-{}", self.ids[a], self.ids[b])));
        }
        self.edges.insert(key, w);
        Ok(())
    }

    /// Records weight leading out of the loaded piece at vertex `a`.
    pub fn outside(&mut self, a: usize, w: Q) {
        if w.is_positive() {
            let e = self.outside.entry(a).or_insert_with(Q::zero);
            *e += w;
        }
    }

    pub fn build(self, base: &str) -> Result<WeightedGraph> {
        let base = *self
            .index
            .get(base)
            .ok_or_else(|| Error::Structural(format!("base vertex {base:?} is not a vertex")))?;
        let n = self.ids.len();
        let mut adj: Vec<Vec<(usize, Q)>> = vec![Vec::new(); n];
        for ((a, b), w) in self.edges {
            adj[a].push((b, w.clone()));
            adj[b].push((a, w));
        }
        for row in &mut adj {
            row.sort_by_key(|(j, _)| *j);
        }
        let mut outside = vec![Q::zero(); n];
        for (a, w) in self.outside {
            outside[a] = w;
        }
        Ok(WeightedGraph {
            ids: self.ids,
            index: self.index,
            adj,
            outside,
            base,
            hold: Q::zero(),
            transitive: false,
            dist: None,
            marks: BTreeMap::new(),
        })
    }
}

impl WeightedGraph {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn base(&self) -> usize {
        self.base
    }

    pub fn id(&self, v: usize) -> &str {
        &self.ids[v]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn vertex(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::Precondition(format!("unknown vertex {id:?}")))
    }

    pub fn neighbours(&self, v: usize) -> &[(usize, Q)] {
        &self.adj[v]
    }

    pub fn weight(&self, u: usize, v: usize) -> Option<&Q> {
        self.adj[u]
            .binary_search_by_key(&v, |(j, _)| *j)
            .ok()
            .map(|k| &self.adj[u][k].1)
    }

    /// Weight of edges that leave the loaded piece at `v`.
    pub fn outside_weight(&self, v: usize) -> &Q {
        &self.outside[v]
    }

    /// Full degree, including weight leading out of the loaded piece.
    pub fn degree(&self, v: usize) -> Q {
        let mut d = self.outside[v].clone();
        for (_, w) in &self.adj[v] {
            d += w;
        }
        d
    }

    /// True when every neighbour of `v` is loaded.
    pub fn is_complete(&self, v: usize) -> bool {
        self.outside[v].is_zero()
    }

    pub fn frontier(&self) -> VertexSet {
        (0..self.len()).filter(|&v| !self.is_complete(v)).collect()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(|r| r.len()).sum::<usize>() / 2
    }

    /// Probability that the walk stays put at each step.
    pub fn hold(&self) -> &Q {
        &self.hold
    }

    pub fn set_hold(&mut self, hold: Q) -> Result<()> {
        if hold.is_negative() || hold >= Q::one() {
            return Err(Error::Precondition(format!("hold probability {} outside [0,1)", fmt_q(&hold))));
        }
        self.hold = hold;
        Ok(())
    }

    /// Vertex-transitivity metadata (set by constructions that guarantee it).
    pub fn is_transitive(&self) -> bool {
        self.transitive
    }

    pub fn set_transitive(&mut self, t: bool) {
        self.transitive = t;
    }

    pub fn marks(&self) -> &BTreeMap<String, usize> {
        &self.marks
    }

    pub fn mark(&self, name: &str) -> Result<usize> {
        self.marks
            .get(name)
            .copied()
            .ok_or_else(|| Error::Precondition(format!("graph has no marked vertex {name:?}")))
    }

    pub fn set_mark(&mut self, name: &str, v: usize) {
        self.marks.insert(name.to_string(), v);
    }

    /// Distance tag from the base vertex, when the constructor recorded one.
    pub fn dist_tags(&self) -> Option<&[usize]> {
        self.dist.as_deref()
    }

    pub fn set_dist_tags(&mut self, d: Vec<usize>) {
        assert_eq!(d.len(), self.len());
        self.dist = Some(d);
    }

    /// Graph distances from `src` inside the loaded piece.
    pub fn bfs(&self, src: usize) -> Vec<Option<usize>> {
        let mut d = vec![None; self.len()];
        d[src] = Some(0);
        let mut q = VecDeque::from([src]);
        while let Some(u) = q.pop_front() {
            let du = d[u].expect("visited");
            for (v, _) in &self.adj[u] {
                if d[*v].is_none() {
                    d[*v] = Some(du + 1);
                    q.push_back(*v);
                }
            }
        }
        d
    }

    pub fn check_subset(&self, a: &VertexSet) -> Result<()> {
        match a.iter().find(|&&v| v >= self.len()) {
            Some(v) => Err(Error::Precondition(format!("vertex index {v} out of range"))),
            None => Ok(()),
        }
    }

    /// A⁺: vertices within distance one of A.
    pub fn neighbourhood(&self, a: &VertexSet) -> VertexSet {
        let mut out = a.clone();
        for &x in a {
            out.extend(self.adj[x].iter().map(|(y, _)| *y));
        }
        out
    }

    /// A°: vertices of A whose whole neighbourhood lies in A. Vertices with
    /// truncated neighbourhoods are never interior.
    pub fn interior(&self, a: &VertexSet) -> VertexSet {
        a.iter()
            .copied()
            .filter(|&x| self.is_complete(x) && self.adj[x].iter().all(|(y, _)| a.contains(y)))
            .collect()
    }

    /// ∂⁻A = A \ A°.
    pub fn inner_boundary(&self, a: &VertexSet) -> VertexSet {
        a.difference(&self.interior(a)).copied().collect()
    }

    /// ∂⁺A = A⁺ \ A.
    pub fn outer_boundary(&self, a: &VertexSet) -> VertexSet {
        self.neighbourhood(a).difference(a).copied().collect()
    }

    /// Connected components of the subgraph induced on `a`.
    pub fn components(&self, a: &VertexSet) -> Vec<VertexSet> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for &s in a {
            if !seen.insert(s) {
                continue;
            }
            let mut comp = BTreeSet::from([s]);
            let mut stack = vec![s];
            while let Some(u) = stack.pop() {
                for (v, _) in &self.adj[u] {
                    if a.contains(v) && seen.insert(*v) {
                        comp.insert(*v);
                        stack.push(*v);
                    }
                }
            }
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.bfs(self.base).iter().all(|d| d.is_some())
    }

    /// Induced subgraph on `keep`; weight to dropped vertices becomes
    /// outside weight. Metadata (hold, transitivity, marks) carries over.
    pub fn induced(&self, keep: &VertexSet, base: usize) -> Result<WeightedGraph> {
        if !keep.contains(&base) {
            return Err(Error::Precondition("induced subgraph must keep its base".into()));
        }
        let mut b = GraphBuilder::new();
        let mut map = HashMap::new();
        for &v in keep {
            map.insert(v, b.vertex(&self.ids[v]));
        }
        for &v in keep {
            let mut lost = self.outside[v].clone();
            for (u, w) in &self.adj[v] {
                match map.get(u) {
                    Some(&nu) if v < *u => b.edge_ix(map[&v], nu, w.clone())?,
                    Some(_) => {}
                    None => lost += w,
                }
            }
            b.outside(map[&v], lost);
        }
        let mut g = b.build(&self.ids[base])?;
        g.hold = self.hold.clone();
        g.transitive = self.transitive;
        for (k, v) in &self.marks {
            if let Some(&nv) = map.get(v) {
                g.marks.insert(k.clone(), nv);
            }
        }
        Ok(g)
    }

    /// Ball of radius `r` about the base with distance tags.
    pub fn ball(&self, r: usize) -> Result<WeightedGraph> {
        let d = self.bfs(self.base);
        let keep: VertexSet = (0..self.len()).filter(|&v| matches!(d[v], Some(x) if x <= r)).collect();
        let mut g = self.induced(&keep, self.base)?;
        let tags = keep.iter().map(|&v| d[v].expect("kept vertices are reached")).collect();
        g.set_dist_tags(tags);
        Ok(g)
    }

    pub fn to_json(&self) -> GraphJson {
        let mut vertices = self.ids.clone();
        vertices.sort();
        let mut edges = Vec::new();
        for (u, row) in self.adj.iter().enumerate() {
            for (v, w) in row {
                let (a, b) = (&self.ids[u], &self.ids[*v]);
                if a < b {
                    edges.push([a.clone(), b.clone(), fmt_q(w)]);
                }
            }
        }
        edges.sort();
        let mut frontier: Vec<[String; 2]> = (0..self.len())
            .filter(|&v| !self.is_complete(v))
            .map(|v| [self.ids[v].clone(), fmt_q(&self.outside[v])])
            .collect();
        frontier.sort();
        GraphJson {
            base: self.ids[self.base].clone(),
            vertices,
            edges,
            frontier,
            hold: if self.hold.is_zero() { None } else { Some(fmt_q(&self.hold)) },
            transitive: self.transitive,
            marks: self.marks.iter().map(|(k, v)| (k.clone(), self.ids[*v].clone())).collect(),
        }
    }

    /// Canonical serialization: vertices by id, edges lexicographically.
    pub fn save(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json()).expect("graph serializes");
        s.push('\n');
        s
    }

    pub fn load(text: &str) -> Result<WeightedGraph> {
        let j: GraphJson = serde_json::from_str(text).map_err(|e| Error::Parse(format!("graph JSON: {e}")))?;
        Self::from_json(&j)
    }

    pub fn from_json(j: &GraphJson) -> Result<WeightedGraph> {
        let mut b = GraphBuilder::new();
        let mut seen = BTreeSet::new();
        for v in &j.vertices {
            if !seen.insert(v.clone()) {
                return Err(Error::Parse(format!("vertex {v:?} listed twice")));
            }
            b.vertex(v);
        }
        for (k, [u, v, w]) in j.edges.iter().enumerate() {
            let line = format!("edge {k} [{u:?}, {v:?}, {w:?}]");
            let w = parse_q(w).map_err(|e| Error::Parse(format!("{line}: {e}")))?;
            if !w.is_positive() {
                return Err(Error::Parse(format!("{line}: weight must be positive")));
            }
            if u == v {
                return Err(Error::Parse(format!("{line}: loop edges are not allowed")));
            }
            for x in [u, v] {
                if !seen.contains(x) {
                    return Err(Error::Parse(format!("{line}: unknown vertex {x:?}")));
                }
            }
            b.edge(u, v, w).map_err(|e| Error::Parse(format!("{line}: {e}")))?;
        }
        for (k, [v, w]) in j.frontier.iter().enumerate() {
            let line = format!("frontier {k} [{v:?}, {w:?}]");
            let w = parse_q(w).map_err(|e| Error::Parse(format!("{line}: {e}")))?;
            if !w.is_positive() {
                return Err(Error::Parse(format!("{line}: outside weight must be positive")));
            }
            let i = *b.index.get(v).ok_or_else(|| Error::Parse(format!("{line}: unknown vertex")))?;
            b.outside(i, w);
        }
        let mut g = b.build(&j.base).map_err(|e| Error::Parse(e.to_string()))?;
        if let Some(h) = &j.hold {
            g.set_hold(parse_q(h)?).map_err(|e| Error::Parse(e.to_string()))?;
        }
        g.transitive = j.transitive;
        for (k, v) in &j.marks {
            let i = g.vertex(v).map_err(|e| Error::Parse(format!("mark {k}: {e}")))?;
            g.marks.insert(k.clone(), i);
        }
        Ok(g)
    }
}

/// On-disk graph format. `frontier`, `hold`, `transitive` and `marks` are
/// optional and omitted when empty.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GraphJson {
    pub base: String,
    pub vertices: Vec<String>,
    pub edges: Vec<[String; 3]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub frontier: Vec<[String; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hold: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub transitive: bool,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub marks: BTreeMap<String, String>,
}

// ---------------------------------------------------------------------------
// Gallery
// ---------------------------------------------------------------------------

/// Path on the integers `a..=b` with unit weights, vertex ids the integers.
pub fn path(a: i64, b: i64) -> WeightedGraph {
    assert!(a <= b);
    let mut g = GraphBuilder::new();
    for k in a..=b {
        g.vertex(&k.to_string());
    }
    for k in a..b {
        g.edge(&k.to_string(), &(k + 1).to_string(), qi(1)).expect("path edges are valid");
    }
    let base = if a <= 0 && 0 <= b { 0 } else { a };
    g.build(&base.to_string()).expect("base exists")
}

/// Cycle `C_k` on vertices `v0..v{k-1}` with unit weights.
pub fn cycle(k: usize) -> Result<WeightedGraph> {
    circulant(k, &[(1, qi(1))])
}

/// Circulant graph on `Z/k`: vertex `i` is joined to `i ± o` with weight `w`
/// for each `(o, w)`. Vertex-transitive by construction.
pub fn circulant(k: usize, offsets: &[(usize, Q)]) -> Result<WeightedGraph> {
    if k < 3 {
        return Err(Error::Precondition(format!("circulant needs at least 3 vertices, got {k}")));
    }
    let mut g = GraphBuilder::new();
    for i in 0..k {
        g.vertex(&format!("v{i}"));
    }
    for (o, w) in offsets {
        if *o == 0 || 2 * o > k {
            return Err(Error::Precondition(format!("offset {o} invalid for C_{k}")));
        }
        for i in 0..k {
            let j = (i + o) % k;
            // when 2o == k the pair {i, i+o} would be produced twice
            if 2 * o == k && i >= j {
                continue;
            }
            g.edge_ix(i, j, w.clone())?;
        }
    }
    let mut g = g.build("v0")?;
    g.transitive = true;
    Ok(g)
}

fn pt(x: i64, y: i64) -> String {
    format!("{x},{y}")
}

/// The left gadget shared by the ladder and the asymmetric graph: `(0,0)` joined to `(1,0)`
/// and `(1,±1)`; the vertical chord from `(1,1)` to `(1,-1)` runs through the
/// drawn vertex `(1,0)`; `(1,±1)` both joined to `(2,0)`. Every vertex of the
/// gadget except `(2,0)` then has degree 3, and `(2,0)` gets its third edge
/// from whatever is attached to the right.
fn left_gadget(g: &mut GraphBuilder) -> Result<()> {
    let one = || qi(1);
    g.edge(&pt(0, 0), &pt(1, 0), one())?;
    g.edge(&pt(0, 0), &pt(1, 1), one())?;
    g.edge(&pt(0, 0), &pt(1, -1), one())?;
    g.edge(&pt(1, 1), &pt(1, 0), one())?;
    g.edge(&pt(1, 0), &pt(1, -1), one())?;
    g.edge(&pt(1, 1), &pt(2, 0), one())?;
    g.edge(&pt(1, -1), &pt(2, 0), one())?;
    Ok(())
}

/// The 3-regular ladder with no non-constant harmonic functions, truncated
/// after `n_cells` cells. Cell 0 is the left gadget; cell `k ≥ 1` is the
/// diamond `(3k,0), (3k+1,±1), (3k+2,0)` with chord `(3k+1,1)-(3k+1,-1)`,
/// joined to the previous cell by the bridge `(3k-1,0)-(3k,0)`. The last
/// vertex is the truncation frontier (its outgoing bridge is cut). Vertex
/// ids are `"x,y"`; the base is `"0,0"`.
pub fn trofimov_ladder(n_cells: usize) -> Result<WeightedGraph> {
    if n_cells == 0 {
        return Err(Error::Precondition("trofimov ladder needs at least one cell".into()));
    }
    let mut g = GraphBuilder::new();
    left_gadget(&mut g)?;
    for k in 1..n_cells as i64 {
        let x = 3 * k;
        g.edge(&pt(x - 1, 0), &pt(x, 0), qi(1))?;
        g.edge(&pt(x, 0), &pt(x + 1, 1), qi(1))?;
        g.edge(&pt(x, 0), &pt(x + 1, -1), qi(1))?;
        g.edge(&pt(x + 1, 1), &pt(x + 1, -1), qi(1))?;
        g.edge(&pt(x + 1, 1), &pt(x + 2, 0), qi(1))?;
        g.edge(&pt(x + 1, -1), &pt(x + 2, 0), qi(1))?;
    }
    let last = 3 * n_cells as i64 - 1;
    let li = g.vertex(&pt(last, 0));
    g.outside(li, qi(1));
    g.build(&pt(0, 0))
}

/// The regular graph with asymmetric hitting probabilities: the left gadget,
/// `x = (2,0)`, an edge `x-y`, and at `y` a rooted tree in which every vertex
/// has two children. Tree levels `1..=depth+1` are loaded; the last level is
/// the truncation frontier (each leaf misses its two children). Tree vertex
/// ids are `t<level>.<index>`; `x` and `y` are marked, base is `x`.
pub fn asym_hitting_graph(depth: usize) -> Result<WeightedGraph> {
    if depth == 0 {
        return Err(Error::Precondition("asymmetric hitting graph needs depth >= 1".into()));
    }
    let mut g = GraphBuilder::new();
    left_gadget(&mut g)?;
    g.edge(&pt(2, 0), "y", qi(1))?;
    let node = |l: usize, i: usize| format!("t{l}.{i}");
    for i in 0..2 {
        g.edge("y", &node(1, i), qi(1))?;
    }
    for l in 1..=depth {
        for i in 0..(1usize << l) {
            for c in 0..2 {
                g.edge(&node(l, i), &node(l + 1, 2 * i + c), qi(1))?;
            }
        }
    }
    let leaves = depth + 1;
    for i in 0..(1usize << leaves) {
        let v = g.vertex(&node(leaves, i));
        g.outside(v, qi(2));
    }
    let mut g = g.build(&pt(2, 0))?;
    let (x, y) = (g.vertex(&pt(2, 0))?, g.vertex("y")?);
    g.set_mark("x", x);
    g.set_mark("y", y);
    Ok(g)
}

/// Level of a tree vertex of [`asym_hitting_graph`] (`y` is level 0).
pub fn asym_tree_level(id: &str) -> Option<usize> {
    if id == "y" {
        return Some(0);
    }
    id.strip_prefix('t')?.split_once('.')?.0.parse().ok()
}

/// Certified upper bound for the probability that the walk on the infinite
/// tree side, started at tree level `level`, ever reaches `y`: `2^-level`.
///
/// From any tree vertex the walk steps to its parent with probability 1/3 and
/// to a child with probability 2/3, so the return probability ρ of one level
/// is the minimal non-negative solution of `ρ = 1/3 + (2/3)ρ²`. Any
/// non-negative `s` with `1/3 + (2/3)s² ≤ s` bounds ρ from above; `s = 1/2`
/// satisfies it with equality, which [`asym_return_supersolution_ok`] checks.
pub fn asym_return_bound(level: usize) -> Q {
    let mut v = Q::one();
    for _ in 0..level {
        v /= qi(2);
    }
    v
}

pub fn asym_return_supersolution_ok() -> bool {
    let s = crate::rational::q(1, 2);
    crate::rational::q(1, 3) + crate::rational::q(2, 3) * &s * &s <= s
}
