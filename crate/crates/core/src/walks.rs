//! Random walks on loaded graphs: exact n-step distributions, hitting
//! times, absorbing races, and checks of the symmetry and comparison
//! inequalities for walks on vertex-transitive graphs.
//!
//! Exact propagation keeps every mass as an integer numerator over a common
//! power of the chain's denominator. Quantities that depend on the infinite
//! graph are reported as intervals: lower bounds come from what is decided
//! inside the loaded ball, upper bounds add the mass that is not decided.
//! For large transient balls a fixed-point engine with downward rounding
//! gives the same kind of sound lower bounds cheaply.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::construct::build_linear_harmonic;
use crate::error::{Error, Result};
use crate::family::{within, GraphFamily};
use crate::field::Rationals;
use crate::graphs::{self, VertexSet, WeightedGraph};
use crate::groups::{boundary_constant, Element, Family, GroupModel, SymmetricMeasure};
use crate::laplace::{dirichlet_solve, BoundaryValueProblem};
use crate::linalg::{solve, SparseMatrix};
use crate::rational::{fmt_q, serde_q, serde_q_map, serde_q_vec, to_f64, Q};

/// What happens when mass reaches a vertex whose edges were cut off.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrontierPolicy {
    /// Cut-off weight leads to a sink; the escaped mass is tracked.
    Absorb,
    /// Stepping from an incomplete vertex is a truncation error.
    Error,
}

impl FromStr for FrontierPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "absorb" => Ok(FrontierPolicy::Absorb),
            "error" => Ok(FrontierPolicy::Error),
            _ => Err(Error::Parse(format!("unknown frontier policy {s:?} (absorb|error)"))),
        }
    }
}

// ---------------------------------------------------------------------------
// Exact propagation
// ---------------------------------------------------------------------------

/// Transition probabilities as integers over a common denominator.
#[derive(Clone, Debug)]
struct Chain {
    denom: BigInt,
    hold: BigInt,
    moves: Vec<Vec<(usize, BigInt)>>,
    escape: Vec<BigInt>,
}

impl Chain {
    fn new(g: &WeightedGraph) -> Chain {
        let h = g.hold().clone();
        let s = Q::one() - &h;
        let mut probs: Vec<(Vec<(usize, Q)>, Q)> = Vec::with_capacity(g.len());
        let mut denom = h.denom().clone();
        for x in 0..g.len() {
            let d = g.degree(x);
            let row: Vec<(usize, Q)> = g.neighbours(x).iter().map(|(y, w)| (*y, &s * w / &d)).collect();
            let esc = &s * g.outside_weight(x) / &d;
            for (_, p) in &row {
                denom = denom.lcm(p.denom());
            }
            denom = denom.lcm(esc.denom());
            probs.push((row, esc));
        }
        let int = |p: &Q| (p * Q::from_integer(denom.clone())).to_integer();
        Chain {
            hold: int(&h),
            moves: probs.iter().map(|(row, _)| row.iter().map(|(y, p)| (*y, int(p))).collect()).collect(),
            escape: probs.iter().map(|(_, e)| int(e)).collect(),
            denom,
        }
    }
}

/// Step-by-step exact propagation of the walk from a point mass, with
/// absorbing vertices (mass arriving there is frozen) and a frontier policy.
/// The start vertex is alive at time 0 even if it is absorbing.
pub struct Propagation<'a> {
    g: &'a WeightedGraph,
    chain: Chain,
    absorbing: Vec<bool>,
    policy: FrontierPolicy,
    step: usize,
    scale: BigInt,
    alive: Vec<BigInt>,
    active: Vec<usize>,
    frozen: BTreeMap<usize, Q>,
    arrived: BTreeMap<usize, Q>,
    escaped: Q,
}

impl<'a> Propagation<'a> {
    pub fn new(g: &'a WeightedGraph, start: usize, absorbing: &VertexSet, policy: FrontierPolicy) -> Result<Self> {
        g.check_subset(&BTreeSet::from([start]))?;
        g.check_subset(absorbing)?;
        let mut alive = vec![BigInt::zero(); g.len()];
        alive[start] = BigInt::one();
        let mut abs = vec![false; g.len()];
        for &a in absorbing {
            abs[a] = true;
        }
        Ok(Propagation {
            g,
            chain: Chain::new(g),
            absorbing: abs,
            policy,
            step: 0,
            scale: BigInt::one(),
            alive,
            active: vec![start],
            frozen: BTreeMap::new(),
            arrived: BTreeMap::new(),
            escaped: Q::zero(),
        })
    }

    pub fn steps(&self) -> usize {
        self.step
    }

    pub fn step(&mut self) -> Result<()> {
        let c = &self.chain;
        let mut next = vec![BigInt::zero(); self.g.len()];
        let mut touched = Vec::new();
        let mut mark = vec![false; self.g.len()];
        let mut esc = BigInt::zero();
        let mut bump = |v: usize, add: BigInt, next: &mut Vec<BigInt>| {
            if !mark[v] {
                mark[v] = true;
                touched.push(v);
            }
            next[v] += add;
        };
        for &x in &self.active {
            let m = &self.alive[x];
            if m.is_zero() {
                continue;
            }
            if !c.escape[x].is_zero() {
                match self.policy {
                    FrontierPolicy::Error => {
                        return Err(Error::Truncation(format!(
                            "the walk reaches the truncation frontier at {} in step {}",
                            self.g.id(x),
                            self.step + 1
                        )))
                    }
                    FrontierPolicy::Absorb => esc += m * &c.escape[x],
                }
            }
            if !c.hold.is_zero() {
                bump(x, m * &c.hold, &mut next);
            }
            for (y, p) in &c.moves[x] {
                bump(*y, m * p, &mut next);
            }
        }
        self.scale *= &c.denom;
        self.step += 1;
        self.arrived.clear();
        touched.sort_unstable();
        let mut active = Vec::with_capacity(touched.len());
        for v in touched {
            if next[v].is_zero() {
                continue;
            }
            if self.absorbing[v] {
                let q = Q::new(std::mem::take(&mut next[v]), self.scale.clone());
                *self.frozen.entry(v).or_insert_with(Q::zero) += &q;
                self.arrived.insert(v, q);
            } else {
                active.push(v);
            }
        }
        self.escaped += Q::new(esc, self.scale.clone());
        self.alive = next;
        self.active = active;
        Ok(())
    }

    /// Alive mass at `v` (not absorbed, not escaped).
    pub fn alive(&self, v: usize) -> Q {
        Q::new(self.alive[v].clone(), self.scale.clone())
    }

    /// Mass that arrived at absorbing vertex `v` in the last step.
    pub fn arrived(&self, v: usize) -> Q {
        self.arrived.get(&v).cloned().unwrap_or_else(Q::zero)
    }

    /// Total mass absorbed at `v` so far.
    pub fn frozen(&self, v: usize) -> Q {
        self.frozen.get(&v).cloned().unwrap_or_else(Q::zero)
    }

    pub fn escaped(&self) -> &Q {
        &self.escaped
    }

    pub fn alive_support(&self) -> impl Iterator<Item = (usize, Q)> + '_ {
        self.active.iter().map(|&v| (v, self.alive(v)))
    }

    pub fn alive_total(&self) -> Q {
        let s: BigInt = self.active.iter().map(|&v| &self.alive[v]).sum();
        Q::new(s, self.scale.clone())
    }

    pub fn frozen_total(&self) -> Q {
        self.frozen.values().sum()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WalkDistribution {
    pub start: String,
    pub step: usize,
    #[serde(with = "serde_q_map")]
    pub support: BTreeMap<String, Q>,
    #[serde(with = "serde_q_map")]
    pub absorbed: BTreeMap<String, Q>,
    #[serde(with = "serde_q")]
    pub escaped: Q,
}

impl WalkDistribution {
    /// `support + absorbed + escaped`; equals 1 exactly.
    pub fn total(&self) -> Q {
        self.support.values().chain(self.absorbed.values()).sum::<Q>() + &self.escaped
    }
}

/// Distribution of `X_n` from `start`; with absorbing vertices, mass freezes
/// where it is absorbed (a start inside the absorbing set is frozen at 0).
pub fn n_step_distribution(
    g: &WeightedGraph,
    start: usize,
    n: usize,
    absorbing: &VertexSet,
    policy: FrontierPolicy,
) -> Result<WalkDistribution> {
    let mut absorbed = BTreeMap::new();
    let mut support = BTreeMap::new();
    let mut escaped = Q::zero();
    if absorbing.contains(&start) {
        g.check_subset(absorbing)?;
        absorbed.insert(g.id(start).to_string(), Q::one());
    } else {
        let mut p = Propagation::new(g, start, absorbing, policy)?;
        for _ in 0..n {
            p.step()?;
        }
        support = p.alive_support().map(|(v, q)| (g.id(v).to_string(), q)).collect();
        absorbed = p.frozen.iter().map(|(v, q)| (g.id(*v).to_string(), q.clone())).collect();
        escaped = p.escaped.clone();
    }
    Ok(WalkDistribution { start: g.id(start).to_string(), step: n, support, absorbed, escaped })
}

/// `P_x[T_y = n]` for `n = 0..=n_max`.
pub fn hitting_time_distribution(g: &WeightedGraph, x: usize, y: usize, n_max: usize, policy: FrontierPolicy) -> Result<Vec<Q>> {
    let mut out = vec![Q::zero(); n_max + 1];
    if x == y {
        out[0] = Q::one();
        return Ok(out);
    }
    let mut p = Propagation::new(g, x, &BTreeSet::from([y]), policy)?;
    for slot in out.iter_mut().skip(1) {
        p.step()?;
        *slot = p.arrived(y);
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct SymmetryReport {
    pub n_max: usize,
    pub pairs: usize,
    pub transitive: bool,
    pub all_equal: bool,
    /// First `(x, y, n)` with `P_x[T_y = n] ≠ P_y[T_x = n]`.
    pub mismatch: Option<(String, String, usize)>,
}

/// Compares `P_x[T_y = n]` with `P_y[T_x = n]` for every given pair.
pub fn hitting_symmetry(g: &WeightedGraph, pairs: &[(usize, usize)], n_max: usize, policy: FrontierPolicy) -> Result<SymmetryReport> {
    let mut mismatch = None;
    for &(x, y) in pairs {
        let a = hitting_time_distribution(g, x, y, n_max, policy)?;
        let b = hitting_time_distribution(g, y, x, n_max, policy)?;
        if let Some(n) = (0..=n_max).find(|&n| a[n] != b[n]) {
            mismatch = Some((g.id(x).to_string(), g.id(y).to_string(), n));
            break;
        }
    }
    Ok(SymmetryReport { n_max, pairs: pairs.len(), transitive: g.is_transitive(), all_equal: mismatch.is_none(), mismatch })
}

/// All unordered pairs of distinct vertices from `vs`.
pub fn all_pairs(vs: &[usize]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (i, &x) in vs.iter().enumerate() {
        for &y in &vs[i + 1..] {
            out.push((x, y));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Intervals and absorbing problems
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Interval {
    #[serde(with = "serde_q")]
    pub lo: Q,
    #[serde(with = "serde_q")]
    pub hi: Q,
}

impl Interval {
    pub fn new(lo: Q, hi: Q) -> Self {
        Interval { lo, hi }
    }

    pub fn point(v: Q) -> Self {
        Interval { lo: v.clone(), hi: v }
    }

    pub fn width(&self) -> Q {
        &self.hi - &self.lo
    }

    pub fn contains(&self, v: &Q) -> bool {
        &self.lo <= v && v <= &self.hi
    }

    pub fn overlaps(&self, o: &Interval) -> bool {
        self.lo <= o.hi && o.lo <= self.hi
    }

    pub fn contains_interval(&self, o: &Interval) -> bool {
        self.lo <= o.lo && o.hi <= self.hi
    }
}

/// `P_start[T_targets < ∞]` bracketed on a loaded graph: inside the graph
/// the problem is solved exactly; a walker leaving through the frontier is
/// credited 0 (lower) or `sink_upper` (upper), which must bound the
/// probability of reaching the targets from anywhere beyond the frontier.
pub fn hit_probability_interval(g: &WeightedGraph, start: usize, targets: &VertexSet, sink_upper: &Q) -> Result<Interval> {
    g.check_subset(targets)?;
    if targets.is_empty() {
        return Err(Error::Precondition("empty target set".into()));
    }
    if targets.contains(&start) {
        return Ok(Interval::point(Q::one()));
    }
    let region = reach_avoiding(g, start, targets);
    let solve_with = |sink: Q| -> Result<Q> {
        let p = BoundaryValueProblem {
            region: region.clone(),
            boundary: g.outer_boundary(&region).into_iter().map(|b| (b, Q::one())).collect(),
            default_boundary: None,
            absorbing_frontier: Some(sink),
        };
        Ok(dirichlet_solve(g, &p)?.values[&start].clone())
    };
    Ok(Interval::new(solve_with(Q::zero())?, solve_with(sink_upper.clone())?))
}

/// Vertices reachable from `start` without entering `avoid`.
fn reach_avoiding(g: &WeightedGraph, start: usize, avoid: &VertexSet) -> VertexSet {
    let mut seen = BTreeSet::from([start]);
    let mut q = VecDeque::from([start]);
    while let Some(v) = q.pop_front() {
        for (y, _) in g.neighbours(v) {
            if !avoid.contains(y) && seen.insert(*y) {
                q.push_back(*y);
            }
        }
    }
    seen
}

/// `P_start[T_A < T_B]` on a finite graph, solved exactly.
pub fn race(g: &WeightedGraph, a: &VertexSet, b: &VertexSet, start: usize) -> Result<Q> {
    g.check_subset(a)?;
    g.check_subset(b)?;
    if a.iter().any(|v| b.contains(v)) {
        return Err(Error::Precondition("the absorbing sets must be disjoint".into()));
    }
    if a.contains(&start) {
        return Ok(Q::one());
    }
    if b.contains(&start) {
        return Ok(Q::zero());
    }
    let ab: VertexSet = a.union(b).copied().collect();
    let region = reach_avoiding(g, start, &ab);
    if let Some(v) = region.iter().find(|&&v| !g.is_complete(v)) {
        return Err(Error::Truncation(format!("the race reaches the truncation frontier at {}", g.id(*v))));
    }
    let p = BoundaryValueProblem {
        boundary: g.outer_boundary(&region).into_iter().map(|v| (v, if a.contains(&v) { Q::one() } else { Q::zero() })).collect(),
        region,
        default_boundary: None,
        absorbing_frontier: None,
    };
    match dirichlet_solve(g, &p) {
        Ok(s) => Ok(s.values[&start].clone()),
        Err(Error::Precondition(m)) if m.contains("no boundary") => {
            Err(Error::Precondition(format!("states reachable from {} cannot reach A ∪ B", g.id(start))))
        }
        Err(e) => Err(e),
    }
}

/// `P_g[T⁺_{m+R} < T⁻_m]` on a group, where `T±` are the first times the
/// cyclic coordinate `ζ` is `≥ m+R` or `≤ m`. The states with `m < ζ < m+R`
/// reachable from `g` are enumerated (at most `cap` of them) and the
/// absorbing chain is solved exactly.
pub fn level_race(group: &GroupModel, mu: &SymmetricMeasure, g: &Element, m: i64, r: i64, cap: usize) -> Result<Q> {
    if r < 1 {
        return Err(Error::Precondition("R must be at least 1".into()));
    }
    let z = group.zeta(g)?;
    if z >= m + r {
        return Ok(Q::one());
    }
    if z <= m {
        return Ok(Q::zero());
    }
    let moves: Vec<(Element, Q)> = mu.moves(group).cloned().collect();
    let mut states = vec![g.clone()];
    let mut index = HashMap::from([(g.clone(), 0usize)]);
    let mut rows: Vec<Vec<(usize, Q)>> = Vec::new();
    let mut rhs: Vec<Q> = Vec::new();
    let mut i = 0;
    while i < states.len() {
        let x = states[i].clone();
        let mut row = vec![(i, Q::one() - mu.hold(group))];
        let mut b = Q::zero();
        for (s, w) in &moves {
            let y = group.mul(&x, s);
            let zy = group.zeta(&y)?;
            if zy >= m + r {
                b += w;
            } else if zy > m {
                let j = match index.get(&y) {
                    Some(&j) => j,
                    None => {
                        if states.len() >= cap {
                            return Err(Error::Truncation(format!("more than {cap} transient states")));
                        }
                        index.insert(y.clone(), states.len());
                        states.push(y);
                        states.len() - 1
                    }
                };
                row.push((j, -w.clone()));
            }
        }
        rows.push(row);
        rhs.push(b);
        i += 1;
    }
    let mut mat = SparseMatrix::new(states.len());
    for row in rows {
        let mut acc: BTreeMap<usize, Q> = BTreeMap::new();
        for (j, v) in row {
            *acc.entry(j).or_insert_with(Q::zero) += v;
        }
        mat.push_row(acc.into_iter().filter(|(_, v)| !v.is_zero()).collect());
    }
    let sol = solve(&Rationals, &mat, &rhs).ok_or_else(|| Error::Invariant("absorbing system is inconsistent".into()))?;
    if !sol.kernel.is_empty() {
        return Err(Error::Precondition("some states cannot leave the strip".into()));
    }
    Ok(sol.particular[0].clone())
}

#[derive(Clone, Debug, Serialize)]
pub struct ExitRow {
    pub r: i64,
    #[serde(with = "serde_q")]
    pub exact: Q,
    #[serde(with = "serde_q")]
    pub linear: Q,
    /// `R · |exact - linear|`.
    pub scaled_error: f64,
    /// `|exact - linear| ≤ (φ_max - φ_min + M)/(R + M)`.
    pub within_bound: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExitReport {
    pub group: String,
    pub start: String,
    pub m: i64,
    /// `max |ζ(ts)|` over the support and the transversal.
    pub boundary_constant: i64,
    /// `φ_max - φ_min + M`, from the harmonic `ζ + φ∘τ`.
    #[serde(with = "serde_q")]
    pub proof_constant: Q,
    pub rows: Vec<ExitRow>,
    /// Smallest `C` with `|exact - linear| ≤ C/R` on every row.
    pub fitted_c: f64,
    pub all_within_bound: bool,
}

/// Compares `P_g[T⁺_{m+R} < T⁻_m]` with `(ζ(g) - m)/(R + M)` across `radii`.
/// The harmonic `f = ζ + φ∘τ` gives barriers `f⁻ ≤ h ≤ f⁺` whose gap is
/// `(φ_max - φ_min + M)/(R + M)`; each row checks that bound exactly.
pub fn exit_estimate(group: &GroupModel, mu: &SymmetricMeasure, g: &Element, m: i64, radii: &[i64], cap: usize) -> Result<ExitReport> {
    if !matches!(group.family(), Family::VirtuallyCyclic(_) | Family::FreeAbelian { d: 1 }) {
        return Err(Error::Unsupported(format!("exit estimates need a virtually cyclic group, not {}", group.name())));
    }
    let big_m = boundary_constant(group, mu)?;
    let f = build_linear_harmonic(group, mu, 0, 2)?;
    let c0 = f.phi_spread() + Q::from_integer(big_m.into());
    let z = group.zeta(g)?;
    let mut rows = Vec::new();
    for &r in radii {
        if !(m < z && z < m + r) {
            return Err(Error::Precondition(format!("ζ(g) = {z} must lie strictly between {m} and {}", m + r)));
        }
        let exact = level_race(group, mu, g, m, r, cap)?;
        let linear = Q::new((z - m).into(), (r + big_m).into());
        let err = (&exact - &linear).abs();
        let within = err <= &c0 / Q::from_integer((r + big_m).into());
        rows.push(ExitRow { r, scaled_error: r as f64 * to_f64(&err), within_bound: within, exact, linear });
    }
    Ok(ExitReport {
        group: group.name().to_string(),
        start: group.format(g),
        m,
        boundary_constant: big_m,
        fitted_c: rows.iter().map(|r| r.scaled_error).fold(0.0, f64::max),
        all_within_bound: rows.iter().all(|r| r.within_bound),
        proof_constant: c0,
        rows,
    })
}

// ---------------------------------------------------------------------------
// Asymmetric hitting on the tree graph
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct AsymmetryReport {
    pub depth: usize,
    pub n_sum: usize,
    /// `Σ_{n ≤ n_sum} P_x[T_y = n]`, an exact lower bound for `P_x[T_y < ∞]`.
    #[serde(with = "serde_q")]
    pub x_to_y_lower: Q,
    pub x_to_y: Interval,
    pub y_to_x: Interval,
    /// `x_to_y_lower > y_to_x.hi`.
    pub certified: bool,
}

/// Certifies `P_x[T_y < ∞] > P_y[T_x < ∞]` on the tree graph loaded to
/// `depth`. Beyond the loaded leaves, a walker at tree level `l` reaches
/// `y` with probability at most `2^-l` (a supersolution bound), and it must
/// pass `y` to reach `x`.
pub fn asymmetry_certificate(depth: usize, n_sum: usize) -> Result<AsymmetryReport> {
    if !graphs::asym_return_supersolution_ok() {
        return Err(Error::Invariant("return-probability certificate fails".into()));
    }
    let g = graphs::asym_hitting_graph(depth)?;
    let (x, y) = (g.mark("x")?, g.mark("y")?);
    let hits = hitting_time_distribution(&g, x, y, n_sum, FrontierPolicy::Absorb)?;
    let lower: Q = hits.iter().sum();
    let beyond = graphs::asym_return_bound(depth + 2);
    let x_to_y = hit_probability_interval(&g, x, &BTreeSet::from([y]), &beyond)?;
    let y_to_x = hit_probability_interval(&g, y, &BTreeSet::from([x]), &beyond)?;
    Ok(AsymmetryReport { depth, n_sum, certified: lower > y_to_x.hi, x_to_y_lower: lower, x_to_y, y_to_x })
}

// ---------------------------------------------------------------------------
// Vertex-transitive checks
// ---------------------------------------------------------------------------

fn require_transitive(g: &WeightedGraph) -> Result<()> {
    if !g.is_transitive() {
        return Err(Error::Precondition("the graph is not tagged vertex-transitive".into()));
    }
    Ok(())
}

/// The loaded graph for a family, large enough that walks of `steps` steps
/// from `B(radius)` never touch the frontier.
fn loaded(fam: &GraphFamily, radius: usize, steps: usize) -> Result<WeightedGraph> {
    let g = match fam {
        GraphFamily::Fixed(g) => g.clone(),
        _ => fam.ball(radius + steps + 1)?,
    };
    require_transitive(&g)?;
    Ok(g)
}

fn centre_set(g: &WeightedGraph, radius: usize) -> Vec<usize> {
    match g.dist_tags() {
        Some(_) => within(g, radius),
        None => {
            let d = g.bfs(g.base());
            (0..g.len()).filter(|&v| d[v].is_some_and(|d| d <= radius)).collect()
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OffdiagReport {
    pub pairs_radius: usize,
    pub n_max: usize,
    pub checks: usize,
    pub violations: usize,
    pub all_hold: bool,
    /// `P_e[X_n = e]` for even `n ≤ n_max`.
    #[serde(with = "serde_q_vec")]
    pub return_probabilities: Vec<Q>,
}

/// Checks `P_x[X_n = y] ≤ P_e[X_n = e]` exactly for all `x, y ∈ B(radius)`
/// and even `n ≤ n_max`.
pub fn check_offdiag(fam: &GraphFamily, radius: usize, n_max: usize) -> Result<OffdiagReport> {
    let g = loaded(fam, radius, n_max)?;
    let pts = centre_set(&g, radius);
    let e = g.base();
    let mut diag = vec![Q::one()];
    let mut p = Propagation::new(&g, e, &BTreeSet::new(), FrontierPolicy::Error)?;
    for _ in 1..=n_max {
        p.step()?;
        diag.push(p.alive(e));
    }
    let mut checks = 0;
    let mut violations = 0;
    for &x in &pts {
        let mut p = Propagation::new(&g, x, &BTreeSet::new(), FrontierPolicy::Error)?;
        for n in 1..=n_max {
            p.step()?;
            if n % 2 == 0 {
                for &y in &pts {
                    checks += 1;
                    if p.alive(y) > diag[n] {
                        violations += 1;
                    }
                }
            }
        }
    }
    Ok(OffdiagReport {
        pairs_radius: radius,
        n_max,
        checks,
        violations,
        all_hold: violations == 0,
        return_probabilities: diag.into_iter().step_by(2).collect(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct TabooReport {
    pub x: String,
    pub y: String,
    pub n_max: usize,
    /// `u_r = P_x[X_r = x, X_i ≠ y for 0 < i < r]` for `r = 0..=n_max`.
    #[serde(with = "serde_q_vec")]
    pub u: Vec<Q>,
    /// `v_r = P_x[X_r = y, X_i ∉ {x, y} for 0 < i < r]`.
    #[serde(with = "serde_q_vec")]
    pub v: Vec<Q>,
    pub u_symmetric: bool,
    pub v_symmetric: bool,
}

fn taboo_series(g: &WeightedGraph, x: usize, y: usize, n_max: usize) -> Result<(Vec<Q>, Vec<Q>)> {
    let mut u = vec![Q::one()];
    let mut p = Propagation::new(g, x, &BTreeSet::from([y]), FrontierPolicy::Error)?;
    let mut v = vec![Q::zero()];
    let mut pv = Propagation::new(g, x, &BTreeSet::from([x, y]), FrontierPolicy::Error)?;
    for _ in 1..=n_max {
        p.step()?;
        u.push(p.alive(x));
        pv.step()?;
        v.push(pv.arrived(y));
    }
    Ok((u, v))
}

/// Loop and crossing probabilities avoiding the other point, compared in
/// both directions.
pub fn taboo_loop_symmetry(g: &WeightedGraph, x: usize, y: usize, n_max: usize) -> Result<TabooReport> {
    require_transitive(g)?;
    if x == y {
        return Err(Error::Precondition("x and y must differ".into()));
    }
    let (u, v) = taboo_series(g, x, y, n_max)?;
    let (u2, v2) = taboo_series(g, y, x, n_max)?;
    Ok(TabooReport {
        x: g.id(x).to_string(),
        y: g.id(y).to_string(),
        n_max,
        u_symmetric: u == u2,
        v_symmetric: v == v2,
        u,
        v,
    })
}

// ---------------------------------------------------------------------------
// Return sums
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct BoundCheck {
    pub y: String,
    pub distance: usize,
    /// `P_e[T_y ≤ N]`.
    #[serde(with = "serde_q")]
    pub hit: Q,
    /// `2 Σ_{d-1 ≤ n ≤ N, n even} P_e[X_n = e]`.
    #[serde(with = "serde_q")]
    pub bound: Q,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct TransienceReport {
    pub n: usize,
    /// `P_e[X_k = e]` for `k = 0..=N`.
    #[serde(with = "serde_q_vec")]
    pub return_probabilities: Vec<Q>,
    /// `Σ_{k ≤ n} P_e[X_k = e]` for `n = 0..=N`.
    #[serde(with = "serde_q_vec")]
    pub partial_sums: Vec<Q>,
    /// Increment of the partial sums at the last even step, as a float.
    pub last_increment: f64,
    pub bound_checks: Vec<BoundCheck>,
    pub all_bounds_hold: bool,
}

/// Exact return probabilities up to `N` and the comparison
/// `P_e[T_y ≤ N] ≤ 2 Σ_{d(e,y)-1 ≤ n ≤ N, n even} P_e[X_n = e]` for all `y`
/// with `1 ≤ d(e,y) ≤ dmax`. A closed walk of length `n` stays within
/// `n/2` of its start, and a walk reaching `y` by time `N` stays within
/// `(N + d)/2`, so the loaded balls make every value exact.
pub fn transience_partial_sums(fam: &GraphFamily, n: usize, dmax: usize) -> Result<TransienceReport> {
    let GraphFamily::Cayley { .. } = fam else {
        return Err(Error::Precondition("return sums need a Cayley family".into()));
    };
    let g = fam.ball(n.div_ceil(2) + 1)?;
    let e = g.base();
    let mut ret = vec![Q::one()];
    let mut p = Propagation::new(&g, e, &BTreeSet::new(), FrontierPolicy::Absorb)?;
    for _ in 1..=n {
        p.step()?;
        ret.push(p.alive(e));
    }
    let mut partial = Vec::with_capacity(ret.len());
    let mut acc = Q::zero();
    for r in &ret {
        acc += r;
        partial.push(acc.clone());
    }
    let last_even = n - n % 2;
    let last_increment = to_f64(&ret[last_even]);

    let big = fam.ball((n + dmax).div_ceil(2) + 1)?;
    let d = big.dist_tags().expect("balls carry distance tags").to_vec();
    let mut bound_checks = Vec::new();
    for y in 0..big.len() {
        if d[y] == 0 || d[y] > dmax {
            continue;
        }
        let hit: Q = hitting_time_distribution(&big, big.base(), y, n, FrontierPolicy::Absorb)?.into_iter().sum();
        let lo = d[y].saturating_sub(1);
        let bound: Q = Q::from_integer(2.into()) * (lo..=n).filter(|k| k % 2 == 0).map(|k| &ret[k]).sum::<Q>();
        bound_checks.push(BoundCheck { y: big.id(y).to_string(), distance: d[y], holds: hit <= bound, hit, bound });
    }
    Ok(TransienceReport {
        n,
        all_bounds_hold: bound_checks.iter().all(|b| b.holds),
        return_probabilities: ret,
        partial_sums: partial,
        last_increment,
        bound_checks,
    })
}

// ---------------------------------------------------------------------------
// Sound fixed-point absorption bounds
// ---------------------------------------------------------------------------

/// Probability 1 in the fixed-point mass scale.
const ONE: u128 = 1 << 64;
/// Transition probabilities are stored as multiples of `2^-63`, rounded down.
const PSHIFT: u32 = 63;

fn floor_scaled(p: &Q) -> u128 {
    ((p.numer() << PSHIFT) / p.denom()).to_u128().expect("probability below 1")
}

fn scaled_to_q(v: u128) -> Q {
    Q::new(BigInt::from(v), BigInt::from(ONE))
}

struct DyadicChain {
    hold: u128,
    moves: Vec<Vec<(usize, u128)>>,
    escape: Vec<u128>,
}

impl DyadicChain {
    fn new(g: &WeightedGraph) -> Self {
        let h = g.hold().clone();
        let s = Q::one() - &h;
        let mut moves = Vec::with_capacity(g.len());
        let mut escape = Vec::with_capacity(g.len());
        for x in 0..g.len() {
            let d = g.degree(x);
            moves.push(g.neighbours(x).iter().map(|(y, w)| (*y, floor_scaled(&(&s * w / &d)))).collect());
            escape.push(floor_scaled(&(&s * g.outside_weight(x) / &d)));
        }
        DyadicChain { hold: floor_scaled(&h), moves, escape }
    }

    /// Lower bounds, in units of `2^-64`, for the probability from every
    /// vertex of being absorbed in `target` (and, if `exit_counts`, of
    /// leaving through the frontier) before reaching any other vertex of
    /// `stop`. Gauss–Seidel sweeps from 0 with downward rounding never
    /// overshoot the true value.
    fn absorb_lower(&self, stop: &[bool], target: &[bool], exit_counts: bool, sweeps: usize) -> (Vec<u128>, usize) {
        let n = self.moves.len();
        let mut v: Vec<u128> = (0..n).map(|x| if target[x] { ONE } else { 0 }).collect();
        let mul = |p: u128, m: u128| -> u128 { (p * m) >> PSHIFT };
        let mut done = 0;
        for sweep in 0..sweeps {
            let mut changed = false;
            for x in 0..n {
                if stop[x] {
                    continue;
                }
                let mut acc = mul(self.hold, v[x]);
                if exit_counts {
                    acc += mul(self.escape[x], ONE);
                }
                for (y, p) in &self.moves[x] {
                    acc += mul(*p, v[*y]);
                }
                if acc > v[x] {
                    v[x] = acc.min(ONE);
                    changed = true;
                }
            }
            done = sweep + 1;
            if !changed {
                break;
            }
        }
        (v, done)
    }
}

/// The three sound lower bounds for a race between `x` and `y` on a loaded
/// ball: absorbed at `x` first, at `y` first, or exit first.
struct RaceBounds {
    at_x: Vec<u128>,
    at_y: Vec<u128>,
    exit: Vec<u128>,
    sweeps: usize,
}

fn race_bounds(chain: &DyadicChain, n: usize, x: Option<usize>, y: Option<usize>, sweeps: usize) -> RaceBounds {
    let mut stop = vec![false; n];
    let mut tx = vec![false; n];
    let mut ty = vec![false; n];
    if let Some(x) = x {
        stop[x] = true;
        tx[x] = true;
    }
    if let Some(y) = y {
        stop[y] = true;
        ty[y] = true;
    }
    let none = vec![false; n];
    let (at_x, s1) = chain.absorb_lower(&stop, &tx, false, sweeps);
    let (at_y, s2) = chain.absorb_lower(&stop, &ty, false, sweeps);
    let (exit, s3) = chain.absorb_lower(&stop, &none, true, sweeps);
    RaceBounds { at_x, at_y, exit, sweeps: s1.max(s2).max(s3) }
}

impl RaceBounds {
    fn undecided(&self, g: usize) -> u128 {
        ONE.saturating_sub(self.at_x[g] + self.at_y[g] + self.exit[g])
    }

    /// Interval for "absorbed at x first, inside the ball".
    fn x_first(&self, g: usize) -> Interval {
        Interval::new(scaled_to_q(self.at_x[g]), scaled_to_q(self.at_x[g] + self.undecided(g)))
    }

    fn y_first(&self, g: usize) -> Interval {
        Interval::new(scaled_to_q(self.at_y[g]), scaled_to_q(self.at_y[g] + self.undecided(g)))
    }

    /// Interval for the same event on the infinite graph: a walker that
    /// leaves the ball may still come back, so its mass counts as undecided.
    fn x_first_unbounded(&self, g: usize) -> Interval {
        Interval::new(scaled_to_q(self.at_x[g]), scaled_to_q(self.at_x[g] + self.undecided(g) + self.exit[g]))
    }

    fn y_first_unbounded(&self, g: usize) -> Interval {
        Interval::new(scaled_to_q(self.at_y[g]), scaled_to_q(self.at_y[g] + self.undecided(g) + self.exit[g]))
    }

    /// Interval for `P[X_τ = x | X_τ ∈ {x, y}]` inside the ball.
    fn conditioned(&self, g: usize) -> (Interval, Option<f64>) {
        let (a, b, u) = (scaled_to_q(self.at_x[g]), scaled_to_q(self.at_y[g]), scaled_to_q(self.undecided(g)));
        let ratio = |n: &Q, d: &Q| if d.is_zero() { None } else { Some(n / d) };
        let lo = ratio(&a, &(&a + &b + &u)).unwrap_or_else(Q::zero);
        let hi = ratio(&(&a + &u), &(&a + &u + &b)).unwrap_or_else(Q::one);
        let point = ratio(&a, &(&a + &b)).map(|q| to_f64(&q));
        (Interval::new(lo, hi), point)
    }
}

fn recurrent_family(fam: &GraphFamily) -> Option<bool> {
    match fam {
        GraphFamily::Cayley { group, .. } => match group.family() {
            Family::FreeAbelian { d } => Some(*d <= 2),
            Family::FiniteCyclic { .. } | Family::VirtuallyCyclic(_) => Some(true),
            Family::Lamplighter => Some(false),
        },
        _ => None,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentityCheck {
    pub lhs: Interval,
    pub rhs: Interval,
    pub consistent: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct HitsFirstReport {
    pub depth: usize,
    pub sweeps: usize,
    pub x: String,
    pub y: String,
    /// Inside the ball (exit kills the walk): `P_e[T_y < τ]`, etc.
    pub p_y: Interval,
    pub p_x: Interval,
    pub x_first: Interval,
    pub y_first: Interval,
    pub p_xy: Interval,
    pub p_yx: Interval,
    /// `P_e[T_y<τ] = P_e[T_y<T_x∧τ] + P_e[T_x<T_y∧τ]·P_x[T_y<τ]`.
    pub identity_y: IdentityCheck,
    /// The same with `x` and `y` exchanged.
    pub identity_x: IdentityCheck,
    /// The largest interval width among the quantities above.
    pub width: f64,
    /// `P_e[T_y < ∞]` on the whole graph: exit mass is undecided.
    pub p_y_unbounded: Interval,
    pub p_x_unbounded: Interval,
}

fn mul_interval(a: &Interval, b: &Interval) -> Interval {
    Interval::new(&a.lo * &b.lo, &a.hi * &b.hi)
}

fn add_interval(a: &Interval, b: &Interval) -> Interval {
    Interval::new(&a.lo + &b.lo, &a.hi + &b.hi)
}

/// Checks the first-hit decompositions of the hitting probabilities of
/// `x` and `y` from the base, on the ball of radius `depth`.
pub fn hits_first_relation(fam: &GraphFamily, x_id: &str, y_id: &str, depth: usize, sweeps: usize) -> Result<HitsFirstReport> {
    if recurrent_family(fam) == Some(true) {
        return Err(Error::Precondition(format!("{} is recurrent; the relation needs a transient walk", fam.name())));
    }
    let g = fam.ball(depth)?;
    let (x, y) = (g.vertex(x_id)?, g.vertex(y_id)?);
    if x == y {
        return Err(Error::Precondition("x and y must differ".into()));
    }
    let e = g.base();
    let chain = DyadicChain::new(&g);
    let n = g.len();
    let both = race_bounds(&chain, n, Some(x), Some(y), sweeps);
    let only_y = race_bounds(&chain, n, None, Some(y), sweeps);
    let only_x = race_bounds(&chain, n, Some(x), None, sweeps);
    let p_y = only_y.y_first(e);
    let p_x = only_x.x_first(e);
    let x_first = both.x_first(e);
    let y_first = both.y_first(e);
    let p_xy = only_y.y_first(x);
    let p_yx = only_x.x_first(y);
    let rhs_y = add_interval(&y_first, &mul_interval(&x_first, &p_xy));
    let rhs_x = add_interval(&x_first, &mul_interval(&y_first, &p_yx));
    let width = [&p_y, &p_x, &x_first, &y_first, &p_xy, &p_yx].iter().map(|i| to_f64(&i.width())).fold(0.0, f64::max);
    Ok(HitsFirstReport {
        depth,
        sweeps: both.sweeps.max(only_x.sweeps).max(only_y.sweeps),
        x: x_id.to_string(),
        y: y_id.to_string(),
        identity_y: IdentityCheck { consistent: p_y.overlaps(&rhs_y), lhs: p_y.clone(), rhs: rhs_y },
        identity_x: IdentityCheck { consistent: p_x.overlaps(&rhs_x), lhs: p_x.clone(), rhs: rhs_x },
        p_y_unbounded: only_y.y_first_unbounded(e),
        p_x_unbounded: only_x.x_first_unbounded(e),
        p_y,
        p_x,
        x_first,
        y_first,
        p_xy,
        p_yx,
        width,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CritSample {
    pub vertex: String,
    pub point: Option<f64>,
    pub interval: Interval,
}

#[derive(Clone, Debug, Serialize)]
pub struct CritRow {
    pub radius: usize,
    pub vertices: usize,
    pub min: Option<CritSample>,
    pub max: Option<CritSample>,
    /// `max - min` of the point values.
    pub spread: Option<f64>,
    /// `max.lo - min.hi` when positive: a certified gap.
    pub certified_gap: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CritScanReport {
    pub x: String,
    pub y: String,
    pub depth: usize,
    pub sweeps: usize,
    pub recurrent: Option<bool>,
    pub rows: Vec<CritRow>,
    pub note: String,
}

/// For each radius, the spread over the sphere of
/// `P_g[X_τ = x | X_τ ∈ {x, y}]`, where `τ` is the exit time from
/// `B(depth) \ {x, y}`; these converge to
/// `P_g[T_x < T_y | min(T_x, T_y) < ∞]` as the depth grows.
pub fn crit_radius_scan(fam: &GraphFamily, x_id: &str, y_id: &str, radii: &[usize], depth: usize, sweeps: usize) -> Result<CritScanReport> {
    let g = fam.ball(depth)?;
    let (x, y) = (g.vertex(x_id)?, g.vertex(y_id)?);
    if x == y {
        return Err(Error::Precondition("x and y must differ".into()));
    }
    let chain = DyadicChain::new(&g);
    let rb = race_bounds(&chain, g.len(), Some(x), Some(y), sweeps);
    let dist = g.dist_tags().expect("balls carry distance tags");
    let mut rows = Vec::new();
    for &r in radii {
        if r >= depth {
            return Err(Error::Precondition(format!("radius {r} must be below the depth {depth}")));
        }
        let mut samples: Vec<CritSample> = (0..g.len())
            .filter(|&v| dist[v] == r && v != x && v != y)
            .map(|v| {
                let (interval, point) = rb.conditioned(v);
                CritSample { vertex: g.id(v).to_string(), point, interval }
            })
            .collect();
        let count = samples.len();
        samples.retain(|s| s.point.is_some());
        samples.sort_by(|a, b| a.point.partial_cmp(&b.point).expect("finite values").then(a.vertex.cmp(&b.vertex)));
        let min = samples.first().cloned();
        let max = samples.last().cloned();
        let spread = match (&min, &max) {
            (Some(a), Some(b)) => Some(b.point.unwrap_or(0.0) - a.point.unwrap_or(0.0)),
            _ => None,
        };
        let certified_gap = match (&min, &max) {
            (Some(a), Some(b)) if b.interval.lo > a.interval.hi => Some(fmt_q(&(&b.interval.lo - &a.interval.hi))),
            _ => None,
        };
        rows.push(CritRow { radius: r, vertices: count, min, max, spread, certified_gap });
    }
    let recurrent = recurrent_family(fam);
    let note = if recurrent == Some(true) {
        "the walk is recurrent: min(T_x, T_y) is almost surely finite and the conditioning is degenerate".to_string()
    } else {
        "a spread bounded away from 0 across arbitrarily large radii is evidence against finitely supported functions harmonic off {x, y}; finite radii decide nothing".to_string()
    };
    Ok(CritScanReport { x: x_id.into(), y: y_id.into(), depth, sweeps: rb.sweeps, recurrent, rows, note })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn z_ball(r: usize) -> WeightedGraph {
        let z = GroupModel::integers();
        let mu = SymmetricMeasure::standard(&z).unwrap();
        GraphFamily::cayley(z, mu).ball(r).unwrap()
    }

    #[test]
    fn two_steps_on_z() {
        let g = z_ball(4);
        let d = n_step_distribution(&g, g.base(), 2, &BTreeSet::new(), FrontierPolicy::Error).unwrap();
        assert_eq!(d.support["-2"], q(1, 4));
        assert_eq!(d.support["0"], q(1, 2));
        assert_eq!(d.support["2"], q(1, 4));
        assert_eq!(d.total(), Q::one());
        let d0 = n_step_distribution(&g, g.base(), 0, &BTreeSet::new(), FrontierPolicy::Error).unwrap();
        assert_eq!(d0.support.len(), 1);
    }

    #[test]
    fn frontier_policy_error_names_the_step() {
        let g = z_ball(2);
        let err = n_step_distribution(&g, g.base(), 5, &BTreeSet::new(), FrontierPolicy::Error).unwrap_err();
        assert!(matches!(err, Error::Truncation(ref m) if m.contains("step 3")), "{err}");
        let d = n_step_distribution(&g, g.base(), 5, &BTreeSet::new(), FrontierPolicy::Absorb).unwrap();
        assert!(d.escaped > Q::zero());
        assert_eq!(d.total(), Q::one());
    }

    #[test]
    fn gamblers_ruin() {
        let g = graphs::path(0, 10);
        let v = |s: &str| g.vertex(s).unwrap();
        assert_eq!(race(&g, &BTreeSet::from([v("10")]), &BTreeSet::from([v("0")]), v("3")).unwrap(), q(3, 10));
        assert_eq!(race(&g, &BTreeSet::from([v("10")]), &BTreeSet::from([v("0")]), v("10")).unwrap(), Q::one());
    }

    #[test]
    fn level_race_on_integers_is_gamblers_ruin() {
        let z = GroupModel::integers();
        let mu = SymmetricMeasure::standard(&z).unwrap();
        assert_eq!(level_race(&z, &mu, &Element::Abelian(vec![3]), 0, 10, 100).unwrap(), q(3, 10));
    }

    #[test]
    fn dihedral_exit_matches_linear_estimate() {
        let g = GroupModel::infinite_dihedral();
        let mu = SymmetricMeasure::standard(&g).unwrap();
        let start = Element::Vc { n: 4, t: 0 };
        let rep = exit_estimate(&g, &mu, &start, 0, &[12], 1000).unwrap();
        assert_eq!(rep.boundary_constant, 1);
        assert_eq!(rep.proof_constant, q(3, 2));
        assert_eq!(rep.rows[0].exact, q(7, 23));
        assert_eq!(rep.rows[0].linear, q(4, 13));
        assert!(rep.all_within_bound);
    }

    #[test]
    fn taboo_adjacent_on_z() {
        let g = z_ball(20);
        let (x, y) = (g.vertex("0").unwrap(), g.vertex("1").unwrap());
        let rep = taboo_loop_symmetry(&g, x, y, 16).unwrap();
        assert!(rep.u_symmetric && rep.v_symmetric);
        assert_eq!(rep.v[1], q(1, 2));
    }

    #[test]
    fn asymmetric_graph_certificate() {
        let rep = asymmetry_certificate(6, 25).unwrap();
        assert!(rep.certified, "{rep:?}");
        assert!(rep.y_to_x.contains(&q(1, 2)));
    }
}
