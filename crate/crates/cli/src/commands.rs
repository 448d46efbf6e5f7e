//! One function per subcommand, each producing a [`Report`].

use std::collections::BTreeMap;
use std::str::FromStr;

use harmlab::construct::{
    build_linear_harmonic, coset_escape_decay_probe, default_samples, hr_property_check, lamplighter_h_exact,
    lamplighter_h_mc, pointwise_limit_probe, McConfig, R_EXACT_MAX,
};
use harmlab::family::within;
use harmlab::groups::{cayley_ball, group_by_name, GroupSpec};
use harmlab::laplace::{dirichlet_solve, duality_test, harmonic_restriction_dimension, BoundaryValueProblem};
use harmlab::lca::{
    ball_surjectivity, kernel_witness_search, mean_dimension_estimate, parse_target, preimage_construct,
    parse_field, preinj_equivalence_check, Automaton, AutomatonSpec, FieldChoice,
};
use harmlab::rational::{fmt_q, parse_q, to_f64};
use harmlab::walks::{
    all_pairs, asymmetry_certificate, check_offdiag, crit_radius_scan, exit_estimate, hits_first_relation,
    hitting_symmetry, hitting_time_distribution, n_step_distribution, race, taboo_loop_symmetry,
    transience_partial_sums, FrontierPolicy,
};
use harmlab::{
    Claim, Element, Error, Field, GraphFamily, GroupModel, PrimeField, Rationals, Report, SymmetricMeasure, Table,
    VertexSet, WeightedGraph, Q,
};
use serde_json::{json, Value};

use crate::args::*;

/// Failures, split by who is at fault.
#[derive(Debug)]
pub enum Failure {
    /// Malformed invocation.
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse(m) => Failure::Usage(m),
            e => Failure::Core(e),
        }
    }
}

pub type Outcome = std::result::Result<Report, Failure>;

pub struct Globals {
    pub seed: Option<u64>,
    pub threads: usize,
}

impl Globals {
    fn mc(&self, samples: u64) -> std::result::Result<McConfig, Failure> {
        let seed = self.seed.ok_or_else(|| Failure::Usage("Monte Carlo runs need --seed".into()))?;
        if samples == 0 {
            return Err(Failure::Usage("--samples must be positive".into()));
        }
        Ok(McConfig { samples, seed, threads: self.threads.max(1) })
    }
}

/// Configuration echo: the parsed subcommand arguments plus the seed.
pub fn echo(cmd: &impl serde::Serialize, seed: Option<u64>) -> Value {
    let mut v = serde_json::to_value(cmd).expect("arguments serialize");
    if let (Value::Object(m), Some(s)) = (&mut v, seed) {
        m.insert("seed".into(), json!(s));
    }
    v
}

pub fn run(cmd: &Command, g: &Globals) -> Outcome {
    let config = echo(cmd, g.seed);
    match cmd {
        Command::Cayley(a) => cayley(a, config),
        Command::Dirichlet(a) => dirichlet(a, config),
        Command::Harmdim(a) => harmdim(a, config),
        Command::Duality(a) => duality(a, config),
        Command::Gofe(a) => gofe(a, config),
        Command::Mdim(a) => mdim(a, config),
        Command::Walk(w) => walk(w, config),
        Command::Ll(l) => ll(l, g, config),
        Command::Linharm(a) => linharm(a, config),
    }
}

/// The command name for the report, e.g. `walk hitdist`.
pub fn name(cmd: &Command) -> String {
    let v = serde_json::to_value(cmd).expect("arguments serialize");
    let mut parts = Vec::new();
    let mut cur = &v;
    while let Value::Object(m) = cur {
        match m.iter().next() {
            Some((k, inner)) if m.len() == 1 => {
                parts.push(k.clone());
                cur = inner;
            }
            _ => break,
        }
    }
    parts.join(" ")
}

/// The radius or depth a command works at, reported with inconclusive results.
pub fn working_radius(cmd: &Command) -> usize {
    match cmd {
        Command::Cayley(a) => a.radius,
        Command::Dirichlet(a) => a.radius,
        Command::Harmdim(a) => a.max_depth,
        Command::Duality(a) => a.depth,
        Command::Gofe(a) => a.preimage_depth.map_or(a.radius, |d| a.max_depth.max(d)),
        Command::Mdim(a) => a.nmax,
        Command::Walk(w) => match w {
            WalkCommand::Nstep(a) => a.n,
            WalkCommand::Hitdist(a) => a.nmax,
            WalkCommand::Race(a) => a.radius,
            WalkCommand::Symcheck(a) => if a.asymmetry { a.depth } else { a.nmax },
            WalkCommand::Offdiag(a) => a.radius,
            WalkCommand::Taboo(a) => a.nmax,
            WalkCommand::Transience(a) => a.n,
            WalkCommand::Hitsfirst(a) => a.depth,
            WalkCommand::Critscan(a) => a.depth,
        },
        Command::Ll(l) => match l {
            LlCommand::H(a) => a.r as usize,
            LlCommand::Decay(a) => a.r as usize,
            _ => R_EXACT_MAX as usize,
        },
        Command::Linharm(a) => a.verify_radius,
    }
}

// ---------------------------------------------------------------------------
// Parsing helpers
// ---------------------------------------------------------------------------

fn list(s: &str) -> Vec<String> {
    s.split(';').map(str::trim).filter(|x| !x.is_empty()).map(String::from).collect()
}

fn numbers<T: FromStr>(s: &str) -> std::result::Result<Vec<T>, Failure> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse().map_err(|_| Failure::Usage(format!("cannot parse {x:?} as a number"))))
        .collect()
}

fn read(path: &str) -> std::result::Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{path}: {e}")))
}

fn group_of(src: &Source) -> std::result::Result<(GroupModel, SymmetricMeasure), Failure> {
    let name = src.group.as_deref().ok_or_else(|| Failure::Usage("a --group is required".into()))?;
    if name.ends_with(".json") {
        if src.measure.is_some() {
            return Err(Failure::Usage("the measure of a JSON group is given in the file".into()));
        }
        return Ok(GroupSpec::parse(&read(name)?)?.build()?);
    }
    let group = group_by_name(name)?;
    let mu = match &src.measure {
        Some(m) => SymmetricMeasure::parse_shorthand(&group, m)?,
        None => SymmetricMeasure::standard(&group)?,
    };
    Ok((group, mu))
}

fn family_of(src: &Source) -> std::result::Result<GraphFamily, Failure> {
    match (&src.graph, &src.group) {
        (Some(g), None) => Ok(GraphFamily::parse(g)?),
        (None, Some(_)) => {
            let (g, mu) = group_of(src)?;
            Ok(GraphFamily::cayley(g, mu))
        }
        _ => Err(Failure::Usage("give exactly one of --graph and --group".into())),
    }
}

/// The vertex id for a user-supplied name: group elements are accepted in
/// any form the group parses; other graphs use their own ids.
fn canonical(fam: &GraphFamily, s: &str) -> std::result::Result<String, Failure> {
    match fam {
        GraphFamily::Cayley { group, .. } => Ok(group.format(&group.parse_element(s)?)),
        _ => Ok(s.to_string()),
    }
}

fn vertex(fam: &GraphFamily, g: &WeightedGraph, s: &str) -> std::result::Result<usize, Failure> {
    if s == "base" || (s == "identity" && !matches!(fam, GraphFamily::Cayley { .. })) {
        return Ok(g.base());
    }
    let id = canonical(fam, s)?;
    g.vertex(&id).map_err(|_| Failure::Core(Error::Precondition(format!("vertex {s} is not in the loaded graph"))))
}

fn vertex_set(fam: &GraphFamily, g: &WeightedGraph, s: &str) -> std::result::Result<VertexSet, Failure> {
    list(s).iter().map(|x| vertex(fam, g, x)).collect()
}

/// The largest distance from the base among `names`, searching balls of
/// growing radius up to `limit`.
fn locate(fam: &GraphFamily, names: &[&str], limit: usize) -> std::result::Result<usize, Failure> {
    let mut r = 4;
    loop {
        let g = fam.ball(r)?;
        let found: Option<Vec<usize>> = names.iter().map(|s| vertex(fam, &g, s).ok()).collect();
        if let Some(vs) = found {
            let d = g.dist_tags().expect("balls carry distance tags");
            return Ok(vs.iter().map(|&v| d[v]).max().unwrap_or(0));
        }
        if r >= limit {
            return Err(Failure::Core(Error::Precondition(format!("some of {names:?} lie beyond radius {limit}"))));
        }
        r = (2 * r).min(limit);
    }
}

/// A graph on which walks of `steps` steps from `names` stay inside the
/// loaded ball.
fn loaded_for(fam: &GraphFamily, names: &[&str], steps: usize) -> std::result::Result<WeightedGraph, Failure> {
    match fam {
        GraphFamily::Fixed(g) => Ok(g.clone()),
        _ => {
            let d = locate(fam, names, 256)?;
            Ok(fam.ball(d + steps + 1)?)
        }
    }
}

fn policy(s: &str) -> std::result::Result<FrontierPolicy, Failure> {
    Ok(s.parse()?)
}

fn q_opt(s: &Option<String>) -> std::result::Result<Option<Q>, Failure> {
    s.as_deref().map(parse_q).transpose().map_err(Failure::from)
}

fn report(command: &str, config: Value, result: &impl serde::Serialize) -> std::result::Result<Report, Failure> {
    Ok(Report::new(command, config, result)?)
}

// ---------------------------------------------------------------------------
// Graph-level commands
// ---------------------------------------------------------------------------

fn cayley(a: &CayleyArgs, config: Value) -> Outcome {
    let (group, mu) = group_of(&a.source)?;
    let ball = cayley_ball(&group, &mu, a.radius)?;
    let g = &ball.graph;
    let mut spheres = vec![0usize; a.radius + 1];
    let mut table = Table::new(["element", "distance", "complete"]);
    for v in 0..g.len() {
        spheres[ball.dist(v)] += 1;
        table.push([g.id(v).to_string(), ball.dist(v).to_string(), g.is_complete(v).to_string()]);
    }
    let result = json!({
        "group": group.name(),
        "radius": a.radius,
        "vertices": g.len(),
        "edges": g.edge_count(),
        "sphere_sizes": spheres,
        "frontier_vertices": g.frontier().len(),
        "hold": fmt_q(g.hold()),
        "graph": if a.emit_graph { serde_json::to_value(g.to_json()).expect("graphs serialize") } else { Value::Null },
    });
    Ok(report("cayley", config, &result)?
        .claim(Claim::exact(format!("B({}) has {} elements", a.radius, g.len()), true))
        .with_table(table))
}

fn dirichlet(a: &DirichletArgs, config: Value) -> Outcome {
    let fam = family_of(&a.source)?;
    let g = match &fam {
        GraphFamily::Fixed(g) => g.clone(),
        _ => fam.ball(a.radius)?,
    };
    let region: VertexSet = match a.region.strip_prefix("ball:") {
        Some(r) => {
            let r: usize = r.parse().map_err(|_| Failure::Usage(format!("bad region {:?}", a.region)))?;
            let ball = g.ball(r)?;
            (0..ball.len()).map(|v| g.vertex(ball.id(v))).collect::<harmlab::Result<_>>()?
        }
        None => vertex_set(&fam, &g, &a.region)?,
    };
    let mut boundary = BTreeMap::new();
    for item in list(&a.boundary) {
        let (v, x) = item.rsplit_once('=').ok_or_else(|| Failure::Usage(format!("boundary item {item:?} is not v=p/q")))?;
        boundary.insert(vertex(&fam, &g, v.trim())?, parse_q(x)?);
    }
    let p = BoundaryValueProblem {
        region,
        boundary,
        default_boundary: q_opt(&a.default)?,
        absorbing_frontier: q_opt(&a.frontier)?,
    };
    let s = dirichlet_solve(&g, &p)?;
    let mut table = Table::new(["vertex", "value"]);
    for (v, x) in &s.values {
        table.push([g.id(*v).to_string(), fmt_q(x)]);
    }
    let values: Vec<(String, String)> = s.values.iter().map(|(v, x)| (g.id(*v).to_string(), fmt_q(x))).collect();
    let result = json!({ "values": values, "components": s.components, "max_principle_ok": s.max_principle_ok });
    Ok(report("dirichlet", config, &result)?
        .claim(Claim::exact("f is harmonic on the region and equals the boundary data", true))
        .claim(Claim::exact("maximum principle on every component", s.max_principle_ok))
        .with_table(table))
}

fn harmdim(a: &HarmdimArgs, config: Value) -> Outcome {
    let fam = family_of(&a.source)?;
    let rep = harmonic_restriction_dimension(&fam, a.window, a.max_depth, a.stall)?;
    let mut table = Table::new(["depth", "dimension"]);
    for (m, d) in &rep.dims {
        table.push([m, d]);
    }
    let out = report("harmdim", config, &rep)?.with_table(table);
    Ok(match rep.stabilized {
        Some(d) => out.claim(Claim::exact(
            format!("d_{}(m) = {d} for the last {} depths up to {}", a.window, a.stall, rep.dims.last().map_or(0, |x| x.0)),
            true,
        )),
        None => out.claim(Claim::exact("no stabilization within max-depth", false)).inconclusive(a.max_depth),
    })
}

fn duality(a: &DualityArgs, config: Value) -> Outcome {
    let fam = family_of(&a.source)?;
    let x: Vec<String> = list(&a.x).iter().map(|s| canonical(&fam, s)).collect::<std::result::Result<_, _>>()?;
    let rep = duality_test(&fam, &x, a.depth)?;
    Ok(report("duality", config, &rep)?
        .claim(Claim::exact(format!("a witness supported in B({}) exists", a.depth), rep.witness.is_some()))
        .claim(Claim::exact("every boundary datum on X extends", rep.all_extend))
        .claim(Claim::exact("witness exists exactly when some datum fails to extend", rep.consistent)))
}

// ---------------------------------------------------------------------------
// Local linear maps
// ---------------------------------------------------------------------------

/// A local linear map as given on the command line, before a field is fixed.
enum MapDef {
    Spec(AutomatonSpec),
    Laplacian { source: Source, field: String, transpose: bool },
}

impl MapDef {
    fn new(m: &MapSource) -> std::result::Result<Self, Failure> {
        Ok(match &m.automaton {
            Some(path) => {
                let mut spec = AutomatonSpec::parse(&read(path)?)?;
                spec.transpose ^= m.transpose;
                MapDef::Spec(spec)
            }
            None => MapDef::Laplacian { source: m.source.clone(), field: m.field.clone(), transpose: m.transpose },
        })
    }

    fn field(&self) -> std::result::Result<FieldChoice, Failure> {
        Ok(match self {
            MapDef::Spec(s) => s.field_choice()?,
            MapDef::Laplacian { field, .. } => parse_field(field)?,
        })
    }

    fn build<F: Field>(&self, field: F) -> std::result::Result<Automaton<F>, Failure> {
        match self {
            MapDef::Spec(s) => Ok(s.build(field)?),
            MapDef::Laplacian { source, transpose, .. } => {
                let a = match &source.graph {
                    Some(_) => Automaton::graph_laplacian(field, family_of(source)?),
                    None => {
                        let (g, mu) = group_of(source)?;
                        Automaton::group_laplacian(field, g, &mu)?
                    }
                };
                Ok(if *transpose { a.transpose() } else { a })
            }
        }
    }
}

fn with_field<T>(
    def: &MapDef,
    q: impl FnOnce(Automaton<Rationals>) -> std::result::Result<T, Failure>,
    p: impl FnOnce(Automaton<PrimeField>) -> std::result::Result<T, Failure>,
) -> std::result::Result<T, Failure> {
    match def.field()? {
        FieldChoice::Rationals => q(def.build(Rationals)?),
        FieldChoice::Prime(m) => p(def.build(PrimeField::new(m)?)?),
    }
}

fn gofe(a: &GofeArgs, config: Value) -> Outcome {
    let def = MapDef::new(&a.map)?;
    fn go<F: Field>(tau: Automaton<F>, a: &GofeArgs, config: Value) -> Outcome {
        let surj = ball_surjectivity(&tau, a.radius)?;
        let wit = kernel_witness_search(&tau, a.radius)?;
        let pre = preinj_equivalence_check(&tau, a.radius)?;
        let preimage = match a.preimage_depth {
            None => None,
            Some(d) => {
                let target = match &a.target {
                    Some(path) => {
                        let raw: BTreeMap<String, Vec<String>> = serde_json::from_str(&read(path)?)
                            .map_err(|e| Failure::Usage(format!("target: {e}")))?;
                        parse_target(&tau.field, &raw)?
                    }
                    None => {
                        let map = tau.materialize(0)?;
                        let base = map.graph().id(map.graph().base()).to_string();
                        let mut v = vec![tau.field.zero(); tau.r];
                        v[0] = tau.field.one();
                        BTreeMap::from([(base, v)])
                    }
                };
                Some(preimage_construct(&tau, &target, d, a.stall, a.max_depth)?)
            }
        };
        let inconclusive = pre.verdict != "agree" || preimage.as_ref().is_some_and(|p| !p.stabilized);
        let result = json!({ "surjectivity": surj, "witness": wit, "preinjectivity": pre, "preimage": preimage });
        let mut out = report("gofe", config, &result)?
            .claim(Claim::exact(format!("τ maps V^B({}) onto V^B({})", a.radius, a.radius - 1), surj.surjective_on_ball))
            .claim(Claim::exact(format!("a kernel element supported in B({}) exists", a.radius), wit.witness.is_some()))
            .claim(Claim::exact("witness searches for τ and its transpose agree", pre.verdict == "agree"));
        if let Some(p) = &preimage {
            out = out.claim(Claim::exact(format!("τ(w) equals the target on B({})", p.depth), p.residual_zero));
        }
        Ok(if inconclusive { out.inconclusive(a.radius) } else { out })
    }
    with_field(&def, |t| go(t, a, config.clone()), |t| go(t, a, config.clone()))
}

fn mdim(a: &MdimArgs, config: Value) -> Outcome {
    let def = MapDef::new(&a.map)?;
    fn go<F: Field>(tau: Automaton<F>, a: &MdimArgs, config: Value) -> Outcome {
        let rows = mean_dimension_estimate(&tau, a.nmax)?;
        let mut table = Table::new(["n", "box_size", "rank", "ratio", "transpose_rank", "transpose_ratio", "gap", "gap_bound"]);
        for r in &rows {
            table.push([
                r.n.to_string(),
                r.box_size.to_string(),
                r.rank.to_string(),
                r.ratio.clone(),
                r.transpose_rank.to_string(),
                r.transpose_ratio.clone(),
                r.gap.to_string(),
                r.gap_bound.to_string(),
            ]);
        }
        let equal = rows.iter().all(|r| r.ratio == r.transpose_ratio);
        let gap = rows.iter().all(|r| r.gap.unsigned_abs() as usize <= r.gap_bound);
        Ok(report("mdim", config, &json!({ "rows": rows }))?
            .claim(Claim::exact("rank ratios of τ and its transpose agree on every box", equal))
            .claim(Claim::exact("|gap| ≤ r·|∂⁺Ω| on every box", gap))
            .with_table(table))
    }
    with_field(&def, |t| go(t, a, config.clone()), |t| go(t, a, config.clone()))
}

// ---------------------------------------------------------------------------
// Walks
// ---------------------------------------------------------------------------

fn walk(w: &WalkCommand, config: Value) -> Outcome {
    match w {
        WalkCommand::Nstep(a) => {
            let fam = family_of(&a.source)?;
            let mut names = vec![a.start.as_str()];
            let abs = list(&a.absorbing);
            names.extend(abs.iter().map(String::as_str));
            let g = loaded_for(&fam, &names, a.n)?;
            let start = vertex(&fam, &g, &a.start)?;
            let absorbing = vertex_set(&fam, &g, &a.absorbing)?;
            let d = n_step_distribution(&g, start, a.n, &absorbing, policy(&a.policy)?)?;
            let mut table = Table::new(["vertex", "probability", "state"]);
            for (v, p) in &d.support {
                table.push([v.clone(), fmt_q(p), "alive".into()]);
            }
            for (v, p) in &d.absorbed {
                table.push([v.clone(), fmt_q(p), "absorbed".into()]);
            }
            Ok(report("walk nstep", config, &d)?
                .claim(Claim::exact("alive, absorbed and escaped mass sum to 1", d.total() == Q::from_integer(1.into())))
                .with_table(table))
        }
        WalkCommand::Hitdist(a) => {
            let fam = family_of(&a.source)?;
            let g = loaded_for(&fam, &[&a.x, &a.y], a.nmax)?;
            let (x, y) = (vertex(&fam, &g, &a.x)?, vertex(&fam, &g, &a.y)?);
            let h = hitting_time_distribution(&g, x, y, a.nmax, policy(&a.policy)?)?;
            let mut table = Table::new(["n", "probability"]);
            for (n, p) in h.iter().enumerate() {
                table.push([n.to_string(), fmt_q(p)]);
            }
            let total: Q = h.iter().sum();
            let result = json!({
                "x": g.id(x), "y": g.id(y), "nmax": a.nmax,
                "distribution": h.iter().map(fmt_q).collect::<Vec<_>>(),
                "total": fmt_q(&total),
            });
            Ok(report("walk hitdist", config, &result)?
                .claim(Claim::exact(format!("P_x[T_y ≤ {}] = {}", a.nmax, fmt_q(&total)), true))
                .with_table(table))
        }
        WalkCommand::Race(a) => race_cmd(a, config),
        WalkCommand::Symcheck(a) => {
            if a.asymmetry {
                let rep = asymmetry_certificate(a.depth, a.nmax)?;
                let out = report("walk symcheck", config, &rep)?.claim(Claim::interval(
                    format!("Σ_(n≤{}) P_x[T_y=n] exceeds the upper bound of P_y[T_x<∞]", a.nmax),
                    Some(rep.certified),
                ));
                return Ok(if rep.certified { out } else { out.inconclusive(a.depth) });
            }
            let fam = family_of(&a.source)?;
            let (g, pts) = match &fam {
                GraphFamily::Fixed(g) => (g.clone(), (0..g.len()).collect::<Vec<_>>()),
                _ => {
                    let g = fam.ball(a.pairs_radius + a.nmax + 1)?;
                    let pts = within(&g, a.pairs_radius);
                    (g, pts)
                }
            };
            let rep = hitting_symmetry(&g, &all_pairs(&pts), a.nmax, FrontierPolicy::Error)?;
            Ok(report("walk symcheck", config, &rep)?
                .claim(Claim::exact(format!("P_x[T_y=n] = P_y[T_x=n] for all pairs and n ≤ {}", a.nmax), rep.all_equal)))
        }
        WalkCommand::Offdiag(a) => {
            let fam = family_of(&a.source)?;
            let rep = check_offdiag(&fam, a.radius, a.nmax)?;
            Ok(report("walk offdiag", config, &rep)?
                .claim(Claim::exact(format!("P_x[X_n=y] ≤ P_e[X_n=e] on B({}), even n ≤ {}", a.radius, a.nmax), rep.all_hold)))
        }
        WalkCommand::Taboo(a) => {
            let fam = family_of(&a.source)?;
            let g = loaded_for(&fam, &[&a.x, &a.y], a.nmax)?;
            let rep = taboo_loop_symmetry(&g, vertex(&fam, &g, &a.x)?, vertex(&fam, &g, &a.y)?, a.nmax)?;
            Ok(report("walk taboo", config, &rep)?
                .claim(Claim::exact("u_r(x; y) = u_r(y; x) for all r", rep.u_symmetric))
                .claim(Claim::exact("v_r(x, y) = v_r(y, x) for all r", rep.v_symmetric)))
        }
        WalkCommand::Transience(a) => {
            let fam = family_of(&a.source)?;
            let rep = transience_partial_sums(&fam, a.n, a.dmax)?;
            let mut table = Table::new(["n", "return_probability", "partial_sum"]);
            for (n, (p, s)) in rep.return_probabilities.iter().zip(&rep.partial_sums).enumerate() {
                table.push([n.to_string(), fmt_q(p), fmt_q(s)]);
            }
            Ok(report("walk transience", config, &rep)?
                .claim(Claim::exact("P_e[T_y ≤ N] ≤ 2 Σ even return probabilities from d(e,y)-1", rep.all_bounds_hold))
                .with_table(table))
        }
        WalkCommand::Hitsfirst(a) => {
            let fam = family_of(&a.source)?;
            let (x, y) = (canonical(&fam, &a.x)?, canonical(&fam, &a.y)?);
            let rep = hits_first_relation(&fam, &x, &y, a.depth, a.sweeps)?;
            let ok = rep.identity_x.consistent && rep.identity_y.consistent;
            Ok(report("walk hitsfirst", config, &rep)?
                .claim(Claim::interval("first-hit decompositions are consistent with the computed enclosures", Some(ok))))
        }
        WalkCommand::Critscan(a) => {
            let fam = family_of(&a.source)?;
            let (x, y) = (canonical(&fam, &a.x)?, canonical(&fam, &a.y)?);
            let rep = crit_radius_scan(&fam, &x, &y, &numbers(&a.radii)?, a.depth, a.sweeps)?;
            let mut table = Table::new(["radius", "vertices", "min", "max", "spread", "certified_gap"]);
            for r in &rep.rows {
                let p = |s: &Option<harmlab::walks::CritSample>| s.as_ref().and_then(|s| s.point).map_or(String::new(), |v| v.to_string());
                table.push([
                    r.radius.to_string(),
                    r.vertices.to_string(),
                    p(&r.min),
                    p(&r.max),
                    r.spread.map_or(String::new(), |v| v.to_string()),
                    r.certified_gap.clone().unwrap_or_default(),
                ]);
            }
            Ok(report("walk critscan", config, &rep)?
                .claim(Claim::interval("per-vertex enclosures of the conditioned race probability", None))
                .with_table(table))
        }
    }
}

fn race_cmd(a: &RaceArgs, config: Value) -> Outcome {
    let fam = family_of(&a.source)?;
    if let Some(m) = a.level {
        let GraphFamily::Cayley { group, mu } = &fam else {
            return Err(Failure::Usage("level races need --group".into()));
        };
        let radii: Vec<i64> = numbers(a.radii.as_deref().ok_or_else(|| Failure::Usage("--level needs --R".into()))?)?;
        let start = group.parse_element(&a.start)?;
        let rep = exit_estimate(group, mu, &start, m, &radii, a.cap)?;
        let mut table = Table::new(["R", "exact", "linear", "scaled_error", "within_bound"]);
        for r in &rep.rows {
            table.push([r.r.to_string(), fmt_q(&r.exact), fmt_q(&r.linear), r.scaled_error.to_string(), r.within_bound.to_string()]);
        }
        return Ok(report("walk race", config, &rep)?
            .claim(Claim::exact(
                format!("|h - (ζ-m)/(R+M)| ≤ {}/(R+M) on every row", fmt_q(&rep.proof_constant)),
                rep.all_within_bound,
            ))
            .with_table(table));
    }
    let (sa, sb) = match (&a.a, &a.b) {
        (Some(x), Some(y)) => (x, y),
        _ => return Err(Failure::Usage("give --a and --b, or --level and --R".into())),
    };
    let g = match &fam {
        GraphFamily::Fixed(g) => g.clone(),
        _ => fam.ball(a.radius)?,
    };
    let (sa_set, sb_set) = (vertex_set(&fam, &g, sa)?, vertex_set(&fam, &g, sb)?);
    let start = vertex(&fam, &g, &a.start)?;
    let p = race(&g, &sa_set, &sb_set, start)?;
    let result = json!({ "start": g.id(start), "probability": fmt_q(&p), "approx": to_f64(&p) });
    Ok(report("walk race", config, &result)?.claim(Claim::exact(format!("P[T_A < T_B] = {}", fmt_q(&p)), true)))
}

// ---------------------------------------------------------------------------
// Lamplighter
// ---------------------------------------------------------------------------

fn lamp(s: &str) -> std::result::Result<Element, Failure> {
    Ok(GroupModel::lamplighter().parse_element(s)?)
}

fn ll(l: &LlCommand, globals: &Globals, config: Value) -> Outcome {
    let group = GroupModel::lamplighter();
    match l {
        LlCommand::H(a) => {
            let g = lamp(&a.g)?;
            let mut table = Table::new(["R", "g", "value", "half_width"]);
            match a.method {
                Method::Exact => {
                    let h = lamplighter_h_exact(&g, a.r, R_EXACT_MAX)?;
                    table.push([a.r.to_string(), group.format(&g), fmt_q(&h), String::new()]);
                    let result = json!({ "R": a.r, "g": group.format(&g), "method": "exact", "value": fmt_q(&h), "approx": to_f64(&h) });
                    Ok(report("ll h", config, &result)?
                        .claim(Claim::exact(format!("h_R(g) = {}", fmt_q(&h)), true))
                        .with_table(table))
                }
                Method::Mc => {
                    let cfg = globals.mc(a.samples)?;
                    let e = lamplighter_h_mc(&g, a.r, &cfg)?;
                    table.push([a.r.to_string(), group.format(&g), e.mean.to_string(), e.half_width.to_string()]);
                    let result = json!({ "R": a.r, "g": group.format(&g), "method": "mc", "estimate": e });
                    Ok(report("ll h", config, &result)?
                        .claim(Claim::statistical("h_R(g) lies in mean ± half_width at 99% confidence", None))
                        .with_table(table))
                }
            }
        }
        LlCommand::Props(a) => {
            let radii: Vec<i64> = numbers(&a.radii)?;
            let samples = match &a.elements {
                Some(s) => list(s).iter().map(|x| lamp(x)).collect::<std::result::Result<Vec<_>, _>>()?,
                None => default_samples(),
            };
            let rep = hr_property_check(&radii, &samples, R_EXACT_MAX)?;
            let mut table = Table::new(["bound", "R", "element", "h", "scaled"]);
            for (name, b) in [("linear_upper", &rep.linear_upper), ("off_coset_upper", &rep.off_coset_upper), ("linear_lower", &rep.linear_lower)] {
                for r in &b.rows {
                    table.push([name.to_string(), r.r.to_string(), r.element.clone(), r.h.clone(), r.scaled.to_string()]);
                }
            }
            let sep = rep.separation.iter().all(|s| s.separates);
            Ok(report("ll props", config, &rep)?
                .claim(Claim::exact("Δh_R = 0 at every interior sample", rep.harmonic_residual_zero))
                .claim(Claim::exact("h_R > 0 at interior samples with no lamp at or below -R", rep.positive))
                .claim(Claim::exact("upper constant for R·h_R/max(|ζ|,1) is positive and finite", rep.linear_upper.sign_ok))
                .claim(Claim::exact("upper constant for R·h_R off the U_0 coset is positive and finite", rep.off_coset_upper.sign_ok))
                .claim(Claim::exact("lower constant for R·h_R/ζ at (⌊R/2⌋, ∅) is positive", rep.linear_lower.sign_ok))
                .claim(Claim::exact("R·h_R separates the identity from (0,{-1}) at every R", sep))
                .with_table(table))
        }
        LlCommand::Limit(a) => {
            let elements = list(&a.g).iter().map(|x| lamp(x)).collect::<std::result::Result<Vec<_>, _>>()?;
            let radii: Vec<i64> = numbers(&a.radii)?;
            let cfg = match a.method {
                Method::Exact => None,
                Method::Mc => Some(globals.mc(a.samples)?),
            };
            let rep = pointwise_limit_probe(&elements, &radii, cfg.as_ref(), R_EXACT_MAX)?;
            let mut table = Table::new(["element", "R", "value", "half_width", "difference"]);
            for row in &rep.rows {
                for c in &row.cells {
                    table.push([
                        row.element.clone(),
                        c.r.to_string(),
                        c.value.clone(),
                        c.half_width.map_or(String::new(), |v| v.to_string()),
                        c.difference.map_or(String::new(), |v| v.to_string()),
                    ]);
                }
            }
            let claim = match a.method {
                Method::Exact => Claim::exact("R·h_R separates the identity from (0,{-1}) at every R", rep.separates_identity_from_lamp),
                Method::Mc => Claim::statistical(
                    "R·h_R separates the identity from (0,{-1}) at every R (disjoint 99% intervals)",
                    Some(rep.separates_identity_from_lamp),
                ),
            };
            Ok(report("ll limit", config, &rep)?.claim(claim).with_table(table))
        }
        LlCommand::Decay(a) => {
            let cfg = globals.mc(a.samples)?;
            let rep = coset_escape_decay_probe(&numbers(&a.n)?, a.r, &cfg)?;
            let mut table = Table::new(["n", "hits", "successes", "estimate", "half_width", "flag"]);
            for r in &rep.rows {
                table.push([
                    r.n.to_string(),
                    r.hits.to_string(),
                    r.successes.to_string(),
                    r.estimate.map_or(String::new(), |v| v.to_string()),
                    r.half_width.map_or(String::new(), |v| v.to_string()),
                    r.flag.clone(),
                ]);
            }
            let insufficient = rep.rows.iter().any(|r| r.flag == "insufficient");
            let out = report("ll decay", config, &rep)?
                .claim(Claim::statistical("conditioned escape probabilities with 99% intervals; no decay rate is claimed", None))
                .with_table(table);
            Ok(if insufficient { out.inconclusive(a.r as usize) } else { out })
        }
    }
}

fn linharm(a: &LinharmArgs, config: Value) -> Outcome {
    let (group, mu) = group_of(&a.source)?;
    let f = build_linear_harmonic(&group, &mu, a.coordinate, a.verify_radius)?;
    let mut table = Table::new(["transversal", "phi"]);
    for (t, v) in &f.phi {
        table.push([t, v]);
    }
    Ok(report("linharm", config, &f)?
        .claim(Claim::exact(format!("Δf = 0 on all {} vertices of B({})", f.verified_vertices, f.verified_radius), true))
        .with_table(table))
}
