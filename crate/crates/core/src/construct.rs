//! Explicit harmonic functions: linear-growth harmonics `ζ_i + φ_i∘τ` on
//! virtually abelian groups, and the lamplighter functions
//! `h_R(g) = P_g[T⁺_R < T⁻_{-R} and no lamp lit below 0 at T⁺_R]`.
//!
//! `h_R` is computed exactly through a parity expansion over the lamps the
//! walker can still toggle, or estimated by Monte Carlo with counter-based
//! streams so that results do not depend on the worker count.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::Rationals;
use crate::groups::{cayley_ball, Element, Family, GroupModel, SymmetricMeasure};
use crate::linalg::{solve, SparseMatrix};
use crate::rational::{fmt_q, to_f64, Q};

// ---------------------------------------------------------------------------
// Linear harmonic functions
// ---------------------------------------------------------------------------

/// `f(g) = coordinate(g) + φ(τ(g))`, harmonic for the given measure.
#[derive(Clone, Debug, Serialize)]
pub struct LinearHarmonic {
    pub group: String,
    pub coordinate: usize,
    /// `φ` on the transversal, keyed by the formatted element.
    pub phi: BTreeMap<String, String>,
    /// Radius of the ball on which `Δf = 0` was checked exactly.
    pub verified_radius: usize,
    pub verified_vertices: usize,
    #[serde(skip)]
    table: HashMap<Element, Q>,
}

impl LinearHarmonic {
    pub fn phi_value(&self, t: &Element) -> Option<&Q> {
        self.table.get(t)
    }

    /// `max φ - min φ`.
    pub fn phi_spread(&self) -> Q {
        let max = self.table.values().max().cloned().unwrap_or_else(Q::zero);
        let min = self.table.values().min().cloned().unwrap_or_else(Q::zero);
        max - min
    }

    pub fn eval(&self, group: &GroupModel, g: &Element) -> Result<Q> {
        let (_, _, t) = group.decompose_knt(g)?;
        let phi = self.table.get(&t).ok_or_else(|| Error::Invariant("transversal element without φ".into()))?;
        Ok(Q::from_integer(coordinate(group, g, self.coordinate)?.into()) + phi)
    }
}

fn coordinate(group: &GroupModel, g: &Element, i: usize) -> Result<i64> {
    match (group.family(), g) {
        (Family::FreeAbelian { d }, Element::Abelian(v)) if i < *d => Ok(v[i]),
        (Family::FreeAbelian { d }, _) => Err(Error::Precondition(format!("coordinate {i} out of range for Z^{d}"))),
        (Family::VirtuallyCyclic(_), _) if i == 0 => group.zeta(g),
        (Family::VirtuallyCyclic(_), _) => Err(Error::Precondition("virtually cyclic groups have one coordinate".into())),
        _ => Err(Error::Unsupported(format!("{} is not a virtually abelian model with a Z^d coordinate", group.name()))),
    }
}

/// Solves the `|T|` harmonicity equations at the transversal for `φ`
/// (normalized by `φ(e) = 0`) and verifies `Δf = 0` on the ball of radius
/// `verify_radius`. Translating `g` by the lattice shifts both sides of the
/// equation at `g` by the same amount, so the equations at `T` suffice.
pub fn build_linear_harmonic(
    group: &GroupModel,
    mu: &SymmetricMeasure,
    i: usize,
    verify_radius: usize,
) -> Result<LinearHarmonic> {
    if !matches!(group.family(), Family::FreeAbelian { .. } | Family::VirtuallyCyclic(_)) {
        return Err(Error::Unsupported(format!("linear harmonics are built for free abelian and virtually cyclic groups, not {}", group.name())));
    }
    let ts = group.transversal()?;
    let index: HashMap<Element, usize> = ts.iter().cloned().enumerate().map(|(k, t)| (t, k)).collect();
    let mut m = SparseMatrix::new(ts.len());
    let mut rhs = Vec::new();
    for (k, t) in ts.iter().enumerate() {
        let mut row: BTreeMap<usize, Q> = BTreeMap::from([(k, Q::one())]);
        let mut b = Q::zero();
        for (s, w) in mu.support() {
            let ts_ = group.mul(t, s);
            let (_, _, tau) = group.decompose_knt(&ts_)?;
            let j = index[&tau];
            *row.entry(j).or_insert_with(Q::zero) -= w;
            b += w * Q::from_integer(coordinate(group, &ts_, i)?.into());
        }
        m.push_row(row.into_iter().filter(|(_, v)| !v.is_zero()).collect());
        rhs.push(b);
    }
    m.push_row(vec![(0, Q::one())]);
    rhs.push(Q::zero());
    let sol = solve(&Rationals, &m, &rhs)
        .ok_or_else(|| Error::Construction("the harmonicity equations for φ are inconsistent".into()))?;
    let table: HashMap<Element, Q> = ts.iter().cloned().zip(sol.particular).collect();
    let mut out = LinearHarmonic {
        group: group.name().to_string(),
        coordinate: i,
        phi: ts.iter().map(|t| (group.format(t), fmt_q(&table[t]))).collect(),
        verified_radius: verify_radius,
        verified_vertices: 0,
        table,
    };
    let ball = cayley_ball(group, mu, verify_radius)?;
    for g in &ball.elements {
        let mut avg = Q::zero();
        for (s, w) in mu.support() {
            avg += w * out.eval(group, &group.mul(g, s))?;
        }
        if avg != out.eval(group, g)? {
            return Err(Error::Construction(format!("f is not harmonic at {}", group.format(g))));
        }
    }
    out.verified_vertices = ball.elements.len();
    Ok(out)
}

// ---------------------------------------------------------------------------
// Lamplighter h_R: exact
// ---------------------------------------------------------------------------

/// Largest `R` accepted by the exact method unless overridden.
pub const R_EXACT_MAX: i64 = 12;

fn lamp_parts(g: &Element) -> Result<(i64, &[i64])> {
    match g {
        Element::Lamp { m, lamps } => Ok((*m, lamps)),
        _ => Err(Error::Precondition("expected a lamplighter element".into())),
    }
}

fn check_domain(m: i64, r: i64) -> Result<()> {
    if r < 1 {
        return Err(Error::Precondition("R must be at least 1".into()));
    }
    if m.abs() > r {
        return Err(Error::Precondition(format!("ζ(g) = {m} lies outside [-{r}, {r}]")));
    }
    Ok(())
}

/// `h_R(g)` for the standard lamplighter walk (uniform on `t, t⁻¹, s`).
///
/// Only lamps in `W = [-R+1, -1]` can still change before the walk stops;
/// a lit lamp at or below `-R` forces the value 0. Writing the indicator
/// "all lamps of `W` off" as `2^-|W| Σ_S (-1)^{|S ∩ lit|}` turns `h_R` into
/// a signed sum of one-dimensional problems `u_S`, where each toggle at a
/// position of `S` flips the sign. `u_S` solves
/// `(1 - σ_S(m)/3) u(m) = (u(m+1) + u(m-1))/3` with `u(-R) = 0`, `u(R) = 1`,
/// which is integer shooting from `-R`.
pub fn lamplighter_h_exact(g: &Element, r: i64, r_max: i64) -> Result<Q> {
    let (m0, lamps) = lamp_parts(g)?;
    check_domain(m0, r)?;
    if r > r_max {
        return Err(Error::Precondition(format!("R = {r} exceeds the exact limit {r_max}; use the Monte Carlo method")));
    }
    if m0 == -r || lamps.iter().any(|&l| l <= -r) {
        return Ok(Q::zero());
    }
    if m0 == r {
        return Ok(if lamps.iter().any(|&l| l < 0) { Q::zero() } else { Q::one() });
    }
    let w = (r - 1) as usize; // W = {-R+1, ..., -1}, bit j ↔ position j - R + 1
    let lit: u64 = lamps.iter().filter(|&&l| l < 0).fold(0, |acc, &l| acc | 1 << (l + r - 1));
    let mut total = Q::zero();
    for s in 0u64..(1 << w) {
        let (a_m0, a_r) = shoot(s, m0, r);
        let term = Q::new(a_m0, a_r);
        if (s & lit).count_ones().is_multiple_of(2) {
            total += term;
        } else {
            total -= term;
        }
    }
    Ok(total / Q::from_integer(BigInt::one() << w))
}

/// `(a(m0), a(R))` for the shooting solution `a(-R) = 0`, `a(-R+1) = 1`.
fn shoot(s: u64, m0: i64, r: i64) -> (BigInt, BigInt) {
    let mut prev = BigInt::zero();
    let mut cur = BigInt::one();
    let mut at_m0 = if m0 == -r + 1 { Some(cur.clone()) } else { None };
    for m in (-r + 1)..r {
        let sigma_neg = m < 0 && (s >> (m + r - 1)) & 1 == 1;
        let c = if sigma_neg { 4 } else { 2 };
        let next = &cur * c - &prev;
        prev = cur;
        cur = next;
        if m + 1 == m0 {
            at_m0 = Some(cur.clone());
        }
    }
    (at_m0.expect("m0 lies in (-R, R)"), cur)
}

/// `h_R(g) - Σ_s μ(s) h_R(gs)` for the standard measure.
pub fn lamplighter_harmonic_residual(g: &Element, r: i64, r_max: i64) -> Result<Q> {
    let group = GroupModel::lamplighter();
    let mu = SymmetricMeasure::standard(&group)?;
    let mut avg = Q::zero();
    for (s, w) in mu.support() {
        avg += w * lamplighter_h_exact(&group.mul(g, s), r, r_max)?;
    }
    Ok(lamplighter_h_exact(g, r, r_max)? - avg)
}

// ---------------------------------------------------------------------------
// Lamplighter h_R: Monte Carlo
// ---------------------------------------------------------------------------

/// 99% two-sided normal quantile.
pub const Z99: f64 = 2.576;

/// Samples per random stream; fixed so that estimates do not depend on how
/// chunks are distributed over workers.
pub const CHUNK: u64 = 1 << 14;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct McConfig {
    pub samples: u64,
    pub seed: u64,
    /// Worker count; results do not depend on it, so it is not reported.
    #[serde(skip)]
    pub threads: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct McEstimate {
    pub samples: u64,
    pub seed: u64,
    pub hits: u64,
    pub mean: f64,
    /// Half-width of the 99% normal confidence interval.
    pub half_width: f64,
}

impl McEstimate {
    fn new(samples: u64, seed: u64, hits: u64) -> Self {
        let p = hits as f64 / samples as f64;
        let half_width = Z99 * (p * (1.0 - p) / samples as f64).sqrt();
        McEstimate { samples, seed, hits, mean: p, half_width }
    }

    pub fn covers(&self, v: f64) -> bool {
        (self.mean - v).abs() <= self.half_width
    }
}

/// Walker state restricted to what decides the outcome.
#[derive(Clone, Copy)]
struct Walker {
    m: i64,
    mask: u64,
    dead: bool,
}

impl Walker {
    fn new(g: &Element, r: i64) -> Result<Self> {
        let (m, lamps) = lamp_parts(g)?;
        check_domain(m, r)?;
        if r > 64 {
            return Err(Error::Precondition("Monte Carlo supports R ≤ 64".into()));
        }
        let mut mask = 0u64;
        let mut dead = false;
        for &l in lamps {
            if l <= -r {
                dead = true;
            } else if l < 0 {
                mask |= 1 << (l + r - 1);
            }
        }
        Ok(Walker { m, mask, dead })
    }

    /// Runs to `±R`; returns `(reached R with no negative lamp lit, min ζ)`.
    fn run<G: Rng>(mut self, r: i64, rng: &mut G) -> (bool, bool, i64) {
        let mut min = self.m;
        while self.m > -r && self.m < r {
            match rng.random_range(0..3u32) {
                0 => self.m += 1,
                1 => {
                    self.m -= 1;
                    min = min.min(self.m);
                }
                _ => {
                    if self.m < 0 {
                        self.mask ^= 1 << (self.m + r - 1);
                    }
                }
            }
        }
        let reached = self.m >= r;
        (reached, reached && self.mask == 0 && !self.dead, min)
    }
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Precondition(format!("cannot start worker pool: {e}")))
}

/// Runs `f(stream, count)` on every chunk and returns the results in chunk
/// order. Chunk `c` uses stream `c` of the seeded generator.
fn chunked<T: Send, F>(cfg: &McConfig, f: F) -> Result<Vec<T>>
where
    F: Fn(&mut ChaCha8Rng, u64) -> T + Sync,
{
    if cfg.samples == 0 {
        return Err(Error::Precondition("at least one sample is required".into()));
    }
    let chunks = cfg.samples.div_ceil(CHUNK);
    pool(cfg.threads)?.install(|| {
        Ok((0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(c);
                let n = CHUNK.min(cfg.samples - c * CHUNK);
                f(&mut rng, n)
            })
            .collect())
    })
}

/// Unbiased Monte Carlo estimate of `h_R(g)`.
pub fn lamplighter_h_mc(g: &Element, r: i64, cfg: &McConfig) -> Result<McEstimate> {
    let start = Walker::new(g, r)?;
    let hits: u64 = chunked(cfg, |rng, n| (0..n).filter(|_| start.run(r, rng).1).count() as u64)?.into_iter().sum();
    Ok(McEstimate::new(cfg.samples, cfg.seed, hits))
}

// ---------------------------------------------------------------------------
// Property checks and probes
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct FitRow {
    pub r: i64,
    pub element: String,
    pub h: String,
    pub scaled: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FittedBound {
    /// What is bounded, e.g. `R·h_R(g)/max(|ζ(g)|,1) ≤ C`.
    pub statement: String,
    pub rows: Vec<FitRow>,
    /// Smallest upper constant (or largest lower constant) fitting all rows.
    pub constant: f64,
    /// The constant has the sign the inequality needs (positive and finite).
    pub sign_ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Separation {
    pub r: i64,
    pub identity: String,
    pub lamp_at_minus_one: String,
    pub separates: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct PropsReport {
    pub radii: Vec<i64>,
    /// Interior states at which `Δh_R = 0` was checked exactly.
    pub harmonic_states: usize,
    pub harmonic_residual_zero: bool,
    /// `h_R > 0` at every interior sample with no lamp lit at or below `-R`.
    pub positive: bool,
    pub linear_upper: FittedBound,
    pub off_coset_upper: FittedBound,
    pub linear_lower: FittedBound,
    pub separation: Vec<Separation>,
}

fn fit_row(r: i64, g: &Element, h: &Q, scale: f64) -> FitRow {
    let group = GroupModel::lamplighter();
    FitRow { r, element: group.format(g), h: fmt_q(h), scaled: r as f64 * to_f64(h) / scale }
}

/// A fixed spread of lamplighter elements: on and off the `U_0` coset, at
/// positive, zero and negative levels.
pub fn default_samples() -> Vec<Element> {
    vec![
        Element::lamp(0, &[]),
        Element::lamp(1, &[]),
        Element::lamp(2, &[]),
        Element::lamp(-1, &[]),
        Element::lamp(0, &[1]),
        Element::lamp(3, &[0, 2]),
        Element::lamp(0, &[-1]),
        Element::lamp(1, &[-1]),
        Element::lamp(2, &[-2, 1]),
        Element::lamp(-2, &[-1, 0]),
    ]
}

/// Exact checks of positivity, harmonicity and the three growth bounds of
/// `h_R` across `radii`, at the given sample elements.
///
/// * upper bound `R·h_R(g) ≤ C·max(|ζ(g)|, 1)` over all samples with `ζ > 0`
///   or `ζ = 0`;
/// * `R·h_R(g) ≤ C` for samples with a lamp lit below 0;
/// * `R·h_R((⌊R/2⌋, ∅)) ≥ c·⌊R/2⌋`.
pub fn hr_property_check(radii: &[i64], samples: &[Element], r_max: i64) -> Result<PropsReport> {
    if radii.is_empty() {
        return Err(Error::Precondition("at least one R is required".into()));
    }
    let group = GroupModel::lamplighter();
    let mut harmonic_states = 0;
    let mut harmonic_residual_zero = true;
    let mut positive = true;
    let (mut upper, mut off, mut lower) = (Vec::new(), Vec::new(), Vec::new());
    let mut separation = Vec::new();
    for &r in radii {
        for g in samples {
            let (m, lamps) = lamp_parts(g)?;
            if m.abs() >= r {
                continue;
            }
            harmonic_states += 1;
            harmonic_residual_zero &= lamplighter_harmonic_residual(g, r, r_max)?.is_zero();
            let h = lamplighter_h_exact(g, r, r_max)?;
            if !lamps.iter().any(|&l| l <= -r) {
                positive &= h.is_positive();
            }
            if lamps.iter().any(|&l| l < 0) {
                off.push(fit_row(r, g, &h, 1.0));
            } else if m >= 0 {
                upper.push(fit_row(r, g, &h, m.max(1) as f64));
            }
        }
        let half = r / 2;
        let g = Element::lamp(half, &[]);
        if half > 0 {
            let h = lamplighter_h_exact(&g, r, r_max)?;
            lower.push(fit_row(r, &g, &h, half as f64));
        }
        let a = lamplighter_h_exact(&group.identity(), r, r_max)?;
        let b = lamplighter_h_exact(&Element::lamp(0, &[-1]), r, r_max)?;
        let rq = Q::from_integer(r.into());
        separation.push(Separation { r, identity: fmt_q(&(&rq * &a)), lamp_at_minus_one: fmt_q(&(&rq * &b)), separates: a != b });
    }
    let bound = |statement: &str, rows: Vec<FitRow>, upper: bool| {
        let vals = rows.iter().map(|r| r.scaled);
        let constant = if upper { vals.fold(0.0, f64::max) } else { vals.fold(f64::INFINITY, f64::min) };
        let sign_ok = !rows.is_empty() && constant.is_finite() && constant > 0.0;
        FittedBound { statement: statement.into(), rows, constant, sign_ok }
    };
    Ok(PropsReport {
        radii: radii.to_vec(),
        harmonic_states,
        harmonic_residual_zero,
        positive,
        linear_upper: bound("R·h_R(g)/max(|ζ(g)|,1) ≤ C for samples with no lamp below 0", upper, true),
        off_coset_upper: bound("R·h_R(g) ≤ C for samples with a lamp lit below 0", off, true),
        linear_lower: bound("R·h_R(g)/ζ(g) ≥ c for g = (⌊R/2⌋, ∅)", lower, false),
        separation,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LimitCell {
    pub r: i64,
    /// `R·h_R(g)`: an exact rational, or a Monte Carlo mean.
    pub value: String,
    pub half_width: Option<f64>,
    /// Difference from the previous `R` (as a float).
    pub difference: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LimitRow {
    pub element: String,
    pub cells: Vec<LimitCell>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LimitReport {
    pub method: String,
    pub rows: Vec<LimitRow>,
    /// `R·h_R` separates the identity from `(0, {-1})` (same `ζ` and `τ`,
    /// different coset of `U_0`) at every tested `R`.
    pub separates_identity_from_lamp: bool,
    pub note: String,
}

/// Table of `R·h_R(g)` across `radii` with successive differences. No limit
/// is claimed.
pub fn pointwise_limit_probe(elements: &[Element], radii: &[i64], mc: Option<&McConfig>, r_max: i64) -> Result<LimitReport> {
    let group = GroupModel::lamplighter();
    let value = |g: &Element, r: i64| -> Result<(f64, String, Option<f64>)> {
        match mc {
            None => {
                let h = lamplighter_h_exact(g, r, r_max)? * Q::from_integer(r.into());
                Ok((to_f64(&h), fmt_q(&h), None))
            }
            Some(cfg) => {
                let e = lamplighter_h_mc(g, r, cfg)?;
                let v = e.mean * r as f64;
                Ok((v, format!("{v}"), Some(e.half_width * r as f64)))
            }
        }
    };
    let mut rows = Vec::new();
    for g in elements {
        let mut cells = Vec::new();
        let mut prev: Option<f64> = None;
        for &r in radii {
            let (v, text, hw) = value(g, r)?;
            cells.push(LimitCell { r, value: text, half_width: hw, difference: prev.map(|p| v - p) });
            prev = Some(v);
        }
        rows.push(LimitRow { element: group.format(g), cells });
    }
    let mut separates = true;
    for &r in radii {
        let (a, _, ha) = value(&group.identity(), r)?;
        let (b, _, hb) = value(&Element::lamp(0, &[-1]), r)?;
        separates &= (a - b).abs() > ha.unwrap_or(0.0) + hb.unwrap_or(0.0);
    }
    Ok(LimitReport {
        method: if mc.is_some() { "monte-carlo".into() } else { "exact".into() },
        rows,
        separates_identity_from_lamp: separates,
        note: "successive differences only; no limit is claimed".into(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayRow {
    pub n: i64,
    pub hits: u64,
    pub successes: u64,
    pub estimate: Option<f64>,
    pub half_width: Option<f64>,
    /// `ok`, `insufficient` (fewer than 100 conditioning hits) or `empty`
    /// (the conditioning event cannot occur).
    pub flag: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayReport {
    pub r: i64,
    pub samples: u64,
    pub seed: u64,
    pub rows: Vec<DecayRow>,
    /// Least-squares slope of `ln(estimate)` against `n`.
    pub slope: Option<f64>,
    pub slope_half_width: Option<f64>,
    /// `exp(slope)`: the empirical per-level decay factor.
    pub alpha: Option<f64>,
    pub note: String,
}

/// Minimum number of conditioning hits for an estimate.
pub const MIN_HITS: u64 = 100;

/// Estimates `P_e[κ(X_{T⁺_R}) ∈ U_0 | M_R = -n]` where `M_R` is the lowest
/// level visited before `T⁺_R`, for each `n` in `n_list`. Walks that reach
/// `-R` first are discarded, so `n ≥ R` is flagged empty.
pub fn coset_escape_decay_probe(n_list: &[i64], r: i64, cfg: &McConfig) -> Result<DecayReport> {
    let start = Walker::new(&Element::lamp(0, &[]), r)?;
    let width = r as usize;
    let merged = chunked(cfg, |rng, n| {
        let mut hits = vec![0u64; width];
        let mut succ = vec![0u64; width];
        for _ in 0..n {
            let (reached, ok, min) = start.run(r, rng);
            if reached {
                let k = (-min) as usize;
                hits[k] += 1;
                succ[k] += ok as u64;
            }
        }
        (hits, succ)
    })?
    .into_iter()
    .fold((vec![0u64; width], vec![0u64; width]), |(mut h, mut s), (a, b)| {
        for k in 0..width {
            h[k] += a[k];
            s[k] += b[k];
        }
        (h, s)
    });
    let mut rows = Vec::new();
    for &n in n_list {
        if n < 0 || n >= r {
            rows.push(DecayRow { n, hits: 0, successes: 0, estimate: None, half_width: None, flag: "empty".into() });
            continue;
        }
        let (h, s) = (merged.0[n as usize], merged.1[n as usize]);
        if h < MIN_HITS {
            rows.push(DecayRow { n, hits: h, successes: s, estimate: None, half_width: None, flag: "insufficient".into() });
            continue;
        }
        let e = McEstimate::new(h, cfg.seed, s);
        rows.push(DecayRow { n, hits: h, successes: s, estimate: Some(e.mean), half_width: Some(e.half_width), flag: "ok".into() });
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.estimate.filter(|&e| e > 0.0).map(|e| (r.n as f64, e.ln())))
        .collect();
    let (slope, slope_half_width) = log_linear_fit(&pts);
    Ok(DecayReport {
        r,
        samples: cfg.samples,
        seed: cfg.seed,
        rows,
        slope,
        slope_half_width,
        alpha: slope.map(f64::exp),
        note: "empirical decay factor; no constant of the underlying estimate is identified".into(),
    })
}

/// Ordinary least squares slope and its 99% half-width (needs 3 points for
/// the half-width).
fn log_linear_fit(pts: &[(f64, f64)]) -> (Option<f64>, Option<f64>) {
    if pts.len() < 2 {
        return (None, None);
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return (None, None);
    }
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx;
    let hw = (pts.len() >= 3).then(|| {
        let ssr: f64 = pts.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum();
        Z99 * (ssr / (k - 2.0) / sxx).sqrt()
    });
    (Some(slope), hw)
}
