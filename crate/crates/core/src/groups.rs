//! Concrete finitely generated groups with normal forms, symmetric measures,
//! the `g = κ(g)ζ(g)τ(g)` decomposition and Cayley balls.
//!
//! Families:
//! * `FreeAbelian(d)`: integer vectors under addition.
//! * `FiniteCyclic(m)`: residues mod `m` (target of the mod-`m` quotient).
//! * `VirtuallyCyclic`: `Z ⋊ F` for a finite group `F` given by its
//!   multiplication table, a sign character `ε: F → {±1}` and a normalized
//!   integer cocycle `c`, with law `(n,t)(m,u) = (n + ε(t)m + c(t,u), tu)`.
//!   The elements `(0,t)` form the transversal `T`.
//! * `Lamplighter`: `(m, f)` with `f` a finite set of lit lamps and
//!   `(m,f)(m',f') = (m+m', f + m·f')`, where `m·f'` translates lamps by `m`.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::{GraphBuilder, WeightedGraph};
use crate::rational::{fmt_q, parse_q, Q};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Element {
    Abelian(Vec<i64>),
    Cyclic(i64),
    Vc { n: i64, t: usize },
    Lamp { m: i64, lamps: Vec<i64> },
}

impl Element {
    pub fn lamp(m: i64, lamps: &[i64]) -> Element {
        let mut set: BTreeSet<i64> = BTreeSet::new();
        for &l in lamps {
            if !set.insert(l) {
                set.remove(&l);
            }
        }
        Element::Lamp { m, lamps: set.into_iter().collect() }
    }
}

/// Presentation data of `Z ⋊ F`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VcPresentation {
    /// Names of the elements of `F`; index 0 is the identity.
    pub names: Vec<String>,
    pub table: Vec<Vec<usize>>,
    pub sign: Vec<i64>,
    pub cocycle: Vec<Vec<i64>>,
}

impl VcPresentation {
    pub fn order(&self) -> usize {
        self.names.len()
    }

    /// Checks that the data define a group: `F` is a group with identity 0,
    /// `ε` is a character, and `c` is a normalized cocycle, i.e.
    /// `ε(t)c(u,v) + c(t,uv) = c(t,u) + c(tu,v)`.
    pub fn validate(&self) -> Result<()> {
        let q = self.order();
        let bad = |m: String| Err(Error::Structural(format!("virtually cyclic presentation: {m}")));
        if q == 0 {
            return bad("empty transversal".into());
        }
        if self.table.len() != q || self.table.iter().any(|r| r.len() != q) {
            return bad("table must be |T| x |T|".into());
        }
        if self.sign.len() != q || self.cocycle.len() != q || self.cocycle.iter().any(|r| r.len() != q) {
            return bad("sign/cocycle dimensions do not match the table".into());
        }
        let mut names = BTreeSet::new();
        for n in &self.names {
            if !names.insert(n) {
                return bad(format!("duplicate transversal name {n:?}"));
            }
        }
        for t in 0..q {
            if self.table[0][t] != t || self.table[t][0] != t {
                return bad("index 0 must be the identity".into());
            }
            let row: BTreeSet<usize> = self.table[t].iter().copied().collect();
            if row.len() != q || row.iter().any(|&u| u >= q) {
                return bad(format!("row {t} of the table is not a permutation"));
            }
            if !(self.sign[t] == 1 || self.sign[t] == -1) {
                return bad("signs must be +1 or -1".into());
            }
            if self.cocycle[0][t] != 0 || self.cocycle[t][0] != 0 {
                return bad("cocycle must vanish when either argument is the identity".into());
            }
        }
        for t in 0..q {
            for u in 0..q {
                let tu = self.table[t][u];
                if self.sign[tu] != self.sign[t] * self.sign[u] {
                    return bad(format!("sign is not multiplicative at ({t},{u})"));
                }
                for v in 0..q {
                    if self.table[tu][v] != self.table[t][self.table[u][v]] {
                        return bad(format!("table not associative at ({t},{u},{v})"));
                    }
                    let uv = self.table[u][v];
                    let lhs = self.sign[t] * self.cocycle[u][v] + self.cocycle[t][uv];
                    let rhs = self.cocycle[t][u] + self.cocycle[tu][v];
                    if lhs != rhs {
                        return bad(format!("cocycle identity fails at ({t},{u},{v})"));
                    }
                }
            }
        }
        Ok(())
    }

    fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Family {
    FreeAbelian { d: usize },
    FiniteCyclic { m: i64 },
    VirtuallyCyclic(VcPresentation),
    Lamplighter,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupModel {
    name: String,
    family: Family,
    generators: Vec<(String, Element)>,
}

impl fmt::Display for GroupModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl GroupModel {
    pub fn free_abelian(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Precondition("free abelian rank must be positive".into()));
        }
        let generators = (0..d)
            .map(|i| {
                let mut v = vec![0; d];
                v[i] = 1;
                (format!("e{}", i + 1), Element::Abelian(v))
            })
            .collect();
        Ok(Self { name: format!("Z^{d}"), family: Family::FreeAbelian { d }, generators })
    }

    pub fn integers() -> Self {
        Self::free_abelian(1).expect("rank 1")
    }

    pub fn finite_cyclic(m: i64) -> Result<Self> {
        if m < 1 {
            return Err(Error::Precondition(format!("cyclic group order must be positive, got {m}")));
        }
        Ok(Self {
            name: format!("Z/{m}"),
            family: Family::FiniteCyclic { m },
            generators: vec![("e1".into(), Element::Cyclic(1 % m))],
        })
    }

    pub fn virtually_cyclic(name: &str, pres: VcPresentation, generators: Vec<(String, i64, String)>) -> Result<Self> {
        pres.validate()?;
        let mut gens = Vec::new();
        for (g, n, t) in generators {
            let ti = pres
                .index(&t)
                .ok_or_else(|| Error::Structural(format!("generator {g}: unknown transversal element {t:?}")))?;
            gens.push((g, Element::Vc { n, t: ti }));
        }
        Ok(Self { name: name.to_string(), family: Family::VirtuallyCyclic(pres), generators: gens })
    }

    /// The infinite dihedral group generated by two involutions `a`, `c`,
    /// presented as `Z ⋊ {e, a}` with `Z = <ac>`: `a = (0,a)`, `c = (-1,a)`.
    pub fn infinite_dihedral() -> Self {
        let pres = VcPresentation {
            names: vec!["e".into(), "a".into()],
            table: vec![vec![0, 1], vec![1, 0]],
            sign: vec![1, -1],
            cocycle: vec![vec![0, 0], vec![0, 0]],
        };
        Self::virtually_cyclic("D_inf", pres, vec![("a".into(), 0, "a".into()), ("c".into(), -1, "a".into())])
            .expect("dihedral presentation is valid")
    }

    /// Lamplighter with generators `t = (1,{})` and `s = (0,{0})`.
    pub fn lamplighter() -> Self {
        Self {
            name: "lamplighter".into(),
            family: Family::Lamplighter,
            generators: vec![("t".into(), Element::lamp(1, &[])), ("s".into(), Element::lamp(0, &[0]))],
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn generators(&self) -> &[(String, Element)] {
        &self.generators
    }

    pub fn is_infinite(&self) -> bool {
        !matches!(self.family, Family::FiniteCyclic { .. })
    }

    pub fn identity(&self) -> Element {
        match &self.family {
            Family::FreeAbelian { d } => Element::Abelian(vec![0; *d]),
            Family::FiniteCyclic { .. } => Element::Cyclic(0),
            Family::VirtuallyCyclic(_) => Element::Vc { n: 0, t: 0 },
            Family::Lamplighter => Element::Lamp { m: 0, lamps: vec![] },
        }
    }

    /// Checks that `g` is a normal form of this group.
    pub fn check(&self, g: &Element) -> Result<()> {
        let ok = match (&self.family, g) {
            (Family::FreeAbelian { d }, Element::Abelian(v)) => v.len() == *d,
            (Family::FiniteCyclic { m }, Element::Cyclic(r)) => (0..*m).contains(r),
            (Family::VirtuallyCyclic(p), Element::Vc { t, .. }) => *t < p.order(),
            (Family::Lamplighter, Element::Lamp { lamps, .. }) => lamps.windows(2).all(|w| w[0] < w[1]),
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Structural(format!("{g:?} is not an element of {}", self.name)))
        }
    }

    /// Group law with family checking.
    pub fn try_mul(&self, a: &Element, b: &Element) -> Result<Element> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.mul(a, b))
    }

    /// Group law on normal forms already known to belong to this group.
    pub fn mul(&self, a: &Element, b: &Element) -> Element {
        match (&self.family, a, b) {
            (Family::FreeAbelian { .. }, Element::Abelian(x), Element::Abelian(y)) => {
                Element::Abelian(x.iter().zip(y).map(|(p, q)| p + q).collect())
            }
            (Family::FiniteCyclic { m }, Element::Cyclic(x), Element::Cyclic(y)) => Element::Cyclic((x + y).rem_euclid(*m)),
            (Family::VirtuallyCyclic(p), Element::Vc { n, t }, Element::Vc { n: k, t: u }) => Element::Vc {
                n: n + p.sign[*t] * k + p.cocycle[*t][*u],
                t: p.table[*t][*u],
            },
            (Family::Lamplighter, Element::Lamp { m, lamps: f }, Element::Lamp { m: m2, lamps: f2 }) => {
                let mut out: BTreeSet<i64> = f.iter().copied().collect();
                for l in f2 {
                    let p = l + m;
                    if !out.insert(p) {
                        out.remove(&p);
                    }
                }
                Element::Lamp { m: m + m2, lamps: out.into_iter().collect() }
            }
            _ => panic!("mul: elements {a:?}, {b:?} do not belong to {}", self.name),
        }
    }

    pub fn inv(&self, a: &Element) -> Element {
        match (&self.family, a) {
            (Family::FreeAbelian { .. }, Element::Abelian(x)) => Element::Abelian(x.iter().map(|v| -v).collect()),
            (Family::FiniteCyclic { m }, Element::Cyclic(x)) => Element::Cyclic((-x).rem_euclid(*m)),
            (Family::VirtuallyCyclic(p), Element::Vc { n, t }) => {
                let u = (0..p.order()).find(|&u| p.table[*t][u] == 0).expect("table rows are permutations");
                Element::Vc { n: -p.sign[*t] * (n + p.cocycle[*t][u]), t: u }
            }
            (Family::Lamplighter, Element::Lamp { m, lamps }) => {
                Element::Lamp { m: -m, lamps: lamps.iter().map(|l| l - m).collect() }
            }
            _ => panic!("inv: element {a:?} does not belong to {}", self.name),
        }
    }

    pub fn pow(&self, a: &Element, k: i64) -> Element {
        let base = if k < 0 { self.inv(a) } else { a.clone() };
        let mut out = self.identity();
        for _ in 0..k.unsigned_abs() {
            out = self.mul(&out, &base);
        }
        out
    }

    pub fn format(&self, g: &Element) -> String {
        match (&self.family, g) {
            (_, Element::Abelian(v)) if v.len() == 1 => v[0].to_string(),
            (_, Element::Abelian(v)) => {
                format!("({})", v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","))
            }
            (_, Element::Cyclic(r)) => r.to_string(),
            (Family::VirtuallyCyclic(p), Element::Vc { n, t }) => format!("({n},{})", p.names[*t]),
            (_, Element::Vc { n, t }) => format!("({n},#{t})"),
            (_, Element::Lamp { m, lamps }) => format!(
                "({m},{{{}}})",
                lamps.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
            ),
        }
    }

    fn generator(&self, name: &str) -> Option<&Element> {
        self.generators.iter().find(|(n, _)| n == name).map(|(_, g)| g)
    }

    /// Parses a dot-separated word such as `a.c.a` or `t^-2.s.t^2`; `e` is
    /// the identity.
    pub fn parse_word(&self, word: &str) -> Result<Element> {
        let mut out = self.identity();
        let word = word.trim();
        if word.is_empty() {
            return Err(Error::Parse("empty word".into()));
        }
        for tok in word.split('.') {
            let tok = tok.trim();
            let (name, exp) = match tok.split_once('^') {
                Some((n, e)) => (n, e.parse::<i64>().map_err(|_| Error::Parse(format!("bad exponent in {tok:?}")))?),
                None => (tok, 1),
            };
            let g = if name == "e" {
                self.identity()
            } else {
                self.generator(name)
                    .cloned()
                    .ok_or_else(|| Error::Parse(format!("unknown generator {name:?} in word {word:?}")))?
            };
            out = self.mul(&out, &self.pow(&g, exp));
        }
        Ok(out)
    }

    /// Parses `identity`, a word, or a normal-form literal: an integer or
    /// `(a,b,...)` for free abelian groups, a residue for cyclic groups,
    /// `(n,tname)` for virtually cyclic groups, `(m,{l1,l2})` for the
    /// lamplighter.
    pub fn parse_element(&self, s: &str) -> Result<Element> {
        let s = s.trim();
        if s == "identity" || s == "e" {
            return Ok(self.identity());
        }
        let bad = || Error::Parse(format!("cannot parse {s:?} as an element of {}", self.name));
        let int = |x: &str| x.trim().parse::<i64>().map_err(|_| bad());
        match &self.family {
            Family::FreeAbelian { d } => {
                if let Ok(v) = s.parse::<i64>() {
                    if *d == 1 {
                        return Ok(Element::Abelian(vec![v]));
                    }
                }
                if let Some(inner) = s.strip_prefix('(').and_then(|x| x.strip_suffix(')')) {
                    let v = inner.split(',').map(int).collect::<Result<Vec<_>>>()?;
                    if v.len() != *d {
                        return Err(bad());
                    }
                    return Ok(Element::Abelian(v));
                }
            }
            Family::FiniteCyclic { m } => {
                if let Ok(v) = s.parse::<i64>() {
                    return Ok(Element::Cyclic(v.rem_euclid(*m)));
                }
            }
            Family::VirtuallyCyclic(p) => {
                if let Some(inner) = s.strip_prefix('(').and_then(|x| x.strip_suffix(')')) {
                    let (n, t) = inner.split_once(',').ok_or_else(bad)?;
                    let t = p.index(t.trim()).ok_or_else(bad)?;
                    return Ok(Element::Vc { n: int(n)?, t });
                }
            }
            Family::Lamplighter => {
                if let Some(inner) = s.strip_prefix('(').and_then(|x| x.strip_suffix(')')) {
                    let (m, f) = inner.split_once(',').ok_or_else(bad)?;
                    let f = f.trim().strip_prefix('{').and_then(|x| x.strip_suffix('}')).ok_or_else(bad)?;
                    let lamps = if f.trim().is_empty() {
                        vec![]
                    } else {
                        f.split(',').map(int).collect::<Result<Vec<_>>>()?
                    };
                    return Ok(Element::lamp(int(m)?, &lamps));
                }
            }
        }
        self.parse_word(s)
    }

    // -- decomposition g = κ(g) ζ(g) τ(g) -----------------------------------

    /// Generator `1` of the distinguished infinite cyclic subgroup.
    pub fn zeta_generator(&self) -> Result<Element> {
        match &self.family {
            Family::FreeAbelian { d } => {
                let mut v = vec![0; *d];
                v[0] = 1;
                Ok(Element::Abelian(v))
            }
            Family::VirtuallyCyclic(_) => Ok(Element::Vc { n: 1, t: 0 }),
            Family::Lamplighter => Ok(Element::lamp(1, &[])),
            Family::FiniteCyclic { .. } => Err(Error::Unsupported(format!("{} has no infinite cyclic subgroup", self.name))),
        }
    }

    /// The element `n` of the cyclic subgroup.
    pub fn zeta_element(&self, n: i64) -> Result<Element> {
        Ok(self.pow(&self.zeta_generator()?, n))
    }

    /// Transversal `T`, identity first.
    pub fn transversal(&self) -> Result<Vec<Element>> {
        match &self.family {
            Family::VirtuallyCyclic(p) => Ok((0..p.order()).map(|t| Element::Vc { n: 0, t }).collect()),
            Family::FiniteCyclic { .. } => Err(Error::Unsupported(format!("{} is finite", self.name))),
            _ => Ok(vec![self.identity()]),
        }
    }

    /// `(κ, ζ, τ)` with `g = κ · ζ · τ`, `κ` in the kernel `K`, `τ ∈ T`.
    /// Free abelian groups use `K = {x : x_1 = 0}`, the lamplighter uses the
    /// lamp subgroup, and virtually cyclic groups have trivial `K`.
    pub fn decompose_knt(&self, g: &Element) -> Result<(Element, i64, Element)> {
        self.check(g)?;
        let out = match g {
            Element::Abelian(v) => {
                let mut k = v.clone();
                k[0] = 0;
                (Element::Abelian(k), v[0], self.identity())
            }
            Element::Vc { n, t } => (self.identity(), *n, Element::Vc { n: 0, t: *t }),
            Element::Lamp { m, lamps } => (Element::Lamp { m: 0, lamps: lamps.clone() }, *m, self.identity()),
            Element::Cyclic(_) => return Err(Error::Unsupported(format!("{} is finite", self.name))),
        };
        let back = self.mul(&self.mul(&out.0, &self.zeta_element(out.1)?), &out.2);
        if &back != g {
            return Err(Error::Invariant(format!("decomposition of {} does not recompose", self.format(g))));
        }
        Ok(out)
    }

    pub fn zeta(&self, g: &Element) -> Result<i64> {
        Ok(self.decompose_knt(g)?.1)
    }

    pub fn in_kernel(&self, k: &Element) -> Result<bool> {
        let (kk, n, t) = self.decompose_knt(k)?;
        Ok(n == 0 && t == self.identity() && &kk == k)
    }

    /// `φ^n(k) = n k n⁻¹`.
    pub fn conj_shift(&self, k: &Element, n: i64) -> Result<Element> {
        if !self.in_kernel(k)? {
            return Err(Error::Precondition(format!("{} is not in the kernel", self.format(k))));
        }
        let z = self.zeta_element(n)?;
        Ok(self.mul(&self.mul(&z, k), &self.inv(&z)))
    }
}

// ---------------------------------------------------------------------------
// Measures
// ---------------------------------------------------------------------------

/// Finitely supported symmetric probability measure with exact weights.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymmetricMeasure {
    support: Vec<(Element, Q)>,
}

impl SymmetricMeasure {
    /// Validates positivity, total mass 1, symmetry, and (unless
    /// `allow_identity`) that the identity is not in the support. Repeated
    /// elements have their weights summed.
    pub fn new(group: &GroupModel, entries: Vec<(Element, Q)>, allow_identity: bool) -> Result<Self> {
        let mut map: BTreeMap<Element, Q> = BTreeMap::new();
        for (g, w) in entries {
            group.check(&g)?;
            if !w.is_positive() {
                return Err(Error::Precondition(format!("weight {} at {} is not positive", fmt_q(&w), group.format(&g))));
            }
            *map.entry(g).or_insert_with(Q::zero) += w;
        }
        let total: Q = map.values().sum();
        if total != Q::one() {
            return Err(Error::Precondition(format!("measure has total mass {}, expected 1", fmt_q(&total))));
        }
        for (g, w) in &map {
            let gi = group.inv(g);
            if map.get(&gi) != Some(w) {
                return Err(Error::Precondition(format!(
                    "measure is not symmetric: mu({}) = {} but mu({}) differs",
                    group.format(g),
                    fmt_q(w),
                    group.format(&gi)
                )));
            }
        }
        if !allow_identity && map.contains_key(&group.identity()) {
            return Err(Error::Precondition("identity in the support requires the lazy flag".into()));
        }
        Ok(Self { support: map.into_iter().collect() })
    }

    /// Uniform measure on the given elements.
    pub fn uniform(group: &GroupModel, elems: Vec<Element>, allow_identity: bool) -> Result<Self> {
        let set: BTreeSet<Element> = elems.into_iter().collect();
        if set.is_empty() {
            return Err(Error::Precondition("empty support".into()));
        }
        let w = Q::new(1.into(), (set.len() as i64).into());
        Self::new(group, set.into_iter().map(|g| (g, w.clone())).collect(), allow_identity)
    }

    /// The standard measure of each family: uniform on the generators and
    /// their inverses.
    pub fn standard(group: &GroupModel) -> Result<Self> {
        let mut elems = Vec::new();
        for (_, g) in group.generators() {
            elems.push(g.clone());
            elems.push(group.inv(g));
        }
        Self::uniform(group, elems, false)
    }

    /// Parses a measure shorthand:
    /// * `standard`
    /// * `uniform:<tok>,<tok>,...` where a token is a word (`a.c`), an
    ///   integer `k` (meaning `e1^k`), or `pm<tok>` for the token and its
    ///   inverse; `e` adds the identity (lazy walk).
    pub fn parse_shorthand(group: &GroupModel, s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "standard" {
            return Self::standard(group);
        }
        let list = s
            .strip_prefix("uniform:")
            .ok_or_else(|| Error::Parse(format!("unknown measure shorthand {s:?}")))?;
        let mut elems = Vec::new();
        let mut lazy = false;
        for tok in list.split(',') {
            let tok = tok.trim();
            let (pm, body) = match tok.strip_prefix("pm") {
                Some(b) => (true, b),
                None => (false, tok),
            };
            let g = match body.parse::<i64>() {
                Ok(k) => group.pow(&group.generators()[0].1, k),
                Err(_) => group.parse_word(body)?,
            };
            if g == group.identity() {
                lazy = true;
            }
            if pm {
                elems.push(group.inv(&g));
            }
            elems.push(g);
        }
        Self::uniform(group, elems, lazy)
    }

    /// Parses `[["word", "p/q"], ...]`.
    pub fn from_words(group: &GroupModel, entries: &[(String, String)], allow_identity: bool) -> Result<Self> {
        let mut out = Vec::new();
        for (w, p) in entries {
            out.push((group.parse_word(w)?, parse_q(p)?));
        }
        Self::new(group, out, allow_identity)
    }

    pub fn support(&self) -> &[(Element, Q)] {
        &self.support
    }

    pub fn weight(&self, g: &Element) -> Q {
        self.support.iter().find(|(h, _)| h == g).map(|(_, w)| w.clone()).unwrap_or_else(Q::zero)
    }

    /// Weight of the identity (hold probability of the walk).
    pub fn hold(&self, group: &GroupModel) -> Q {
        self.weight(&group.identity())
    }

    pub fn total(&self) -> Q {
        self.support.iter().map(|(_, w)| w).sum()
    }

    pub fn is_symmetric(&self, group: &GroupModel) -> bool {
        self.support.iter().all(|(g, w)| self.weight(&group.inv(g)) == *w)
    }

    /// Steps of the walk other than holding.
    pub fn moves<'a>(&'a self, group: &'a GroupModel) -> impl Iterator<Item = &'a (Element, Q)> + 'a {
        let e = group.identity();
        self.support.iter().filter(move |(g, _)| *g != e)
    }

    /// The measure `μ'(g) = μ(g⁻¹)`.
    pub fn reflected(&self, group: &GroupModel) -> Self {
        let mut support: Vec<(Element, Q)> = self.support.iter().map(|(g, w)| (group.inv(g), w.clone())).collect();
        support.sort_by(|a, b| a.0.cmp(&b.0));
        Self { support }
    }

    /// Word-ball sizes for radii `0..=radius` under the support. The probe
    /// reports `grows = true` when the balls strictly grow until they stop
    /// changing (which for a finite group means they cover it). This is
    /// evidence, not a proof, that the support generates.
    pub fn generation_probe(&self, group: &GroupModel, radius: usize) -> GenerationProbe {
        let gens: Vec<Element> = self.moves(group).map(|(g, _)| g.clone()).collect();
        let mut seen: BTreeSet<Element> = BTreeSet::from([group.identity()]);
        let mut layer = vec![group.identity()];
        let mut sizes = vec![1];
        for _ in 0..radius {
            let mut next = Vec::new();
            for x in &layer {
                for s in &gens {
                    let y = group.mul(x, s);
                    if seen.insert(y.clone()) {
                        next.push(y);
                    }
                }
            }
            layer = next;
            sizes.push(seen.len());
        }
        let mut grows = true;
        let mut stopped = false;
        for w in sizes.windows(2) {
            if w[1] == w[0] {
                stopped = true;
            } else if stopped {
                grows = false;
            }
        }
        if stopped && group.is_infinite() {
            grows = false;
        }
        if let Family::FiniteCyclic { m } = group.family() {
            grows &= *sizes.last().expect("nonempty") as i64 == *m || !stopped;
        }
        let lattice_index = match group.family() {
            Family::FreeAbelian { d } => Some(lattice_index(&gens, *d)),
            _ => None,
        };
        GenerationProbe { ball_sizes: sizes, grows, lattice_index }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GenerationProbe {
    pub ball_sizes: Vec<usize>,
    pub grows: bool,
    /// For free abelian groups, the index of the subgroup generated by the
    /// support (`1` means generating, `0` means infinite index).
    pub lattice_index: Option<u64>,
}

fn lattice_index(gens: &[Element], d: usize) -> u64 {
    let vecs: Vec<Vec<i64>> = gens
        .iter()
        .filter_map(|g| match g {
            Element::Abelian(v) => Some(v.clone()),
            _ => None,
        })
        .collect();
    // index = gcd of all d x d minors
    let mut g: i128 = 0;
    let mut pick = Vec::new();
    fn rec(vecs: &[Vec<i64>], d: usize, start: usize, pick: &mut Vec<usize>, g: &mut i128) {
        if pick.len() == d {
            let m: Vec<Vec<i128>> = pick.iter().map(|&i| vecs[i].iter().map(|&x| x as i128).collect()).collect();
            *g = g.gcd(&det(m));
            return;
        }
        for i in start..vecs.len() {
            pick.push(i);
            rec(vecs, d, i + 1, pick, g);
            pick.pop();
        }
    }
    rec(&vecs, d, 0, &mut pick, &mut g);
    g.unsigned_abs() as u64
}

fn det(mut m: Vec<Vec<i128>>) -> i128 {
    // Bareiss fraction-free elimination
    let n = m.len();
    let mut sign = 1;
    let mut prev = 1i128;
    for k in 0..n {
        if m[k][k] == 0 {
            match (k + 1..n).find(|&i| m[i][k] != 0) {
                Some(i) => {
                    m.swap(i, k);
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) / prev;
            }
        }
        prev = m[k][k];
    }
    sign * m[n - 1][n - 1]
}

// ---------------------------------------------------------------------------
// Homomorphisms
// ---------------------------------------------------------------------------

/// Built-in quotient homomorphisms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Hom {
    Identity,
    /// `Z → Z/m`.
    ModM(i64),
    /// Lamplighter → `Z`, `(m,f) ↦ m`.
    LamplighterToIntegers,
}

impl Hom {
    pub fn target(&self, source: &GroupModel) -> Result<GroupModel> {
        match (self, source.family()) {
            (Hom::Identity, _) => Ok(source.clone()),
            (Hom::ModM(m), Family::FreeAbelian { d: 1 }) => GroupModel::finite_cyclic(*m),
            (Hom::LamplighterToIntegers, Family::Lamplighter) => Ok(GroupModel::integers()),
            _ => Err(Error::Unsupported(format!("homomorphism {self:?} from {}", source.name()))),
        }
    }

    pub fn apply(&self, source: &GroupModel, g: &Element) -> Result<Element> {
        source.check(g)?;
        match (self, g) {
            (Hom::Identity, _) => Ok(g.clone()),
            (Hom::ModM(m), Element::Abelian(v)) if v.len() == 1 => Ok(Element::Cyclic(v[0].rem_euclid(*m))),
            (Hom::LamplighterToIntegers, Element::Lamp { m, .. }) => Ok(Element::Abelian(vec![*m])),
            _ => Err(Error::Unsupported(format!("homomorphism {self:?} from {}", source.name()))),
        }
    }
}

/// `φ(μ)(h) = Σ_{g ∈ φ⁻¹(h)} μ(g)`. The image measure may charge the
/// identity (e.g. lamp flips project to 0).
pub fn pushforward_measure(source: &GroupModel, hom: &Hom, mu: &SymmetricMeasure) -> Result<(GroupModel, SymmetricMeasure)> {
    let target = hom.target(source)?;
    let mut out = Vec::new();
    for (g, w) in mu.support() {
        out.push((hom.apply(source, g)?, w.clone()));
    }
    let nu = SymmetricMeasure::new(&target, out, true)?;
    Ok((target, nu))
}

/// Checks on a Cayley ball that `f ∘ φ` is μ-harmonic whenever `f` is
/// φ(μ)-harmonic (the pullback statement), by evaluating both defects.
/// Returns the list of ball elements where the pullback fails to be
/// harmonic although `f` is harmonic at the image.
pub fn harmonic_pullback_check(
    source: &GroupModel,
    mu: &SymmetricMeasure,
    hom: &Hom,
    f: &dyn Fn(&Element) -> Q,
    radius: usize,
) -> Result<Vec<Element>> {
    let (target, nu) = pushforward_measure(source, hom, mu)?;
    let ball = cayley_ball(source, mu, radius)?;
    let mut bad = Vec::new();
    for g in &ball.elements {
        let h = hom.apply(source, g)?;
        let mut image_avg = Q::zero();
        for (s, w) in nu.support() {
            image_avg += w * f(&target.mul(&h, s));
        }
        let mut src_avg = Q::zero();
        for (s, w) in mu.support() {
            src_avg += w * f(&hom.apply(source, &source.mul(g, s))?);
        }
        let harmonic_below = image_avg == f(&h);
        let harmonic_above = src_avg == f(&h);
        if harmonic_below && !harmonic_above {
            bad.push(g.clone());
        }
    }
    Ok(bad)
}

// ---------------------------------------------------------------------------
// Cayley balls, boundary constant, U_n membership
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct CayleyBall {
    pub graph: WeightedGraph,
    /// `elements[v]` is the group element at graph vertex `v`.
    pub elements: Vec<Element>,
    pub index: HashMap<Element, usize>,
    pub radius: usize,
}

impl CayleyBall {
    pub fn vertex(&self, g: &Element) -> Option<usize> {
        self.index.get(g).copied()
    }

    pub fn dist(&self, v: usize) -> usize {
        self.graph.dist_tags().expect("cayley balls carry distance tags")[v]
    }
}

/// Ball of radius `n` in the weighted Cayley graph `(G, μ)`: vertices at
/// word distance at most `n` from the identity (words in `supp μ \ {e}`),
/// edges `x ~ xs` of weight `μ(s)`, the identity's mass as hold probability.
/// Vertices whose neighbours were cut off record the missing weight.
pub fn cayley_ball(group: &GroupModel, mu: &SymmetricMeasure, n: usize) -> Result<CayleyBall> {
    let moves: Vec<(Element, Q)> = mu.moves(group).cloned().collect();
    let mut elements = vec![group.identity()];
    let mut index = HashMap::from([(group.identity(), 0usize)]);
    let mut dist = vec![0usize];
    let mut q = VecDeque::from([0usize]);
    while let Some(v) = q.pop_front() {
        if dist[v] == n {
            continue;
        }
        for (s, _) in &moves {
            let y = group.mul(&elements[v], s);
            if !index.contains_key(&y) {
                index.insert(y.clone(), elements.len());
                elements.push(y);
                dist.push(dist[v] + 1);
                q.push_back(elements.len() - 1);
            }
        }
    }
    let mut b = GraphBuilder::new();
    for g in &elements {
        b.vertex(&group.format(g));
    }
    for (v, x) in elements.iter().enumerate() {
        let mut lost = Q::zero();
        for (s, w) in &moves {
            match index.get(&group.mul(x, s)) {
                Some(&u) if v < u => b.edge_ix(v, u, w.clone())?,
                Some(_) => {}
                None => lost += w,
            }
        }
        b.outside(v, lost);
    }
    if b.len() != elements.len() {
        return Err(Error::Invariant("element formatting is not injective".into()));
    }
    let mut graph = b.build(&group.format(&group.identity()))?;
    graph.set_hold(mu.hold(group))?;
    graph.set_transitive(true);
    graph.set_dist_tags(dist);
    Ok(CayleyBall { graph, elements, index, radius: n })
}

/// `M = max { |ζ(ts)| : s ∈ supp μ, t ∈ T }`.
pub fn boundary_constant(group: &GroupModel, mu: &SymmetricMeasure) -> Result<i64> {
    let mut m = 0;
    for t in group.transversal()? {
        for (s, _) in mu.support() {
            m = m.max(group.zeta(&group.mul(&t, s))?.abs());
        }
    }
    Ok(m)
}

/// Membership `k ∈ U_n = <φ^j(κ(ts)) : s ∈ supp μ, t ∈ T, j ≥ n>` in the
/// lamplighter.
///
/// Lamp configurations are Laurent polynomials over GF(2) and `φ` is
/// multiplication by `x`, so `U_n = x^(n-c) · (g)` where `c` clears the
/// negative exponents of the generators `κ(s)` and `g` is the gcd of the
/// cleared generators in GF(2)[x]. Hence `k ∈ U_n` iff `x^(c-n) k` is a
/// polynomial divisible by `g`. For the standard generators `g = 1` and
/// `c = 0`, which reduces to "every lit lamp sits at a position ≥ n".
pub fn un_membership(group: &GroupModel, mu: &SymmetricMeasure, k: &Element, n: i64) -> Result<bool> {
    if !matches!(group.family(), Family::Lamplighter) {
        return Err(Error::Unsupported(format!("U_n membership is implemented for the lamplighter, not {}", group.name())));
    }
    if !group.in_kernel(k)? {
        return Err(Error::Precondition(format!("{} is not in the lamp subgroup", group.format(k))));
    }
    let gens: Vec<Vec<i64>> = mu
        .support()
        .iter()
        .filter_map(|(s, _)| match group.decompose_knt(s) {
            Ok((Element::Lamp { lamps, .. }, _, _)) if !lamps.is_empty() => Some(lamps),
            _ => None,
        })
        .collect();
    if gens.is_empty() {
        return Err(Error::Unsupported("measure never flips a lamp; the lamp subgroup is not generated".into()));
    }
    let c = gens.iter().flatten().copied().min().map(|m| (-m).max(0)).unwrap_or(0);
    let mut g = Gf2Poly::zero();
    for lamps in &gens {
        let p = Gf2Poly::from_exponents(lamps.iter().map(|l| (l + c) as usize));
        g = g.gcd(&p);
    }
    let Element::Lamp { lamps, .. } = k else { unreachable!("kernel elements are lamp configurations") };
    if lamps.iter().any(|l| l + c - n < 0) {
        return Ok(false);
    }
    let kp = Gf2Poly::from_exponents(lamps.iter().map(|l| (l + c - n) as usize));
    Ok(kp.rem(&g).is_zero())
}

/// Polynomials over GF(2) as little-endian bit vectors.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Gf2Poly(Vec<u64>);

impl Gf2Poly {
    fn zero() -> Self {
        Gf2Poly(vec![])
    }

    fn from_exponents(it: impl Iterator<Item = usize>) -> Self {
        let mut p = Gf2Poly(vec![]);
        for e in it {
            let (w, b) = (e / 64, e % 64);
            if p.0.len() <= w {
                p.0.resize(w + 1, 0);
            }
            p.0[w] ^= 1 << b;
        }
        p.trim();
        p
    }

    fn trim(&mut self) {
        while self.0.last() == Some(&0) {
            self.0.pop();
        }
    }

    fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    fn degree(&self) -> Option<usize> {
        let top = *self.0.last()?;
        Some((self.0.len() - 1) * 64 + 63 - top.leading_zeros() as usize)
    }

    fn xor_shifted(&mut self, other: &Gf2Poly, shift: usize) {
        for e in 0..=other.degree().unwrap_or(0) {
            if other.0.is_empty() {
                break;
            }
            if other.0[e / 64] >> (e % 64) & 1 == 1 {
                let t = e + shift;
                if self.0.len() <= t / 64 {
                    self.0.resize(t / 64 + 1, 0);
                }
                self.0[t / 64] ^= 1 << (t % 64);
            }
        }
        self.trim();
    }

    fn rem(&self, m: &Gf2Poly) -> Gf2Poly {
        let dm = m.degree().expect("division by zero polynomial");
        let mut r = self.clone();
        while let Some(dr) = r.degree() {
            if dr < dm {
                break;
            }
            r.xor_shifted(m, dr - dm);
        }
        r
    }

    fn gcd(&self, other: &Gf2Poly) -> Gf2Poly {
        let (mut a, mut b) = (self.clone(), other.clone());
        while !b.is_zero() {
            let r = a.rem(&b);
            a = b;
            b = r;
        }
        a
    }
}

// ---------------------------------------------------------------------------
// JSON group specification
// ---------------------------------------------------------------------------

/// `{"family": "...", "params": {...}, "measure": [["word", "p/q"], ...]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroupSpec {
    pub family: String,
    #[serde(default)]
    pub params: serde_json::Value,
    #[serde(default)]
    pub measure: Option<Vec<(String, String)>>,
    #[serde(default)]
    pub allow_identity: bool,
}

#[derive(Deserialize)]
struct VcParams {
    transversal: Vec<String>,
    table: Vec<Vec<usize>>,
    sign: Vec<i64>,
    cocycle: Vec<Vec<i64>>,
    generators: BTreeMap<String, (i64, String)>,
    #[serde(default)]
    name: Option<String>,
}

impl GroupSpec {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("group spec: {e}")))
    }

    pub fn build(&self) -> Result<(GroupModel, SymmetricMeasure)> {
        let p = &self.params;
        let int = |key: &str| -> Result<i64> {
            p.get(key)
                .and_then(|v| v.as_i64())
                .ok_or_else(|| Error::Parse(format!("group spec: params.{key} must be an integer")))
        };
        let group = match self.family.as_str() {
            "integers" | "z" => GroupModel::integers(),
            "free_abelian" => GroupModel::free_abelian(int("d")? as usize)?,
            "finite_cyclic" => GroupModel::finite_cyclic(int("m")?)?,
            "dihedral" | "infinite_dihedral" => GroupModel::infinite_dihedral(),
            "lamplighter" => GroupModel::lamplighter(),
            "virtually_cyclic" => {
                let v: VcParams =
                    serde_json::from_value(p.clone()).map_err(|e| Error::Parse(format!("group spec params: {e}")))?;
                let pres = VcPresentation { names: v.transversal, table: v.table, sign: v.sign, cocycle: v.cocycle };
                let gens = v.generators.into_iter().map(|(g, (n, t))| (g, n, t)).collect();
                GroupModel::virtually_cyclic(v.name.as_deref().unwrap_or("virtually_cyclic"), pres, gens)?
            }
            other => return Err(Error::Parse(format!("group spec: unknown family {other:?}"))),
        };
        let mu = match &self.measure {
            Some(m) => SymmetricMeasure::from_words(&group, m, self.allow_identity)?,
            None => SymmetricMeasure::standard(&group)?,
        };
        Ok((group, mu))
    }
}

/// Named shorthand groups: `z`, `z2`, `z3`, `zd<k>`, `dihedral`,
/// `lamplighter`, `zmod<m>`.
pub fn group_by_name(name: &str) -> Result<GroupModel> {
    match name {
        "z" => Ok(GroupModel::integers()),
        "z2" => GroupModel::free_abelian(2),
        "z3" => GroupModel::free_abelian(3),
        "dihedral" => Ok(GroupModel::infinite_dihedral()),
        "lamplighter" => Ok(GroupModel::lamplighter()),
        _ => {
            if let Some(d) = name.strip_prefix("zd").and_then(|x| x.parse().ok()) {
                return GroupModel::free_abelian(d);
            }
            if let Some(m) = name.strip_prefix("zmod").and_then(|x| x.parse().ok()) {
                return GroupModel::finite_cyclic(m);
            }
            Err(Error::Parse(format!("unknown group {name:?}")))
        }
    }
}

/// Convenience: integer vector element.
pub fn zv(v: &[i64]) -> Element {
    Element::Abelian(v.to_vec())
}

/// Exact `1/k`.
pub fn inv_int(k: i64) -> Q {
    Q::new(1.into(), k.into())
}
