//! Walk computations against closed forms and dense matrix oracles.

use std::collections::{BTreeMap, BTreeSet};

use harmlab::graphs::path;
use harmlab::groups::{GroupModel, SymmetricMeasure};
use harmlab::laplace::{dirichlet_solve, BoundaryValueProblem};
use harmlab::rational::{q, qi, to_f64};
use harmlab::walks::{
    crit_radius_scan, hit_probability_interval, hits_first_relation, hitting_time_distribution, n_step_distribution,
    race, transience_partial_sums, FrontierPolicy,
};
use harmlab::{GraphBuilder, GraphFamily, WeightedGraph, Q};
use num_bigint::BigInt;
use num_traits::{One, Zero};
use proptest::prelude::*;

fn binom(n: u64, k: u64) -> BigInt {
    (0..k).fold(BigInt::one(), |acc, i| acc * (n - i) / (i + 1))
}

fn cayley(name: &str) -> GraphFamily {
    let g = harmlab::groups::group_by_name(name).unwrap();
    let mu = SymmetricMeasure::standard(&g).unwrap();
    GraphFamily::cayley(g, mu)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn z_distribution_is_binomial(n in 0usize..24) {
        let g = cayley("z").ball(n + 1).unwrap();
        let d = n_step_distribution(&g, g.base(), n, &BTreeSet::new(), FrontierPolicy::Error).unwrap();
        for k in -(n as i64)..=(n as i64) {
            let want = if (n as i64 + k) % 2 == 0 {
                Q::new(binom(n as u64, ((n as i64 + k) / 2) as u64), BigInt::one() << n)
            } else {
                Q::zero()
            };
            let got = d.support.get(&k.to_string()).cloned().unwrap_or_else(Q::zero);
            prop_assert_eq!(got, want, "n={} k={}", n, k);
        }
    }

    #[test]
    fn gamblers_ruin_is_linear(n in 2i64..30, k in 0i64..30) {
        prop_assume!(k <= n);
        let g = path(0, n);
        let v = |s: i64| g.vertex(&s.to_string()).unwrap();
        let p = race(&g, &BTreeSet::from([v(n)]), &BTreeSet::from([v(0)]), v(k)).unwrap();
        prop_assert_eq!(p, q(k, n));
    }

    #[test]
    fn propagation_matches_dense_powers(
        k in 3usize..7,
        edges in prop::collection::vec((0usize..7, 0usize..7, 1i64..4), 3..12),
        outside in prop::collection::vec(0i64..3, 7),
        hold in 0i64..3,
        absorbing_bits in 0u32..128,
        steps in 0usize..7,
    ) {
        let mut b = GraphBuilder::new();
        for i in 0..k {
            b.vertex(&format!("v{i}"));
        }
        let mut any = false;
        for (u, v, w) in edges {
            let (u, v) = (u % k, v % k);
            if u != v && b.edge_ix(u, v, qi(w)).is_ok() {
                any = true;
            }
        }
        prop_assume!(any);
        for (i, o) in outside.iter().take(k).enumerate() {
            if *o > 0 {
                b.outside(i, qi(*o));
            }
        }
        let Ok(mut g) = b.build("v0") else { return Ok(()) };
        prop_assume!((0..k).all(|v| !g.degree(v).is_zero()));
        g.set_hold(q(hold, 4)).unwrap();
        let absorbing: BTreeSet<usize> = (1..k).filter(|i| absorbing_bits >> i & 1 == 1).collect();
        let d = n_step_distribution(&g, 0, steps, &absorbing, FrontierPolicy::Absorb).unwrap();
        prop_assert_eq!(d.total(), Q::one());
        // dense oracle: iterate the row vector through the substochastic matrix
        let mut mass = vec![Q::zero(); k];
        mass[0] = Q::one();
        let mut absorbed = vec![Q::zero(); k];
        let h = q(hold, 4);
        for _ in 0..steps {
            let mut next = vec![Q::zero(); k];
            for x in 0..k {
                if mass[x].is_zero() {
                    continue;
                }
                next[x] += &mass[x] * &h;
                let deg = g.degree(x);
                for (y, w) in g.neighbours(x) {
                    next[*y] += &mass[x] * (Q::one() - &h) * w / &deg;
                }
            }
            for a in &absorbing {
                absorbed[*a] += std::mem::take(&mut next[*a]);
            }
            mass = next;
        }
        for v in 0..k {
            let alive = d.support.get(g.id(v)).cloned().unwrap_or_else(Q::zero);
            let abs = d.absorbed.get(g.id(v)).cloned().unwrap_or_else(Q::zero);
            prop_assert_eq!(alive, mass[v].clone());
            prop_assert_eq!(abs, absorbed[v].clone());
        }
    }
}

#[test]
fn first_passage_on_z_is_catalan() {
    let g = cayley("z").ball(24).unwrap();
    let (x, y) = (g.vertex("0").unwrap(), g.vertex("1").unwrap());
    let h = hitting_time_distribution(&g, x, y, 21, FrontierPolicy::Error).unwrap();
    for (n, p) in h.iter().enumerate() {
        let want = if n % 2 == 1 {
            let k = (n / 2) as u64;
            Q::new(binom(2 * k, k) / (k + 1), BigInt::one() << n)
        } else {
            Q::zero()
        };
        assert_eq!(*p, want, "n={n}");
    }
}

/// `P_0[X_{2n} = 0]` on Z^2 is `(C(2n,n)/4^n)^2`; on Z^3 it is
/// `6^{-2n} Σ_{i+j+k=n} (2n)!/(i! j! k!)^2`.
#[test]
fn return_probabilities_match_closed_forms() {
    let z2 = transience_partial_sums(&cayley("z2"), 12, 1).unwrap();
    for n in 0..=6u64 {
        let c = Q::new(binom(2 * n, n), BigInt::from(4).pow(n as u32));
        assert_eq!(z2.return_probabilities[2 * n as usize], &c * &c);
    }
    assert!(z2.return_probabilities.iter().skip(1).step_by(2).all(Zero::is_zero));
    let z3 = transience_partial_sums(&cayley("z3"), 12, 2).unwrap();
    let fact = |m: u64| (1..=m).fold(BigInt::one(), |a, i| a * i);
    for n in 0..=6u64 {
        let mut s = BigInt::zero();
        for i in 0..=n {
            for j in 0..=n - i {
                let k = n - i - j;
                let d = fact(i) * fact(j) * fact(k);
                s += fact(2 * n) / (&d * &d);
            }
        }
        assert_eq!(z3.return_probabilities[2 * n as usize], Q::new(s, BigInt::from(6).pow(2 * n as u32)));
    }
    assert!(z3.all_bounds_hold);
}

/// Exact "hit `targets` (value 1) before `others` (value 0), exit kills"
/// on a loaded ball, through the Dirichlet solver.
fn killed_race(g: &WeightedGraph, start: usize, targets: &[usize], others: &[usize]) -> Q {
    let stop: BTreeSet<usize> = targets.iter().chain(others).copied().collect();
    if targets.contains(&start) {
        return Q::one();
    }
    if others.contains(&start) {
        return Q::zero();
    }
    let region: BTreeSet<usize> = (0..g.len()).filter(|v| !stop.contains(v)).collect();
    let boundary: BTreeMap<usize, Q> = g
        .outer_boundary(&region)
        .into_iter()
        .map(|b| (b, if targets.contains(&b) { Q::one() } else { Q::zero() }))
        .collect();
    let p = BoundaryValueProblem { region, boundary, default_boundary: None, absorbing_frontier: Some(Q::zero()) };
    dirichlet_solve(g, &p).unwrap().values[&start].clone()
}

#[test]
fn fixed_point_bounds_enclose_exact_values() {
    let fam = cayley("z3");
    let depth = 4;
    let g = fam.ball(depth).unwrap();
    let (xs, ys) = ("(1,0,0)", "(0,1,1)");
    let (x, y) = (g.vertex(xs).unwrap(), g.vertex(ys).unwrap());
    let rep = hits_first_relation(&fam, xs, ys, depth, 100_000).unwrap();
    let e = g.base();
    assert!(rep.p_y.contains(&killed_race(&g, e, &[y], &[])));
    assert!(rep.p_x.contains(&killed_race(&g, e, &[x], &[])));
    assert!(rep.x_first.contains(&killed_race(&g, e, &[x], &[y])));
    assert!(rep.y_first.contains(&killed_race(&g, e, &[y], &[x])));
    assert!(rep.p_xy.contains(&killed_race(&g, x, &[y], &[])));
    assert!(rep.identity_x.consistent && rep.identity_y.consistent);
    assert!(to_f64(&rep.p_y.width()) < 1e-9, "{}", to_f64(&rep.p_y.width()));

    let scan = crit_radius_scan(&fam, xs, ys, &[2, 3], depth, 100_000).unwrap();
    for row in &scan.rows {
        for s in [&row.min, &row.max].into_iter().flatten() {
            let v = g.vertex(&s.vertex).unwrap();
            let a = killed_race(&g, v, &[x], &[y]);
            let b = killed_race(&g, v, &[y], &[x]);
            assert!(s.interval.contains(&(&a / (&a + &b))), "{}", s.vertex);
        }
    }
}

#[test]
fn asymmetric_graph_interval_contains_one_half() {
    let g = harmlab::graphs::asym_hitting_graph(7).unwrap();
    let (x, y) = (g.mark("x").unwrap(), g.mark("y").unwrap());
    let i = hit_probability_interval(&g, y, &BTreeSet::from([x]), &harmlab::graphs::asym_return_bound(9)).unwrap();
    assert!(i.contains(&q(1, 2)), "{} {}", to_f64(&i.lo), to_f64(&i.hi));
}

#[test]
fn lazy_walk_hold_is_respected() {
    let z = GroupModel::integers();
    let mu = SymmetricMeasure::parse_shorthand(&z, "uniform:e,pm1").unwrap();
    let g = GraphFamily::cayley(z, mu).ball(3).unwrap();
    let d = n_step_distribution(&g, g.base(), 1, &BTreeSet::new(), FrontierPolicy::Error).unwrap();
    assert_eq!(d.support["0"], q(1, 3));
    assert_eq!(d.support["1"], q(1, 3));
}
