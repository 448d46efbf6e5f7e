//! Elimination, group arithmetic, Cayley balls, local maps and the Dirichlet
//! solver against naive oracles.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use harmlab::family::within;
use harmlab::graphs::VertexSet;
use harmlab::groups::{cayley_ball, group_by_name, zv, Element, GroupModel, SymmetricMeasure};
use harmlab::laplace::{apply_laplacian, dirichlet_solve, BoundaryValueProblem};
use harmlab::lca::Automaton;
use harmlab::linalg::{nullspace, rank, solve, SparseMatrix};
use harmlab::rational::qi;
use harmlab::{Field, GraphFamily, PrimeField, Rationals, Q};
use num_traits::Zero;
use proptest::prelude::*;

/// Dense Gaussian elimination, written independently of the sparse code.
fn dense_rank<F: Field>(f: &F, mut a: Vec<Vec<F::Elem>>) -> usize {
    let ncols = a.first().map_or(0, Vec::len);
    let mut r = 0;
    for c in 0..ncols {
        let Some(p) = (r..a.len()).find(|&i| !f.is_zero(&a[i][c])) else { continue };
        a.swap(r, p);
        let inv = f.inv(&a[r][c]).unwrap();
        for i in 0..a.len() {
            if i != r && !f.is_zero(&a[i][c]) {
                let k = f.mul(&a[i][c], &inv);
                for j in 0..ncols {
                    let t = f.mul(&k, &a[r][j]);
                    a[i][j] = f.sub(&a[i][j], &t);
                }
            }
        }
        r += 1;
    }
    r
}

fn sparse<F: Field>(f: &F, dense: &[Vec<i64>], ncols: usize) -> SparseMatrix<F::Elem> {
    let mut m = SparseMatrix::new(ncols);
    for row in dense {
        m.push_row(row.iter().enumerate().filter(|(_, v)| **v != 0).map(|(j, v)| (j, f.from_i64(*v))).collect());
    }
    m
}

fn matrix() -> impl Strategy<Value = (usize, Vec<Vec<i64>>)> {
    (1usize..7, 1usize..7).prop_flat_map(|(r, c)| {
        (Just(c), prop::collection::vec(prop::collection::vec(prop_oneof![3 => Just(0i64), 2 => -3i64..=3], c), r))
    })
}

fn family(name: &str) -> GraphFamily {
    match group_by_name(name) {
        Ok(g) => {
            let mu = SymmetricMeasure::standard(&g).unwrap();
            GraphFamily::cayley(g, mu)
        }
        Err(_) => GraphFamily::parse(name).unwrap(),
    }
}

fn random_element(group: &GroupModel, word: &[(usize, bool)]) -> Element {
    let gens = group.generators();
    word.iter().fold(group.identity(), |acc, &(i, inv)| {
        let s = &gens[i % gens.len()].1;
        group.mul(&acc, &if inv { group.inv(s) } else { s.clone() })
    })
}

fn word() -> impl Strategy<Value = Vec<(usize, bool)>> {
    prop::collection::vec((0usize..8, any::<bool>()), 0..12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rank_matches_dense_elimination((c, a) in matrix(), p in prop::sample::select(vec![2u64, 3, 5, 7])) {
        let gf = PrimeField::new(p).unwrap();
        let dense_gf: Vec<Vec<u64>> = a.iter().map(|r| r.iter().map(|v| gf.from_i64(*v)).collect()).collect();
        prop_assert_eq!(rank(&gf, &sparse(&gf, &a, c)), dense_rank(&gf, dense_gf));
        let dense_q: Vec<Vec<Q>> = a.iter().map(|r| r.iter().map(|v| qi(*v)).collect()).collect();
        prop_assert_eq!(rank(&Rationals, &sparse(&Rationals, &a, c)), dense_rank(&Rationals, dense_q));
    }

    #[test]
    fn nullspace_and_solutions_are_sound((c, a) in matrix(), x in prop::collection::vec(-2i64..=2, 7)) {
        let m = sparse(&Rationals, &a, c);
        let ker = nullspace(&Rationals, &m);
        prop_assert_eq!(ker.len() + rank(&Rationals, &m), c);
        for v in &ker {
            prop_assert!(m.mul_vec(&Rationals, v).iter().all(Zero::is_zero));
        }
        // a consistent right-hand side is always solved
        let x: Vec<Q> = x[..c].iter().map(|v| qi(*v)).collect();
        let b = m.mul_vec(&Rationals, &x);
        let sol = solve(&Rationals, &m, &b).expect("consistent system");
        prop_assert_eq!(m.mul_vec(&Rationals, &sol.particular), b);
        prop_assert_eq!(sol.kernel.len(), ker.len());
    }

    #[test]
    fn group_laws_and_decomposition(
        name in prop::sample::select(vec!["z", "z2", "z3", "dihedral", "lamplighter"]),
        a in word(), b in word(), c in word(),
    ) {
        let g = group_by_name(name).unwrap();
        let (x, y, z) = (random_element(&g, &a), random_element(&g, &b), random_element(&g, &c));
        prop_assert_eq!(g.mul(&g.mul(&x, &y), &z), g.mul(&x, &g.mul(&y, &z)));
        prop_assert_eq!(g.mul(&x, &g.inv(&x)), g.identity());
        prop_assert_eq!(g.parse_element(&g.format(&x)).unwrap(), x.clone());
        let (k, n, t) = g.decompose_knt(&x).unwrap();
        prop_assert!(g.in_kernel(&k).unwrap());
        prop_assert!(g.transversal().unwrap().contains(&t));
        prop_assert_eq!(g.mul(&g.mul(&k, &g.zeta_element(n).unwrap()), &t), x.clone());
        if name != "dihedral" {
            prop_assert_eq!(g.zeta(&g.mul(&x, &y)).unwrap(), g.zeta(&x).unwrap() + g.zeta(&y).unwrap());
        }
    }

    #[test]
    fn lca_transpose_is_slice_transpose(
        coeffs in prop::collection::vec(prop::collection::vec(0u64..3, 4), 3),
        f in prop::collection::vec(0u64..3, 2 * 13),
    ) {
        let gf = PrimeField::new(3).unwrap();
        let z = GroupModel::integers();
        let blocks: Vec<(Element, Vec<Vec<u64>>)> = [0i64, 1, -1]
            .iter()
            .zip(&coeffs)
            .map(|(s, c)| (zv(&[*s]), vec![vec![c[0], c[1]], vec![c[2], c[3]]]))
            .filter(|(_, b)| b.iter().flatten().any(|v| *v != 0))
            .collect();
        prop_assume!(blocks.iter().any(|(s, _)| *s != zv(&[0])));
        let tau = Automaton::group(gf, 2, z, blocks).unwrap();
        let m = tau.materialize(6).unwrap();
        let inner = within(m.graph(), 4);
        let direct = m.slice(&inner, &inner).unwrap().transpose().to_dense(&gf);
        prop_assert_eq!(&m.transpose().slice(&inner, &inner).unwrap().to_dense(&gf), &direct);
        let t2 = tau.transpose().materialize(6).unwrap();
        let order: Vec<usize> = inner.iter().map(|&v| t2.graph().vertex(m.graph().id(v)).unwrap()).collect();
        prop_assert_eq!(t2.slice(&order, &order).unwrap().to_dense(&gf), direct);
        // apply agrees with the slice acting on a vector
        let all: Vec<usize> = (0..m.graph().len()).collect();
        let fv: Vec<Vec<u64>> = (0..m.graph().len()).map(|v| vec![f[(2 * v) % f.len()], f[(2 * v + 1) % f.len()]]).collect();
        let flat: Vec<u64> = fv.iter().flatten().copied().collect();
        let by_slice = m.slice(&inner, &all).unwrap().mul_vec(&gf, &flat);
        let by_apply: Vec<u64> = m.apply(&fv, &inner).unwrap().into_iter().flatten().collect();
        prop_assert_eq!(by_slice, by_apply);
    }

    #[test]
    fn dirichlet_solution_is_harmonic_and_bounded(
        keep in prop::collection::vec(any::<bool>(), 25),
        values in prop::collection::vec(-5i64..=5, 80),
    ) {
        let g = family("z2").ball(5).unwrap();
        let inner = within(&g, 3);
        let region: VertexSet = inner.iter().zip(keep.iter().cycle()).filter(|(_, k)| **k).map(|(v, _)| *v).collect();
        prop_assume!(!region.is_empty());
        let boundary: BTreeMap<usize, Q> =
            g.outer_boundary(&region).into_iter().enumerate().map(|(i, b)| (b, qi(values[i % values.len()]))).collect();
        let p = BoundaryValueProblem { region: region.clone(), boundary: boundary.clone(), default_boundary: None, absorbing_frontier: None };
        let sol = dirichlet_solve(&g, &p).unwrap();
        prop_assert!(sol.max_principle_ok);
        let lap = apply_laplacian(&g, &sol.values, &region).unwrap();
        prop_assert!(lap.values().all(Zero::is_zero));
        for (b, v) in &boundary {
            prop_assert_eq!(&sol.values[b], v);
        }
        let (lo, hi) = (boundary.values().min().unwrap(), boundary.values().max().unwrap());
        prop_assert!(region.iter().all(|v| &sol.values[v] >= lo && &sol.values[v] <= hi));
    }
}

/// Word-metric balls by a plain BFS over group multiplication.
#[test]
fn cayley_balls_match_bfs() {
    for name in ["z2", "z3", "dihedral", "lamplighter"] {
        let g = group_by_name(name).unwrap();
        let mu = SymmetricMeasure::standard(&g).unwrap();
        let moves: Vec<Element> = mu.support().iter().map(|(s, _)| s.clone()).filter(|s| *s != g.identity()).collect();
        let n = 4;
        let mut dist = HashMap::from([(g.identity(), 0usize)]);
        let mut queue = VecDeque::from([g.identity()]);
        while let Some(x) = queue.pop_front() {
            let d = dist[&x];
            if d == n {
                continue;
            }
            for s in &moves {
                let y = g.mul(&x, s);
                if !dist.contains_key(&y) {
                    dist.insert(y.clone(), d + 1);
                    queue.push_back(y);
                }
            }
        }
        let ball = cayley_ball(&g, &mu, n).unwrap();
        assert_eq!(ball.elements.len(), dist.len(), "{name}");
        for (v, e) in ball.elements.iter().enumerate() {
            assert_eq!(ball.dist(v), dist[e], "{name} {}", g.format(e));
            let lost: Q = mu.moves(&g).filter(|(s, _)| !dist.contains_key(&g.mul(e, s))).map(|(_, w)| w.clone()).sum();
            assert_eq!(ball.graph.outside_weight(v), &lost);
        }
        let complete: BTreeSet<usize> = (0..ball.elements.len()).filter(|&v| ball.graph.is_complete(v)).collect();
        assert_eq!(complete, within(&ball.graph, n - 1).into_iter().collect());
    }
}

/// `Δ` kills constants at every fully loaded vertex.
#[test]
fn laplacian_kills_constants() {
    for spec in ["z2", "dihedral", "lamplighter", "gallery:c7", "gallery:trofimov"] {
        let g = family(spec).ball(4).unwrap();
        let f: BTreeMap<usize, Q> = (0..g.len()).map(|v| (v, qi(3))).collect();
        let at: VertexSet = (0..g.len()).filter(|&v| g.is_complete(v)).collect();
        assert!(apply_laplacian(&g, &f, &at).unwrap().values().all(Zero::is_zero), "{spec}");
    }
}
