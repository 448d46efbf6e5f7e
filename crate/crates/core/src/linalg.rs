//! Exact sparse Gaussian elimination over an arbitrary [`Field`].
//!
//! Rows are inserted one at a time into an [`Echelon`] basis. Each incoming
//! row is reduced against the existing pivot rows; what survives (if
//! anything) contributes a new pivot. Rank, nullspace and particular
//! solutions are read off the echelon form by back substitution.

use std::collections::BTreeMap;

use crate::field::Field;

pub type SparseRow<E> = Vec<(usize, E)>;

/// Row-major sparse matrix. Entries inside a row are kept sorted by column.
#[derive(Clone, Debug)]
pub struct SparseMatrix<E> {
    pub ncols: usize,
    pub rows: Vec<SparseRow<E>>,
}

impl<E: Clone> SparseMatrix<E> {
    pub fn new(ncols: usize) -> Self {
        Self { ncols, rows: Vec::new() }
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn push_row(&mut self, mut row: SparseRow<E>) {
        row.sort_by_key(|(c, _)| *c);
        debug_assert!(row.iter().all(|(c, _)| *c < self.ncols));
        self.rows.push(row);
    }

    pub fn transpose(&self) -> SparseMatrix<E> {
        let mut cols: Vec<SparseRow<E>> = vec![Vec::new(); self.ncols];
        for (i, row) in self.rows.iter().enumerate() {
            for (j, v) in row {
                cols[*j].push((i, v.clone()));
            }
        }
        SparseMatrix { ncols: self.rows.len(), rows: cols }
    }

    pub fn to_dense<F: Field<Elem = E>>(&self, field: &F) -> Vec<Vec<E>> {
        let mut out = vec![vec![field.zero(); self.ncols]; self.rows.len()];
        for (i, row) in self.rows.iter().enumerate() {
            for (j, v) in row {
                out[i][*j] = v.clone();
            }
        }
        out
    }

    pub fn mul_vec<F: Field<Elem = E>>(&self, field: &F, x: &[E]) -> Vec<E> {
        self.rows
            .iter()
            .map(|row| {
                let mut acc = field.zero();
                for (j, v) in row {
                    acc = field.add(&acc, &field.mul(v, &x[*j]));
                }
                acc
            })
            .collect()
    }
}

/// Incrementally built row echelon form.
#[derive(Clone, Debug)]
pub struct Echelon<F: Field> {
    field: F,
    ncols: usize,
    /// pivot column -> row whose leading entry (1) sits at that column
    pivots: BTreeMap<usize, SparseRow<F::Elem>>,
}

impl<F: Field> Echelon<F> {
    pub fn new(field: F, ncols: usize) -> Self {
        Self { field, ncols, pivots: BTreeMap::new() }
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn pivot_columns(&self) -> impl Iterator<Item = usize> + '_ {
        self.pivots.keys().copied()
    }

    /// Reduces `row` against the current pivots without inserting it.
    pub fn reduce(&self, row: &[(usize, F::Elem)]) -> SparseRow<F::Elem> {
        let f = &self.field;
        let mut work: BTreeMap<usize, F::Elem> = BTreeMap::new();
        for (c, v) in row {
            if !f.is_zero(v) {
                let e = work.entry(*c).or_insert_with(|| f.zero());
                *e = f.add(e, v);
                if f.is_zero(e) {
                    work.remove(c);
                }
            }
        }
        let mut cursor = 0usize;
        loop {
            let Some((&c, _)) = work.range(cursor..).next() else { break };
            if let Some(prow) = self.pivots.get(&c) {
                let factor = work.remove(&c).expect("entry present");
                for (j, pv) in prow.iter().skip(1) {
                    let e = work.entry(*j).or_insert_with(|| f.zero());
                    f.sub_mul_assign(e, &factor, pv);
                    if f.is_zero(e) {
                        work.remove(j);
                    }
                }
            } else {
                cursor = c + 1;
            }
        }
        work.into_iter().collect()
    }

    /// Inserts a row; returns the new pivot column if the row was independent.
    pub fn insert(&mut self, row: &[(usize, F::Elem)]) -> Option<usize> {
        let mut reduced = self.reduce(row);
        if reduced.is_empty() {
            return None;
        }
        let f = &self.field;
        let lead = reduced[0].0;
        let inv = f.inv(&reduced[0].1).expect("leading entry is nonzero");
        for (_, v) in reduced.iter_mut() {
            *v = f.mul(v, &inv);
        }
        self.pivots.insert(lead, reduced);
        Some(lead)
    }

    pub fn contains(&self, row: &[(usize, F::Elem)]) -> bool {
        self.reduce(row).is_empty()
    }

    /// Solves for the pivot variables given values of the free ones.
    /// `rhs` supplies the value each pivot row must equal (zero if absent).
    fn back_substitute(&self, free: &BTreeMap<usize, F::Elem>, rhs: &BTreeMap<usize, F::Elem>, limit: usize) -> Vec<F::Elem> {
        let f = &self.field;
        let mut x = vec![f.zero(); limit];
        for (c, v) in free {
            if *c < limit {
                x[*c] = v.clone();
            }
        }
        for (&p, row) in self.pivots.iter().rev() {
            if p >= limit {
                continue;
            }
            let mut acc = rhs.get(&p).cloned().unwrap_or_else(|| f.zero());
            for (j, v) in row.iter().skip(1) {
                if *j < limit {
                    f.sub_mul_assign(&mut acc, v, &x[*j]);
                }
            }
            x[p] = acc;
        }
        x
    }

    /// Basis of the nullspace of the first `limit` columns (all columns when
    /// `limit == ncols`). One vector per free column, in column order.
    pub fn nullspace_upto(&self, limit: usize) -> Vec<Vec<F::Elem>> {
        let f = &self.field;
        let empty = BTreeMap::new();
        (0..limit)
            .filter(|c| !self.pivots.contains_key(c))
            .map(|c| {
                let mut free = BTreeMap::new();
                free.insert(c, f.one());
                self.back_substitute(&free, &empty, limit)
            })
            .collect()
    }

    pub fn nullspace(&self) -> Vec<Vec<F::Elem>> {
        self.nullspace_upto(self.ncols)
    }
}

pub fn echelon<F: Field>(field: &F, m: &SparseMatrix<F::Elem>) -> Echelon<F> {
    let mut e = Echelon::new(field.clone(), m.ncols);
    // Sparse rows first keeps fill-in down.
    let mut order: Vec<usize> = (0..m.rows.len()).collect();
    order.sort_by_key(|&i| m.rows[i].len());
    for i in order {
        e.insert(&m.rows[i]);
    }
    e
}

pub fn rank<F: Field>(field: &F, m: &SparseMatrix<F::Elem>) -> usize {
    echelon(field, m).rank()
}

pub fn nullspace<F: Field>(field: &F, m: &SparseMatrix<F::Elem>) -> Vec<Vec<F::Elem>> {
    echelon(field, m).nullspace()
}

/// Affine solution set `{particular + span(kernel)}` of `m x = b`.
#[derive(Clone, Debug)]
pub struct AffineSolution<E> {
    pub particular: Vec<E>,
    pub kernel: Vec<Vec<E>>,
}

/// Solves `m x = b`; `None` when the system is inconsistent.
pub fn solve<F: Field>(field: &F, m: &SparseMatrix<F::Elem>, b: &[F::Elem]) -> Option<AffineSolution<F::Elem>> {
    assert_eq!(b.len(), m.rows.len());
    let n = m.ncols;
    let mut e = Echelon::new(field.clone(), n + 1);
    let mut order: Vec<usize> = (0..m.rows.len()).collect();
    order.sort_by_key(|&i| m.rows[i].len());
    for i in order {
        let mut row = m.rows[i].clone();
        if !field.is_zero(&b[i]) {
            row.push((n, b[i].clone()));
        }
        if e.insert(&row) == Some(n) {
            return None;
        }
    }
    // Augmented rows annihilate (x, -1), so a pivot row
    // x_p + sum a_j x_j + c * [rhs column] reads x_p + sum a_j x_j = c.
    let mut rhs = BTreeMap::new();
    for (&p, row) in &e.pivots {
        if let Some((_, c)) = row.iter().find(|(j, _)| *j == n) {
            rhs.insert(p, c.clone());
        }
    }
    let particular = e.back_substitute(&BTreeMap::new(), &rhs, n);
    let kernel = e.nullspace_upto(n);
    Some(AffineSolution { particular, kernel })
}

/// Rank of a family of dense vectors restricted to the coordinates `coords`.
pub fn projected_rank<F: Field>(field: &F, vectors: &[Vec<F::Elem>], coords: &[usize]) -> usize {
    let mut e = Echelon::new(field.clone(), coords.len());
    for v in vectors {
        let row: SparseRow<F::Elem> = coords
            .iter()
            .enumerate()
            .filter(|(_, &c)| !field.is_zero(&v[c]))
            .map(|(k, &c)| (k, v[c].clone()))
            .collect();
        e.insert(&row);
    }
    e.rank()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{PrimeField, Rationals};
    use crate::rational::{q, qi, Q};

    fn mat(rows: &[&[i64]]) -> SparseMatrix<Q> {
        let mut m = SparseMatrix::new(rows[0].len());
        for r in rows {
            m.push_row(r.iter().enumerate().filter(|(_, v)| **v != 0).map(|(j, v)| (j, qi(*v))).collect());
        }
        m
    }

    #[test]
    fn rank_and_nullspace_of_tridiagonal_slice() {
        // second difference operator from 5 columns to 3 rows
        let m = mat(&[&[-1, 2, -1, 0, 0], &[0, -1, 2, -1, 0], &[0, 0, -1, 2, -1]]);
        let f = Rationals;
        assert_eq!(rank(&f, &m), 3);
        let ns = nullspace(&f, &m);
        assert_eq!(ns.len(), 2);
        for v in &ns {
            assert!(m.mul_vec(&f, v).iter().all(|x| x == &qi(0)));
        }
    }

    #[test]
    fn solve_reports_inconsistency() {
        let m = mat(&[&[1, 1], &[2, 2]]);
        assert!(solve(&Rationals, &m, &[qi(1), qi(3)]).is_none());
        let sol = solve(&Rationals, &m, &[qi(1), qi(2)]).unwrap();
        assert_eq!(m.mul_vec(&Rationals, &sol.particular), vec![qi(1), qi(2)]);
        assert_eq!(sol.kernel.len(), 1);
    }

    #[test]
    fn solve_unique_rational() {
        let m = mat(&[&[2, 1], &[1, 3]]);
        let sol = solve(&Rationals, &m, &[qi(1), qi(0)]).unwrap();
        assert_eq!(sol.particular, vec![q(3, 5), q(-1, 5)]);
        assert!(sol.kernel.is_empty());
    }

    #[test]
    fn gf2_rank() {
        let f = PrimeField::new(2).unwrap();
        let mut m = SparseMatrix::new(3);
        m.push_row(vec![(0, 1u64), (1, 1)]);
        m.push_row(vec![(1, 1u64), (2, 1)]);
        m.push_row(vec![(0, 1u64), (2, 1)]);
        assert_eq!(rank(&f, &m), 2);
    }

    #[test]
    fn projected_rank_counts_restricted_span() {
        let f = Rationals;
        let vs = vec![vec![qi(1), qi(0), qi(5)], vec![qi(2), qi(0), qi(7)]];
        assert_eq!(projected_rank(&f, &vs, &[0, 1]), 1);
        assert_eq!(projected_rank(&f, &vs, &[0, 2]), 2);
    }
}
