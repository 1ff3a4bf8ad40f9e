//! Sparse LU factorization with Markowitz pivoting.
//!
//! Pivots minimise the Markowitz count `(r_i - 1)(c_j - 1)` over the active
//! submatrix, restricted to entries passing a threshold test
//! `|a_ij| >= PIVOT_THRESHOLD * max_k |a_kj|`. Rows and columns are kept in
//! buckets keyed by their current nonzero count so the search only touches
//! the sparsest lines: once the best cost found is `<= (k-1)^2`, no entry in
//! a row or column with `>= k` nonzeros can beat it.
//!
//! The factors satisfy `P_row A P_col = L U` with `L` unit lower triangular.

use num_complex::Complex64;
use thiserror::Error;

use crate::sparse::CscMatrix;

/// Relative magnitude a pivot must reach within its column.
pub const PIVOT_THRESHOLD: f64 = 0.1;
/// Absolute floor below which no entry is accepted as a pivot.
pub const PIVOT_FLOOR: f64 = 1e-13;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LuError {
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error(
        "no admissible pivot at elimination step {step} (all candidates below {PIVOT_FLOOR:e})"
    )]
    ZeroPivot { step: usize },
    #[error("structurally singular at elimination step {step}")]
    StructurallySingular { step: usize },
    #[error("right-hand side has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Items bucketed by nonzero count, with O(1) moves between buckets.
struct CountBuckets {
    heads: Vec<Vec<usize>>,
    pos: Vec<usize>,
    count: Vec<usize>,
    live: Vec<bool>,
}

impl CountBuckets {
    fn new(counts: impl Iterator<Item = usize>, max_count: usize) -> Self {
        let mut b = CountBuckets {
            heads: vec![Vec::new(); max_count + 1],
            pos: Vec::new(),
            count: Vec::new(),
            live: Vec::new(),
        };
        for (item, c) in counts.enumerate() {
            b.pos.push(0);
            b.count.push(0);
            b.live.push(false);
            b.insert(item, c);
        }
        b
    }

    fn insert(&mut self, item: usize, count: usize) {
        if count >= self.heads.len() {
            self.heads.resize(count + 1, Vec::new());
        }
        self.pos[item] = self.heads[count].len();
        self.heads[count].push(item);
        self.count[item] = count;
        self.live[item] = true;
    }

    fn remove(&mut self, item: usize) {
        if !self.live[item] {
            return;
        }
        let bucket = &mut self.heads[self.count[item]];
        let p = self.pos[item];
        bucket.swap_remove(p);
        if p < bucket.len() {
            self.pos[bucket[p]] = p;
        }
        self.live[item] = false;
    }

    fn set(&mut self, item: usize, count: usize) {
        if self.live[item] && self.count[item] == count {
            return;
        }
        self.remove(item);
        self.insert(item, count);
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    cost: usize,
    ratio: f64,
    row: usize,
    col: usize,
    value: Complex64,
}

impl Candidate {
    fn beats(&self, other: &Option<Candidate>) -> bool {
        match other {
            None => true,
            Some(o) => self.cost < o.cost || (self.cost == o.cost && self.ratio > o.ratio),
        }
    }
}

/// Active submatrix during elimination: values stored by row, patterns by column.
struct ActiveMatrix {
    rows: Vec<Vec<(usize, Complex64)>>,
    cols: Vec<Vec<usize>>,
}

impl ActiveMatrix {
    fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.rows[i].iter().find(|e| e.0 == j).map_or(ZERO, |e| e.1)
    }

    fn col_max(&self, j: usize) -> f64 {
        self.cols[j]
            .iter()
            .map(|&i| self.entry(i, j).norm())
            .fold(0.0, f64::max)
    }

    fn admissible(&self, value: Complex64, col_max: f64) -> Option<f64> {
        let mag = value.norm();
        (mag >= PIVOT_FLOOR && mag >= PIVOT_THRESHOLD * col_max).then(|| mag / col_max)
    }
}

/// LU factors of a square sparse matrix. Immutable once built; solves may run
/// concurrently against shared factors.
#[derive(Debug, Clone)]
pub struct LuFactors {
    n: usize,
    row_perm: Vec<usize>,
    col_perm: Vec<usize>,
    // strictly lower part of L, by column, in pivot coordinates
    l_ptr: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<Complex64>,
    // strictly upper part of U, by row, in pivot coordinates
    u_ptr: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<Complex64>,
    u_diag: Vec<Complex64>,
    fill_in_count: usize,
}

impl LuFactors {
    pub fn factorize(a: &CscMatrix) -> Result<LuFactors, LuError> {
        if a.nrows() != a.ncols() {
            return Err(LuError::NotSquare {
                rows: a.nrows(),
                cols: a.ncols(),
            });
        }
        let n = a.nrows();
        let mut m = ActiveMatrix {
            rows: vec![Vec::new(); n],
            cols: vec![Vec::new(); n],
        };
        for (i, j, v) in a.iter() {
            m.rows[i].push((j, v));
            m.cols[j].push(i);
        }
        let mut row_b = CountBuckets::new(m.rows.iter().map(Vec::len), n);
        let mut col_b = CountBuckets::new(m.cols.iter().map(Vec::len), n);

        let mut row_perm = Vec::with_capacity(n);
        let mut col_perm = Vec::with_capacity(n);
        let mut l_cols: Vec<Vec<(usize, Complex64)>> = Vec::with_capacity(n);
        let mut u_rows: Vec<Vec<(usize, Complex64)>> = Vec::with_capacity(n);
        let mut u_diag = Vec::with_capacity(n);
        let mut fill_in_count = 0;

        for step in 0..n {
            if !row_b.heads[0].is_empty() || !col_b.heads[0].is_empty() {
                return Err(LuError::StructurallySingular { step });
            }
            let pivot =
                Self::select_pivot(&m, &row_b, &col_b).ok_or(LuError::ZeroPivot { step })?;
            let (p, q) = (pivot.row, pivot.col);

            let prow = std::mem::take(&mut m.rows[p]);
            for &(j, _) in &prow {
                if j != q {
                    let col = &mut m.cols[j];
                    let at = col.iter().position(|&r| r == p).expect("pattern in sync");
                    col.swap_remove(at);
                }
            }
            let mut elim_rows = std::mem::take(&mut m.cols[q]);
            elim_rows.retain(|&i| i != p);
            row_b.remove(p);
            col_b.remove(q);

            let mut l_col = Vec::with_capacity(elim_rows.len());
            for &i in &elim_rows {
                let at = m.rows[i]
                    .iter()
                    .position(|e| e.0 == q)
                    .expect("pattern in sync");
                let (_, a_iq) = m.rows[i].swap_remove(at);
                let l = a_iq / pivot.value;
                l_col.push((i, l));
                for &(j, a_pj) in &prow {
                    if j == q {
                        continue;
                    }
                    match m.rows[i].iter_mut().find(|e| e.0 == j) {
                        Some(e) => e.1 -= l * a_pj,
                        None => {
                            m.rows[i].push((j, -l * a_pj));
                            m.cols[j].push(i);
                            fill_in_count += 1;
                        }
                    }
                }
                row_b.set(i, m.rows[i].len());
            }
            for &(j, _) in &prow {
                if j != q {
                    col_b.set(j, m.cols[j].len());
                }
            }

            row_perm.push(p);
            col_perm.push(q);
            u_diag.push(pivot.value);
            u_rows.push(prow.into_iter().filter(|e| e.0 != q).collect());
            l_cols.push(l_col);
        }

        let mut inv_row = vec![0; n];
        let mut inv_col = vec![0; n];
        for k in 0..n {
            inv_row[row_perm[k]] = k;
            inv_col[col_perm[k]] = k;
        }
        let (l_ptr, l_idx, l_val) = compress(l_cols, &inv_row);
        let (u_ptr, u_idx, u_val) = compress(u_rows, &inv_col);

        Ok(LuFactors {
            n,
            row_perm,
            col_perm,
            l_ptr,
            l_idx,
            l_val,
            u_ptr,
            u_idx,
            u_val,
            u_diag,
            fill_in_count,
        })
    }

    fn select_pivot(
        m: &ActiveMatrix,
        row_b: &CountBuckets,
        col_b: &CountBuckets,
    ) -> Option<Candidate> {
        let mut best: Option<Candidate> = None;
        let max_k = row_b.heads.len().max(col_b.heads.len());
        for k in 1..max_k {
            let bound = (k - 1) * (k - 1);
            if best.is_some_and(|b| b.cost <= bound) {
                break;
            }
            if let Some(bucket) = col_b.heads.get(k) {
                for &j in bucket {
                    let cmax = m.col_max(j);
                    for &i in &m.cols[j] {
                        let v = m.entry(i, j);
                        if let Some(ratio) = m.admissible(v, cmax) {
                            let cand = Candidate {
                                cost: (m.rows[i].len() - 1) * (k - 1),
                                ratio,
                                row: i,
                                col: j,
                                value: v,
                            };
                            if cand.beats(&best) {
                                best = Some(cand);
                            }
                        }
                    }
                    if best.is_some_and(|b| b.cost <= bound) {
                        return best;
                    }
                }
            }
            if let Some(bucket) = row_b.heads.get(k) {
                for &i in bucket {
                    for &(j, v) in &m.rows[i] {
                        let cmax = m.col_max(j);
                        if let Some(ratio) = m.admissible(v, cmax) {
                            let cand = Candidate {
                                cost: (k - 1) * (m.cols[j].len() - 1),
                                ratio,
                                row: i,
                                col: j,
                                value: v,
                            };
                            if cand.beats(&best) {
                                best = Some(cand);
                            }
                        }
                    }
                    if best.is_some_and(|b| b.cost <= bound) {
                        return best;
                    }
                }
            }
        }
        best
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Fill entries created during elimination.
    pub fn fill_in_count(&self) -> usize {
        self.fill_in_count
    }

    /// `row_perm()[k]` is the original row eliminated at step `k`.
    pub fn row_perm(&self) -> &[usize] {
        &self.row_perm
    }

    /// `col_perm()[k]` is the original column eliminated at step `k`.
    pub fn col_perm(&self) -> &[usize] {
        &self.col_perm
    }

    /// Unit lower triangular factor in pivot coordinates.
    pub fn lower(&self) -> CscMatrix {
        let mut t: Vec<_> = (0..self.n)
            .map(|k| (k, k, Complex64::new(1.0, 0.0)))
            .collect();
        for k in 0..self.n {
            for p in self.l_ptr[k]..self.l_ptr[k + 1] {
                t.push((self.l_idx[p], k, self.l_val[p]));
            }
        }
        CscMatrix::from_triplets(self.n, self.n, &t)
    }

    /// Upper triangular factor in pivot coordinates.
    pub fn upper(&self) -> CscMatrix {
        let mut t: Vec<_> = self
            .u_diag
            .iter()
            .enumerate()
            .map(|(k, &d)| (k, k, d))
            .collect();
        for k in 0..self.n {
            for p in self.u_ptr[k]..self.u_ptr[k + 1] {
                t.push((k, self.u_idx[p], self.u_val[p]));
            }
        }
        CscMatrix::from_triplets(self.n, self.n, &t)
    }

    pub fn solve(&self, rhs: &[Complex64]) -> Result<Vec<Complex64>, LuError> {
        if rhs.len() != self.n {
            return Err(LuError::DimensionMismatch {
                expected: self.n,
                got: rhs.len(),
            });
        }
        let mut y: Vec<Complex64> = self.row_perm.iter().map(|&r| rhs[r]).collect();
        for k in 0..self.n {
            let yk = y[k];
            if yk != ZERO {
                for p in self.l_ptr[k]..self.l_ptr[k + 1] {
                    y[self.l_idx[p]] -= self.l_val[p] * yk;
                }
            }
        }
        for k in (0..self.n).rev() {
            let mut acc = y[k];
            for p in self.u_ptr[k]..self.u_ptr[k + 1] {
                acc -= self.u_val[p] * y[self.u_idx[p]];
            }
            y[k] = acc / self.u_diag[k];
        }
        let mut x = vec![ZERO; self.n];
        for (k, &c) in self.col_perm.iter().enumerate() {
            x[c] = y[k];
        }
        Ok(x)
    }

    /// Solves for each column of `rhs_columns`.
    pub fn solve_many(
        &self,
        rhs_columns: &[Vec<Complex64>],
    ) -> Result<Vec<Vec<Complex64>>, LuError> {
        rhs_columns.iter().map(|col| self.solve(col)).collect()
    }
}

fn compress(
    lists: Vec<Vec<(usize, Complex64)>>,
    remap: &[usize],
) -> (Vec<usize>, Vec<usize>, Vec<Complex64>) {
    let mut ptr = Vec::with_capacity(lists.len() + 1);
    let mut idx = Vec::new();
    let mut val = Vec::new();
    ptr.push(0);
    for mut list in lists {
        for e in list.iter_mut() {
            e.0 = remap[e.0];
        }
        list.sort_by_key(|e| e.0);
        for (i, v) in list {
            idx.push(i);
            val.push(v);
        }
        ptr.push(idx.len());
    }
    (ptr, idx, val)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn scalar() {
        let y = c(2.0, -3.0);
        let f = LuFactors::factorize(&CscMatrix::from_dense(&[vec![y]])).unwrap();
        assert_eq!(f.lower().to_dense(), vec![vec![c(1.0, 0.0)]]);
        assert_eq!(f.upper().to_dense(), vec![vec![y]]);
        let inv = f.solve_many(&[vec![c(1.0, 0.0)]]).unwrap();
        assert!((inv[0][0] - y.inv()).norm() < 1e-16);
    }

    #[test]
    fn diagonal_has_no_fill() {
        let d: Vec<Vec<Complex64>> = (0..5)
            .map(|i| {
                (0..5)
                    .map(|j| if i == j { c(i as f64 + 1.0, 1.0) } else { ZERO })
                    .collect()
            })
            .collect();
        let f = LuFactors::factorize(&CscMatrix::from_dense(&d)).unwrap();
        assert_eq!(f.fill_in_count(), 0);
    }

    #[test]
    fn empty_rhs_set() {
        let f = LuFactors::factorize(&CscMatrix::from_dense(&[vec![c(1.0, 0.0)]])).unwrap();
        assert!(f.solve_many(&[]).unwrap().is_empty());
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = CscMatrix::from_dense(&[
            vec![c(4.0, -1.0), c(-1.0, 0.5)],
            vec![c(-1.0, 0.5), c(3.0, -2.0)],
        ]);
        let f = LuFactors::factorize(&a).unwrap();
        assert_eq!(f.solve(&[ZERO, ZERO]).unwrap(), vec![ZERO, ZERO]);
    }

    #[test]
    fn dimension_mismatch() {
        let f = LuFactors::factorize(&CscMatrix::from_dense(&[vec![c(1.0, 0.0)]])).unwrap();
        assert_eq!(
            f.solve(&[ZERO, ZERO]),
            Err(LuError::DimensionMismatch {
                expected: 1,
                got: 2
            })
        );
    }

    #[test]
    fn singular_matrices_are_rejected() {
        let zero_col = CscMatrix::from_triplets(2, 2, &[(0, 0, c(1.0, 0.0)), (1, 0, c(1.0, 0.0))]);
        assert!(matches!(
            LuFactors::factorize(&zero_col),
            Err(LuError::StructurallySingular { .. })
        ));
        let rank_one = CscMatrix::from_dense(&[
            vec![c(1.0, 0.0), c(2.0, 0.0)],
            vec![c(2.0, 0.0), c(4.0, 0.0)],
        ]);
        assert!(matches!(
            LuFactors::factorize(&rank_one),
            Err(LuError::ZeroPivot { step: 1 })
        ));
        let rect = CscMatrix::from_triplets(2, 3, &[]);
        assert!(matches!(
            LuFactors::factorize(&rect),
            Err(LuError::NotSquare { .. })
        ));
    }

    #[test]
    fn needs_off_diagonal_pivot() {
        // zero diagonal: forces row/column permutation
        let a = CscMatrix::from_dense(&[vec![ZERO, c(2.0, 1.0)], vec![c(3.0, 0.0), c(1.0, 0.0)]]);
        let f = LuFactors::factorize(&a).unwrap();
        let x = f.solve(&[c(2.0, 1.0), c(4.0, 0.0)]).unwrap();
        assert!((x[0] - c(1.0, 0.0)).norm() < 1e-14);
        assert!((x[1] - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn buckets_track_moves() {
        let mut b = CountBuckets::new([2, 2, 3].into_iter(), 3);
        b.set(0, 1);
        assert_eq!(b.heads[1], vec![0]);
        assert_eq!(b.heads[2], vec![1]);
        b.remove(1);
        b.remove(1);
        assert!(b.heads[2].is_empty());
        b.set(2, 5);
        assert_eq!(b.heads[5], vec![2]);
    }
}
