//! Exact sparse linear algebra over the rationals: coordinate-format
//! matrices, fraction-free rank, reduced echelon form, kernel bases.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::error::{EngineError, Result};
use crate::scalar::{clear_denominators, Rat};

/// Sparse rational matrix, canonicalized row-major coordinate triplets with
/// no explicit zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMat {
    pub rows: usize,
    pub cols: usize,
    entries: Vec<(usize, usize, Rat)>,
}

impl SparseMat {
    pub fn zero(rows: usize, cols: usize) -> Self {
        SparseMat {
            rows,
            cols,
            entries: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        SparseMat {
            rows: n,
            cols: n,
            entries: (0..n).map(|i| (i, i, Rat::one())).collect(),
        }
    }

    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, Rat)>,
    ) -> Result<Self> {
        let mut map: BTreeMap<(usize, usize), Rat> = BTreeMap::new();
        for (r, c, v) in triplets {
            if r >= rows || c >= cols {
                return Err(EngineError::Shape(format!(
                    "entry ({r},{c}) outside {rows}x{cols}"
                )));
            }
            let e = map.entry((r, c)).or_insert_with(Rat::zero);
            *e += v;
        }
        Ok(SparseMat {
            rows,
            cols,
            entries: map
                .into_iter()
                .filter(|(_, v)| !v.is_zero())
                .map(|((r, c), v)| (r, c, v))
                .collect(),
        })
    }

    pub fn from_dense(rows: usize, cols: usize, data: &[Rat]) -> Self {
        let mut entries = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let v = &data[r * cols + c];
                if !v.is_zero() {
                    entries.push((r, c, v.clone()));
                }
            }
        }
        SparseMat {
            rows,
            cols,
            entries,
        }
    }

    pub fn entries(&self) -> &[(usize, usize, Rat)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, r: usize, c: usize) -> Rat {
        match self
            .entries
            .binary_search_by(|(er, ec, _)| (er, ec).cmp(&(&r, &c)))
        {
            Ok(i) => self.entries[i].2.clone(),
            Err(_) => Rat::zero(),
        }
    }

    pub fn transpose(&self) -> SparseMat {
        let mut entries: Vec<(usize, usize, Rat)> = self
            .entries
            .iter()
            .map(|(r, c, v)| (*c, *r, v.clone()))
            .collect();
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        SparseMat {
            rows: self.cols,
            cols: self.rows,
            entries,
        }
    }

    pub fn add(&self, rhs: &SparseMat) -> Result<SparseMat> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(EngineError::Shape(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        SparseMat::from_triplets(
            self.rows,
            self.cols,
            self.entries
                .iter()
                .cloned()
                .chain(rhs.entries.iter().cloned()),
        )
    }

    pub fn scale(&self, c: &Rat) -> SparseMat {
        if c.is_zero() {
            return SparseMat::zero(self.rows, self.cols);
        }
        SparseMat {
            rows: self.rows,
            cols: self.cols,
            entries: self
                .entries
                .iter()
                .map(|(r, co, v)| (*r, *co, v * c))
                .collect(),
        }
    }

    pub fn mul(&self, rhs: &SparseMat) -> Result<SparseMat> {
        if self.cols != rhs.rows {
            return Err(EngineError::DimensionMismatch {
                expected: self.cols,
                got: rhs.rows,
            });
        }
        // row-major on both sides: bucket rhs rows first
        let mut rhs_rows: Vec<Vec<(usize, &Rat)>> = vec![Vec::new(); rhs.rows];
        for (r, c, v) in &rhs.entries {
            rhs_rows[*r].push((*c, v));
        }
        let mut acc: BTreeMap<(usize, usize), Rat> = BTreeMap::new();
        for (r, k, v) in &self.entries {
            for (c, w) in &rhs_rows[*k] {
                let e = acc.entry((*r, *c)).or_insert_with(Rat::zero);
                *e += v * *w;
            }
        }
        Ok(SparseMat {
            rows: self.rows,
            cols: rhs.cols,
            entries: acc
                .into_iter()
                .filter(|(_, v)| !v.is_zero())
                .map(|((r, c), v)| (r, c, v))
                .collect(),
        })
    }

    pub fn apply(&self, v: &[Rat]) -> Result<Vec<Rat>> {
        if v.len() != self.cols {
            return Err(EngineError::DimensionMismatch {
                expected: self.cols,
                got: v.len(),
            });
        }
        let mut out = vec![Rat::zero(); self.rows];
        for (r, c, w) in &self.entries {
            out[*r] += w * &v[*c];
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> Vec<Rat> {
        let mut d = vec![Rat::zero(); self.rows * self.cols];
        for (r, c, v) in &self.entries {
            d[r * self.cols + c] = v.clone();
        }
        d
    }

    /// First column index whose image is nonzero, used as a witness when a
    /// product that should vanish does not.
    pub fn first_nonzero_column(&self) -> Option<usize> {
        self.entries.iter().map(|(_, c, _)| *c).min()
    }

    /// Exact rank. Rows are cleared to integers and eliminated with
    /// one-step fraction-free pivoting (divisions are exact by the previous
    /// pivot), so no rational arithmetic happens in the inner loop.
    pub fn rank(&self) -> usize {
        let mut rows: Vec<BTreeMap<usize, BigInt>> = vec![BTreeMap::new(); self.rows];
        let mut row_vals: Vec<Vec<(usize, Rat)>> = vec![Vec::new(); self.rows];
        for (r, c, v) in &self.entries {
            row_vals[*r].push((*c, v.clone()));
        }
        for (r, vals) in row_vals.into_iter().enumerate() {
            if vals.is_empty() {
                continue;
            }
            let rats: Vec<Rat> = vals.iter().map(|(_, v)| v.clone()).collect();
            let ints = clear_denominators(&rats);
            for ((c, _), int) in vals.into_iter().zip(ints) {
                if !int.is_zero() {
                    rows[r].insert(c, int);
                }
            }
        }
        fraction_free_rank(rows)
    }

    /// Reduced row-echelon form over Q; returns (rref rows, pivot columns).
    pub fn rref(&self) -> (Vec<BTreeMap<usize, Rat>>, Vec<usize>) {
        let mut rows: Vec<BTreeMap<usize, Rat>> = vec![BTreeMap::new(); self.rows];
        for (r, c, v) in &self.entries {
            rows[*r].insert(*c, v.clone());
        }
        let mut pivots = Vec::new();
        let mut next = 0usize;
        for col in 0..self.cols {
            let Some(p) = (next..rows.len()).find(|&r| rows[r].get(&col).is_some()) else {
                continue;
            };
            rows.swap(next, p);
            let inv = rows[next][&col].recip();
            rows[next] = rows[next]
                .iter()
                .map(|(c, v)| (*c, v * &inv))
                .collect();
            let pivot_row = rows[next].clone();
            for (r, row) in rows.iter_mut().enumerate() {
                if r == next {
                    continue;
                }
                if let Some(f) = row.get(&col).cloned() {
                    for (c, v) in &pivot_row {
                        let e = row.entry(*c).or_insert_with(Rat::zero);
                        *e -= &f * v;
                        if e.is_zero() {
                            row.remove(c);
                        }
                    }
                }
            }
            pivots.push(col);
            next += 1;
            if next == rows.len() {
                break;
            }
        }
        (rows, pivots)
    }

    /// Basis of the right kernel, one dense column per free variable.
    pub fn kernel_basis(&self) -> Vec<Vec<Rat>> {
        let (rows, pivots) = self.rref();
        let pivot_set: std::collections::BTreeSet<usize> = pivots.iter().cloned().collect();
        let mut basis = Vec::new();
        for free in 0..self.cols {
            if pivot_set.contains(&free) {
                continue;
            }
            let mut v = vec![Rat::zero(); self.cols];
            v[free] = Rat::one();
            for (i, &pc) in pivots.iter().enumerate() {
                if let Some(val) = rows[i].get(&free) {
                    v[pc] = -val.clone();
                }
            }
            basis.push(v);
        }
        basis
    }

    /// Horizontal concatenation [self | rhs].
    pub fn hcat(&self, rhs: &SparseMat) -> Result<SparseMat> {
        if self.rows != rhs.rows {
            return Err(EngineError::Shape(format!(
                "hcat {}x{} with {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut entries = self.entries.clone();
        entries.extend(
            rhs.entries
                .iter()
                .map(|(r, c, v)| (*r, c + self.cols, v.clone())),
        );
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        Ok(SparseMat {
            rows: self.rows,
            cols: self.cols + rhs.cols,
            entries,
        })
    }

    pub fn from_columns(rows: usize, cols: &[Vec<Rat>]) -> SparseMat {
        let mut entries = Vec::new();
        for (j, col) in cols.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                if !v.is_zero() {
                    entries.push((i, j, v.clone()));
                }
            }
        }
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        SparseMat {
            rows,
            cols: cols.len(),
            entries,
        }
    }
}

/// Sparse one-step fraction-free elimination (Bareiss update): after each
/// pivot, updated entries are divided by the previous pivot, which is exact
/// and keeps growth polynomial.
fn fraction_free_rank(mut rows: Vec<BTreeMap<usize, BigInt>>) -> usize {
    let mut rank = 0usize;
    let mut prev_pivot = BigInt::one();
    let mut active: Vec<usize> = (0..rows.len()).filter(|&r| !rows[r].is_empty()).collect();
    while !active.is_empty() {
        // pivot choice: sparsest row, then smallest leading column
        let (ai, &ri) = active
            .iter()
            .enumerate()
            .min_by_key(|(_, &r)| (rows[r].len(), *rows[r].keys().next().unwrap()))
            .unwrap();
        let pcol = *rows[ri].keys().next().unwrap();
        let prow = rows[ri].clone();
        let pval = prow[&pcol].clone();
        active.swap_remove(ai);
        rank += 1;
        for &r in &active {
            if let Some(f) = rows[r].get(&pcol).cloned() {
                let mut updated: BTreeMap<usize, BigInt> = BTreeMap::new();
                let mut keys: std::collections::BTreeSet<usize> =
                    rows[r].keys().cloned().collect();
                keys.extend(prow.keys().cloned());
                for c in keys {
                    if c == pcol {
                        continue;
                    }
                    let a = rows[r].get(&c).cloned().unwrap_or_else(BigInt::zero);
                    let b = prow.get(&c).cloned().unwrap_or_else(BigInt::zero);
                    let num = &pval * a - &f * b;
                    if num.is_zero() {
                        continue;
                    }
                    debug_assert!((&num % &prev_pivot).is_zero());
                    updated.insert(c, num / &prev_pivot);
                }
                rows[r] = updated;
            } else {
                // untouched rows still need the Bareiss rescale to stay exact
                // across steps; scaling by pval/prev_pivot preserves rank and
                // integrality.
                let row = rows[r]
                    .iter()
                    .map(|(c, v)| {
                        let num = &pval * v;
                        debug_assert!((&num % &prev_pivot).is_zero());
                        (*c, num / &prev_pivot)
                    })
                    .collect();
                rows[r] = row;
            }
        }
        active.retain(|&r| !rows[r].is_empty());
        prev_pivot = pval;
    }
    rank
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{rat, rat_int};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn rank_examples() {
        assert_eq!(SparseMat::zero(3, 3).rank(), 0);
        assert_eq!(SparseMat::identity(4).rank(), 4);
        let m = SparseMat::from_triplets(
            2,
            2,
            vec![
                (0, 0, rat_int(1)),
                (0, 1, rat_int(2)),
                (1, 0, rat_int(2)),
                (1, 1, rat_int(4)),
            ],
        )
        .unwrap();
        assert_eq!(m.rank(), 1);
    }

    /// Dense textbook Gaussian elimination, kept deliberately naive.
    fn dense_rank_oracle(rows: usize, cols: usize, mut a: Vec<Rat>) -> usize {
        let mut rank = 0;
        let mut row = 0;
        for col in 0..cols {
            let Some(p) = (row..rows).find(|&r| !a[r * cols + col].is_zero()) else {
                continue;
            };
            for c in 0..cols {
                a.swap(row * cols + c, p * cols + c);
            }
            let inv = a[row * cols + col].recip();
            for c in 0..cols {
                let v = &a[row * cols + c] * &inv;
                a[row * cols + c] = v;
            }
            for r in 0..rows {
                if r == row {
                    continue;
                }
                let f = a[r * cols + col].clone();
                if f.is_zero() {
                    continue;
                }
                for c in 0..cols {
                    let v = &a[r * cols + c] - &f * &a[row * cols + c];
                    a[r * cols + c] = v;
                }
            }
            rank += 1;
            row += 1;
            if row == rows {
                break;
            }
        }
        rank
    }

    #[test]
    fn rank_matches_dense_oracle_on_random_sparse() {
        let mut rng = StdRng::seed_from_u64(42);
        for _ in 0..200 {
            let rows = rng.gen_range(1..=30);
            let cols = rng.gen_range(1..=30);
            let mut dense = vec![Rat::zero(); rows * cols];
            let fill = rng.gen_range(0..=(rows * cols / 2).max(1));
            for _ in 0..fill {
                let r = rng.gen_range(0..rows);
                let c = rng.gen_range(0..cols);
                dense[r * cols + c] = rat(rng.gen_range(-6..=6), rng.gen_range(1..=4));
            }
            let m = SparseMat::from_dense(rows, cols, &dense);
            assert_eq!(m.rank(), dense_rank_oracle(rows, cols, dense));
        }
    }

    #[test]
    fn kernel_basis_spans_kernel() {
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..50 {
            let rows = rng.gen_range(1..=8);
            let cols = rng.gen_range(1..=8);
            let mut dense = vec![Rat::zero(); rows * cols];
            for v in dense.iter_mut() {
                if rng.gen_bool(0.4) {
                    *v = rat_int(rng.gen_range(-3..=3));
                }
            }
            let m = SparseMat::from_dense(rows, cols, &dense);
            let basis = m.kernel_basis();
            assert_eq!(basis.len(), cols - m.rank());
            for v in &basis {
                assert!(m.apply(v).unwrap().iter().all(|x| x.is_zero()));
            }
        }
    }

    #[test]
    fn mul_and_transpose() {
        let a = SparseMat::from_triplets(2, 3, vec![(0, 0, rat_int(1)), (1, 2, rat_int(2))]).unwrap();
        let b = SparseMat::from_triplets(3, 2, vec![(0, 1, rat_int(3)), (2, 0, rat_int(-1))]).unwrap();
        let p = a.mul(&b).unwrap();
        assert_eq!(p.get(0, 1), rat_int(3));
        assert_eq!(p.get(1, 0), rat_int(-2));
        assert_eq!(a.transpose().get(2, 1), rat_int(2));
    }
}
