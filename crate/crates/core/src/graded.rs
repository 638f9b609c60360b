//! Integer-graded rational vector spaces, degree-homogeneous sparse maps,
//! cochain complexes and their cohomology over Q.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{EngineError, Result};
use crate::scalar::Rat;
use crate::sparse::SparseMat;

/// Finite-dimensional graded vector space: finitely many nonzero degrees.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GradedSpace {
    dims: BTreeMap<i64, usize>,
}

impl GradedSpace {
    pub fn new(dims: impl IntoIterator<Item = (i64, usize)>) -> Self {
        GradedSpace {
            dims: dims.into_iter().filter(|(_, d)| *d > 0).collect(),
        }
    }

    pub fn concentrated(degree: i64, dim: usize) -> Self {
        Self::new([(degree, dim)])
    }

    pub fn dim(&self, degree: i64) -> usize {
        self.dims.get(&degree).cloned().unwrap_or(0)
    }

    pub fn total_dim(&self) -> usize {
        self.dims.values().sum()
    }

    pub fn degrees(&self) -> impl Iterator<Item = i64> + '_ {
        self.dims.keys().cloned()
    }

    pub fn min_degree(&self) -> Option<i64> {
        self.dims.keys().next().cloned()
    }

    pub fn max_degree(&self) -> Option<i64> {
        self.dims.keys().last().cloned()
    }
}

/// Degree-homogeneous map between graded spaces: the block at source degree
/// `d` lands in target degree `d + degree`.
#[derive(Clone, Debug, PartialEq)]
pub struct GradedMap {
    pub source: GradedSpace,
    pub target: GradedSpace,
    pub degree: i64,
    blocks: BTreeMap<i64, SparseMat>,
}

impl GradedMap {
    pub fn zero(source: GradedSpace, target: GradedSpace, degree: i64) -> Self {
        GradedMap {
            source,
            target,
            degree,
            blocks: BTreeMap::new(),
        }
    }

    pub fn identity(space: &GradedSpace) -> Self {
        let mut m = GradedMap::zero(space.clone(), space.clone(), 0);
        for d in space.degrees() {
            m.blocks.insert(d, SparseMat::identity(space.dim(d)));
        }
        m
    }

    pub fn set_block(&mut self, source_degree: i64, block: SparseMat) -> Result<()> {
        let (sr, tr) = (
            self.source.dim(source_degree),
            self.target.dim(source_degree + self.degree),
        );
        if block.rows != tr || block.cols != sr {
            return Err(EngineError::Shape(format!(
                "block at degree {source_degree} must be {tr}x{sr}, got {}x{}",
                block.rows, block.cols
            )));
        }
        if block.is_zero() {
            self.blocks.remove(&source_degree);
        } else {
            self.blocks.insert(source_degree, block);
        }
        Ok(())
    }

    pub fn block(&self, source_degree: i64) -> SparseMat {
        self.blocks.get(&source_degree).cloned().unwrap_or_else(|| {
            SparseMat::zero(
                self.target.dim(source_degree + self.degree),
                self.source.dim(source_degree),
            )
        })
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.values().all(|b| b.is_zero())
    }

    pub fn compose(&self, inner: &GradedMap) -> Result<GradedMap> {
        if inner.target != self.source {
            return Err(EngineError::Shape("graded composition mismatch".into()));
        }
        let mut out = GradedMap::zero(
            inner.source.clone(),
            self.target.clone(),
            self.degree + inner.degree,
        );
        for d in inner.source.degrees() {
            let first = inner.block(d);
            let second = self.block(d + inner.degree);
            let prod = second.mul(&first)?;
            if !prod.is_zero() {
                out.blocks.insert(d, prod);
            }
        }
        Ok(out)
    }

    pub fn add(&self, rhs: &GradedMap) -> Result<GradedMap> {
        if self.source != rhs.source || self.target != rhs.target || self.degree != rhs.degree {
            return Err(EngineError::Shape("graded sum mismatch".into()));
        }
        let mut out = GradedMap::zero(self.source.clone(), self.target.clone(), self.degree);
        let degrees: std::collections::BTreeSet<i64> = self
            .blocks
            .keys()
            .chain(rhs.blocks.keys())
            .cloned()
            .collect();
        for d in degrees {
            let sum = self.block(d).add(&rhs.block(d))?;
            if !sum.is_zero() {
                out.blocks.insert(d, sum);
            }
        }
        Ok(out)
    }

    pub fn scale(&self, c: &Rat) -> GradedMap {
        let mut out = GradedMap::zero(self.source.clone(), self.target.clone(), self.degree);
        for (d, b) in &self.blocks {
            let s = b.scale(c);
            if !s.is_zero() {
                out.blocks.insert(*d, s);
            }
        }
        out
    }
}

/// Report entry of a square-zero violation.
#[derive(Clone, Debug, Serialize)]
pub struct SquareZeroFailure {
    pub degree: i64,
    pub witness_column: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SquareZeroReport {
    pub failures: Vec<SquareZeroFailure>,
}

impl SquareZeroReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// A complex of finite-dimensional rational spaces indexed by a contiguous
/// degree window; `d[n]` maps degree `n` to `n + 1`.
#[derive(Clone, Debug)]
pub struct CochainComplex {
    dims: BTreeMap<i64, usize>,
    diffs: BTreeMap<i64, SparseMat>,
}

impl CochainComplex {
    pub fn new() -> Self {
        CochainComplex {
            dims: BTreeMap::new(),
            diffs: BTreeMap::new(),
        }
    }

    pub fn set_space(&mut self, degree: i64, dim: usize) {
        self.dims.insert(degree, dim);
    }

    pub fn dim(&self, degree: i64) -> usize {
        self.dims.get(&degree).cloned().unwrap_or(0)
    }

    pub fn set_differential(&mut self, degree: i64, d: SparseMat) -> Result<()> {
        if d.rows != self.dim(degree + 1) || d.cols != self.dim(degree) {
            return Err(EngineError::Shape(format!(
                "differential at degree {degree} must be {}x{}, got {}x{}",
                self.dim(degree + 1),
                self.dim(degree),
                d.rows,
                d.cols
            )));
        }
        self.diffs.insert(degree, d);
        Ok(())
    }

    pub fn differential(&self, degree: i64) -> SparseMat {
        self.diffs
            .get(&degree)
            .cloned()
            .unwrap_or_else(|| SparseMat::zero(self.dim(degree + 1), self.dim(degree)))
    }

    pub fn degrees(&self) -> impl Iterator<Item = i64> + '_ {
        self.dims.keys().cloned()
    }

    /// Checks `d∘d = 0` for every pair of consecutive differentials present,
    /// reporting a witness column for each failure.
    pub fn check_square_zero(&self) -> Result<SquareZeroReport> {
        let mut failures = Vec::new();
        for (&n, d_n) in &self.diffs {
            if let Some(d_next) = self.diffs.get(&(n + 1)) {
                if d_next.cols != d_n.rows {
                    return Err(EngineError::Shape(format!(
                        "differentials at degrees {n} and {} do not chain",
                        n + 1
                    )));
                }
                let prod = d_next.mul(d_n)?;
                if !prod.is_zero() {
                    failures.push(SquareZeroFailure {
                        degree: n,
                        witness_column: prod.first_nonzero_column().unwrap_or(0),
                    });
                }
            }
        }
        Ok(SquareZeroReport { failures })
    }

    /// Exact cohomology dimensions over the requested degree window.
    /// Requires square-zero on the window (checked one degree beyond each
    /// end where differentials exist).
    pub fn cohomology(&self, from: i64, to: i64) -> Result<CohomologyReport> {
        let sq = self.check_square_zero()?;
        if let Some(f) = sq
            .failures
            .iter()
            .find(|f| f.degree >= from - 1 && f.degree <= to + 1)
        {
            return Err(EngineError::Model(format!(
                "square-zero violation at degree {} (witness column {})",
                f.degree, f.witness_column
            )));
        }
        let mut entries = Vec::new();
        for n in from..=to {
            let dim_n = self.dim(n);
            let rank_n = if self.dim(n + 1) == 0 {
                0
            } else {
                self.differential(n).rank()
            };
            let rank_prev = if n == i64::MIN || self.dim(n - 1) == 0 {
                0
            } else {
                self.differential(n - 1).rank()
            };
            let ker = dim_n - rank_n;
            entries.push(CohomologyEntry {
                degree: n,
                ker,
                im: rank_prev,
                h: ker - rank_prev,
            });
        }
        Ok(CohomologyReport { entries })
    }
}

impl Default for CochainComplex {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct CohomologyEntry {
    pub degree: i64,
    pub ker: usize,
    pub im: usize,
    #[serde(rename = "H")]
    pub h: usize,
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct CohomologyReport {
    pub entries: Vec<CohomologyEntry>,
}

impl CohomologyReport {
    pub fn dim(&self, degree: i64) -> Option<usize> {
        self.entries
            .iter()
            .find(|e| e.degree == degree)
            .map(|e| e.h)
    }

    pub fn dims(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.h).collect()
    }
}

/// Decides whether a degree-0 chain map `f0` between two-sided complexes
/// `(E, de)` and `(F, df)` (differentials of degree +1) induces an
/// isomorphism on cohomology in every degree.
pub fn fiber_quasi_iso(de: &GradedMap, df: &GradedMap, f0: &GradedMap) -> Result<bool> {
    use crate::sparse::SparseMat;
    let degrees: std::collections::BTreeSet<i64> = de
        .source
        .degrees()
        .chain(df.source.degrees())
        .collect();
    for d in degrees {
        let de_d = de.block(d);
        let de_prev = de.block(d - 1);
        let df_d = df.block(d);
        let df_prev = df.block(d - 1);
        let h_e = (de.source.dim(d) - de_d.rank()) - de_prev.rank();
        let h_f = (df.source.dim(d) - df_d.rank()) - df_prev.rank();
        if h_e != h_f {
            return Ok(false);
        }
        let ker_e = de_d.kernel_basis();
        if ker_e.is_empty() {
            continue;
        }
        let ker_mat = SparseMat::from_columns(de.source.dim(d), &ker_e);
        let image = f0.block(d).mul(&ker_mat)?;
        let aug = image.hcat(&df_prev)?;
        let induced_rank = aug.rank() - df_prev.rank();
        if ker_e.len() - induced_rank != de_prev.rank() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Sign produced when a degree-`a` symbol moves past a degree-`b` symbol.
pub fn koszul_sign(deg_a: i64, deg_b: i64) -> i64 {
    if (deg_a * deg_b) % 2 == 0 {
        1
    } else {
        -1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{rat, rat_int};
    use num_traits::Zero;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn koszul_signs() {
        assert_eq!(koszul_sign(1, 1), -1);
        assert_eq!(koszul_sign(0, 7), 1);
        assert_eq!(koszul_sign(2, 3), 1);
        assert_eq!(koszul_sign(-1, 1), -1);
    }

    #[test]
    fn two_term_identity_complex_is_acyclic() {
        let mut c = CochainComplex::new();
        c.set_space(0, 1);
        c.set_space(1, 1);
        c.set_differential(0, SparseMat::identity(1)).unwrap();
        let rep = c.cohomology(0, 1).unwrap();
        assert_eq!(rep.dims(), vec![0, 0]);
    }

    #[test]
    fn zero_differentials_pass_square_zero() {
        let mut c = CochainComplex::new();
        for n in 0..4 {
            c.set_space(n, 2);
        }
        for n in 0..3 {
            c.set_differential(n, SparseMat::zero(2, 2)).unwrap();
        }
        assert!(c.check_square_zero().unwrap().passed());
        let rep = c.cohomology(0, 3).unwrap();
        assert_eq!(rep.dims(), vec![2, 2, 2, 2]);
    }

    #[test]
    fn corrupted_differential_fails_with_witness() {
        let mut c = CochainComplex::new();
        c.set_space(0, 1);
        c.set_space(1, 1);
        c.set_space(2, 1);
        c.set_differential(0, SparseMat::identity(1)).unwrap();
        c.set_differential(1, SparseMat::identity(1)).unwrap();
        let rep = c.check_square_zero().unwrap();
        assert!(!rep.passed());
        assert_eq!(rep.failures[0].degree, 0);
        assert_eq!(rep.failures[0].witness_column, 0);
        assert!(c.cohomology(0, 2).is_err());
    }

    fn random_complex(rng: &mut StdRng) -> CochainComplex {
        // build a genuine complex as d = B∘A with A: C0->M, B: M->C2 chosen
        // with B∘A = 0 is fiddly; instead conjugate a zero differential:
        // start from dims and d_n = 0 except one arbitrary map into a fresh
        // summand, which always squares to zero when supports are disjoint.
        let mut c = CochainComplex::new();
        let dims: Vec<usize> = (0..4).map(|_| rng.gen_range(1..=4)).collect();
        for (n, &d) in dims.iter().enumerate() {
            c.set_space(n as i64, d);
        }
        // alternating zero map/random map pattern squares to zero
        for n in 0..3 {
            if n % 2 == 0 {
                let mut dense = vec![Rat::zero(); dims[n + 1] * dims[n]];
                for v in dense.iter_mut() {
                    if rng.gen_bool(0.5) {
                        *v = rat_int(rng.gen_range(-2..=2));
                    }
                }
                c.set_differential(n as i64, SparseMat::from_dense(dims[n + 1], dims[n], &dense))
                    .unwrap();
            }
        }
        c
    }

    #[test]
    fn euler_characteristic_matches_alternating_sum() {
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..30 {
            let c = random_complex(&mut rng);
            let rep = c.cohomology(0, 3).unwrap();
            let mut euler_h = 0i64;
            let mut euler_c = 0i64;
            for n in 0..4i64 {
                let sign = if n % 2 == 0 { 1 } else { -1 };
                euler_h += sign * rep.dim(n).unwrap() as i64;
                euler_c += sign * c.dim(n) as i64;
            }
            assert_eq!(euler_h, euler_c);
        }
    }

    /// Random invertible degree-0 change of basis preserves cohomology.
    #[test]
    fn gauge_conjugation_preserves_dimensions() {
        let mut rng = StdRng::seed_from_u64(9);
        for _ in 0..20 {
            let c = random_complex(&mut rng);
            let mut t: Vec<SparseMat> = Vec::new();
            for n in 0..4i64 {
                let d = c.dim(n);
                // random upper-triangular with unit diagonal: invertible
                let mut dense = vec![Rat::zero(); d * d];
                for i in 0..d {
                    dense[i * d + i] = rat_int(1);
                    for j in (i + 1)..d {
                        if rng.gen_bool(0.5) {
                            dense[i * d + j] = rat(rng.gen_range(-2..=2), rng.gen_range(1..=2));
                        }
                    }
                }
                t.push(SparseMat::from_dense(d, d, &dense));
            }
            // inverse via kernel-free rref solve: for triangular unit-diag,
            // use Neumann series N = I - T nilpotent.
            let mut conj = CochainComplex::new();
            for n in 0..4i64 {
                conj.set_space(n, c.dim(n));
            }
            for n in 0..3i64 {
                let tinv = invert_unitriangular(&t[n as usize]);
                let d = t[(n + 1) as usize]
                    .mul(&c.differential(n))
                    .unwrap()
                    .mul(&tinv)
                    .unwrap();
                conj.set_differential(n, d).unwrap();
            }
            assert_eq!(
                c.cohomology(0, 3).unwrap().dims(),
                conj.cohomology(0, 3).unwrap().dims()
            );
        }
    }

    fn invert_unitriangular(t: &SparseMat) -> SparseMat {
        let n = t.rows;
        let nmat = SparseMat::identity(n).add(&t.scale(&-rat_int(1))).unwrap();
        let mut inv = SparseMat::identity(n);
        let mut power = SparseMat::identity(n);
        for _ in 0..n {
            power = power.mul(&nmat).unwrap();
            if power.is_zero() {
                break;
            }
            inv = inv.add(&power).unwrap();
        }
        inv
    }

    #[test]
    fn graded_map_compose_respects_degrees() {
        let a = GradedSpace::new([(0, 2), (1, 1)]);
        let mut f = GradedMap::zero(a.clone(), a.clone(), 1);
        f.set_block(0, SparseMat::from_dense(1, 2, &[rat_int(1), rat_int(2)]))
            .unwrap();
        let ff = f.compose(&f).unwrap();
        assert_eq!(ff.degree, 2);
        assert!(ff.is_zero());
        let id = GradedMap::identity(&a);
        assert_eq!(id.compose(&f).unwrap(), f);
    }
}
