//! Polynomial-valued matrices and graded maps. Structure data of algebroids,
//! connections and representations is stored in this form; a point base is
//! just the empty variable context, so constants ride the same types.

use std::collections::BTreeMap;

use num_traits::Zero;

use crate::error::{EngineError, Result};
use crate::graded::GradedSpace;
use crate::poly::{Poly, VarSet};
use crate::scalar::Rat;
use crate::sparse::SparseMat;

/// Dense matrix of polynomials over a shared variable context. Fibre ranks
/// in this engine are small, so dense storage is the simple right choice.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyMat {
    pub rows: usize,
    pub cols: usize,
    vars: VarSet,
    data: Vec<Poly>,
}

impl PolyMat {
    pub fn zero(vars: VarSet, rows: usize, cols: usize) -> Self {
        PolyMat {
            rows,
            cols,
            data: vec![Poly::zero(vars.clone()); rows * cols],
            vars,
        }
    }

    pub fn identity(vars: VarSet, n: usize) -> Self {
        let mut m = Self::zero(vars.clone(), n, n);
        for i in 0..n {
            m.set(i, i, Poly::one(vars.clone()));
        }
        m
    }

    pub fn from_fn(
        vars: VarSet,
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> Poly,
    ) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        PolyMat {
            rows,
            cols,
            vars,
            data,
        }
    }

    pub fn vars(&self) -> &VarSet {
        &self.vars
    }

    pub fn at(&self, r: usize, c: usize) -> &Poly {
        &self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, p: Poly) {
        self.data[r * self.cols + c] = p;
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|p| p.is_zero())
    }

    pub fn add(&self, rhs: &PolyMat) -> Result<PolyMat> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(EngineError::Shape(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        Ok(PolyMat {
            rows: self.rows,
            cols: self.cols,
            vars: self.vars.clone(),
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a.add(b))
                .collect(),
        })
    }

    pub fn sub(&self, rhs: &PolyMat) -> Result<PolyMat> {
        self.add(&rhs.neg())
    }

    pub fn neg(&self) -> PolyMat {
        PolyMat {
            rows: self.rows,
            cols: self.cols,
            vars: self.vars.clone(),
            data: self.data.iter().map(|p| p.neg()).collect(),
        }
    }

    pub fn mul(&self, rhs: &PolyMat) -> Result<PolyMat> {
        if self.cols != rhs.rows {
            return Err(EngineError::DimensionMismatch {
                expected: self.cols,
                got: rhs.rows,
            });
        }
        let mut out = PolyMat::zero(self.vars.clone(), self.rows, rhs.cols);
        for r in 0..self.rows {
            for c in 0..rhs.cols {
                let mut acc = Poly::zero(self.vars.clone());
                for k in 0..self.cols {
                    acc = acc.add(&self.at(r, k).mul(rhs.at(k, c)));
                }
                out.set(r, c, acc);
            }
        }
        Ok(out)
    }

    pub fn scale(&self, f: &Poly) -> PolyMat {
        PolyMat {
            rows: self.rows,
            cols: self.cols,
            vars: self.vars.clone(),
            data: self.data.iter().map(|p| p.mul(f)).collect(),
        }
    }

    pub fn scale_rat(&self, c: &Rat) -> PolyMat {
        PolyMat {
            rows: self.rows,
            cols: self.cols,
            vars: self.vars.clone(),
            data: self.data.iter().map(|p| p.scale(c)).collect(),
        }
    }

    pub fn apply(&self, v: &[Poly]) -> Result<Vec<Poly>> {
        if v.len() != self.cols {
            return Err(EngineError::DimensionMismatch {
                expected: self.cols,
                got: v.len(),
            });
        }
        let mut out = vec![Poly::zero(self.vars.clone()); self.rows];
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[r] = out[r].add(&self.at(r, c).mul(&v[c]));
            }
        }
        Ok(out)
    }

    /// Entrywise derivative along a polynomial vector field on the chart.
    pub fn lie_derive(&self, field: &[Poly]) -> Result<PolyMat> {
        let mut out = PolyMat::zero(self.vars.clone(), self.rows, self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(r, c, lie_derive_poly(self.at(r, c), field)?);
            }
        }
        Ok(out)
    }

    pub fn eval(&self, point: &[Rat]) -> Result<SparseMat> {
        let mut triplets = Vec::new();
        for r in 0..self.rows {
            for c in 0..self.cols {
                let v = self.at(r, c).eval_rat(point)?;
                if !v.is_zero() {
                    triplets.push((r, c, v));
                }
            }
        }
        SparseMat::from_triplets(self.rows, self.cols, triplets)
    }

    pub fn subst(&self, target: VarSet, images: &[Poly]) -> PolyMat {
        PolyMat {
            rows: self.rows,
            cols: self.cols,
            vars: target.clone(),
            data: self
                .data
                .iter()
                .map(|p| p.subst_rat(target.clone(), images))
                .collect(),
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = &Poly> {
        self.data.iter()
    }
}

/// `L_X f` for a polynomial vector field `X` on the chart carrying `f`.
pub fn lie_derive_poly(f: &Poly, field: &[Poly]) -> Result<Poly> {
    if field.len() != f.n_vars() {
        return Err(EngineError::DimensionMismatch {
            expected: f.n_vars(),
            got: field.len(),
        });
    }
    let mut out = Poly::zero(f.vars().clone());
    for (i, x) in field.iter().enumerate() {
        out = out.add(&f.partial(i)?.mul(x));
    }
    Ok(out)
}

/// Bracket of polynomial vector fields: `[X,Y]_j = X(Y_j) - Y(X_j)`.
pub fn bracket_fields(x: &[Poly], y: &[Poly]) -> Result<Vec<Poly>> {
    let mut out = Vec::with_capacity(x.len());
    for j in 0..x.len() {
        out.push(lie_derive_poly(&y[j], x)?.sub(&lie_derive_poly(&x[j], y)?));
    }
    Ok(out)
}

/// Graded vector with polynomial components, aligned with a [`GradedSpace`].
#[derive(Clone, Debug, PartialEq)]
pub struct GradedPolyVec {
    pub space: GradedSpace,
    comps: BTreeMap<i64, Vec<Poly>>,
}

impl GradedPolyVec {
    pub fn zero(vars: VarSet, space: GradedSpace) -> Self {
        let comps = space
            .degrees()
            .map(|d| (d, vec![Poly::zero(vars.clone()); space.dim(d)]))
            .collect();
        GradedPolyVec { space, comps }
    }

    pub fn component(&self, degree: i64) -> &[Poly] {
        self.comps.get(&degree).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn set(&mut self, degree: i64, idx: usize, p: Poly) {
        if let Some(v) = self.comps.get_mut(&degree) {
            v[idx] = p;
        }
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        if self.space != rhs.space {
            return Err(EngineError::Shape("graded vector mismatch".into()));
        }
        let mut out = self.clone();
        for (d, v) in &rhs.comps {
            let tgt = out.comps.get_mut(d).unwrap();
            for (i, p) in v.iter().enumerate() {
                tgt[i] = tgt[i].add(p);
            }
        }
        Ok(out)
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        self.add(&rhs.scale_rat(&-crate::scalar::Rat::from_integer(1.into())))
    }

    pub fn scale(&self, f: &Poly) -> Self {
        let mut out = self.clone();
        for v in out.comps.values_mut() {
            for p in v.iter_mut() {
                *p = p.mul(f);
            }
        }
        out
    }

    pub fn scale_rat(&self, c: &Rat) -> Self {
        let mut out = self.clone();
        for v in out.comps.values_mut() {
            for p in v.iter_mut() {
                *p = p.scale(c);
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.comps.values().all(|v| v.iter().all(|p| p.is_zero()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, &[Poly])> {
        self.comps.iter().map(|(d, v)| (*d, v.as_slice()))
    }
}

/// Degree-homogeneous polynomial-valued map between graded spaces.
#[derive(Clone, Debug, PartialEq)]
pub struct GradedPolyMap {
    pub source: GradedSpace,
    pub target: GradedSpace,
    pub degree: i64,
    vars: VarSet,
    blocks: BTreeMap<i64, PolyMat>,
}

impl GradedPolyMap {
    pub fn zero(vars: VarSet, source: GradedSpace, target: GradedSpace, degree: i64) -> Self {
        GradedPolyMap {
            source,
            target,
            degree,
            vars,
            blocks: BTreeMap::new(),
        }
    }

    pub fn identity(vars: VarSet, space: &GradedSpace) -> Self {
        let mut m = Self::zero(vars.clone(), space.clone(), space.clone(), 0);
        for d in space.degrees() {
            m.blocks.insert(d, PolyMat::identity(vars.clone(), space.dim(d)));
        }
        m
    }

    pub fn vars(&self) -> &VarSet {
        &self.vars
    }

    pub fn set_block(&mut self, source_degree: i64, block: PolyMat) -> Result<()> {
        let (tr, sr) = (
            self.target.dim(source_degree + self.degree),
            self.source.dim(source_degree),
        );
        if block.rows != tr || block.cols != sr {
            return Err(EngineError::Shape(format!(
                "poly block at degree {source_degree} must be {tr}x{sr}, got {}x{}",
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

    pub fn block(&self, source_degree: i64) -> PolyMat {
        self.blocks.get(&source_degree).cloned().unwrap_or_else(|| {
            PolyMat::zero(
                self.vars.clone(),
                self.target.dim(source_degree + self.degree),
                self.source.dim(source_degree),
            )
        })
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.values().all(|b| b.is_zero())
    }

    pub fn compose(&self, inner: &GradedPolyMap) -> Result<GradedPolyMap> {
        if inner.target != self.source {
            return Err(EngineError::Shape("graded poly composition mismatch".into()));
        }
        let mut out = GradedPolyMap::zero(
            self.vars.clone(),
            inner.source.clone(),
            self.target.clone(),
            self.degree + inner.degree,
        );
        for (d, inner_block) in &inner.blocks {
            let Some(outer_block) = self.blocks.get(&(d + inner.degree)) else {
                continue;
            };
            let prod = outer_block.mul(inner_block)?;
            out.set_block(*d, prod)?;
        }
        Ok(out)
    }

    pub fn add(&self, rhs: &GradedPolyMap) -> Result<GradedPolyMap> {
        if self.source != rhs.source || self.target != rhs.target || self.degree != rhs.degree {
            return Err(EngineError::Shape("graded poly sum mismatch".into()));
        }
        let mut out = self.clone();
        for (d, b) in &rhs.blocks {
            let sum = out.block(*d).add(b)?;
            out.set_block(*d, sum)?;
        }
        Ok(out)
    }

    pub fn sub(&self, rhs: &GradedPolyMap) -> Result<GradedPolyMap> {
        self.add(&rhs.neg())
    }

    pub fn neg(&self) -> GradedPolyMap {
        let mut out = self.clone();
        for b in out.blocks.values_mut() {
            *b = b.neg();
        }
        out
    }

    pub fn scale(&self, f: &Poly) -> GradedPolyMap {
        let mut out = self.clone();
        out.blocks.retain(|_, b| {
            *b = b.scale(f);
            !b.is_zero()
        });
        out
    }

    pub fn scale_rat(&self, c: &Rat) -> GradedPolyMap {
        let mut out = self.clone();
        out.blocks.retain(|_, b| {
            *b = b.scale_rat(c);
            !b.is_zero()
        });
        out
    }

    pub fn apply(&self, v: &GradedPolyVec) -> Result<GradedPolyVec> {
        if v.space != self.source {
            return Err(EngineError::Shape("graded apply mismatch".into()));
        }
        let mut out = GradedPolyVec::zero(self.vars.clone(), self.target.clone());
        for (d, comp) in v.iter() {
            if comp.is_empty() || comp.iter().all(|p| p.is_zero()) {
                continue;
            }
            let Some(block) = self.blocks.get(&d) else { continue };
            let img = block.apply(&comp.to_vec())?;
            let tgt = d + self.degree;
            for (i, p) in img.into_iter().enumerate() {
                let cur = out.component(tgt)[i].clone();
                out.set(tgt, i, cur.add(&p));
            }
        }
        Ok(out)
    }

    /// Entrywise Lie derivative of every block.
    pub fn lie_derive(&self, field: &[Poly]) -> Result<GradedPolyMap> {
        let mut out = self.clone();
        let mut blocks = BTreeMap::new();
        for (d, b) in &out.blocks {
            blocks.insert(*d, b.lie_derive(field)?);
        }
        out.blocks = blocks;
        Ok(out)
    }

    pub fn eval(&self, point: &[Rat]) -> Result<crate::graded::GradedMap> {
        let mut out =
            crate::graded::GradedMap::zero(self.source.clone(), self.target.clone(), self.degree);
        for (d, b) in &self.blocks {
            out.set_block(*d, b.eval(point)?)?;
        }
        Ok(out)
    }

    pub fn subst(&self, target_vars: VarSet, images: &[Poly]) -> GradedPolyMap {
        let mut out = GradedPolyMap::zero(
            target_vars.clone(),
            self.source.clone(),
            self.target.clone(),
            self.degree,
        );
        for (d, b) in &self.blocks {
            out.blocks.insert(*d, b.subst(target_vars.clone(), images));
        }
        out
    }

    pub fn blocks(&self) -> impl Iterator<Item = (i64, &PolyMat)> {
        self.blocks.iter().map(|(d, b)| (*d, b))
    }
}
