//! Representations up to homotopy of groupoids through their structure-map
//! series, the twisted operators they induce on cochains, the structure
//! equations, gauge transformations, pullbacks, Ehresmann connections and
//! the adjoint representation.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use num_traits::Zero;
use serde::Serialize;

use crate::error::{EngineError, Result};
use crate::graded::{CochainComplex, CohomologyReport, GradedSpace};
use crate::poly::Poly;
use crate::polyops::{GradedPolyMap, PolyMat};
use crate::samples::SamplePool;
use crate::scalar::Rat;
use crate::sparse::SparseMat;

use super::cochain::{novars, shift_images, FinCochain, SmoothCochain};
use super::{FiniteGroupoid, FiniteMorphism, SmoothModel};

/// End/Hom-valued cochain on a finite groupoid: one constant graded map per
/// tuple (per object at arity zero).
#[derive(Clone, Debug)]
pub struct FinEndCochain {
    pub arity: usize,
    pub source: GradedSpace,
    pub target: GradedSpace,
    pub degree: i64,
    values: Vec<GradedPolyMap>,
}

impl FinEndCochain {
    pub fn zero(
        g: &FiniteGroupoid,
        source: GradedSpace,
        target: GradedSpace,
        degree: i64,
        arity: usize,
    ) -> Self {
        let len = if arity == 0 {
            g.n_objects
        } else {
            g.tuples(arity).len()
        };
        FinEndCochain {
            arity,
            values: vec![
                GradedPolyMap::zero(novars(), source.clone(), target.clone(), degree);
                len
            ],
            source,
            target,
            degree,
        }
    }

    pub fn at(&self, pos: usize) -> &GradedPolyMap {
        &self.values[pos]
    }

    pub fn set_at(&mut self, pos: usize, v: GradedPolyMap) {
        self.values[pos] = v;
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.is_zero())
    }
}

/// Representation up to homotopy of a finite groupoid: the structure-map
/// series `f[k]` of arity `k` and degree `1-k`.
#[derive(Clone, Debug)]
pub struct FinRepG {
    pub groupoid: Arc<FiniteGroupoid>,
    pub bundle: GradedSpace,
    pub f: Vec<FinEndCochain>,
    pub unital: bool,
}

impl FinRepG {
    /// A genuine (strict) representation: a functorial arrow action plus a
    /// commuting bundle differential, no higher structure maps.
    pub fn genuine(
        groupoid: Arc<FiniteGroupoid>,
        bundle: GradedSpace,
        del: GradedPolyMap,
        action: impl Fn(usize) -> GradedPolyMap,
    ) -> Result<Self> {
        let mut f0 = FinEndCochain::zero(&groupoid, bundle.clone(), bundle.clone(), 1, 0);
        for x in 0..groupoid.n_objects {
            f0.set_at(x, del.clone());
        }
        let mut f1 = FinEndCochain::zero(&groupoid, bundle.clone(), bundle.clone(), 0, 1);
        for g in 0..groupoid.n_arrows() {
            f1.set_at(g, action(g));
        }
        Ok(FinRepG {
            groupoid,
            bundle,
            f: vec![f0, f1],
            unital: true,
        })
    }

    /// The trivial rank-one representation in degree zero.
    pub fn trivial(groupoid: Arc<FiniteGroupoid>) -> Self {
        let bundle = GradedSpace::concentrated(0, 1);
        let id = GradedPolyMap::identity(novars(), &bundle);
        Self::genuine(
            groupoid.clone(),
            bundle.clone(),
            GradedPolyMap::zero(novars(), bundle.clone(), bundle, 1),
            |_| id.clone(),
        )
        .unwrap()
    }

    pub fn f_cochain(&self, k: usize) -> FinEndCochain {
        self.f.get(k).cloned().unwrap_or_else(|| {
            FinEndCochain::zero(
                &self.groupoid,
                self.bundle.clone(),
                self.bundle.clone(),
                1 - k as i64,
                k,
            )
        })
    }
}

/// Evaluates a structure map on a tuple slice; an empty slice is anchored
/// at the given object.
fn eval_f_fin(
    fk: &FinEndCochain,
    positions: &[Arc<HashMap<Vec<usize>, usize>>],
    slice: &[usize],
    anchor: usize,
) -> GradedPolyMap {
    if fk.arity == 0 {
        fk.at(anchor).clone()
    } else {
        fk.at(positions[fk.arity][slice]).clone()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GroupoidRepFailure {
    pub equation: usize,
    pub witness: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct GroupoidRepReport {
    pub failures: Vec<GroupoidRepFailure>,
}

impl GroupoidRepReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// True when a map of the given internal degree can be nonzero on the
/// bundle.
fn degree_realizable(bundle: &GradedSpace, degree: i64) -> bool {
    bundle.degrees().any(|l| bundle.dim(l) > 0 && bundle.dim(l + degree) > 0)
}

fn tuple_positions_up_to(
    g: &FiniteGroupoid,
    bound: usize,
) -> Vec<Arc<HashMap<Vec<usize>, usize>>> {
    (0..=bound).map(|k| g.tuple_positions(k)).collect()
}

/// Verifies the structure-map equations of a finite representation through
/// arity `bound`, plus the unitality conditions when flagged.
pub fn check_rep_g_fin(rep: &FinRepG, bound: usize) -> Result<GroupoidRepReport> {
    let g = &rep.groupoid;
    let mut failures = Vec::new();
    let positions = tuple_positions_up_to(g, bound);
    for k in 0..=bound {
        // every term of the arity-k equation has internal degree 2-k
        if !degree_realizable(&rep.bundle, 2 - k as i64) {
            continue;
        }
        let iter: Vec<Vec<usize>> = if k == 0 {
            (0..g.n_objects).map(|x| vec![x]).collect()
        } else {
            g.tuples(k).as_ref().clone()
        };
        for t in &iter {
            let (tuple, obj): (&[usize], usize) = if k == 0 { (&[], t[0]) } else { (t, 0) };
            let mut rhs = GradedPolyMap::zero(
                novars(),
                rep.bundle.clone(),
                rep.bundle.clone(),
                2 - k as i64,
            );
            for j in 0..=k {
                let left_anchor = if k == 0 {
                    obj
                } else {
                    g.tuple_tgt(tuple)
                };
                let right_anchor = if k == 0 { obj } else { g.tuple_src(tuple) };
                let fj = rep.f_cochain(j);
                let fkj = rep.f_cochain(k - j);
                let left = eval_f_fin(&fj, &positions, &tuple[..j], left_anchor);
                let right = eval_f_fin(&fkj, &positions, &tuple[j..], right_anchor);
                let mut term = left.compose(&right)?;
                if j % 2 == 1 {
                    term = term.scale_rat(&-Rat::from_integer(1.into()));
                }
                rhs = rhs.add(&term)?;
            }
            let mut lhs = GradedPolyMap::zero(
                novars(),
                rep.bundle.clone(),
                rep.bundle.clone(),
                2 - k as i64,
            );
            if k >= 2 {
                let fk1 = rep.f_cochain(k - 1);
                for j in 1..k {
                    let face = g.face(tuple, j)?;
                    let mut term = fk1.at(positions[k - 1][&face]).clone();
                    if j % 2 == 1 {
                        term = term.scale_rat(&-Rat::from_integer(1.into()));
                    }
                    lhs = lhs.add(&term)?;
                }
            }
            if !rhs.sub(&lhs)?.is_zero() {
                failures.push(GroupoidRepFailure {
                    equation: k,
                    witness: format!("tuple {tuple:?} (object {obj})"),
                });
            }
        }
    }
    if rep.unital {
        check_unitality_fin(rep, &mut failures);
    }
    Ok(GroupoidRepReport { failures })
}

fn check_unitality_fin(rep: &FinRepG, failures: &mut Vec<GroupoidRepFailure>) {
    let g = &rep.groupoid;
    let id = GradedPolyMap::identity(novars(), &rep.bundle);
    if rep.f.len() > 1 {
        for x in 0..g.n_objects {
            let pos = g
                .tuples(1)
                .iter()
                .position(|t| t[0] == g.units[x])
                .unwrap();
            if !rep.f[1].at(pos).sub(&id).unwrap().is_zero() {
                failures.push(GroupoidRepFailure {
                    equation: 1,
                    witness: format!("F_1(1_{x}) != id"),
                });
            }
        }
    }
    for (k, fk) in rep.f.iter().enumerate() {
        if k == 1 || k == 0 {
            continue;
        }
        for (pos, t) in g.tuples(k).iter().enumerate() {
            if g.tuple_has_unit(t) && !fk.at(pos).is_zero() {
                failures.push(GroupoidRepFailure {
                    equation: k,
                    witness: format!("F_{k} not normalized at {t:?}"),
                });
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Twisted operators and the structure differential
// ---------------------------------------------------------------------------

/// Element of the total cochain module of a finite representation.
#[derive(Clone, Debug)]
pub struct FinElement {
    pub bundle: GradedSpace,
    parts: BTreeMap<usize, FinCochain>,
}

impl FinElement {
    pub fn zero(bundle: GradedSpace) -> Self {
        FinElement {
            bundle,
            parts: BTreeMap::new(),
        }
    }

    pub fn from_cochain(c: FinCochain) -> Self {
        let mut e = FinElement::zero(c.bundle.clone());
        e.add_cochain(c).unwrap();
        e
    }

    pub fn add_cochain(&mut self, c: FinCochain) -> Result<()> {
        if c.bundle != self.bundle {
            return Err(EngineError::Shape("element bundle mismatch".into()));
        }
        match self.parts.remove(&c.arity) {
            None => {
                self.parts.insert(c.arity, c);
            }
            Some(existing) => {
                self.parts.insert(c.arity, existing.add(&c)?);
            }
        }
        Ok(())
    }

    pub fn parts(&self) -> impl Iterator<Item = &FinCochain> {
        self.parts.values()
    }

    pub fn part(&self, arity: usize) -> Option<&FinCochain> {
        self.parts.get(&arity)
    }

    pub fn is_zero(&self) -> bool {
        self.parts.values().all(|c| c.is_zero())
    }

    pub fn sub(&self, rhs: &FinElement) -> Result<FinElement> {
        let mut out = self.clone();
        for c in rhs.parts.values() {
            out.add_cochain(c.scale_rat(&-Rat::from_integer(1.into())))?;
        }
        Ok(out)
    }
}

/// The operator induced by one structure map on a bundle-degree-homogeneous
/// piece of a cochain. For `(arity, degree) = (1, 0)` it is the twisted
/// simplicial differential; otherwise composition in the first slots.
pub fn tilde_fin(
    fk: &FinEndCochain,
    eta: &FinCochain,
    positions: &[Arc<HashMap<Vec<usize>, usize>>],
) -> Result<FinCochain> {
    let g = eta.groupoid.clone();
    let k = fk.arity;
    let p = eta.arity;
    let special = k == 1 && fk.degree == 0;
    let out_arity = if special { p + 1 } else { p + k };
    let mut out = FinCochain::zero(g.clone(), fk.target.clone(), out_arity);
    let degrees: Vec<i64> = eta.bundle.degrees().collect();
    for l in degrees {
        let dim = eta.bundle.dim(l);
        if dim == 0 {
            continue;
        }
        // extract the degree-l piece of eta as plain vectors
        let piece_at = |pos: usize| -> Vec<Rat> {
            eta.at(pos)
                .component(l)
                .iter()
                .map(|q| q.constant_part())
                .collect()
        };
        if special {
            let sign_pl = if (p + l.rem_euclid(2) as usize) % 2 == 0 { 1i64 } else { -1 };
            for (pos, t) in g.tuples(p + 1).iter().enumerate() {
                let mut acc = vec![Rat::from_integer(0.into()); dim];
                // F(g_1) applied to eta(g_2..g_{p+1})
                let fpos = positions[1][&t[..1].to_vec()];
                let rest_val = if p == 0 {
                    piece_at(g.src(t[0]))
                } else {
                    piece_at(positions[p][&t[1..].to_vec()])
                };
                let fmat = fk.at(fpos).block(l);
                let img = fmat.apply(
                    &rest_val
                        .iter()
                        .map(|r| Poly::constant(novars(), r.clone()))
                        .collect::<Vec<_>>(),
                )?;
                for (i, q) in img.iter().enumerate() {
                    acc[i] += q.constant_part();
                }
                // simplicial tail: sum_{i=1}^{p+1} (-1)^i eta(d_i t)
                for i in 1..=(p + 1) {
                    let v = if p == 0 {
                        piece_at(g.face_object(t[0], i))
                    } else {
                        let face = g.face(t, i)?;
                        piece_at(positions[p][&face])
                    };
                    for (idx, q) in v.iter().enumerate() {
                        if i % 2 == 1 {
                            acc[idx] -= q;
                        } else {
                            acc[idx] += q;
                        }
                    }
                }
                let mut gv = out.at(pos).clone();
                for (i, q) in acc.iter().enumerate() {
                    if !num_traits::Zero::is_zero(q) {
                        let v = if sign_pl < 0 { -q.clone() } else { q.clone() };
                        let cur = gv.component(l)[i].clone();
                        gv.set(l, i, cur.add(&Poly::constant(novars(), v)));
                    }
                }
                out.set_at(pos, gv);
            }
        } else {
            let exp = (k * (p + l.rem_euclid(2) as usize)) % 2;
            let sign = if exp == 0 { 1i64 } else { -1 };
            // arity-0 output is indexed by objects, not by the empty tuple
            let index_tuples: Vec<Vec<usize>> = if p + k == 0 {
                (0..g.n_objects).map(|x| vec![x]).collect()
            } else {
                g.tuples(p + k).as_ref().clone()
            };
            for (pos, t) in index_tuples.iter().enumerate() {
                let (fmap, eta_val) = if k == 0 {
                    let anchor = if p + k == 0 { t[0] } else { g.tuple_tgt(t) };
                    let ev = if p == 0 {
                        piece_at(anchor)
                    } else {
                        piece_at(positions[p][&t[..].to_vec()])
                    };
                    (fk.at(anchor).clone(), ev)
                } else {
                    let fpos = positions[k][&t[..k].to_vec()];
                    let ev = if p == 0 {
                        piece_at(g.tuple_src(t))
                    } else {
                        piece_at(positions[p][&t[k..].to_vec()])
                    };
                    (fk.at(fpos).clone(), ev)
                };
                let fmat = fmap.block(l);
                if fmat.rows == 0 || fmat.cols == 0 {
                    continue;
                }
                let img = fmat.apply(
                    &eta_val
                        .iter()
                        .map(|r| Poly::constant(novars(), r.clone()))
                        .collect::<Vec<_>>(),
                )?;
                let lt = l + fk.degree;
                let mut gv = out.at(pos).clone();
                for (i, q) in img.iter().enumerate() {
                    let mut c = q.constant_part();
                    if num_traits::Zero::is_zero(&c) {
                        continue;
                    }
                    if sign < 0 {
                        c = -c;
                    }
                    let cur = gv.component(lt)[i].clone();
                    gv.set(lt, i, cur.add(&Poly::constant(novars(), c)));
                }
                out.set_at(pos, gv);
            }
        }
    }
    Ok(out)
}

/// The structure differential `D = sum_k tilde(F_k)` of a finite
/// representation applied to an element.
pub fn apply_d_fin(rep: &FinRepG, eta: &FinElement) -> Result<FinElement> {
    let mut out = FinElement::zero(eta.bundle.clone());
    for part in eta.parts() {
        for fk in &rep.f {
            if !tilde_can_hit(fk, part) {
                continue;
            }
            let positions = tuple_positions_up_to(&rep.groupoid, part.arity + fk.arity.max(1));
            let image = tilde_fin(fk, part, &positions)?;
            if !image.is_zero() {
                out.add_cochain(image)?;
            }
        }
    }
    Ok(out)
}

/// Structural reachability: some nonzero degree of the argument lands in a
/// nonzero degree of the target bundle.
fn tilde_can_hit(fk: &FinEndCochain, eta: &FinCochain) -> bool {
    if fk.is_zero() {
        return false;
    }
    eta.bundle
        .degrees()
        .any(|l| eta.bundle.dim(l) > 0 && fk.target.dim(l + fk.degree) > 0)
}

// ---------------------------------------------------------------------------
// Cohomology of finite representations
// ---------------------------------------------------------------------------

/// Builds the total cochain complex of a finite representation through
/// total degree `max_degree` (normalized or full) and returns its exact
/// cohomology.
pub fn cohomology_g_fin(
    rep: &FinRepG,
    max_degree: i64,
    normalized: bool,
) -> Result<CohomologyReport> {
    let complex = total_complex_fin(rep, max_degree, normalized)?;
    let lo = rep.bundle.min_degree().unwrap_or(0);
    complex.cohomology(lo.min(0), max_degree)
}

pub fn total_complex_fin(
    rep: &FinRepG,
    max_degree: i64,
    normalized: bool,
) -> Result<CochainComplex> {
    let g = &rep.groupoid;
    let lo = rep.bundle.min_degree().unwrap_or(0).min(0);
    let hi = max_degree + 1;
    // admissible tuples per arity
    let max_arity = (hi - rep.bundle.min_degree().unwrap_or(0)).max(0) as usize;
    let mut tuple_lists: Vec<Vec<usize>> = Vec::new(); // filtered positions
    for i in 0..=max_arity {
        if i == 0 {
            tuple_lists.push((0..g.n_objects).collect());
        } else {
            let all = g.tuples(i);
            let filtered: Vec<usize> = all
                .iter()
                .enumerate()
                .filter(|(_, t)| !normalized || !g.tuple_has_unit(t))
                .map(|(pos, _)| pos)
                .collect();
            tuple_lists.push(filtered);
        }
    }
    // basis of total degree n: (arity i, filtered tuple slot, degree l=n-i, coord)
    let mut basis: BTreeMap<i64, Vec<(usize, usize, i64, usize)>> = BTreeMap::new();
    for n in lo..=hi {
        let mut items = Vec::new();
        for i in 0..=max_arity {
            let l = n - i as i64;
            let dim = rep.bundle.dim(l);
            if dim == 0 {
                continue;
            }
            for (slot, _) in tuple_lists[i].iter().enumerate() {
                for c in 0..dim {
                    items.push((i, slot, l, c));
                }
            }
        }
        basis.insert(n, items);
    }
    let mut complex = CochainComplex::new();
    for (n, items) in &basis {
        complex.set_space(*n, items.len());
    }
    let max_f = rep.f.len().saturating_sub(1);
    let positions = tuple_positions_up_to(g, (max_arity + max_f.max(1)).max(1));
    for n in lo..max_degree.max(lo) + 1 {
        let src = basis.get(&n).cloned().unwrap_or_default();
        let tgt = basis.get(&(n + 1)).cloned().unwrap_or_default();
        let mut tgt_index: HashMap<(usize, usize, i64, usize), usize> = HashMap::new();
        for (row, item) in tgt.iter().enumerate() {
            tgt_index.insert(*item, row);
        }
        // map (arity, raw tuple position) -> filtered slot
        let mut slot_of: Vec<HashMap<usize, usize>> = Vec::new();
        for list in tuple_lists.iter() {
            let mut m = HashMap::new();
            for (slot, &raw) in list.iter().enumerate() {
                m.insert(raw, slot);
            }
            slot_of.push(m);
        }
        let mut triplets = Vec::new();
        for (col, (i, slot, l, c)) in src.iter().enumerate() {
            let raw = tuple_lists[*i][*slot];
            let mut cochain = FinCochain::zero(rep.groupoid.clone(), rep.bundle.clone(), *i);
            let mut v = cochain.at(raw).clone();
            v.set(*l, *c, crate::poly::Poly::one(novars()));
            cochain.set_at(raw, v);
            let mut image = FinElement::zero(rep.bundle.clone());
            for fk in &rep.f {
                if !tilde_can_hit(fk, &cochain) {
                    continue;
                }
                image.add_cochain(tilde_fin(fk, &cochain, &positions)?)?;
            }
            for part in image.parts() {
                let arity = part.arity;
                if arity > max_arity {
                    continue;
                }
                for (raw_pos, filtered) in slot_of[arity].iter() {
                    let val = part.at(*raw_pos);
                    for (deg, comp) in val.iter() {
                        for (coord, q) in comp.iter().enumerate() {
                            let cpart = q.constant_part();
                            if num_traits::Zero::is_zero(&cpart) {
                                continue;
                            }
                            if let Some(row) = tgt_index.get(&(arity, *filtered, deg, coord)) {
                                triplets.push((*row, col, cpart));
                            }
                        }
                    }
                }
            }
        }
        let d = SparseMat::from_triplets(tgt.len(), src.len(), triplets)?;
        complex.set_differential(n, d)?;
    }
    Ok(complex)
}

// ---------------------------------------------------------------------------
// Morphisms and gauge transformations
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct FinMorphismG {
    pub phis: Vec<FinEndCochain>,
}

impl FinMorphismG {
    pub fn identity(rep: &FinRepG) -> Self {
        let g = &rep.groupoid;
        let mut phi0 = FinEndCochain::zero(g, rep.bundle.clone(), rep.bundle.clone(), 0, 0);
        let id = GradedPolyMap::identity(novars(), &rep.bundle);
        for x in 0..g.n_objects {
            phi0.set_at(x, id.clone());
        }
        FinMorphismG { phis: vec![phi0] }
    }

    pub fn phi_cochain(&self, k: usize, g: &FiniteGroupoid, src: &GradedSpace, tgt: &GradedSpace) -> FinEndCochain {
        self.phis.get(k).cloned().unwrap_or_else(|| {
            FinEndCochain::zero(g, src.clone(), tgt.clone(), -(k as i64), k)
        })
    }
}

/// Verifies the componentwise morphism equations through arity `bound`.
pub fn check_morphism_g_fin(
    phi: &FinMorphismG,
    source: &FinRepG,
    target: &FinRepG,
    bound: usize,
) -> Result<GroupoidRepReport> {
    let g = &source.groupoid;
    let positions = tuple_positions_up_to(g, bound);
    let mut failures = Vec::new();
    for k in 0..=bound {
        if !degree_realizable(&source.bundle, 1 - k as i64) {
            continue;
        }
        let iter: Vec<Vec<usize>> = if k == 0 {
            (0..g.n_objects).map(|x| vec![x]).collect()
        } else {
            g.tuples(k).as_ref().clone()
        };
        for t in &iter {
            let (tuple, obj): (&[usize], usize) = if k == 0 { (&[], t[0]) } else { (t, 0) };
            let left_anchor = if k == 0 { obj } else { g.tuple_tgt(tuple) };
            let right_anchor = if k == 0 { obj } else { g.tuple_src(tuple) };
            let mut acc = GradedPolyMap::zero(
                novars(),
                source.bundle.clone(),
                target.bundle.clone(),
                1 - k as i64,
            );
            for j in 0..=k {
                // (-1)^j phi_j ∘ F_{k-j}
                let pj = phi.phi_cochain(j, g, &source.bundle, &target.bundle);
                let fi = source.f_cochain(k - j);
                let left = eval_f_fin(&pj, &positions, &tuple[..j], left_anchor);
                let right = eval_f_fin(&fi, &positions, &tuple[j..], right_anchor);
                let mut term = left.compose(&right)?;
                if j % 2 == 1 {
                    term = term.scale_rat(&-Rat::from_integer(1.into()));
                }
                acc = acc.add(&term)?;
                // - F'_j ∘ phi_{k-j}
                let fj = target.f_cochain(j);
                let pi = phi.phi_cochain(k - j, g, &source.bundle, &target.bundle);
                let left = eval_f_fin(&fj, &positions, &tuple[..j], left_anchor);
                let right = eval_f_fin(&pi, &positions, &tuple[j..], right_anchor);
                acc = acc.sub(&left.compose(&right)?)?;
            }
            if k >= 2 {
                let pk1 = phi.phi_cochain(k - 1, g, &source.bundle, &target.bundle);
                for j in 1..k {
                    let face = g.face(tuple, j)?;
                    let mut term = pk1.at(positions[k - 1][&face]).clone();
                    if j % 2 == 1 {
                        term = term.scale_rat(&-Rat::from_integer(1.into()));
                    }
                    acc = acc.sub(&term)?;
                }
            }
            if !acc.is_zero() {
                failures.push(GroupoidRepFailure {
                    equation: k,
                    witness: format!("tuple {tuple:?} (object {obj})"),
                });
            }
        }
    }
    Ok(GroupoidRepReport { failures })
}

fn invert_constant_map(m: &GradedPolyMap) -> Result<GradedPolyMap> {
    let mut out = GradedPolyMap::zero(novars(), m.target.clone(), m.source.clone(), -m.degree);
    for d in m.source.degrees() {
        let block = m.block(d);
        let n = block.rows;
        if n != block.cols {
            return Err(EngineError::Shape("inverting non-square block".into()));
        }
        // dense rational inversion via rref of [B | I]
        let mut dense = vec![Rat::from_integer(0.into()); n * 2 * n];
        for r in 0..n {
            for c in 0..n {
                dense[r * 2 * n + c] = block.at(r, c).constant_part();
            }
            dense[r * 2 * n + n + r] = Rat::from_integer(1.into());
        }
        let aug = SparseMat::from_dense(n, 2 * n, &dense);
        let (rows, pivots) = aug.rref();
        if pivots.len() < n || pivots.iter().take(n).enumerate().any(|(i, &p)| p != i) {
            return Err(EngineError::Model("singular block in morphism".into()));
        }
        let mut inv = PolyMat::zero(novars(), n, n);
        for r in 0..n {
            for c in 0..n {
                if let Some(v) = rows[r].get(&(n + c)) {
                    inv.set(r, c, Poly::constant(novars(), v.clone()));
                }
            }
        }
        out.set_block(d + m.degree, inv)?;
    }
    Ok(out)
}

/// Transports a representation along a morphism series with invertible
/// `phi_0`: solves the morphism equations for the unique target structure
/// maps, degree by degree.
pub fn gauge_transform_fin(rep: &FinRepG, phi: &FinMorphismG, bound: usize) -> Result<FinRepG> {
    let g = rep.groupoid.clone();
    let positions = tuple_positions_up_to(&g, bound);
    let mut inv_phi0: Vec<GradedPolyMap> = Vec::with_capacity(g.n_objects);
    let phi0 = phi.phi_cochain(0, &g, &rep.bundle, &rep.bundle);
    for x in 0..g.n_objects {
        inv_phi0.push(invert_constant_map(phi0.at(x))?);
    }
    let mut new_f: Vec<FinEndCochain> = Vec::new();
    for k in 0..=bound {
        let mut fk = FinEndCochain::zero(&g, rep.bundle.clone(), rep.bundle.clone(), 1 - k as i64, k);
        if !degree_realizable(&rep.bundle, 1 - k as i64) {
            new_f.push(fk);
            continue;
        }
        let iter: Vec<Vec<usize>> = if k == 0 {
            (0..g.n_objects).map(|x| vec![x]).collect()
        } else {
            g.tuples(k).as_ref().clone()
        };
        for (pos, t) in iter.iter().enumerate() {
            let (tuple, obj): (&[usize], usize) = if k == 0 { (&[], t[0]) } else { (t, 0) };
            let left_anchor = if k == 0 { obj } else { g.tuple_tgt(tuple) };
            let right_anchor = if k == 0 { obj } else { g.tuple_src(tuple) };
            let mut acc = GradedPolyMap::zero(
                novars(),
                rep.bundle.clone(),
                rep.bundle.clone(),
                1 - k as i64,
            );
            // sum_{i+j=k} (-1)^j phi_j ∘ F_i
            for j in 0..=k {
                let pj = phi.phi_cochain(j, &g, &rep.bundle, &rep.bundle);
                let fi = rep.f_cochain(k - j);
                let left = eval_f_fin(&pj, &positions, &tuple[..j], left_anchor);
                let right = eval_f_fin(&fi, &positions, &tuple[j..], right_anchor);
                let mut term = left.compose(&right)?;
                if j % 2 == 1 {
                    term = term.scale_rat(&-Rat::from_integer(1.into()));
                }
                acc = acc.add(&term)?;
            }
            // - sum_{j<k} F'_j ∘ phi_{k-j}
            for j in 0..k {
                let fj = &new_f[j];
                let pi = phi.phi_cochain(k - j, &g, &rep.bundle, &rep.bundle);
                let left = eval_f_fin(fj, &positions, &tuple[..j], left_anchor);
                let right = eval_f_fin(&pi, &positions, &tuple[j..], right_anchor);
                acc = acc.sub(&left.compose(&right)?)?;
            }
            // - face terms
            if k >= 2 {
                let pk1 = phi.phi_cochain(k - 1, &g, &rep.bundle, &rep.bundle);
                for j in 1..k {
                    let face = g.face(tuple, j)?;
                    let mut term = pk1.at(positions[k - 1][&face]).clone();
                    if j % 2 == 1 {
                        term = term.scale_rat(&-Rat::from_integer(1.into()));
                    }
                    acc = acc.sub(&term)?;
                }
            }
            let src_obj = if k == 0 { obj } else { right_anchor };
            fk.set_at(pos, acc.compose(&inv_phi0[src_obj])?);
        }
        new_f.push(fk);
    }
    // drop trailing zero maps
    while new_f.len() > 1 && new_f.last().map(|f| f.is_zero()).unwrap_or(false) {
        new_f.pop();
    }
    Ok(FinRepG {
        groupoid: g,
        bundle: rep.bundle.clone(),
        f: new_f,
        unital: rep.unital,
    })
}

/// Pullback of a representation along a groupoid morphism.
pub fn pullback_rep_fin(gamma: &FiniteMorphism, rep: &FinRepG) -> Result<FinRepG> {
    if !Arc::ptr_eq(&gamma.to, &rep.groupoid)
        && gamma.to.n_arrows() != rep.groupoid.n_arrows()
    {
        return Err(EngineError::Model("morphism target mismatch".into()));
    }
    let mut f = Vec::new();
    for fk in &rep.f {
        let k = fk.arity;
        let mut out = FinEndCochain::zero(
            &gamma.from,
            fk.source.clone(),
            fk.target.clone(),
            fk.degree,
            k,
        );
        if k == 0 {
            for x in 0..gamma.from.n_objects {
                out.set_at(x, fk.at(gamma.obj_map[x]).clone());
            }
        } else {
            let to_positions = gamma.to.tuple_positions(k);
            for (pos, t) in gamma.from.tuples(k).iter().enumerate() {
                let image = gamma.map_tuple(t);
                out.set_at(pos, fk.at(to_positions[&image]).clone());
            }
        }
        f.push(out);
    }
    Ok(FinRepG {
        groupoid: gamma.from.clone(),
        bundle: rep.bundle.clone(),
        f,
        unital: rep.unital,
    })
}

// ---------------------------------------------------------------------------
// Smooth representations
// ---------------------------------------------------------------------------

/// End/Hom-valued cochain on a smooth model: a graded polynomial map in the
/// tuple coordinates.
#[derive(Clone, Debug)]
pub struct SmoothEndCochain {
    pub model: Arc<SmoothModel>,
    pub arity: usize,
    pub value: GradedPolyMap,
}

impl SmoothEndCochain {
    pub fn zero(
        model: Arc<SmoothModel>,
        source: GradedSpace,
        target: GradedSpace,
        degree: i64,
        arity: usize,
    ) -> Self {
        let vars = model.arity_vars(arity);
        SmoothEndCochain {
            model,
            arity,
            value: GradedPolyMap::zero(vars, source, target, degree),
        }
    }

    /// Value shifted into a larger tuple context with slots at `offset`.
    pub fn shifted(&self, offset: usize, total: usize) -> GradedPolyMap {
        let target = self.model.arity_vars(total);
        let images = shift_images(&self.model, self.arity, offset, total);
        self.value.subst(target, &images)
    }

    pub fn is_zero(&self) -> bool {
        self.value.is_zero()
    }

    pub fn is_normalized(&self) -> bool {
        if self.arity == 0 {
            return true;
        }
        let vars = self.model.arity_vars(self.arity);
        for slot in 1..=self.arity {
            let images = self.model.unit_slot_images(self.arity, slot);
            for (_, b) in self.value.blocks() {
                for p in b.entries() {
                    if !p.subst_rat(vars.clone(), &images).is_zero() {
                        return false;
                    }
                }
            }
        }
        true
    }
}

#[derive(Clone, Debug)]
pub struct SmoothRepG {
    pub model: Arc<SmoothModel>,
    pub bundle: GradedSpace,
    pub f: Vec<SmoothEndCochain>,
    pub unital: bool,
}

impl SmoothRepG {
    pub fn f_cochain(&self, k: usize) -> SmoothEndCochain {
        self.f.get(k).cloned().unwrap_or_else(|| {
            SmoothEndCochain::zero(
                self.model.clone(),
                self.bundle.clone(),
                self.bundle.clone(),
                1 - k as i64,
                k,
            )
        })
    }
}

/// Structure-map equation at arity `k` as a graded polynomial map over the
/// arity-`k` tuple context; zero for genuine representations.
pub fn structure_equation_smooth(rep: &SmoothRepG, k: usize) -> Result<GradedPolyMap> {
    let vars = rep.model.arity_vars(k);
    let mut acc = GradedPolyMap::zero(
        vars.clone(),
        rep.bundle.clone(),
        rep.bundle.clone(),
        2 - k as i64,
    );
    for j in 0..=k {
        let left = rep.f_cochain(j).shifted(0, k);
        let right = rep.f_cochain(k - j).shifted(j, k);
        let mut term = left.compose(&right)?;
        if j % 2 == 1 {
            term = term.scale_rat(&-Rat::from_integer(1.into()));
        }
        acc = acc.add(&term)?;
    }
    if k >= 2 {
        let fk1 = rep.f_cochain(k - 1);
        for j in 1..k {
            let images = rep.model.face_images(k, j)?;
            let mut term = fk1.value.subst(vars.clone(), &images);
            if j % 2 == 1 {
                term = term.scale_rat(&-Rat::from_integer(1.into()));
            }
            acc = acc.sub(&term)?;
        }
    }
    Ok(acc)
}

/// Verifies the structure equations at sampled composable tuples, plus
/// unitality when flagged.
pub fn check_rep_g_smooth(
    rep: &SmoothRepG,
    bound: usize,
    pool: &mut SamplePool,
    samples_per_arity: usize,
) -> Result<GroupoidRepReport> {
    let mut failures = Vec::new();
    for k in 0..=bound {
        let eq = structure_equation_smooth(rep, k)?;
        if eq.is_zero() {
            continue;
        }
        for _ in 0..samples_per_arity {
            let pt = rep.model.sample_tuple(pool, k);
            if !eq.eval(&pt)?.is_zero() {
                failures.push(GroupoidRepFailure {
                    equation: k,
                    witness: format!("sample tuple {pt:?}"),
                });
                break;
            }
        }
    }
    if rep.unital {
        // F_1(1) = id
        if rep.f.len() > 1 {
            let f1 = &rep.f[1];
            let vars1 = rep.model.arity_vars(1);
            let unit_images = rep.model.unit_slot_images(1, 1);
            let at_unit = f1.value.subst(vars1.clone(), &unit_images);
            let vars_obj = rep.model.arity_vars(0);
            // compare against the identity, re-expressed over arity-1 vars
            let id = GradedPolyMap::identity(vars1.clone(), &rep.bundle);
            let _ = vars_obj;
            if !at_unit.sub(&id)?.is_zero() {
                failures.push(GroupoidRepFailure {
                    equation: 1,
                    witness: "F_1 at units is not the identity".into(),
                });
            }
        }
        for (k, fk) in rep.f.iter().enumerate() {
            if k <= 1 {
                continue;
            }
            if !fk.is_normalized() {
                failures.push(GroupoidRepFailure {
                    equation: k,
                    witness: format!("F_{k} is not normalized"),
                });
            }
        }
    }
    Ok(GroupoidRepReport { failures })
}

/// Twisted operator of one smooth structure map on a smooth cochain.
pub fn tilde_smooth(fk: &SmoothEndCochain, eta: &SmoothCochain) -> Result<SmoothCochain> {
    let model = eta.model.clone();
    let k = fk.arity;
    let p = eta.arity;
    let special = k == 1 && fk.value.degree == 0;
    let out_arity = if special { p + 1 } else { p + k };
    let out_vars = model.arity_vars(out_arity);
    let mut out = SmoothCochain::zero(model.clone(), fk.value.target.clone(), out_arity);
    let degrees: Vec<i64> = eta.bundle.degrees().collect();
    for l in degrees {
        let dim = eta.bundle.dim(l);
        if dim == 0 {
            continue;
        }
        let comp: Vec<Poly> = eta.value.component(l).to_vec();
        if special {
            let sign_pl = if (p as i64 + l) % 2 == 0 { 1i64 } else { -1 };
            // F(slot 1) applied to eta(slots 2..p+1)
            let fmat = fk.shifted(0, p + 1).block(l);
            let eta_imgs = shift_images(&model, p, 1, p + 1);
            let shifted: Vec<Poly> = comp
                .iter()
                .map(|q| q.subst_rat(out_vars.clone(), &eta_imgs))
                .collect();
            let mut acc = fmat.apply(&shifted)?;
            // simplicial tail
            for i in 1..=(p + 1) {
                let images = model.face_images(p + 1, i)?;
                for (idx, q) in comp.iter().enumerate() {
                    let v = q.subst_rat(out_vars.clone(), &images);
                    acc[idx] = if i % 2 == 1 {
                        acc[idx].sub(&v)
                    } else {
                        acc[idx].add(&v)
                    };
                }
            }
            for (i, q) in acc.into_iter().enumerate() {
                let q = if sign_pl < 0 { q.neg() } else { q };
                let cur = out.value.component(l)[i].clone();
                out.value.set(l, i, cur.add(&q));
            }
        } else {
            let exp = (k as i64 * (p as i64 + l)).rem_euclid(2);
            let sign = if exp == 0 { 1i64 } else { -1 };
            let fmat = fk.shifted(0, p + k).block(l);
            if fmat.rows == 0 || fmat.cols == 0 {
                continue;
            }
            let eta_imgs = shift_images(&model, p, k, p + k);
            let shifted: Vec<Poly> = comp
                .iter()
                .map(|q| q.subst_rat(out_vars.clone(), &eta_imgs))
                .collect();
            let img = fmat.apply(&shifted)?;
            let lt = l + fk.value.degree;
            for (i, q) in img.into_iter().enumerate() {
                let q = if sign < 0 { q.neg() } else { q };
                let cur = out.value.component(lt)[i].clone();
                out.value.set(lt, i, cur.add(&q));
            }
        }
    }
    Ok(out)
}

/// Element of the total cochain module of a smooth representation.
#[derive(Clone, Debug)]
pub struct SmoothElement {
    pub bundle: GradedSpace,
    parts: BTreeMap<usize, SmoothCochain>,
}

impl SmoothElement {
    pub fn zero(bundle: GradedSpace) -> Self {
        SmoothElement {
            bundle,
            parts: BTreeMap::new(),
        }
    }

    pub fn from_cochain(c: SmoothCochain) -> Self {
        let mut e = SmoothElement::zero(c.bundle.clone());
        e.add_cochain(c).unwrap();
        e
    }

    pub fn add_cochain(&mut self, c: SmoothCochain) -> Result<()> {
        if c.bundle != self.bundle {
            return Err(EngineError::Shape("element bundle mismatch".into()));
        }
        match self.parts.remove(&c.arity) {
            None => {
                self.parts.insert(c.arity, c);
            }
            Some(existing) => {
                self.parts.insert(c.arity, existing.add(&c)?);
            }
        }
        Ok(())
    }

    pub fn parts(&self) -> impl Iterator<Item = &SmoothCochain> {
        self.parts.values()
    }

    pub fn part(&self, arity: usize) -> Option<&SmoothCochain> {
        self.parts.get(&arity)
    }

    pub fn is_zero(&self) -> bool {
        self.parts.values().all(|c| c.is_zero())
    }

    pub fn sub(&self, rhs: &SmoothElement) -> Result<SmoothElement> {
        let mut out = self.clone();
        for c in rhs.parts.values() {
            out.add_cochain(c.scale_rat(&-Rat::from_integer(1.into())))?;
        }
        Ok(out)
    }
}

/// The structure differential of a smooth representation.
pub fn apply_d_smooth(rep: &SmoothRepG, eta: &SmoothElement) -> Result<SmoothElement> {
    let mut out = SmoothElement::zero(eta.bundle.clone());
    for part in eta.parts() {
        for fk in &rep.f {
            out.add_cochain(tilde_smooth(fk, part)?)?;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Ehresmann connections and the adjoint representation
// ---------------------------------------------------------------------------

/// Connection data on a smooth groupoid model. On a matrix group over a
/// point the splitting is canonical; on a pair groupoid it is the matrix
/// field `lambda` on arrows with `lambda|_units = id`, splitting `ds` by
/// `v -> (lambda v, v)`.
#[derive(Clone, Debug)]
pub enum EhresmannConn {
    Trivial,
    Pair { lambda: PolyMat },
}

impl EhresmannConn {
    pub fn pair_from_lambda(model: &SmoothModel, lambda: PolyMat) -> Result<Self> {
        let SmoothModel::Pair(p) = model else {
            return Err(EngineError::Model("lambda connection needs a pair model".into()));
        };
        if lambda.rows != p.chart_dim || lambda.cols != p.chart_dim {
            return Err(EngineError::Shape("lambda must be n x n".into()));
        }
        let vars1 = model.arity_vars(1);
        let unit = model.unit_slot_images(1, 1);
        let at_units = lambda.subst(vars1.clone(), &unit);
        if at_units.sub(&PolyMat::identity(vars1, p.chart_dim))?.is_zero() {
            Ok(EhresmannConn::Pair { lambda })
        } else {
            Err(EngineError::NotUnital(
                "connection does not restrict to the natural splitting at units".into(),
            ))
        }
    }
}

/// `lambda` of a pair-groupoid connection re-expressed between two point
/// slots of a larger tuple context.
pub fn lambda_between(
    model: &SmoothModel,
    lambda: &PolyMat,
    total: usize,
    point_t: usize,
    point_s: usize,
) -> PolyMat {
    let SmoothModel::Pair(p) = model else { unreachable!() };
    let n = p.chart_dim;
    let target = model.arity_vars(total);
    let mut images = Vec::with_capacity(2 * n);
    for j in 0..n {
        images.push(Poly::var(target.clone(), point_t * n + j).unwrap());
    }
    for j in 0..n {
        images.push(Poly::var(target.clone(), point_s * n + j).unwrap());
    }
    lambda.subst(target, &images)
}

/// The adjoint representation induced by a connection: the anchor in arity
/// zero, the horizontal/vertical transport in arity one, and the curvature
/// of the splitting in arity two.
pub fn build_ad_sigma(model: &Arc<SmoothModel>, conn: &EhresmannConn) -> Result<SmoothRepG> {
    match (model.as_ref(), conn) {
        (SmoothModel::Matrix(m), EhresmannConn::Trivial) => {
            let mcount = m.coords();
            let bundle = GradedSpace::concentrated(0, mcount);
            let f0 = SmoothEndCochain::zero(model.clone(), bundle.clone(), bundle.clone(), 1, 0);
            // F_1(g): v -> g^{-1} v g, coordinates of the conjugation
            let vars1 = model.arity_vars(1);
            let g_coords: Vec<Poly> = (0..mcount)
                .map(|j| Poly::var(vars1.clone(), j).unwrap())
                .collect();
            let inv = m.inverse_coords(&g_coords);
            let mut block = PolyMat::zero(vars1.clone(), mcount, mcount);
            for i in 0..mcount {
                let col = conjugate_basis_coords(m, &inv, &g_coords, i, &vars1);
                for k in 0..mcount {
                    block.set(k, i, col[k].clone());
                }
            }
            let mut f1 = SmoothEndCochain::zero(model.clone(), bundle.clone(), bundle.clone(), 0, 1);
            f1.value.set_block(0, block)?;
            Ok(SmoothRepG {
                model: model.clone(),
                bundle,
                f: vec![f0, f1],
                unital: true,
            })
        }
        (SmoothModel::Pair(p), EhresmannConn::Pair { lambda }) => {
            let n = p.chart_dim;
            let bundle = GradedSpace::new([(0, n), (1, n)]);
            // F_0 = anchor: identity from the vertical summand onto TM
            let vars0 = model.arity_vars(0);
            let mut f0 = SmoothEndCochain::zero(model.clone(), bundle.clone(), bundle.clone(), 1, 0);
            f0.value.set_block(0, PolyMat::identity(vars0, n))?;
            // F_1 = lambda on both summands; on the vertical one computed
            // through the left splitting: -omega(l(alpha)) with
            // omega(a,b) = a - lambda b and l(alpha) = (0, alpha).
            let vars1 = model.arity_vars(1);
            let lam = lambda_between(model, lambda, 1, 0, 1);
            let mut f1 = SmoothEndCochain::zero(model.clone(), bundle.clone(), bundle.clone(), 0, 1);
            let on_vertical = {
                // -omega(0, alpha) = -(0 - lambda alpha) = lambda alpha
                let zero = PolyMat::zero(vars1.clone(), n, n);
                zero.sub(&lam)?.neg()
            };
            f1.value.set_block(0, on_vertical)?;
            f1.value.set_block(1, lam.clone())?;
            // F_2 = curvature of the splitting through the multiplication
            let vars2 = model.arity_vars(2);
            let lam_01 = lambda_between(model, lambda, 2, 0, 1);
            let lam_12 = lambda_between(model, lambda, 2, 1, 2);
            let lam_02 = lambda_between(model, lambda, 2, 0, 2);
            let k_block = lam_01.mul(&lam_12)?.sub(&lam_02)?;
            let mut f2 = SmoothEndCochain::zero(model.clone(), bundle.clone(), bundle.clone(), -1, 2);
            let mut kmap = GradedPolyMap::zero(vars2, bundle.clone(), bundle.clone(), -1);
            kmap.set_block(1, k_block)?;
            f2.value = kmap;
            let mut f = vec![f0, f1];
            if !f2.is_zero() {
                f.push(f2);
            }
            Ok(SmoothRepG {
                model: model.clone(),
                bundle,
                f,
                unital: true,
            })
        }
        _ => Err(EngineError::Model(
            "connection kind does not match the model".into(),
        )),
    }
}

/// Coordinates of `g^{-1} b_i g` in the basis.
fn conjugate_basis_coords(
    m: &super::MatrixGroupModel,
    inv: &[Poly],
    g: &[Poly],
    i: usize,
    vars: &crate::poly::VarSet,
) -> Vec<Poly> {
    let mc = m.coords();
    let mut out = vec![Poly::zero(vars.clone()); mc];
    // b_i
    out[i] = Poly::one(vars.clone());
    // U b_i
    for j in 0..mc {
        for k in 0..mc {
            let p = &m.basis_product(j, i)[k];
            if !p.is_zero() {
                out[k] = out[k].add(&inv[j].scale(p));
            }
        }
    }
    // b_i A
    for j in 0..mc {
        for k in 0..mc {
            let p = &m.basis_product(i, j)[k];
            if !p.is_zero() {
                out[k] = out[k].add(&g[j].scale(p));
            }
        }
    }
    // U b_i A
    for j in 0..mc {
        for mm in 0..mc {
            let pj = &m.basis_product(j, i)[mm];
            if pj.is_zero() {
                continue;
            }
            for l in 0..mc {
                for k in 0..mc {
                    let pm = &m.basis_product(mm, l)[k];
                    if pm.is_zero() {
                        continue;
                    }
                    out[k] = out[k].add(&inv[j].mul(&g[l]).scale(&(pj * pm)));
                }
            }
        }
    }
    out
}

/// Composition product of operator-valued cochains: the left factor takes
/// the first slots.
pub fn circ_smooth(f: &SmoothEndCochain, g: &SmoothEndCochain) -> Result<SmoothEndCochain> {
    let total = f.arity + g.arity;
    let left = f.shifted(0, total);
    let right = g.shifted(f.arity, total);
    let mut out = SmoothEndCochain::zero(
        f.model.clone(),
        g.value.source.clone(),
        f.value.target.clone(),
        f.value.degree + g.value.degree,
        total,
    );
    out.value = left.compose(&right)?;
    Ok(out)
}

/// Face pullback `d_i^*` on operator-valued cochains.
pub fn face_pullback_end(f: &SmoothEndCochain, i: usize) -> Result<SmoothEndCochain> {
    let k = f.arity + 1;
    let images = f.model.face_images(k, i)?;
    let target = f.model.arity_vars(k);
    let mut out = SmoothEndCochain::zero(
        f.model.clone(),
        f.value.source.clone(),
        f.value.target.clone(),
        f.value.degree,
        k,
    );
    out.value = f.value.subst(target, &images);
    Ok(out)
}

/// Multiplies an operator-valued cochain by a function of the tuple source.
pub fn scale_by_source_fn(f: &SmoothEndCochain, h: &Poly) -> Result<SmoothEndCochain> {
    let model = f.model.clone();
    let vars = model.arity_vars(f.arity);
    let images = shift_images(&model, 0, f.arity, f.arity);
    let h_at_source = h.subst_rat(vars, &images);
    let mut out = f.clone();
    out.value = out.value.scale(&h_at_source);
    Ok(out)
}

// ---------------------------------------------------------------------------
// Smooth morphisms
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct SmoothMorphismG {
    pub phis: Vec<SmoothEndCochain>,
}

impl SmoothMorphismG {
    pub fn identity(rep: &SmoothRepG) -> Self {
        let vars0 = rep.model.arity_vars(0);
        let mut phi0 = SmoothEndCochain::zero(
            rep.model.clone(),
            rep.bundle.clone(),
            rep.bundle.clone(),
            0,
            0,
        );
        phi0.value = GradedPolyMap::identity(vars0, &rep.bundle);
        SmoothMorphismG { phis: vec![phi0] }
    }

    pub fn scalar(rep: &SmoothRepG, c: &Rat) -> Self {
        let mut m = Self::identity(rep);
        m.phis[0].value = m.phis[0].value.scale_rat(c);
        m
    }

    pub fn phi_cochain(&self, k: usize, rep_src: &SmoothRepG, rep_tgt: &SmoothRepG) -> SmoothEndCochain {
        self.phis.get(k).cloned().unwrap_or_else(|| {
            SmoothEndCochain::zero(
                rep_src.model.clone(),
                rep_src.bundle.clone(),
                rep_tgt.bundle.clone(),
                -(k as i64),
                k,
            )
        })
    }
}

/// Morphism equation at arity `k` over the tuple context.
pub fn morphism_equation_smooth(
    phi: &SmoothMorphismG,
    source: &SmoothRepG,
    target: &SmoothRepG,
    k: usize,
) -> Result<GradedPolyMap> {
    let vars = source.model.arity_vars(k);
    let mut acc = GradedPolyMap::zero(
        vars.clone(),
        source.bundle.clone(),
        target.bundle.clone(),
        1 - k as i64,
    );
    for j in 0..=k {
        let pj = phi.phi_cochain(j, source, target).shifted(0, k);
        let fi = source.f_cochain(k - j).shifted(j, k);
        let mut term = pj.compose(&fi)?;
        if j % 2 == 1 {
            term = term.scale_rat(&-Rat::from_integer(1.into()));
        }
        acc = acc.add(&term)?;
        let fj = target.f_cochain(j).shifted(0, k);
        let pi = phi.phi_cochain(k - j, source, target).shifted(j, k);
        acc = acc.sub(&fj.compose(&pi)?)?;
    }
    if k >= 2 {
        let pk1 = phi.phi_cochain(k - 1, source, target);
        for j in 1..k {
            let images = source.model.face_images(k, j)?;
            let mut term = pk1.value.subst(vars.clone(), &images);
            if j % 2 == 1 {
                term = term.scale_rat(&-Rat::from_integer(1.into()));
            }
            acc = acc.sub(&term)?;
        }
    }
    Ok(acc)
}

pub fn check_morphism_g_smooth(
    phi: &SmoothMorphismG,
    source: &SmoothRepG,
    target: &SmoothRepG,
    bound: usize,
    pool: &mut SamplePool,
    samples_per_arity: usize,
) -> Result<GroupoidRepReport> {
    let mut failures = Vec::new();
    for k in 0..=bound {
        let eq = morphism_equation_smooth(phi, source, target, k)?;
        if eq.is_zero() {
            continue;
        }
        for _ in 0..samples_per_arity {
            let pt = source.model.sample_tuple(pool, k);
            if !eq.eval(&pt)?.is_zero() {
                failures.push(GroupoidRepFailure {
                    equation: k,
                    witness: format!("sample tuple {pt:?}"),
                });
                break;
            }
        }
    }
    Ok(GroupoidRepReport { failures })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groupoid::cochain::{delta_fin, star_module_fin, trivial_bundle};
    use crate::poly::parse_poly;
    use crate::scalar::{rat, rat_int};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn two_step_bundle() -> GradedSpace {
        GradedSpace::new([(0, 2), (1, 2)])
    }

    /// A genuine representation of the pair groupoid: trivial action, a
    /// constant commuting differential.
    fn genuine_pair_rep(n: usize) -> FinRepG {
        let g = Arc::new(FiniteGroupoid::pair(n));
        let bundle = two_step_bundle();
        let mut del = GradedPolyMap::zero(novars(), bundle.clone(), bundle.clone(), 1);
        let mut b = PolyMat::zero(novars(), 2, 2);
        b.set(0, 0, Poly::constant(novars(), rat_int(1)));
        del.set_block(0, b).unwrap();
        let id = GradedPolyMap::identity(novars(), &bundle);
        FinRepG::genuine(g, bundle, del, |_| id.clone()).unwrap()
    }

    fn gauge_morphism(rep: &FinRepG, seed: u64) -> FinMorphismG {
        let g = &rep.groupoid;
        let mut rng = StdRng::seed_from_u64(seed);
        let mut phi = FinMorphismG::identity(rep);
        // a normalized arity-1 piece of degree -1 with random entries
        let mut phi1 = FinEndCochain::zero(g, rep.bundle.clone(), rep.bundle.clone(), -1, 1);
        for (pos, t) in g.tuples(1).iter().enumerate() {
            if g.is_unit(t[0]) {
                continue;
            }
            let mut m = GradedPolyMap::zero(novars(), rep.bundle.clone(), rep.bundle.clone(), -1);
            let mut block = PolyMat::zero(novars(), 2, 2);
            for r in 0..2 {
                for c in 0..2 {
                    block.set(r, c, Poly::constant(novars(), rat_int(rng.gen_range(-2..=2))));
                }
            }
            m.set_block(1, block).unwrap();
            phi1.set_at(pos, m);
        }
        phi.phis.push(phi1);
        phi
    }

    #[test]
    fn genuine_rep_passes() {
        let rep = genuine_pair_rep(3);
        assert!(check_rep_g_fin(&rep, 4).unwrap().passed());
    }

    #[test]
    fn unitality_failure_detected() {
        let mut rep = genuine_pair_rep(2);
        // scale F_1 at a unit arrow
        let g = rep.groupoid.clone();
        let pos = g.tuples(1).iter().position(|t| g.is_unit(t[0])).unwrap();
        let v = rep.f[1].at(pos).scale_rat(&rat_int(2));
        rep.f[1].set_at(pos, v);
        let report = check_rep_g_fin(&rep, 1).unwrap();
        assert!(report
            .failures
            .iter()
            .any(|f| f.witness.contains("!= id")));
    }

    #[test]
    fn gauge_of_identity_is_same_rep() {
        let rep = genuine_pair_rep(3);
        let id = FinMorphismG::identity(&rep);
        let out = gauge_transform_fin(&rep, &id, 4).unwrap();
        assert!(check_rep_g_fin(&out, 4).unwrap().passed());
        for (k, fk) in out.f.iter().enumerate() {
            let orig = rep.f_cochain(k);
            for pos in 0..fk.values.len() {
                assert!(fk.at(pos).sub(orig.at(pos)).unwrap().is_zero());
            }
        }
    }

    #[test]
    fn gauge_by_scalar_is_same_rep() {
        let rep = genuine_pair_rep(3);
        let mut phi = FinMorphismG::identity(&rep);
        for x in 0..rep.groupoid.n_objects {
            let v = phi.phis[0].at(x).scale_rat(&rat_int(2));
            phi.phis[0].set_at(x, v);
        }
        let out = gauge_transform_fin(&rep, &phi, 3).unwrap();
        for (k, fk) in out.f.iter().enumerate() {
            let orig = rep.f_cochain(k);
            for pos in 0..fk.values.len() {
                assert!(fk.at(pos).sub(orig.at(pos)).unwrap().is_zero(), "k={k}");
            }
        }
    }

    #[test]
    fn gauge_with_phi1_creates_f2_and_passes() {
        let rep = genuine_pair_rep(4);
        let phi = gauge_morphism(&rep, 5);
        let out = gauge_transform_fin(&rep, &phi, 5).unwrap();
        assert!(out.f.len() > 2 && !out.f[2].is_zero(), "F_2 should be nonzero");
        let report = check_rep_g_fin(&out, 5).unwrap();
        assert!(report.passed(), "failures: {:?}", report.failures);
        // the defining property: phi is a morphism rep -> out
        assert!(check_morphism_g_fin(&phi, &rep, &out, 5).unwrap().passed());
    }

    #[test]
    fn gauge_preserves_cohomology_dimensions() {
        let rep = genuine_pair_rep(3);
        let phi = gauge_morphism(&rep, 9);
        let out = gauge_transform_fin(&rep, &phi, 4).unwrap();
        let a = cohomology_g_fin(&rep, 3, true).unwrap();
        let b = cohomology_g_fin(&out, 3, true).unwrap();
        assert_eq!(a.dims(), b.dims());
    }

    #[test]
    fn d_squares_to_zero_on_normalized_basis() {
        let rep = {
            let base = genuine_pair_rep(3);
            let phi = gauge_morphism(&base, 13);
            gauge_transform_fin(&base, &phi, 5).unwrap()
        };
        let g = rep.groupoid.clone();
        for arity in 0..=2usize {
            let list: Vec<usize> = if arity == 0 {
                (0..g.n_objects).collect()
            } else {
                g.tuples(arity)
                    .iter()
                    .enumerate()
                    .filter(|(_, t)| !g.tuple_has_unit(t))
                    .map(|(p, _)| p)
                    .collect()
            };
            for raw in list {
                for d in rep.bundle.degrees() {
                    for c in 0..rep.bundle.dim(d) {
                        let mut eta = FinCochain::zero(g.clone(), rep.bundle.clone(), arity);
                        let mut v = eta.at(raw).clone();
                        v.set(d, c, Poly::one(novars()));
                        eta.set_at(raw, v);
                        let e = FinElement::from_cochain(eta);
                        let dd = apply_d_fin(&rep, &apply_d_fin(&rep, &e).unwrap()).unwrap();
                        assert!(dd.is_zero(), "arity {arity} degree {d}");
                    }
                }
            }
        }
    }

    #[test]
    fn leibniz_rule_for_d() {
        let rep = genuine_pair_rep(3);
        let g = rep.groupoid.clone();
        let mut rng = StdRng::seed_from_u64(31);
        for (p, kf) in [(0usize, 1usize), (1, 1), (1, 2)] {
            // random E-valued eta of arity p concentrated in degree 0
            let mut eta = FinCochain::zero(g.clone(), rep.bundle.clone(), p);
            for pos in 0..eta.len() {
                let mut v = eta.at(pos).clone();
                v.set(0, rng.gen_range(0..2), Poly::constant(novars(), rat(rng.gen_range(-2..=2), 1)));
                eta.set_at(pos, v);
            }
            let f = FinCochain::scalar(g.clone(), kf, |_| rat(rng.gen_range(-2..=2), 1));
            let lhs = apply_d_fin(&rep, &FinElement::from_cochain(star_module_fin(&eta, &f).unwrap())).unwrap();
            let d_eta = apply_d_fin(&rep, &FinElement::from_cochain(eta.clone())).unwrap();
            let mut rhs = FinElement::zero(rep.bundle.clone());
            for part in d_eta.parts() {
                rhs.add_cochain(star_module_fin(part, &f).unwrap()).unwrap();
            }
            // (-1)^{p+0} eta * delta f   (eta concentrated in degree 0)
            let mut term = star_module_fin(&eta, &delta_fin(&f).unwrap()).unwrap();
            if p % 2 == 1 {
                term = term.scale_rat(&-rat_int(1));
            }
            rhs.add_cochain(term).unwrap();
            assert!(lhs.sub(&rhs).unwrap().is_zero(), "p={p} kf={kf}");
        }
    }

    #[test]
    fn d_preserves_normalized_for_unital_rep() {
        let rep = {
            let base = genuine_pair_rep(3);
            let phi = gauge_morphism(&base, 21);
            gauge_transform_fin(&base, &phi, 4).unwrap()
        };
        let g = rep.groupoid.clone();
        for arity in 1..=2usize {
            for (raw, t) in g.tuples(arity).iter().enumerate() {
                if g.tuple_has_unit(t) {
                    continue;
                }
                let mut eta = FinCochain::zero(g.clone(), rep.bundle.clone(), arity);
                let mut v = eta.at(raw).clone();
                v.set(0, 0, Poly::one(novars()));
                eta.set_at(raw, v);
                let image = apply_d_fin(&rep, &FinElement::from_cochain(eta)).unwrap();
                for part in image.parts() {
                    assert!(part.is_normalized());
                }
            }
        }
    }

    #[test]
    fn trivial_rep_cohomology_of_pair_groupoid() {
        let g = Arc::new(FiniteGroupoid::pair(4));
        let rep = FinRepG::trivial(g);
        let report = cohomology_g_fin(&rep, 3, true).unwrap();
        assert_eq!(report.dim(0), Some(1));
        assert_eq!(report.dim(1), Some(0));
        assert_eq!(report.dim(2), Some(0));
        assert_eq!(report.dim(3), Some(0));
    }

    #[test]
    fn trivial_rep_cohomology_of_discrete_groupoid() {
        let g = Arc::new(FiniteGroupoid::discrete(2));
        let rep = FinRepG::trivial(g);
        let report = cohomology_g_fin(&rep, 2, true).unwrap();
        assert_eq!(report.dim(0), Some(2));
        assert_eq!(report.dim(1), Some(0));
    }

    #[test]
    fn normalized_and_full_cohomology_agree() {
        let g = Arc::new(FiniteGroupoid::cyclic_group(2));
        // sign representation on a two-term bundle
        let bundle = GradedSpace::new([(0, 1), (1, 1)]);
        let mut minus = GradedPolyMap::identity(novars(), &bundle);
        minus = minus.scale_rat(&-rat_int(1));
        let id = GradedPolyMap::identity(novars(), &bundle);
        let del = GradedPolyMap::zero(novars(), bundle.clone(), bundle.clone(), 1);
        let rep = FinRepG::genuine(g.clone(), bundle, del, |a| {
            if g.is_unit(a) {
                id.clone()
            } else {
                minus.clone()
            }
        })
        .unwrap();
        assert!(check_rep_g_fin(&rep, 3).unwrap().passed());
        let n = cohomology_g_fin(&rep, 3, true).unwrap();
        let f = cohomology_g_fin(&rep, 3, false).unwrap();
        assert_eq!(n.dims(), f.dims());
    }

    #[test]
    fn tilde_examples() {
        let g = Arc::new(FiniteGroupoid::pair(3));
        let bundle = trivial_bundle();
        let positions = tuple_positions_up_to(&g, 4);
        // F identically the identity, (k,m)=(1,0): tilde = (-1)^{p+l} times
        // the unsigned simplicial sum
        let mut f1 = FinEndCochain::zero(&g, bundle.clone(), bundle.clone(), 0, 1);
        let id = GradedPolyMap::identity(novars(), &bundle);
        for pos in 0..g.tuples(1).len() {
            f1.set_at(pos, id.clone());
        }
        let mut rng = StdRng::seed_from_u64(3);
        for p in 0..=2usize {
            let eta = FinCochain::scalar(g.clone(), p, |_| rat(rng.gen_range(-3..=3), 1));
            let out = tilde_fin(&f1, &eta, &positions).unwrap();
            // compare with (-1)^p * delta (l = 0, delta = (-1)^p * unsigned sum)
            let delta = delta_fin(&eta).unwrap();
            // out = (-1)^{p} * unsigned = (-1)^p * ((-1)^p delta) = delta... 
            // delta(f) = sum (-1)^{p+i} d_i^*, unsigned sum = sum (-1)^i d_i^*
            // so out = (-1)^p * unsigned = delta exactly when l = 0.
            let diff = out.add(&delta.scale_rat(&-rat_int(1))).unwrap();
            assert!(diff.is_zero(), "p={p}");
        }
        // k=2 module case: value is F(g1,g2)(eta(g3)); needs a two-degree
        // bundle for a nonzero degree -1 block
        let b2 = GradedSpace::new([(0, 1), (1, 1)]);
        let mut f2 = FinEndCochain::zero(&g, b2.clone(), b2.clone(), -1, 2);
        for (pos, _) in g.tuples(2).iter().enumerate() {
            let mut m = GradedPolyMap::zero(novars(), b2.clone(), b2.clone(), -1);
            let mut block = PolyMat::zero(novars(), 1, 1);
            block.set(0, 0, Poly::constant(novars(), rat_int(pos as i64 % 3 - 1)));
            m.set_block(1, block).unwrap();
            f2.set_at(pos, m);
        }
        let mut eta = FinCochain::zero(g.clone(), b2.clone(), 1);
        for pos in 0..eta.len() {
            let mut v = eta.at(pos).clone();
            v.set(1, 0, Poly::constant(novars(), rat_int((pos % 4) as i64)));
            eta.set_at(pos, v);
        }
        let out = tilde_fin(&f2, &eta, &positions).unwrap();
        let p3 = g.tuple_positions(3);
        let p2 = g.tuple_positions(2);
        let p1 = g.tuple_positions(1);
        for (t, pos) in p3.iter() {
            // sign (-1)^{2*(1+1)} = +1
            let fmat = f2.at(p2[&t[..2].to_vec()]).block(1);
            let ev = eta.at(p1[&t[2..].to_vec()]).component(1)[0].clone();
            let expect = fmat.at(0, 0).mul(&ev);
            let got = out.at(*pos).component(0)[0].clone();
            assert_eq!(got, expect);
        }
    }

    #[test]
    fn matrix_adjoint_rep_passes() {
        let model = SmoothModel::heisenberg().unwrap();
        let rep = build_ad_sigma(&model, &EhresmannConn::Trivial).unwrap();
        let mut pool = SamplePool::new(7);
        let report = check_rep_g_smooth(&rep, 4, &mut pool, 5).unwrap();
        assert!(report.passed(), "failures: {:?}", report.failures);
        // exact closure as polynomials, stronger than sampling
        for k in 0..=4 {
            assert!(structure_equation_smooth(&rep, k).unwrap().is_zero());
        }
    }

    #[test]
    fn pair_adjoint_flat_lambda_has_no_curvature() {
        let model = SmoothModel::pair(1);
        let v1 = model.arity_vars(1);
        let lambda = PolyMat::identity(v1, 1);
        let conn = EhresmannConn::pair_from_lambda(&model, lambda).unwrap();
        let rep = build_ad_sigma(&model, &conn).unwrap();
        assert_eq!(rep.f.len(), 2, "no F_2 for the product splitting");
        let mut pool = SamplePool::new(7);
        assert!(check_rep_g_smooth(&rep, 4, &mut pool, 5).unwrap().passed());
    }

    fn quadratic_lambda(model: &SmoothModel) -> EhresmannConn {
        let v1 = model.arity_vars(1);
        let mut lambda = PolyMat::identity(v1.clone(), 1);
        lambda.set(0, 0, parse_poly("1 + (x0_0 - x1_0)^2", &v1).unwrap());
        EhresmannConn::pair_from_lambda(model, lambda).unwrap()
    }

    #[test]
    fn pair_adjoint_quadratic_lambda_passes_with_curvature() {
        let model = SmoothModel::pair(1);
        let rep = build_ad_sigma(&model, &quadratic_lambda(&model)).unwrap();
        assert!(rep.f.len() > 2 && !rep.f[2].is_zero());
        let mut pool = SamplePool::new(7);
        let report = check_rep_g_smooth(&rep, 5, &mut pool, 5).unwrap();
        assert!(report.passed(), "failures: {:?}", report.failures);
        for k in 0..=5 {
            assert!(structure_equation_smooth(&rep, k).unwrap().is_zero(), "k={k}");
        }
    }

    /// Independent oracle for the splitting curvature: evaluate the
    /// multiplication derivative on jet-valued tangent pairs.
    fn k_sigma_oracle(lambda_eval: impl Fn(&Rat, &Rat) -> Rat, p: Rat, q: Rat, r: Rat, x: Rat) -> Rat {
        // sigma_g(lambda_h X) at g=(p,q): (lam(p,q) lam(q,r) X, lam(q,r) X)
        // sigma_h(X) at h=(q,r): (lam(q,r) X, X)
        // dm pairs the outer components: (lam(p,q)lam(q,r)X, X)
        // sigma_{gh}(X) = (lam(p,r) X, X); difference is vertical, read off
        // through the left splitting omega(a,b) = a - lam b at (p,r).
        let first = &lambda_eval(&p, &q) * &lambda_eval(&q, &r) * &x;
        let diff_a = &first - &lambda_eval(&p, &r) * &x;
        // omega(diff_a, 0) = diff_a
        diff_a
    }

    #[test]
    fn k_sigma_value_matches_oracle() {
        let model = SmoothModel::pair(1);
        let rep = build_ad_sigma(&model, &quadratic_lambda(&model)).unwrap();
        let lam = |p: &Rat, q: &Rat| -> Rat {
            let d = p - q;
            Rat::from_integer(1.into()) + &d * &d
        };
        // sample tuple ((1,0),(0,2)) with X = 1
        let pt = vec![rat_int(1), rat_int(0), rat_int(2)];
        let block = rep.f[2].value.block(1);
        let val = block.at(0, 0).eval_rat(&pt).unwrap();
        let oracle = k_sigma_oracle(lam, rat_int(1), rat_int(0), rat_int(2), rat_int(1));
        assert_eq!(val, oracle);
        assert_eq!(val, rat_int(8));
    }

    #[test]
    fn matrix_conjugation_is_unital_group_action() {
        // functoriality: F_1(g ∘ h) = F_1(g) ∘ F_1(h) is the k=2 structure
        // equation for F_2 = 0, covered by matrix_adjoint_rep_passes; spot
        // check the conjugation on (R^2, +): trivial action.
        let model = SmoothModel::additive(2).unwrap();
        let rep = build_ad_sigma(&model, &EhresmannConn::Trivial).unwrap();
        let v1 = model.arity_vars(1);
        let id = PolyMat::identity(v1, 2);
        assert!(rep.f[1].value.block(0).sub(&id).unwrap().is_zero());
    }

    #[test]
    fn smooth_morphism_identity_and_scalar() {
        let model = SmoothModel::pair(1);
        let rep = build_ad_sigma(&model, &quadratic_lambda(&model)).unwrap();
        let mut pool = SamplePool::new(9);
        let id = SmoothMorphismG::identity(&rep);
        assert!(check_morphism_g_smooth(&id, &rep, &rep, 4, &mut pool, 4)
            .unwrap()
            .passed());
        let two = SmoothMorphismG::scalar(&rep, &rat_int(2));
        assert!(check_morphism_g_smooth(&two, &rep, &rep, 4, &mut pool, 4)
            .unwrap()
            .passed());
    }

    #[test]
    fn pullback_along_identity_is_identity() {
        let rep = genuine_pair_rep(3);
        let id = FiniteMorphism::identity(rep.groupoid.clone());
        let out = pullback_rep_fin(&id, &rep).unwrap();
        assert!(check_rep_g_fin(&out, 3).unwrap().passed());
        for (k, fk) in out.f.iter().enumerate() {
            for pos in 0..fk.values.len() {
                assert!(fk.at(pos).sub(rep.f_cochain(k).at(pos)).unwrap().is_zero());
            }
        }
    }
}
