//! Groupoid cochains over both backends: exhaustive tables on finite models
//! and polynomials in tuple coordinates on smooth models. The differential
//! `delta`, the `⋆`-product and normalization live here.

use std::sync::Arc;

use crate::error::{EngineError, Result};
use crate::graded::GradedSpace;
use crate::poly::{var_set, Poly, VarSet};
use crate::polyops::GradedPolyVec;
use crate::scalar::Rat;

use super::{FiniteGroupoid, FiniteMorphism, SmoothModel};

pub fn novars() -> VarSet {
    var_set(Vec::new())
}

pub fn trivial_bundle() -> GradedSpace {
    GradedSpace::concentrated(0, 1)
}

/// Cochain on a finite groupoid with values in a (trivial) graded bundle;
/// arity 0 is indexed by objects, arity `k > 0` by composable `k`-tuples.
#[derive(Clone, Debug)]
pub struct FinCochain {
    pub groupoid: Arc<FiniteGroupoid>,
    pub arity: usize,
    pub bundle: GradedSpace,
    values: Vec<GradedPolyVec>,
}

impl FinCochain {
    pub fn zero(groupoid: Arc<FiniteGroupoid>, bundle: GradedSpace, arity: usize) -> Self {
        let len = if arity == 0 {
            groupoid.n_objects
        } else {
            groupoid.tuples(arity).len()
        };
        FinCochain {
            groupoid,
            arity,
            bundle: bundle.clone(),
            values: vec![GradedPolyVec::zero(novars(), bundle); len],
        }
    }

    /// Scalar cochain from per-tuple rationals.
    pub fn scalar(
        groupoid: Arc<FiniteGroupoid>,
        arity: usize,
        mut f: impl FnMut(&[usize]) -> Rat,
    ) -> Self {
        let mut out = Self::zero(groupoid.clone(), trivial_bundle(), arity);
        if arity == 0 {
            for x in 0..groupoid.n_objects {
                let v = f(&[x]);
                out.values[x].set(0, 0, Poly::constant(novars(), v));
            }
        } else {
            for (pos, t) in groupoid.tuples(arity).iter().enumerate() {
                let v = f(t);
                out.values[pos].set(0, 0, Poly::constant(novars(), v));
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn at(&self, pos: usize) -> &GradedPolyVec {
        &self.values[pos]
    }

    pub fn set_at(&mut self, pos: usize, v: GradedPolyVec) {
        self.values[pos] = v;
    }

    pub fn add(&self, rhs: &FinCochain) -> Result<FinCochain> {
        if self.arity != rhs.arity || self.bundle != rhs.bundle {
            return Err(EngineError::Shape("cochain sum mismatch".into()));
        }
        let mut out = self.clone();
        for (pos, v) in rhs.values.iter().enumerate() {
            out.values[pos] = out.values[pos].add(v)?;
        }
        Ok(out)
    }

    pub fn scale_rat(&self, c: &Rat) -> FinCochain {
        let mut out = self.clone();
        for v in out.values.iter_mut() {
            *v = v.scale_rat(c);
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.is_zero())
    }

    pub fn scalar_at(&self, pos: usize) -> Rat {
        self.values[pos]
            .component(0)
            .first()
            .map(|p| p.constant_part())
            .unwrap_or_else(|| Rat::from_integer(0.into()))
    }

    /// True when the cochain kills every tuple containing a unit arrow.
    pub fn is_normalized(&self) -> bool {
        if self.arity == 0 {
            return true;
        }
        for (pos, t) in self.groupoid.tuples(self.arity).iter().enumerate() {
            if self.groupoid.tuple_has_unit(t) && !self.values[pos].is_zero() {
                return Ok::<bool, ()>(false).unwrap();
            }
        }
        true
    }

    /// Pullback along a groupoid morphism.
    pub fn pullback(&self, gamma: &FiniteMorphism) -> Result<FinCochain> {
        let mut out = FinCochain::zero(gamma.from.clone(), self.bundle.clone(), self.arity);
        if self.arity == 0 {
            for x in 0..gamma.from.n_objects {
                out.values[x] = self.values[gamma.obj_map[x]].clone();
            }
            return Ok(out);
        }
        let positions = gamma.to.tuple_positions(self.arity);
        for (pos, t) in gamma.from.tuples(self.arity).iter().enumerate() {
            let image = gamma.map_tuple(t);
            let ipos = positions
                .get(&image)
                .ok_or_else(|| EngineError::Model("morphism image tuple missing".into()))?;
            out.values[pos] = self.values[*ipos].clone();
        }
        Ok(out)
    }
}

/// The simplicial differential on scalar cochains of a finite groupoid.
pub fn delta_fin(f: &FinCochain) -> Result<FinCochain> {
    if f.bundle != trivial_bundle() {
        return Err(EngineError::Shape("delta expects trivial coefficients".into()));
    }
    let g = f.groupoid.clone();
    let k = f.arity;
    let mut out = FinCochain::zero(g.clone(), f.bundle.clone(), k + 1);
    let src_positions = if k > 0 { g.tuple_positions(k) } else { Default::default() };
    for (pos, t) in g.tuples(k + 1).iter().enumerate() {
        let mut acc = Rat::from_integer(0.into());
        for i in 0..=(k + 1) {
            let sign = if (k + i) % 2 == 0 { 1 } else { -1 };
            let val = if k == 0 {
                // faces of a 1-tuple land in objects: d_0 = s, d_1 = t
                f.scalar_at(g.face_object(t[0], i))
            } else {
                let face = g.face(t, i)?;
                f.scalar_at(src_positions[&face])
            };
            if sign > 0 {
                acc += val;
            } else {
                acc -= val;
            }
        }
        if !num_traits::Zero::is_zero(&acc) {
            out.values[pos].set(0, 0, Poly::constant(novars(), acc));
        }
    }
    Ok(out)
}

/// Graded product of scalar cochains: `(f ⋆ h)` with the arity-arity sign.
pub fn star_fin(f: &FinCochain, h: &FinCochain) -> Result<FinCochain> {
    if f.bundle != trivial_bundle() || h.bundle != trivial_bundle() {
        return Err(EngineError::Shape("star_fin expects trivial coefficients".into()));
    }
    let g = f.groupoid.clone();
    let (k, p) = (f.arity, h.arity);
    let mut out = FinCochain::zero(g.clone(), trivial_bundle(), k + p);
    let sign = if (k * p) % 2 == 0 { 1i64 } else { -1 };
    let f_positions = g.tuple_positions(k.max(1));
    let h_positions = g.tuple_positions(p.max(1));
    let index_tuples: Vec<Vec<usize>> = if k + p == 0 {
        (0..g.n_objects).map(|x| vec![x]).collect()
    } else {
        g.tuples(k + p).as_ref().clone()
    };
    for (pos, t) in index_tuples.iter().enumerate() {
        let fv = if k == 0 {
            let obj = if k + p == 0 { t[0] } else { g.tuple_tgt(t) };
            f.scalar_at(obj)
        } else {
            f.scalar_at(f_positions[&t[..k].to_vec()])
        };
        let hv = if p == 0 {
            let obj = if k + p == 0 { t[0] } else { g.tuple_src(t) };
            h.scalar_at(obj)
        } else {
            h.scalar_at(h_positions[&t[k..].to_vec()])
        };
        let mut v = fv * hv;
        if sign < 0 {
            v = -v;
        }
        if !num_traits::Zero::is_zero(&v) {
            out.values[pos].set(0, 0, Poly::constant(novars(), v));
        }
    }
    Ok(out)
}

/// Right module product of a bundle-valued cochain with a scalar cochain:
/// `(eta ⋆ f)(g_1..g_{k+p}) = (-1)^{kp} eta(g_1..g_p) f(g_{p+1}..g_{p+k})`.
pub fn star_module_fin(eta: &FinCochain, f: &FinCochain) -> Result<FinCochain> {
    if f.bundle != trivial_bundle() {
        return Err(EngineError::Shape("module star needs scalar right factor".into()));
    }
    let g = eta.groupoid.clone();
    let (p, k) = (eta.arity, f.arity);
    let mut out = FinCochain::zero(g.clone(), eta.bundle.clone(), k + p);
    let sign = if (k * p) % 2 == 0 { 1i64 } else { -1 };
    let eta_positions = g.tuple_positions(p.max(1));
    let f_positions = g.tuple_positions(k.max(1));
    let index_tuples: Vec<Vec<usize>> = if k + p == 0 {
        (0..g.n_objects).map(|x| vec![x]).collect()
    } else {
        g.tuples(k + p).as_ref().clone()
    };
    for (pos, t) in index_tuples.iter().enumerate() {
        let ev = if p == 0 {
            let obj = if k + p == 0 { t[0] } else { g.tuple_tgt(t) };
            eta.values[obj].clone()
        } else {
            eta.values[eta_positions[&t[..p].to_vec()]].clone()
        };
        let fv = if k == 0 {
            let obj = if k + p == 0 { t[0] } else { g.tuple_src(t) };
            f.scalar_at(obj)
        } else {
            f.scalar_at(f_positions[&t[p..].to_vec()])
        };
        let mut v = ev.scale_rat(&fv);
        if sign < 0 {
            v = v.scale_rat(&-Rat::from_integer(1.into()));
        }
        out.values[pos] = v;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Smooth cochains
// ---------------------------------------------------------------------------

/// Cochain on a smooth model: a graded vector of polynomials in the free
/// coordinates of composable `k`-tuples.
#[derive(Clone, Debug)]
pub struct SmoothCochain {
    pub model: Arc<SmoothModel>,
    pub arity: usize,
    pub bundle: GradedSpace,
    pub value: GradedPolyVec,
}

impl SmoothCochain {
    pub fn zero(model: Arc<SmoothModel>, bundle: GradedSpace, arity: usize) -> Self {
        let vars = model.arity_vars(arity);
        SmoothCochain {
            model,
            arity,
            bundle: bundle.clone(),
            value: GradedPolyVec::zero(vars, bundle),
        }
    }

    pub fn scalar(model: Arc<SmoothModel>, arity: usize, p: Poly) -> Self {
        let mut c = Self::zero(model, trivial_bundle(), arity);
        c.value.set(0, 0, p);
        c
    }

    pub fn scalar_value(&self) -> Poly {
        self.value.component(0)[0].clone()
    }

    pub fn is_zero(&self) -> bool {
        self.value.is_zero()
    }

    pub fn add(&self, rhs: &SmoothCochain) -> Result<SmoothCochain> {
        if self.arity != rhs.arity || self.bundle != rhs.bundle {
            return Err(EngineError::Shape("smooth cochain sum mismatch".into()));
        }
        Ok(SmoothCochain {
            model: self.model.clone(),
            arity: self.arity,
            bundle: self.bundle.clone(),
            value: self.value.add(&rhs.value)?,
        })
    }

    pub fn scale_rat(&self, c: &Rat) -> SmoothCochain {
        SmoothCochain {
            model: self.model.clone(),
            arity: self.arity,
            bundle: self.bundle.clone(),
            value: self.value.scale_rat(c),
        }
    }

    /// Face pullback `d_i^*`, raising arity by one.
    pub fn face_pullback(&self, i: usize) -> Result<SmoothCochain> {
        let k = self.arity + 1;
        let images = self.model.face_images(k, i)?;
        let target = self.model.arity_vars(k);
        let mut out = SmoothCochain::zero(self.model.clone(), self.bundle.clone(), k);
        for (d, comp) in self.value.iter() {
            for (j, p) in comp.iter().enumerate() {
                out.value.set(d, j, p.subst_rat(target.clone(), &images));
            }
        }
        Ok(out)
    }

    pub fn is_normalized(&self) -> bool {
        if self.arity == 0 {
            return true;
        }
        let vars = self.model.arity_vars(self.arity);
        for slot in 1..=self.arity {
            let images = self.model.unit_slot_images(self.arity, slot);
            for (_, comp) in self.value.iter() {
                for p in comp {
                    if !p.subst_rat(vars.clone(), &images).is_zero() {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Exact evaluation of all components at a sample tuple.
    pub fn eval(&self, point: &[Rat]) -> Result<Vec<(i64, Vec<Rat>)>> {
        let mut out = Vec::new();
        for (d, comp) in self.value.iter() {
            let mut vals = Vec::with_capacity(comp.len());
            for p in comp {
                vals.push(p.eval_rat(point)?);
            }
            out.push((d, vals));
        }
        Ok(out)
    }
}

/// The simplicial differential on scalar smooth cochains.
pub fn delta_smooth(f: &SmoothCochain) -> Result<SmoothCochain> {
    if f.bundle != trivial_bundle() {
        return Err(EngineError::Shape("delta expects trivial coefficients".into()));
    }
    let k = f.arity;
    let mut out = SmoothCochain::zero(f.model.clone(), f.bundle.clone(), k + 1);
    for i in 0..=(k + 1) {
        let pulled = f.face_pullback(i)?;
        let sign = if (k + i) % 2 == 0 { 1i64 } else { -1 };
        let term = if sign < 0 {
            pulled.scale_rat(&-Rat::from_integer(1.into()))
        } else {
            pulled
        };
        out = out.add(&term)?;
    }
    Ok(out)
}

/// `⋆` on smooth scalar cochains: shift the factors into disjoint slots of
/// the combined tuple context.
pub fn star_smooth(f: &SmoothCochain, h: &SmoothCochain) -> Result<SmoothCochain> {
    let (k, p) = (f.arity, h.arity);
    let model = f.model.clone();
    let target = model.arity_vars(k + p);
    let f_shift = shift_images(&model, k, 0, k + p);
    let h_shift = shift_images(&model, p, k, k + p);
    let fv = f.scalar_value().subst_rat(target.clone(), &f_shift);
    let hv = h.scalar_value().subst_rat(target.clone(), &h_shift);
    let mut prod = fv.mul(&hv);
    if (k * p) % 2 == 1 {
        prod = prod.neg();
    }
    Ok(SmoothCochain::scalar(model, k + p, prod))
}

/// Right module product on smooth cochains, values times a scalar cochain.
pub fn star_module_smooth(eta: &SmoothCochain, f: &SmoothCochain) -> Result<SmoothCochain> {
    let (p, k) = (eta.arity, f.arity);
    let model = eta.model.clone();
    let target = model.arity_vars(k + p);
    let eta_shift = shift_images(&model, p, 0, k + p);
    let f_shift = shift_images(&model, k, p, k + p);
    let fv = f.scalar_value().subst_rat(target.clone(), &f_shift);
    let mut out = SmoothCochain::zero(model.clone(), eta.bundle.clone(), k + p);
    let sign = if (k * p) % 2 == 0 { 1i64 } else { -1 };
    for (d, comp) in eta.value.iter() {
        for (j, q) in comp.iter().enumerate() {
            let mut v = q.subst_rat(target.clone(), &eta_shift).mul(&fv);
            if sign < 0 {
                v = v.neg();
            }
            out.value.set(d, j, v);
        }
    }
    Ok(out)
}

/// Images of the arity-`k` variables when a block of `k` slots is placed at
/// offset `offset` inside an arity-`total` tuple.
pub fn shift_images(model: &SmoothModel, k: usize, offset: usize, total: usize) -> Vec<Poly> {
    let target = model.arity_vars(total);
    match model {
        SmoothModel::Matrix(m) => {
            let c = m.coords();
            let mut out = Vec::with_capacity(k * c);
            for slot in 0..k {
                for j in 0..c {
                    out.push(Poly::var(target.clone(), (offset + slot) * c + j).unwrap());
                }
            }
            out
        }
        SmoothModel::Pair(p) => {
            let n = p.chart_dim;
            let mut out = Vec::with_capacity((k + 1) * n);
            for point in 0..=k {
                for j in 0..n {
                    out.push(Poly::var(target.clone(), (offset + point) * n + j).unwrap());
                }
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::parse_poly;
    use crate::samples::SamplePool;
    use crate::scalar::rat_int;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_scalar_cochain(
        rng: &mut StdRng,
        g: &Arc<FiniteGroupoid>,
        arity: usize,
    ) -> FinCochain {
        FinCochain::scalar(g.clone(), arity, |_| {
            Rat::from_integer(rng.gen_range(-3i64..=3).into())
        })
    }

    #[test]
    fn delta_of_constant_object_function_vanishes() {
        let g = Arc::new(FiniteGroupoid::pair(3));
        let f = FinCochain::scalar(g.clone(), 0, |_| rat_int(5));
        assert!(delta_fin(&f).unwrap().is_zero());
    }

    #[test]
    fn delta_squares_to_zero_on_random_cochains() {
        let mut rng = StdRng::seed_from_u64(17);
        let g = Arc::new(FiniteGroupoid::pair(3));
        for arity in 0..=3usize {
            for _ in 0..5 {
                let f = random_scalar_cochain(&mut rng, &g, arity);
                let dd = delta_fin(&delta_fin(&f).unwrap()).unwrap();
                assert!(dd.is_zero(), "delta^2 != 0 at arity {arity}");
            }
        }
    }

    #[test]
    fn star_sign_in_arity_one() {
        // (f ⋆ h)(g1,g2) = -f(g1) h(g2)
        let g = Arc::new(FiniteGroupoid::pair(2));
        let f = FinCochain::scalar(g.clone(), 1, |t| rat_int(t[0] as i64 + 1));
        let h = FinCochain::scalar(g.clone(), 1, |t| rat_int(2 * t[0] as i64 + 1));
        let fh = star_fin(&f, &h).unwrap();
        let positions = g.tuple_positions(2);
        for (t2, pos) in positions.iter() {
            let expect = -&f.scalar_at(t2[0]) * &h.scalar_at(t2[1]);
            let _ = pos;
            let got = fh.scalar_at(positions[t2]);
            assert_eq!(got, expect);
        }
    }

    #[test]
    fn star_leibniz_on_random_cochains() {
        let mut rng = StdRng::seed_from_u64(23);
        let g = Arc::new(FiniteGroupoid::pair(3));
        for (kf, kh) in [(0usize, 1usize), (1, 1), (1, 2), (2, 1)] {
            for _ in 0..3 {
                let f = random_scalar_cochain(&mut rng, &g, kf);
                let h = random_scalar_cochain(&mut rng, &g, kh);
                let lhs = delta_fin(&star_fin(&f, &h).unwrap()).unwrap();
                let mut rhs = star_fin(&delta_fin(&f).unwrap(), &h).unwrap();
                let mut second = star_fin(&f, &delta_fin(&h).unwrap()).unwrap();
                if kf % 2 == 1 {
                    second = second.scale_rat(&-rat_int(1));
                }
                rhs = rhs.add(&second).unwrap();
                let mut diff = lhs.clone();
                diff = diff.add(&rhs.scale_rat(&-rat_int(1))).unwrap();
                assert!(diff.is_zero(), "Leibniz fails at ({kf},{kh})");
            }
        }
    }

    #[test]
    fn additive_group_delta_example() {
        // f(g) = g_x * g_y on (R^2,+): delta f(g,h) = g_x h_y + g_y h_x
        let model = SmoothModel::additive(2).unwrap();
        let v1 = model.arity_vars(1);
        let f = SmoothCochain::scalar(
            model.clone(),
            1,
            parse_poly("g1c0 * g1c1", &v1).unwrap(),
        );
        let df = delta_smooth(&f).unwrap();
        let v2 = model.arity_vars(2);
        let expect = parse_poly("g1c0*g2c1 + g1c1*g2c0", &v2).unwrap();
        assert_eq!(df.scalar_value(), expect);
    }

    #[test]
    fn smooth_delta_squares_to_zero() {
        let model = SmoothModel::heisenberg().unwrap();
        let v1 = model.arity_vars(1);
        let f = SmoothCochain::scalar(
            model.clone(),
            1,
            parse_poly("g1c0^2*g1c1 + g1c2", &v1).unwrap(),
        );
        let dd = delta_smooth(&delta_smooth(&f).unwrap()).unwrap();
        assert!(dd.is_zero());

        let pair = SmoothModel::pair(1);
        let vp = pair.arity_vars(1);
        let f = SmoothCochain::scalar(pair.clone(), 1, parse_poly("x0_0 + x1_0^3", &vp).unwrap());
        let dd = delta_smooth(&delta_smooth(&f).unwrap()).unwrap();
        assert!(dd.is_zero());
    }

    #[test]
    fn smooth_star_leibniz_at_samples() {
        let model = SmoothModel::heisenberg().unwrap();
        let mut pool = SamplePool::new(11);
        let v1 = model.arity_vars(1);
        let f = SmoothCochain::scalar(model.clone(), 1, parse_poly("g1c0*g1c2", &v1).unwrap());
        let h = SmoothCochain::scalar(model.clone(), 1, parse_poly("g1c1 + g1c0^2", &v1).unwrap());
        let lhs = delta_smooth(&star_smooth(&f, &h).unwrap()).unwrap();
        let mut rhs = star_smooth(&delta_smooth(&f).unwrap(), &h).unwrap();
        let second = star_smooth(&f, &delta_smooth(&h).unwrap()).unwrap();
        rhs = rhs.add(&second.scale_rat(&-rat_int(1))).unwrap();
        let diff = lhs.add(&rhs.scale_rat(&-rat_int(1))).unwrap();
        // exact polynomial identity, spot-checked at sampled tuples as well
        assert!(diff.is_zero());
        for _ in 0..20 {
            let pt = model.sample_tuple(&mut pool, 3);
            for (_, vals) in diff.eval(&pt).unwrap() {
                assert!(vals.iter().all(|v| num_traits::Zero::is_zero(v)));
            }
        }
    }

    #[test]
    fn normalization_detection() {
        let pair = SmoothModel::pair(1);
        let v = pair.arity_vars(1);
        let normalized =
            SmoothCochain::scalar(pair.clone(), 1, parse_poly("x0_0 - x1_0", &v).unwrap());
        assert!(normalized.is_normalized());
        let not = SmoothCochain::scalar(pair.clone(), 1, parse_poly("x0_0", &v).unwrap());
        assert!(!not.is_normalized());

        let g = Arc::new(FiniteGroupoid::pair(2));
        let f = FinCochain::scalar(g.clone(), 1, |t| {
            if g.is_unit(t[0]) {
                rat_int(0)
            } else {
                rat_int(1)
            }
        });
        assert!(f.is_normalized());
    }
}
