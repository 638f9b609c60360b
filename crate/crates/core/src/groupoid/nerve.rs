//! Nerve machinery of finite groupoids: the action groupoids on composable
//! tuples, their semisimplicial morphisms, the contracting homotopy of the
//! augmented rows, and the elementary quasi-isomorphism.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{EngineError, Result};
use crate::graded::GradedSpace;
use crate::polyops::GradedPolyMap;
use crate::scalar::Rat;

use super::cochain::{novars, FinCochain};
use super::rep::{FinEndCochain, FinMorphismG, FinRepG, GroupoidRepFailure, GroupoidRepReport};
use super::{Arrow, FiniteGroupoid, FiniteMorphism};

/// The action groupoid on length-`(k+1)` composable tuples: objects are
/// `G_{k+1}`, arrows are `G_{k+2}`, source is `d_0`, target is `d_1`,
/// composition prepends after cancelling the shared tail.
pub struct ActionNerve {
    pub groupoid: Arc<FiniteGroupoid>,
    pub objects: Vec<Vec<usize>>,
    pub arrows_as_tuples: Vec<Vec<usize>>,
    pub base: Arc<FiniteGroupoid>,
    pub elementary: ElementaryStructure,
}

/// Elementary presentation of a finite groupoid: a fibration of objects
/// over a base set together with a basepoint section, with exactly one
/// arrow between any two objects of the same fiber.
#[derive(Clone, Debug)]
pub struct ElementaryStructure {
    pub fibration: Vec<usize>,
    pub section: Vec<usize>,
}

impl ElementaryStructure {
    pub fn validate(&self, g: &FiniteGroupoid) -> Result<()> {
        if self.fibration.len() != g.n_objects {
            return Err(EngineError::Model("fibration table shape".into()));
        }
        for (b, &x) in self.section.iter().enumerate() {
            if self.fibration.get(x) != Some(&b) {
                return Err(EngineError::Model(format!(
                    "section of base point {b} does not land in its fiber"
                )));
            }
        }
        let n_base = self.section.len();
        if self.fibration.iter().any(|&b| b >= n_base) {
            return Err(EngineError::Model("fibration hits a missing base point".into()));
        }
        // exactly one arrow x -> y iff same fiber
        for x in 0..g.n_objects {
            for y in 0..g.n_objects {
                let count = (0..g.n_arrows())
                    .filter(|&a| g.src(a) == x && g.tgt(a) == y)
                    .count();
                let expected = usize::from(self.fibration[x] == self.fibration[y]);
                if count != expected {
                    return Err(EngineError::Model(format!(
                        "objects {x},{y}: {count} arrows, expected {expected}; not elementary"
                    )));
                }
            }
        }
        Ok(())
    }

    /// The unique arrow from `x` to the basepoint of its fiber.
    pub fn to_basepoint(&self, g: &FiniteGroupoid, x: usize) -> usize {
        let target = self.section[self.fibration[x]];
        (0..g.n_arrows())
            .find(|&a| g.src(a) == x && g.tgt(a) == target)
            .expect("validated elementary structure")
    }
}

/// Builds `G^{(k)}`.
pub fn action_nerve_groupoid(g: &Arc<FiniteGroupoid>, k: usize) -> Result<ActionNerve> {
    let objects = g.tuples(k + 1).as_ref().clone();
    let arrow_tuples = g.tuples(k + 2).as_ref().clone();
    let obj_pos: HashMap<Vec<usize>, usize> = objects
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, t)| (t, i))
        .collect();
    let arrow_pos: HashMap<Vec<usize>, usize> = arrow_tuples
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, t)| (t, i))
        .collect();
    let arrows: Vec<Arrow> = arrow_tuples
        .iter()
        .map(|t| {
            let src = obj_pos[&g.face(t, 0).unwrap()];
            let tgt = obj_pos[&g.face(t, 1).unwrap()];
            Arrow { src, tgt }
        })
        .collect();
    let n_arrows = arrows.len();
    let mut comp = vec![vec![None; n_arrows]; n_arrows];
    for (a_idx, a) in arrow_tuples.iter().enumerate() {
        for (b_idx, b) in arrow_tuples.iter().enumerate() {
            // (a_0, a_1..) ∘ (b_0, b_1..) defined when d_0(a) = d_1(b)
            if arrows[a_idx].src != arrows[b_idx].tgt {
                continue;
            }
            let first = g
                .compose(a[0], b[0])
                .ok_or_else(|| EngineError::Model("nerve composition undefined".into()))?;
            let mut prod = vec![first];
            prod.extend_from_slice(&b[1..]);
            comp[a_idx][b_idx] = Some(arrow_pos[&prod]);
        }
    }
    let units: Vec<usize> = objects
        .iter()
        .map(|t| {
            let mut u = vec![g.units[g.tuple_tgt(t)]];
            u.extend_from_slice(t);
            arrow_pos[&u]
        })
        .collect();
    let inv: Vec<usize> = arrow_tuples
        .iter()
        .map(|t| {
            let g0inv = g.inv[t[0]];
            let mut it = vec![g0inv];
            it.push(g.compose(t[0], t[1]).unwrap());
            it.extend_from_slice(&t[2..]);
            arrow_pos[&it]
        })
        .collect();
    let groupoid = Arc::new(FiniteGroupoid::new(
        objects.len(),
        arrows,
        comp,
        units,
        inv,
    )?);
    // elementary structure over G_k through d_0, with unit-extended section
    let base_tuples = g.tuples(k).as_ref().clone();
    let base_pos: HashMap<Vec<usize>, usize> = base_tuples
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, t)| (t, i))
        .collect();
    let fibration: Vec<usize> = objects
        .iter()
        .map(|t| {
            if k == 0 {
                // base G_0 = objects of g, reached by the source of the tuple
                g.src(t[0])
            } else {
                base_pos[&g.face(t, 0).unwrap()]
            }
        })
        .collect();
    let section: Vec<usize> = if k == 0 {
        (0..g.n_objects)
            .map(|x| obj_pos[&vec![g.units[x]]])
            .collect()
    } else {
        base_tuples
            .iter()
            .map(|t| {
                let mut s = vec![g.units[g.tuple_tgt(t)]];
                s.extend_from_slice(t);
                obj_pos[&s]
            })
            .collect()
    };
    let elementary = ElementaryStructure { fibration, section };
    elementary.validate(&groupoid)?;
    // base groupoid for bookkeeping: the unit groupoid on the base set
    let base = Arc::new(FiniteGroupoid::discrete(if k == 0 {
        g.n_objects
    } else {
        base_tuples.len()
    }));
    Ok(ActionNerve {
        groupoid,
        objects,
        arrows_as_tuples: arrow_tuples,
        base,
        elementary,
    })
}

impl ActionNerve {
    /// The semisimplicial morphism `♭_i: G^{(k)} -> G^{(k-1)}`, given by
    /// `d_{i+2}` on arrows and `d_{i+1}` on objects.
    pub fn flat_morphism(&self, g: &Arc<FiniteGroupoid>, lower: &ActionNerve, i: usize) -> Result<FiniteMorphism> {
        let obj_pos: HashMap<Vec<usize>, usize> = lower
            .objects
            .iter()
            .cloned()
            .enumerate()
            .map(|(p, t)| (t, p))
            .collect();
        let arr_pos: HashMap<Vec<usize>, usize> = lower
            .arrows_as_tuples
            .iter()
            .cloned()
            .enumerate()
            .map(|(p, t)| (t, p))
            .collect();
        let obj_map = self
            .objects
            .iter()
            .map(|t| Ok(obj_pos[&g.face(t, i + 1)?]))
            .collect::<Result<Vec<_>>>()?;
        let arrow_map = self
            .arrows_as_tuples
            .iter()
            .map(|t| Ok(arr_pos[&g.face(t, i + 2)?]))
            .collect::<Result<Vec<_>>>()?;
        FiniteMorphism::new(self.groupoid.clone(), lower.groupoid.clone(), obj_map, arrow_map)
    }

    /// The projection `π: G^{(k)} -> G`, first component on arrows, target
    /// of the first component on objects.
    pub fn projection(&self, g: &Arc<FiniteGroupoid>) -> Result<FiniteMorphism> {
        let obj_map = self.objects.iter().map(|t| g.tuple_tgt(t)).collect();
        let arrow_map = self.arrows_as_tuples.iter().map(|t| t[0]).collect();
        FiniteMorphism::new(self.groupoid.clone(), g.clone(), obj_map, arrow_map)
    }
}

// ---------------------------------------------------------------------------
// Contracting homotopy of the augmented rows
// ---------------------------------------------------------------------------

/// Basis positions of the subspace of arity-`(m+k)` cochains normalized in
/// the first `m` slots.
fn cm_positions(g: &FiniteGroupoid, m: usize, arity: usize) -> Vec<usize> {
    if arity == 0 {
        return (0..g.n_objects).collect();
    }
    g.tuples(arity)
        .iter()
        .enumerate()
        .filter(|(_, t)| !t.iter().take(m).any(|&a| g.is_unit(a)))
        .map(|(pos, _)| pos)
        .collect()
}

/// `b^* = sum_{i=0}^{stage} (-1)^i d_{i+m+1}^*`, raising arity by one.
pub fn b_star(g: &FiniteGroupoid, eta: &FinCochain, m: usize, stage: usize) -> Result<FinCochain> {
    let arity = eta.arity + 1;
    let mut out = FinCochain::zero(eta.groupoid.clone(), eta.bundle.clone(), arity);
    let positions = eta.groupoid.tuple_positions(eta.arity.max(1));
    for (pos, t) in eta.groupoid.tuples(arity).iter().enumerate() {
        let mut acc = out.at(pos).clone();
        for i in 0..=stage {
            let j = i + m + 1;
            if j > arity {
                continue;
            }
            let v = if eta.arity == 0 {
                let obj = if j == 0 {
                    g.src(t[0])
                } else {
                    g.tgt(t[0])
                };
                eta.at(obj).clone()
            } else {
                let face = eta.groupoid.face(t, j)?;
                eta.at(positions[&face]).clone()
            };
            let term = if i % 2 == 1 {
                v.scale_rat(&-Rat::from_integer(1.into()))
            } else {
                v
            };
            acc = acc.add(&term)?;
        }
        out.set_at(pos, acc);
    }
    Ok(out)
}

/// `s^*`: evaluation with a unit inserted after the first `m` slots,
/// lowering arity by one.
pub fn s_star(g: &FiniteGroupoid, eta: &FinCochain, m: usize) -> Result<FinCochain> {
    if eta.arity == 0 {
        return Err(EngineError::Shape("s_star needs arity >= 1".into()));
    }
    let arity = eta.arity - 1;
    let mut out = FinCochain::zero(eta.groupoid.clone(), eta.bundle.clone(), arity);
    let positions = eta.groupoid.tuple_positions(eta.arity);
    if arity == 0 {
        for x in 0..g.n_objects {
            let t = vec![g.units[x]];
            out.set_at(x, eta.at(positions[&t]).clone());
        }
        return Ok(out);
    }
    for (pos, t) in eta.groupoid.tuples(arity).iter().enumerate() {
        let unit_obj = if m == 0 {
            g.tgt(t[0])
        } else {
            g.src(t[m - 1])
        };
        let mut with_unit = t[..m].to_vec();
        with_unit.push(g.units[unit_obj]);
        with_unit.extend_from_slice(&t[m..]);
        out.set_at(pos, eta.at(positions[&with_unit]).clone());
    }
    Ok(out)
}

/// Verifies `b^* s^* + s^* b^* = id` exhaustively on a basis of the
/// `m`-normalized subspace at arity `m + k + 1`.
pub fn flat_star_homotopy(
    g: &Arc<FiniteGroupoid>,
    bundle: &GradedSpace,
    m: usize,
    k: usize,
) -> Result<GroupoidRepReport> {
    let arity = m + k + 1;
    let mut failures = Vec::new();
    let degrees: Vec<i64> = bundle.degrees().collect();
    for raw in cm_positions(g, m, arity) {
        for &d in &degrees {
            for c in 0..bundle.dim(d) {
                let mut eta = FinCochain::zero(g.clone(), bundle.clone(), arity);
                let mut v = eta.at(raw).clone();
                v.set(d, c, crate::poly::Poly::one(novars()));
                eta.set_at(raw, v);
                // b*(s* eta) with stage k, plus s*(b* eta) with stage k+1
                let term1 = b_star(g, &s_star(g, &eta, m)?, m, k)?;
                let term2 = s_star(g, &b_star(g, &eta, m, k + 1)?, m)?;
                let total = term1.add(&term2)?;
                let diff = total.add(&eta.scale_rat(&-Rat::from_integer(1.into())))?;
                if !diff.is_zero() {
                    failures.push(GroupoidRepFailure {
                        equation: arity,
                        witness: format!("basis cochain at tuple position {raw}, degree {d}, coord {c}"),
                    });
                }
            }
        }
    }
    Ok(GroupoidRepReport { failures })
}

// ---------------------------------------------------------------------------
// Elementary quasi-isomorphism
// ---------------------------------------------------------------------------

/// For an elementary groupoid, produces the morphism onto the two-term
/// model `pi^*(iota^* E)` whose structure operator has only the arity-0 and
/// arity-1 pieces.
pub fn elementary_quasi_iso(
    g: &Arc<FiniteGroupoid>,
    elem: &ElementaryStructure,
    rep: &FinRepG,
    bound: usize,
) -> Result<(FinMorphismG, FinRepG)> {
    elem.validate(g)?;
    if !rep.unital {
        return Err(EngineError::NotUnital("elementary reduction needs a unital input".into()));
    }
    // target representation: F'_0(x) = F_0(iota pi x), F'_1 = id
    let mut f0 = FinEndCochain::zero(g, rep.bundle.clone(), rep.bundle.clone(), 1, 0);
    for x in 0..g.n_objects {
        let base_x = elem.section[elem.fibration[x]];
        f0.set_at(x, rep.f_cochain(0).at(base_x).clone());
    }
    let mut f1 = FinEndCochain::zero(g, rep.bundle.clone(), rep.bundle.clone(), 0, 1);
    let id = GradedPolyMap::identity(novars(), &rep.bundle);
    for pos in 0..g.tuples(1).len() {
        f1.set_at(pos, id.clone());
    }
    let target = FinRepG {
        groupoid: g.clone(),
        bundle: rep.bundle.clone(),
        f: vec![f0, f1],
        unital: true,
    };
    // morphism phi_k(g_1..g_k) = F_{k+1}(nu(g_1), g_1, .., g_k)
    let mut phis = Vec::new();
    for kk in 0..=bound {
        let mut phik = FinEndCochain::zero(g, rep.bundle.clone(), rep.bundle.clone(), -(kk as i64), kk);
        if kk == 0 {
            let positions = g.tuple_positions(1);
            for x in 0..g.n_objects {
                let nu = elem.to_basepoint(g, x);
                phik.set_at(x, rep.f_cochain(1).at(positions[&vec![nu]]).clone());
            }
        } else {
            let positions_up = g.tuple_positions(kk + 1);
            for (pos, t) in g.tuples(kk).iter().enumerate() {
                let nu = elem.to_basepoint(g, g.tgt(t[0]));
                let mut ext = vec![nu];
                ext.extend_from_slice(t);
                let fk1 = rep.f_cochain(kk + 1);
                phik.set_at(pos, fk1.at(positions_up[&ext]).clone());
            }
        }
        phis.push(phik);
    }
    // degree -k maps: fix the declared degrees of the Hom-cochains; values
    // inherit degree 1-(k+1) = -k from F_{k+1}, consistent by construction.
    Ok((FinMorphismG { phis }, target))
}

/// Pointwise cohomology comparison of `phi_0` between the fiber complexes.
pub fn elementary_pointwise_quasi_iso(
    g: &FiniteGroupoid,
    phi: &FinMorphismG,
    source: &FinRepG,
    target: &FinRepG,
) -> Result<bool> {
    for x in 0..g.n_objects {
        let de = source.f_cochain(0).at(x).eval(&[])?;
        let df = target.f_cochain(0).at(x).eval(&[])?;
        let f0 = phi.phis[0].at(x).eval(&[])?;
        if !crate::graded::fiber_quasi_iso(&de, &df, &f0)? {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graded::GradedSpace;
    use crate::groupoid::rep::{
        apply_d_fin, check_morphism_g_fin, check_rep_g_fin, gauge_transform_fin,
        pullback_rep_fin, FinElement, FinMorphismG,
    };
    use crate::poly::Poly;
    use crate::polyops::PolyMat;
    use crate::scalar::rat_int;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn unit_groupoid_action_nerve() {
        let g = Arc::new(FiniteGroupoid::discrete(1));
        let nerve = action_nerve_groupoid(&g, 0).unwrap();
        assert_eq!(nerve.groupoid.n_objects, 1);
        assert_eq!(nerve.groupoid.n_arrows(), 1);
    }

    #[test]
    fn pair2_action_nerve_counts() {
        let g = Arc::new(FiniteGroupoid::pair(2));
        let nerve = action_nerve_groupoid(&g, 0).unwrap();
        assert_eq!(nerve.groupoid.n_objects, 4);
        assert_eq!(nerve.groupoid.n_arrows(), 8);
    }

    #[test]
    fn flat_morphisms_compose_to_projection() {
        let g = Arc::new(FiniteGroupoid::pair(2));
        let n1 = action_nerve_groupoid(&g, 1).unwrap();
        let n0 = action_nerve_groupoid(&g, 0).unwrap();
        let pi1 = n1.projection(&g).unwrap();
        let pi0 = n0.projection(&g).unwrap();
        for i in 0..=1usize {
            let flat = n1.flat_morphism(&g, &n0, i).unwrap();
            // pi0 ∘ flat_i = pi1
            for a in 0..n1.groupoid.n_arrows() {
                assert_eq!(
                    pi0.arrow_map[flat.arrow_map[a]],
                    pi1.arrow_map[a],
                    "flat_{i} arrow {a}"
                );
            }
            for x in 0..n1.groupoid.n_objects {
                assert_eq!(pi0.obj_map[flat.obj_map[x]], pi1.obj_map[x]);
            }
        }
    }

    #[test]
    fn contracting_homotopy_on_pair_groupoids() {
        for n in [3usize, 4] {
            let g = Arc::new(FiniteGroupoid::pair(n));
            let bundle = GradedSpace::concentrated(0, 1);
            for m in 0..=1usize {
                for k in 0..=1usize {
                    let report = flat_star_homotopy(&g, &bundle, m, k).unwrap();
                    assert!(report.passed(), "n={n} m={m} k={k}: {:?}", report.failures);
                }
            }
        }
    }

    #[test]
    fn constant_cochain_through_s_then_b() {
        // b* s* reproduces a cocycle killed by the complementary term
        let g = Arc::new(FiniteGroupoid::pair(3));
        let bundle = GradedSpace::concentrated(0, 1);
        let report = flat_star_homotopy(&g, &bundle, 0, 0).unwrap();
        assert!(report.passed());
    }

    fn pair_rep_with_f2(n: usize, seed: u64) -> crate::groupoid::rep::FinRepG {
        use crate::groupoid::rep::{FinEndCochain, FinRepG};
        use crate::polyops::GradedPolyMap;
        let g = Arc::new(FiniteGroupoid::pair(n));
        let bundle = GradedSpace::new([(0, 2), (1, 2)]);
        let mut del = GradedPolyMap::zero(novars(), bundle.clone(), bundle.clone(), 1);
        let mut b = PolyMat::zero(novars(), 2, 2);
        b.set(0, 0, Poly::one(novars()));
        del.set_block(0, b).unwrap();
        let id = GradedPolyMap::identity(novars(), &bundle);
        let rep = FinRepG::genuine(g.clone(), bundle.clone(), del, |_| id.clone()).unwrap();
        let mut rng = StdRng::seed_from_u64(seed);
        let mut phi = FinMorphismG::identity(&rep);
        let mut phi1 = FinEndCochain::zero(&g, bundle.clone(), bundle.clone(), -1, 1);
        for (pos, t) in g.tuples(1).iter().enumerate() {
            if g.is_unit(t[0]) {
                continue;
            }
            let mut m = GradedPolyMap::zero(novars(), bundle.clone(), bundle.clone(), -1);
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
        gauge_transform_fin(&rep, &phi, 5).unwrap()
    }

    #[test]
    fn elementary_quasi_iso_on_gauge_rep() {
        let rep = pair_rep_with_f2(4, 41);
        let g = rep.groupoid.clone();
        assert!(rep.f.len() > 2 && !rep.f[2].is_zero());
        let elem = ElementaryStructure {
            fibration: vec![0; 4],
            section: vec![0],
        };
        let (phi, target) = elementary_quasi_iso(&g, &elem, &rep, 4).unwrap();
        assert_eq!(target.f.len(), 2);
        assert!(check_rep_g_fin(&target, 4).unwrap().passed());
        let report = check_morphism_g_fin(&phi, &rep, &target, 4).unwrap();
        assert!(report.passed(), "failures: {:?}", report.failures);
        assert!(elementary_pointwise_quasi_iso(&g, &phi, &rep, &target).unwrap());
    }

    #[test]
    fn elementary_on_genuine_rep_reduces_to_functoriality() {
        // genuine rep: phi_k = F_{k+1}(...) = 0 for k >= 1, phi_0 = F_1(nu)
        let g = Arc::new(FiniteGroupoid::pair(3));
        let rep = crate::groupoid::rep::FinRepG::trivial(g.clone());
        let elem = ElementaryStructure {
            fibration: vec![0; 3],
            section: vec![1],
        };
        let (phi, target) = elementary_quasi_iso(&g, &elem, &rep, 3).unwrap();
        for k in 1..phi.phis.len() {
            assert!(phi.phis[k].is_zero());
        }
        assert!(check_morphism_g_fin(&phi, &rep, &target, 3).unwrap().passed());
        assert!(elementary_pointwise_quasi_iso(&g, &phi, &rep, &target).unwrap());
    }

    #[test]
    fn pullback_along_projection_is_a_rep() {
        let g = Arc::new(FiniteGroupoid::pair(2));
        let rep = pair_rep_with_f2(2, 43);
        let nerve = action_nerve_groupoid(&g, 0).unwrap();
        let pi = nerve.projection(&g).unwrap();
        let pulled = pullback_rep_fin(&pi, &rep).unwrap();
        let report = check_rep_g_fin(&pulled, 4).unwrap();
        assert!(report.passed(), "failures: {:?}", report.failures);
        assert!(pulled.unital);
    }

    #[test]
    fn pullback_of_cochains_is_a_chain_map() {
        // gamma^* delta = delta gamma^* on the trivial representations
        let g = Arc::new(FiniteGroupoid::pair(2));
        let nerve = action_nerve_groupoid(&g, 0).unwrap();
        let pi = nerve.projection(&g).unwrap();
        let rep_g = crate::groupoid::rep::FinRepG::trivial(g.clone());
        let rep_n = pullback_rep_fin(&pi, &rep_g).unwrap();
        let mut rng = StdRng::seed_from_u64(7);
        for arity in 0..=2usize {
            let eta = FinCochain::scalar(g.clone(), arity, |_| rat_int(rng.gen_range(-3..=3)));
            let d_eta = apply_d_fin(&rep_g, &FinElement::from_cochain(eta.clone())).unwrap();
            let pulled = eta.pullback(&pi).unwrap();
            let d_pulled = apply_d_fin(&rep_n, &FinElement::from_cochain(pulled)).unwrap();
            for part in d_eta.parts() {
                let expect = part.pullback(&pi).unwrap();
                let got = d_pulled.part(part.arity).unwrap();
                let diff = got.add(&expect.scale_rat(&-rat_int(1))).unwrap();
                assert!(diff.is_zero(), "arity {arity}");
            }
        }
    }

    #[test]
    fn non_elementary_structure_rejected() {
        // two fibers on a pair groupoid: cross arrows break elementarity
        let g = Arc::new(FiniteGroupoid::pair(2));
        let elem = ElementaryStructure {
            fibration: vec![0, 1],
            section: vec![0, 1],
        };
        assert!(elem.validate(&g).is_err());
    }
}
