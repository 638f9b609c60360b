//! Groupoid models and their cochain algebra: finite groupoids by
//! composition table, unipotent matrix groups over a point, and pair
//! groupoids over a polynomial chart.
//!
//! Tuples `(g_1, ..., g_k)` are composable when `t(g_i) = s(g_{i-1})`, the
//! order of composition of functions; `g_1 g_2` exists when `t(g_2) = s(g_1)`.

pub mod cochain;
pub mod nerve;
pub mod rep;

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use crate::error::{EngineError, Result};
use crate::poly::{var_set, Poly, VarSet};
use crate::scalar::Rat;
use num_traits::{One, Zero};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Arrow {
    pub src: usize,
    pub tgt: usize,
}

/// Memoized tuple enumerations; cleared on clone.
#[derive(Debug, Default)]
struct TupleCache {
    tuples: Mutex<BTreeMap<usize, Arc<Vec<Vec<usize>>>>>,
    positions: Mutex<BTreeMap<usize, Arc<HashMap<Vec<usize>, usize>>>>,
}

impl Clone for TupleCache {
    fn clone(&self) -> Self {
        TupleCache::default()
    }
}

/// Finite groupoid with exhaustive structure tables.
#[derive(Clone, Debug)]
pub struct FiniteGroupoid {
    pub n_objects: usize,
    pub arrows: Vec<Arrow>,
    comp: Vec<Vec<Option<usize>>>,
    pub units: Vec<usize>,
    pub inv: Vec<usize>,
    cache: TupleCache,
}

impl FiniteGroupoid {
    pub fn new(
        n_objects: usize,
        arrows: Vec<Arrow>,
        comp: Vec<Vec<Option<usize>>>,
        units: Vec<usize>,
        inv: Vec<usize>,
    ) -> Result<Self> {
        let g = FiniteGroupoid {
            n_objects,
            arrows,
            comp,
            units,
            inv,
            cache: TupleCache::default(),
        };
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<()> {
        let n = self.arrows.len();
        if self.comp.len() != n || self.comp.iter().any(|row| row.len() != n) {
            return Err(EngineError::Model("composition table shape".into()));
        }
        if self.units.len() != self.n_objects || self.inv.len() != n {
            return Err(EngineError::Model("unit or inverse table shape".into()));
        }
        for (x, &u) in self.units.iter().enumerate() {
            if self.arrows[u].src != x || self.arrows[u].tgt != x {
                return Err(EngineError::Model(format!("unit of object {x} is not a loop")));
            }
        }
        for (g1, row) in self.comp.iter().enumerate() {
            for (g2, &c) in row.iter().enumerate() {
                let defined = self.arrows[g2].tgt == self.arrows[g1].src;
                if defined != c.is_some() {
                    return Err(EngineError::Model(format!(
                        "composition def domain wrong at ({g1},{g2})"
                    )));
                }
                if let Some(c) = c {
                    if self.arrows[c].src != self.arrows[g2].src
                        || self.arrows[c].tgt != self.arrows[g1].tgt
                    {
                        return Err(EngineError::Model(format!(
                            "composite ({g1},{g2}) has wrong endpoints"
                        )));
                    }
                }
            }
        }
        // units neutral
        for g in 0..n {
            let a = self.arrows[g];
            if self.compose(g, self.units[a.src]) != Some(g)
                || self.compose(self.units[a.tgt], g) != Some(g)
            {
                return Err(EngineError::Model(format!("unit not neutral at arrow {g}")));
            }
        }
        // inverses two-sided
        for g in 0..n {
            let a = self.arrows[g];
            let gi = self.inv[g];
            if self.arrows[gi].src != a.tgt || self.arrows[gi].tgt != a.src {
                return Err(EngineError::Model(format!("inverse of {g} has wrong endpoints")));
            }
            if self.compose(g, gi) != Some(self.units[a.tgt])
                || self.compose(gi, g) != Some(self.units[a.src])
            {
                return Err(EngineError::Model(format!("inverse of {g} is one-sided")));
            }
        }
        // associativity, exhaustively
        for g1 in 0..n {
            for g2 in 0..n {
                let Some(g12) = self.compose(g1, g2) else { continue };
                for g3 in 0..n {
                    let Some(g23) = self.compose(g2, g3) else { continue };
                    if self.compose(g12, g3) != self.compose(g1, g23) {
                        return Err(EngineError::Model(format!(
                            "associativity fails at ({g1},{g2},{g3})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n_arrows(&self) -> usize {
        self.arrows.len()
    }

    pub fn src(&self, g: usize) -> usize {
        self.arrows[g].src
    }

    pub fn tgt(&self, g: usize) -> usize {
        self.arrows[g].tgt
    }

    /// `g1 g2`, defined when `t(g2) = s(g1)`.
    pub fn compose(&self, g1: usize, g2: usize) -> Option<usize> {
        self.comp[g1][g2]
    }

    pub fn is_unit(&self, g: usize) -> bool {
        self.units[self.arrows[g].src] == g && self.arrows[g].src == self.arrows[g].tgt
    }

    /// Composable `k`-tuples in lexicographic order, memoized; the empty
    /// arity is indexed by objects elsewhere.
    pub fn tuples(&self, k: usize) -> Arc<Vec<Vec<usize>>> {
        if let Some(hit) = self.cache.tuples.lock().unwrap().get(&k) {
            return hit.clone();
        }
        let computed = Arc::new(self.compute_tuples(k));
        self.cache
            .tuples
            .lock()
            .unwrap()
            .insert(k, computed.clone());
        computed
    }

    fn compute_tuples(&self, k: usize) -> Vec<Vec<usize>> {
        if k == 0 {
            return vec![Vec::new()];
        }
        let mut out: Vec<Vec<usize>> = (0..self.n_arrows()).map(|g| vec![g]).collect();
        for _ in 1..k {
            let mut next = Vec::new();
            for t in &out {
                let last = *t.last().unwrap();
                for g in 0..self.n_arrows() {
                    // next slot g must satisfy t(g) = s(last)
                    if self.arrows[g].tgt == self.arrows[last].src {
                        let mut t2 = t.clone();
                        t2.push(g);
                        next.push(t2);
                    }
                }
            }
            out = next;
        }
        out
    }

    pub fn tuple_positions(&self, k: usize) -> Arc<HashMap<Vec<usize>, usize>> {
        if let Some(hit) = self.cache.positions.lock().unwrap().get(&k) {
            return hit.clone();
        }
        let computed = Arc::new(
            self.tuples(k)
                .iter()
                .cloned()
                .enumerate()
                .map(|(i, t)| (t, i))
                .collect::<HashMap<_, _>>(),
        );
        self.cache
            .positions
            .lock()
            .unwrap()
            .insert(k, computed.clone());
        computed
    }

    pub fn tuple_src(&self, t: &[usize]) -> usize {
        self.arrows[*t.last().unwrap()].src
    }

    pub fn tuple_tgt(&self, t: &[usize]) -> usize {
        self.arrows[t[0]].tgt
    }

    pub fn tuple_has_unit(&self, t: &[usize]) -> bool {
        t.iter().any(|&g| self.is_unit(g))
    }

    /// Simplicial face `d_i` on a composable tuple.
    pub fn face(&self, t: &[usize], i: usize) -> Result<Vec<usize>> {
        let k = t.len();
        if i > k {
            return Err(EngineError::Model(format!("face index {i} out of range for k={k}")));
        }
        if i == 0 {
            Ok(t[1..].to_vec())
        } else if i == k {
            Ok(t[..k - 1].to_vec())
        } else {
            let mut out = t[..i - 1].to_vec();
            out.push(
                self.compose(t[i - 1], t[i])
                    .ok_or_else(|| EngineError::Model("tuple not composable".into()))?,
            );
            out.extend_from_slice(&t[i + 1..]);
            Ok(out)
        }
    }

    /// Face of a 1-tuple, landing in objects: `d_0 = s`, `d_1 = t`.
    pub fn face_object(&self, g: usize, i: usize) -> usize {
        if i == 0 {
            self.src(g)
        } else {
            self.tgt(g)
        }
    }

    /// The pair groupoid over `n` objects: one arrow `(p,q): q -> p` per
    /// ordered pair, `t = first`, `s = second`.
    pub fn pair(n: usize) -> Self {
        let mut arrows = Vec::new();
        for p in 0..n {
            for q in 0..n {
                arrows.push(Arrow { src: q, tgt: p });
            }
        }
        let id = |p: usize, q: usize| p * n + q;
        let mut comp = vec![vec![None; arrows.len()]; arrows.len()];
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    // (p,q)(q,r) = (p,r)
                    comp[id(p, q)][id(q, r)] = Some(id(p, r));
                }
            }
        }
        let units = (0..n).map(|x| id(x, x)).collect();
        let inv = (0..arrows.len())
            .map(|g| {
                let p = g / n;
                let q = g % n;
                id(q, p)
            })
            .collect();
        FiniteGroupoid {
            n_objects: n,
            arrows,
            comp,
            units,
            inv,
            cache: TupleCache::default(),
        }
    }

    /// The group Z/m as a one-object groupoid.
    pub fn cyclic_group(m: usize) -> Self {
        let arrows = (0..m).map(|_| Arrow { src: 0, tgt: 0 }).collect();
        let mut comp = vec![vec![None; m]; m];
        for a in 0..m {
            for b in 0..m {
                comp[a][b] = Some((a + b) % m);
            }
        }
        FiniteGroupoid {
            n_objects: 1,
            arrows,
            comp,
            units: vec![0],
            inv: (0..m).map(|a| (m - a) % m).collect(),
            cache: TupleCache::default(),
        }
    }

    /// Disjoint union of unit groupoids (only identity arrows).
    pub fn discrete(n: usize) -> Self {
        let arrows = (0..n).map(|x| Arrow { src: x, tgt: x }).collect();
        let mut comp = vec![vec![None; n]; n];
        for x in 0..n {
            comp[x][x] = Some(x);
        }
        FiniteGroupoid {
            n_objects: n,
            arrows,
            comp,
            units: (0..n).collect(),
            inv: (0..n).collect(),
            cache: TupleCache::default(),
        }
    }
}

/// Morphism of finite groupoids, validated to preserve all structure.
#[derive(Clone, Debug)]
pub struct FiniteMorphism {
    pub from: Arc<FiniteGroupoid>,
    pub to: Arc<FiniteGroupoid>,
    pub obj_map: Vec<usize>,
    pub arrow_map: Vec<usize>,
}

impl FiniteMorphism {
    pub fn new(
        from: Arc<FiniteGroupoid>,
        to: Arc<FiniteGroupoid>,
        obj_map: Vec<usize>,
        arrow_map: Vec<usize>,
    ) -> Result<Self> {
        let m = FiniteMorphism {
            from,
            to,
            obj_map,
            arrow_map,
        };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        let f = &self.from;
        let t = &self.to;
        if self.obj_map.len() != f.n_objects || self.arrow_map.len() != f.n_arrows() {
            return Err(EngineError::Model("morphism table shape".into()));
        }
        for g in 0..f.n_arrows() {
            let img = self.arrow_map[g];
            if t.src(img) != self.obj_map[f.src(g)] || t.tgt(img) != self.obj_map[f.tgt(g)] {
                return Err(EngineError::Model(format!("morphism breaks endpoints at {g}")));
            }
        }
        for g1 in 0..f.n_arrows() {
            for g2 in 0..f.n_arrows() {
                if let Some(c) = f.compose(g1, g2) {
                    let img = t.compose(self.arrow_map[g1], self.arrow_map[g2]);
                    if img != Some(self.arrow_map[c]) {
                        return Err(EngineError::Model(format!(
                            "morphism breaks composition at ({g1},{g2})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn identity(g: Arc<FiniteGroupoid>) -> Self {
        FiniteMorphism {
            obj_map: (0..g.n_objects).collect(),
            arrow_map: (0..g.n_arrows()).collect(),
            from: g.clone(),
            to: g,
        }
    }

    pub fn map_tuple(&self, t: &[usize]) -> Vec<usize> {
        t.iter().map(|&g| self.arrow_map[g]).collect()
    }
}

// ---------------------------------------------------------------------------
// Smooth models
// ---------------------------------------------------------------------------

/// Unipotent matrix group over a point: elements are `I + sum a_j b_j` for
/// a strictly upper-triangular basis whose span is closed under the matrix
/// product. Arrows compose in the reversed matrix order (see `compose`),
/// which makes the induced Lie bracket the plain matrix commutator.
#[derive(Clone, Debug)]
pub struct MatrixGroupModel {
    pub dim: usize,
    pub basis: Vec<Vec<Rat>>,
    prod: Vec<Vec<Vec<Rat>>>,
}

impl MatrixGroupModel {
    pub fn new(dim: usize, basis: Vec<Vec<Rat>>) -> Result<Self> {
        for (i, b) in basis.iter().enumerate() {
            if b.len() != dim * dim {
                return Err(EngineError::Shape(format!("basis matrix {i} has wrong size")));
            }
            for r in 0..dim {
                for c in 0..=r {
                    if !b[r * dim + c].is_zero() {
                        return Err(EngineError::Model(format!(
                            "basis matrix {i} is not strictly upper triangular"
                        )));
                    }
                }
            }
        }
        let m = basis.len();
        let mut prod = vec![vec![vec![Rat::zero(); m]; m]; m];
        for i in 0..m {
            for j in 0..m {
                let p = mat_mul(dim, &basis[i], &basis[j]);
                let coords = in_span(dim, &basis, &p).ok_or_else(|| {
                    EngineError::Model(format!(
                        "span is not closed under products: b{i} * b{j} escapes"
                    ))
                })?;
                prod[i][j] = coords;
            }
        }
        Ok(MatrixGroupModel { dim, basis, prod })
    }

    pub fn coords(&self) -> usize {
        self.basis.len()
    }

    /// Coordinates of the matrix product `b_i · b_j` in the basis.
    pub fn basis_product(&self, i: usize, j: usize) -> &[Rat] {
        &self.prod[i][j]
    }

    /// Structure constants of the Lie algebra: the matrix commutator in the
    /// given basis.
    pub fn commutator_constants(&self) -> Vec<((usize, usize, usize), Rat)> {
        let m = self.coords();
        let mut out = Vec::new();
        for i in 0..m {
            for j in (i + 1)..m {
                for k in 0..m {
                    let c = &self.prod[i][j][k] - &self.prod[j][i][k];
                    if !c.is_zero() {
                        out.push(((i, j, k), c));
                    }
                }
            }
        }
        out
    }

    /// Coordinates of the reversed-order product `g ∘ h = h · g`.
    pub fn compose_coords(&self, g: &[Poly], h: &[Poly]) -> Vec<Poly> {
        let m = self.coords();
        let vars = g[0].vars().clone();
        let mut out: Vec<Poly> = (0..m).map(|k| g[k].add(&h[k])).collect();
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    let p = &self.prod[i][j][k];
                    if p.is_zero() {
                        continue;
                    }
                    // h·g picks up B A with B = h, A = g
                    out[k] = out[k].add(&h[i].mul(&g[j]).scale(p));
                }
            }
        }
        let _ = vars;
        out
    }

    /// Coordinates of the matrix inverse (a finite Neumann series).
    pub fn inverse_coords(&self, g: &[Poly]) -> Vec<Poly> {
        let m = self.coords();
        let vars = g[0].vars().clone();
        // inv = sum_{t>=1} (-A)^t in coords, plus nothing at order 0
        let mut acc: Vec<Poly> = g.iter().map(|p| p.neg()).collect();
        let mut power: Vec<Poly> = g.iter().map(|p| p.neg()).collect();
        for _ in 1..self.dim {
            // power <- power * (-A)
            let mut next = vec![Poly::zero(vars.clone()); m];
            for i in 0..m {
                if power[i].is_zero() {
                    continue;
                }
                for j in 0..m {
                    for k in 0..m {
                        let p = &self.prod[i][j][k];
                        if p.is_zero() {
                            continue;
                        }
                        next[k] = next[k].add(&power[i].mul(&g[j].neg()).scale(p));
                    }
                }
            }
            power = next;
            if power.iter().all(|p| p.is_zero()) {
                break;
            }
            for k in 0..m {
                acc[k] = acc[k].add(&power[k]);
            }
        }
        acc
    }

    /// Matrix entry `(r,c)` of a slot as a polynomial in its coordinates.
    pub fn entry_poly(&self, slot_coords: &[Poly], r: usize, c: usize) -> Poly {
        let vars = slot_coords[0].vars().clone();
        let mut p = if r == c {
            Poly::one(vars.clone())
        } else {
            Poly::zero(vars.clone())
        };
        for (j, b) in self.basis.iter().enumerate() {
            let e = &b[r * self.dim + c];
            if !e.is_zero() {
                p = p.add(&slot_coords[j].scale(e));
            }
        }
        p
    }
}

fn mat_mul(dim: usize, a: &[Rat], b: &[Rat]) -> Vec<Rat> {
    let mut out = vec![Rat::zero(); dim * dim];
    for r in 0..dim {
        for c in 0..dim {
            let mut acc = Rat::zero();
            for k in 0..dim {
                acc += &a[r * dim + k] * &b[k * dim + c];
            }
            out[r * dim + c] = acc;
        }
    }
    out
}

/// Expresses a strictly-upper matrix in the basis, if possible. The basis
/// matrices are linearly independent by assumption of validation below.
fn in_span(dim: usize, basis: &[Vec<Rat>], m: &[Rat]) -> Option<Vec<Rat>> {
    use crate::sparse::SparseMat;
    let cells = dim * dim;
    let cols: Vec<Vec<Rat>> = basis.to_vec();
    let mat = SparseMat::from_columns(cells, &cols);
    // solve mat x = m via rref on [mat | m]
    let rhs = SparseMat::from_columns(cells, &[m.to_vec()]);
    let aug = mat.hcat(&rhs).ok()?;
    if aug.rank() != mat.rank() {
        return None;
    }
    let (rows, pivots) = aug.rref();
    let mut x = vec![Rat::zero(); basis.len()];
    for (i, &pc) in pivots.iter().enumerate() {
        if pc == basis.len() {
            return None;
        }
        let v = rows[i].get(&basis.len()).cloned().unwrap_or_else(Rat::zero);
        x[pc] = v;
    }
    // confirm (guards against dependent basis columns)
    let check = mat.apply(&x).ok()?;
    if check.iter().zip(m).all(|(a, b)| a == b) {
        Some(x)
    } else {
        None
    }
}

/// Pair groupoid over a polynomial chart: an arrow is an ordered pair of
/// chart points, `t(p,q) = p`, `s(p,q) = q`.
#[derive(Clone, Debug)]
pub struct PairChartModel {
    pub chart_dim: usize,
}

/// Smooth model: composable `k`-tuples carry a canonical free coordinate
/// context (`k` coordinate slots for a matrix group, `k+1` chart points for
/// a pair groupoid).
#[derive(Clone, Debug)]
pub enum SmoothModel {
    Matrix(MatrixGroupModel),
    Pair(PairChartModel),
}

impl SmoothModel {
    pub fn pair(chart_dim: usize) -> Arc<Self> {
        Arc::new(SmoothModel::Pair(PairChartModel { chart_dim }))
    }

    /// `(R^n, +)` embedded as unipotent `(n+1)x(n+1)` matrices.
    pub fn additive(n: usize) -> Result<Arc<Self>> {
        let dim = n + 1;
        let mut basis = Vec::new();
        for i in 0..n {
            let mut b = vec![Rat::zero(); dim * dim];
            b[i * dim + (dim - 1)] = Rat::one();
            basis.push(b);
        }
        Ok(Arc::new(SmoothModel::Matrix(MatrixGroupModel::new(dim, basis)?)))
    }

    /// The 3x3 unipotent (Heisenberg) group.
    pub fn heisenberg() -> Result<Arc<Self>> {
        let mut b01 = vec![Rat::zero(); 9];
        b01[1] = Rat::one();
        let mut b12 = vec![Rat::zero(); 9];
        b12[5] = Rat::one();
        let mut b02 = vec![Rat::zero(); 9];
        b02[2] = Rat::one();
        Ok(Arc::new(SmoothModel::Matrix(MatrixGroupModel::new(
            3,
            vec![b01, b12, b02],
        )?)))
    }

    /// Frame rank of the associated algebroid.
    pub fn algebroid_rank(&self) -> usize {
        match self {
            SmoothModel::Matrix(m) => m.coords(),
            SmoothModel::Pair(p) => p.chart_dim,
        }
    }

    /// Number of free coordinates of one arrow slot.
    pub fn slot_dim(&self) -> usize {
        match self {
            SmoothModel::Matrix(m) => m.coords(),
            SmoothModel::Pair(p) => p.chart_dim,
        }
    }

    /// Variable context of composable `k`-tuples.
    pub fn arity_vars(&self, k: usize) -> VarSet {
        match self {
            SmoothModel::Matrix(m) => {
                let mut names = Vec::new();
                for slot in 1..=k {
                    for j in 0..m.coords() {
                        names.push(format!("g{slot}c{j}"));
                    }
                }
                var_set(names)
            }
            SmoothModel::Pair(p) => {
                let mut names = Vec::new();
                for point in 0..=k {
                    for j in 0..p.chart_dim {
                        names.push(format!("x{point}_{j}"));
                    }
                }
                var_set(names)
            }
        }
    }

    pub fn arity_var_count(&self, k: usize) -> usize {
        match self {
            SmoothModel::Matrix(m) => k * m.coords(),
            SmoothModel::Pair(p) => (k + 1) * p.chart_dim,
        }
    }

    /// Coordinate polynomials of slot `slot` (1-based) inside the arity-`k`
    /// context. For a pair groupoid a slot is the pair of points
    /// `(x_{slot-1}, x_slot)` and this returns the 2n coordinates.
    pub fn slot_polys(&self, k: usize, slot: usize) -> Vec<Poly> {
        let vars = self.arity_vars(k);
        match self {
            SmoothModel::Matrix(m) => {
                let base = (slot - 1) * m.coords();
                (0..m.coords())
                    .map(|j| Poly::var(vars.clone(), base + j).unwrap())
                    .collect()
            }
            SmoothModel::Pair(p) => {
                let n = p.chart_dim;
                let mut out = Vec::new();
                for point in [slot - 1, slot] {
                    for j in 0..n {
                        out.push(Poly::var(vars.clone(), point * n + j).unwrap());
                    }
                }
                out
            }
        }
    }

    /// Images of the arity-`(k-1)` variables inside the arity-`k` context
    /// under the simplicial face `d_i`.
    pub fn face_images(&self, k: usize, i: usize) -> Result<Vec<Poly>> {
        if i > k || k == 0 {
            return Err(EngineError::Model(format!("face {i} out of range for k={k}")));
        }
        let vars = self.arity_vars(k);
        match self {
            SmoothModel::Matrix(m) => {
                let c = m.coords();
                let slot_vars = |slot: usize| -> Vec<Poly> {
                    (0..c)
                        .map(|j| Poly::var(vars.clone(), (slot - 1) * c + j).unwrap())
                        .collect()
                };
                let mut images = Vec::new();
                for old in 1..k {
                    // old slot index in the (k-1)-tuple
                    let polys = if i == 0 {
                        slot_vars(old + 1)
                    } else if old < i {
                        slot_vars(old)
                    } else if old == i {
                        m.compose_coords(&slot_vars(i), &slot_vars(i + 1))
                    } else {
                        slot_vars(old + 1)
                    };
                    images.extend(polys);
                }
                Ok(images)
            }
            SmoothModel::Pair(p) => {
                let n = p.chart_dim;
                // d_i drops the point x_i
                let mut images = Vec::new();
                for point in 0..k {
                    let kept = if point < i { point } else { point + 1 };
                    for j in 0..n {
                        images.push(Poly::var(vars.clone(), kept * n + j).unwrap());
                    }
                }
                Ok(images)
            }
        }
    }

    /// Substitution (within the arity-`k` context) that puts a unit in slot
    /// `slot`; a cochain is normalized when every such substitution kills it.
    pub fn unit_slot_images(&self, k: usize, slot: usize) -> Vec<Poly> {
        let vars = self.arity_vars(k);
        let total = self.arity_var_count(k);
        match self {
            SmoothModel::Matrix(m) => {
                let c = m.coords();
                (0..total)
                    .map(|v| {
                        if v >= (slot - 1) * c && v < slot * c {
                            Poly::zero(vars.clone())
                        } else {
                            Poly::var(vars.clone(), v).unwrap()
                        }
                    })
                    .collect()
            }
            SmoothModel::Pair(p) => {
                let n = p.chart_dim;
                // slot i is the pair (x_{i-1}, x_i): unit means x_{i-1} = x_i
                (0..total)
                    .map(|v| {
                        let point = v / n;
                        let j = v % n;
                        if point == slot - 1 {
                            Poly::var(vars.clone(), slot * n + j).unwrap()
                        } else {
                            Poly::var(vars.clone(), v).unwrap()
                        }
                    })
                    .collect()
            }
        }
    }

    /// Sample coordinates for a composable `k`-tuple.
    pub fn sample_tuple(&self, pool: &mut crate::samples::SamplePool, k: usize) -> Vec<Rat> {
        match self {
            SmoothModel::Matrix(m) => (0..k * m.coords()).map(|_| pool.rat()).collect(),
            SmoothModel::Pair(p) => {
                let pts = pool.distinct_points(k + 1, p.chart_dim);
                pts.into_iter().flatten().collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::vars;
    use crate::scalar::rat_int;

    #[test]
    fn pair_groupoid_is_valid() {
        let g = FiniteGroupoid::pair(4);
        assert!(g.validate().is_ok());
        assert_eq!(g.n_arrows(), 16);
        assert_eq!(g.tuples(2).len(), 64);
        assert_eq!(g.tuples(3).len(), 256);
    }

    #[test]
    fn cyclic_group_is_valid() {
        let g = FiniteGroupoid::cyclic_group(2);
        assert!(g.validate().is_ok());
        assert_eq!(g.tuples(3).len(), 8);
    }

    #[test]
    fn face_maps_satisfy_simplicial_identities() {
        let g = FiniteGroupoid::pair(3);
        for k in 2..=4usize {
            for t in g.tuples(k).iter() {
                for j in 1..k {
                    for i in 0..j {
                        // d_i d_j = d_{j-1} d_i for i < j
                        let lhs = g.face(&g.face(&t, j).unwrap(), i).unwrap();
                        let rhs = g.face(&g.face(&t, i).unwrap(), j - 1).unwrap();
                        assert_eq!(lhs, rhs, "k={k} i={i} j={j}");
                    }
                }
            }
        }
    }

    #[test]
    fn heisenberg_model_builds() {
        let m = SmoothModel::heisenberg().unwrap();
        let SmoothModel::Matrix(mm) = m.as_ref() else { panic!() };
        // [b01, b12] = b02
        let cc = mm.commutator_constants();
        assert_eq!(cc, vec![((0, 1, 2), rat_int(1))]);
    }

    #[test]
    fn additive_model_is_abelian() {
        let m = SmoothModel::additive(2).unwrap();
        let SmoothModel::Matrix(mm) = m.as_ref() else { panic!() };
        assert!(mm.commutator_constants().is_empty());
    }

    #[test]
    fn matrix_compose_and_inverse() {
        let m = SmoothModel::heisenberg().unwrap();
        let SmoothModel::Matrix(mm) = m.as_ref() else { panic!() };
        let v = m.arity_vars(1);
        let g: Vec<Poly> = (0..3).map(|j| Poly::var(v.clone(), j).unwrap()).collect();
        let inv = mm.inverse_coords(&g);
        let prod = mm.compose_coords(&g, &inv);
        assert!(prod.iter().all(|p| p.is_zero()), "g ∘ g^{{-1}} = 1");
        let prod2 = mm.compose_coords(&inv, &g);
        assert!(prod2.iter().all(|p| p.is_zero()));
    }

    #[test]
    fn rejects_non_closed_span() {
        // b = E01 in 3x3: b*b = 0 fine; add E12 but not E02: closure fails
        let mut b01 = vec![Rat::zero(); 9];
        b01[1] = Rat::one();
        let mut b12 = vec![Rat::zero(); 9];
        b12[5] = Rat::one();
        assert!(MatrixGroupModel::new(3, vec![b01, b12]).is_err());
    }

    #[test]
    fn pair_face_images_drop_points() {
        let m = SmoothModel::pair(1);
        // arity 2 context (x0,x1,x2); d_1 drops x1
        let img = m.face_images(2, 1).unwrap();
        let v2 = m.arity_vars(2);
        assert_eq!(img[0], Poly::var(v2.clone(), 0).unwrap());
        assert_eq!(img[1], Poly::var(v2.clone(), 2).unwrap());
        let _ = vars(&["x"]);
    }
}
