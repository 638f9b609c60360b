//! Nilpotent jet arithmetic: rationals extended by commuting generators
//! `e1..em` with `e_i^2 = 0`. A jet carries every mixed first-order
//! derivative of an expression exactly; extracting the coefficient of a
//! square-free monomial reads the derivative off.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{One, Zero};

use crate::error::{EngineError, Result};
use crate::scalar::{rat_to_string, Rat};

/// Hard upper bound on the number of nilpotent generators.
pub const MAX_GENERATORS: usize = 8;

/// Active generator cap: `HOMOTOPY_REP_MAX_GENERATORS` clamped to `1..=8`,
/// default 8.
pub fn generator_cap() -> usize {
    match std::env::var("HOMOTOPY_REP_MAX_GENERATORS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(|n| n.clamp(1, MAX_GENERATORS))
            .unwrap_or(MAX_GENERATORS),
        Err(_) => MAX_GENERATORS,
    }
}

/// Element of Q[e1..em]/(e_i^2). Terms are indexed by square-free subsets
/// of generators encoded as bitmasks; no zero coefficients are stored.
#[derive(Clone, PartialEq, Eq)]
pub struct JetScalar {
    gens: usize,
    terms: BTreeMap<u8, Rat>,
}

impl JetScalar {
    pub fn new(gens: usize) -> Result<Self> {
        let cap = generator_cap();
        if gens > cap {
            return Err(EngineError::GeneratorCap { need: gens, cap });
        }
        Ok(JetScalar {
            gens,
            terms: BTreeMap::new(),
        })
    }

    pub fn constant(gens: usize, value: Rat) -> Result<Self> {
        let mut j = JetScalar::new(gens)?;
        if !value.is_zero() {
            j.terms.insert(0, value);
        }
        Ok(j)
    }

    /// The generator `e_{idx}` (zero-based).
    pub fn generator(gens: usize, idx: usize) -> Result<Self> {
        let mut j = JetScalar::new(gens)?;
        if idx >= gens {
            return Err(EngineError::UnknownGenerator(idx, gens));
        }
        j.terms.insert(1u8 << idx, Rat::one());
        Ok(j)
    }

    pub fn gens(&self) -> usize {
        self.gens
    }

    /// Coefficient of the empty monomial.
    pub fn body(&self) -> Rat {
        self.terms.get(&0).cloned().unwrap_or_else(Rat::zero)
    }

    /// Coefficient of the product of generators in `subset` (bitmask).
    pub fn extract_mask(&self, subset: u8) -> Result<Rat> {
        if (subset as u32) >> self.gens != 0 {
            let idx = (8 - subset.leading_zeros() as usize).saturating_sub(1);
            return Err(EngineError::UnknownGenerator(idx, self.gens));
        }
        Ok(self.terms.get(&subset).cloned().unwrap_or_else(Rat::zero))
    }

    /// Coefficient of `prod_{i in subset} e_i`, with generator indices.
    pub fn extract(&self, subset: &[usize]) -> Result<Rat> {
        let mut mask = 0u8;
        for &i in subset {
            if i >= self.gens {
                return Err(EngineError::UnknownGenerator(i, self.gens));
            }
            mask |= 1 << i;
        }
        self.extract_mask(mask)
    }

    pub fn checked_add(&self, rhs: &Self) -> Result<Self> {
        if self.gens != rhs.gens {
            return Err(EngineError::GeneratorUniverse(self.gens, rhs.gens));
        }
        let mut terms = self.terms.clone();
        for (m, c) in &rhs.terms {
            let entry = terms.entry(*m).or_insert_with(Rat::zero);
            *entry += c;
            if entry.is_zero() {
                terms.remove(m);
            }
        }
        Ok(JetScalar {
            gens: self.gens,
            terms,
        })
    }

    /// Square-free product: terms over overlapping subsets vanish.
    pub fn checked_mul(&self, rhs: &Self) -> Result<Self> {
        if self.gens != rhs.gens {
            return Err(EngineError::GeneratorUniverse(self.gens, rhs.gens));
        }
        let mut terms: BTreeMap<u8, Rat> = BTreeMap::new();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                if ma & mb != 0 {
                    continue;
                }
                let m = ma | mb;
                let entry = terms.entry(m).or_insert_with(Rat::zero);
                *entry += ca * cb;
                if entry.is_zero() {
                    terms.remove(&m);
                }
            }
        }
        Ok(JetScalar {
            gens: self.gens,
            terms,
        })
    }

    pub fn scale(&self, c: &Rat) -> Self {
        if num_traits::Zero::is_zero(c) {
            return JetScalar {
                gens: self.gens,
                terms: BTreeMap::new(),
            };
        }
        JetScalar {
            gens: self.gens,
            terms: self.terms.iter().map(|(m, v)| (*m, v * c)).collect(),
        }
    }
}

// Zero/one live in the empty universe and promote silently on contact with
// any other universe; see `unify`.
impl num_traits::Zero for JetScalar {
    fn zero() -> Self {
        JetScalar {
            gens: 0,
            terms: BTreeMap::new(),
        }
    }
    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

impl num_traits::One for JetScalar {
    fn one() -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(0, Rat::one());
        JetScalar { gens: 0, terms }
    }
}

fn unify(a: usize, b: usize) -> usize {
    // Zero-universe values come from `Coeff::zero/one`; promote silently.
    a.max(b)
}

impl Add for JetScalar {
    type Output = JetScalar;
    fn add(mut self, mut rhs: JetScalar) -> JetScalar {
        let g = unify(self.gens, rhs.gens);
        self.gens = g;
        rhs.gens = g;
        self.checked_add(&rhs).expect("jet universe mismatch")
    }
}

impl Sub for JetScalar {
    type Output = JetScalar;
    fn sub(self, rhs: JetScalar) -> JetScalar {
        self + (-rhs)
    }
}

impl Mul for JetScalar {
    type Output = JetScalar;
    fn mul(mut self, mut rhs: JetScalar) -> JetScalar {
        let g = unify(self.gens, rhs.gens);
        self.gens = g;
        rhs.gens = g;
        self.checked_mul(&rhs).expect("jet universe mismatch")
    }
}

impl Neg for JetScalar {
    type Output = JetScalar;
    fn neg(self) -> JetScalar {
        JetScalar {
            gens: self.gens,
            terms: self.terms.into_iter().map(|(m, c)| (m, -c)).collect(),
        }
    }
}

impl fmt::Debug for JetScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for JetScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (mask, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if *mask == 0 {
                write!(f, "{}", rat_to_string(c))?;
                continue;
            }
            if !c.is_one() {
                write!(f, "{}*", rat_to_string(c))?;
            }
            let mut sep = "";
            for i in 0..self.gens {
                if mask & (1 << i) != 0 {
                    write!(f, "{sep}e{}", i + 1)?;
                    sep = "*";
                }
            }
        }
        Ok(())
    }
}

/// Fixed-length vector of jets.
#[derive(Clone, Debug, PartialEq)]
pub struct JetVector {
    pub entries: Vec<JetScalar>,
}

impl JetVector {
    pub fn new(entries: Vec<JetScalar>) -> Self {
        JetVector { entries }
    }
    pub fn dim(&self) -> usize {
        self.entries.len()
    }
}

/// Fixed-shape matrix of jets.
#[derive(Clone, Debug, PartialEq)]
pub struct JetMatrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<JetScalar>,
}

impl JetMatrix {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> JetScalar) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        JetMatrix { rows, cols, data }
    }

    pub fn identity(n: usize, gens: usize) -> Result<Self> {
        let one = JetScalar::constant(gens, Rat::one())?;
        let zero = JetScalar::new(gens)?;
        Ok(Self::from_fn(n, n, |r, c| {
            if r == c {
                one.clone()
            } else {
                zero.clone()
            }
        }))
    }

    pub fn at(&self, r: usize, c: usize) -> &JetScalar {
        &self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: JetScalar) {
        self.data[r * self.cols + c] = v;
    }

    pub fn mul(&self, rhs: &JetMatrix) -> Result<JetMatrix> {
        if self.cols != rhs.rows {
            return Err(EngineError::DimensionMismatch {
                expected: self.cols,
                got: rhs.rows,
            });
        }
        let gens = self
            .data
            .iter()
            .chain(rhs.data.iter())
            .map(|j| j.gens())
            .max()
            .unwrap_or(0);
        let mut out = Vec::with_capacity(self.rows * rhs.cols);
        for r in 0..self.rows {
            for c in 0..rhs.cols {
                let mut acc = JetScalar::new(gens)?;
                for k in 0..self.cols {
                    acc = acc + self.at(r, k).clone() * rhs.at(k, c).clone();
                }
                out.push(acc);
            }
        }
        Ok(JetMatrix {
            rows: self.rows,
            cols: rhs.cols,
            data: out,
        })
    }

    pub fn add(&self, rhs: &JetMatrix) -> Result<JetMatrix> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(EngineError::Shape(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut data = Vec::with_capacity(self.data.len());
        for (a, b) in self.data.iter().zip(rhs.data.iter()) {
            data.push(a.clone() + b.clone());
        }
        Ok(JetMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn scale(&self, c: &Rat) -> JetMatrix {
        JetMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|j| j.scale(c)).collect(),
        }
    }

    pub fn neg(&self) -> JetMatrix {
        self.scale(&-Rat::one())
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|j| j.is_zero())
    }
}

/// Exponential of a matrix with zero body: the series terminates because
/// every entry lies in the ideal generated by the nilpotent symbols, so
/// powers beyond the generator count vanish.
pub fn exp_nilpotent(m: &JetMatrix) -> Result<JetMatrix> {
    if m.rows != m.cols {
        return Err(EngineError::Shape(format!("{}x{}", m.rows, m.cols)));
    }
    for r in 0..m.rows {
        for c in 0..m.cols {
            if !m.at(r, c).body().is_zero() {
                return Err(EngineError::NonzeroBody(r, c));
            }
        }
    }
    let gens = m.data.iter().map(|j| j.gens()).max().unwrap_or(0);
    let mut acc = JetMatrix::identity(m.rows, gens)?;
    let mut power = JetMatrix::identity(m.rows, gens)?;
    let mut factorial = Rat::one();
    for k in 1..=(MAX_GENERATORS + 1) {
        power = power.mul(m)?;
        if power.is_zero() {
            break;
        }
        factorial *= Rat::from_integer(k.into());
        acc = acc.add(&power.scale(&factorial.recip()))?;
    }
    Ok(acc)
}
