//! Sparse multivariate polynomials over an exact coefficient ring, with the
//! minimal infix grammar used by the input schemas (`x0^2*x1 + 3/2*x1`).

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Zero};

use crate::error::{EngineError, Result};
use crate::jet::JetScalar;
use crate::scalar::{parse_rat, rat_to_string, Coeff, Rat};

pub type VarSet = Arc<Vec<String>>;

pub fn vars(names: &[&str]) -> VarSet {
    Arc::new(names.iter().map(|s| s.to_string()).collect())
}

pub fn var_set(names: Vec<String>) -> VarSet {
    Arc::new(names)
}

/// Polynomial over coefficient ring `C` in a fixed ordered variable context.
/// Terms map exponent vectors to nonzero coefficients.
#[derive(Clone, PartialEq)]
pub struct Polynomial<C: Coeff> {
    vars: VarSet,
    terms: BTreeMap<Vec<u32>, C>,
}

pub type Poly = Polynomial<Rat>;
pub type JetPoly = Polynomial<JetScalar>;

impl<C: Coeff> Polynomial<C> {
    pub fn zero(vars: VarSet) -> Self {
        Polynomial {
            vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(vars: VarSet, c: C) -> Self {
        let mut p = Self::zero(vars);
        if !c.is_zero() {
            let n = p.vars.len();
            p.terms.insert(vec![0; n], c);
        }
        p
    }

    pub fn one(vars: VarSet) -> Self {
        Self::constant(vars, C::one())
    }

    pub fn var(vars: VarSet, idx: usize) -> Result<Self> {
        if idx >= vars.len() {
            return Err(EngineError::UnknownVariable(format!("#{idx}")));
        }
        let mut exp = vec![0; vars.len()];
        exp[idx] = 1;
        let mut p = Self::zero(vars);
        p.terms.insert(exp, C::one());
        Ok(p)
    }

    pub fn vars(&self) -> &VarSet {
        &self.vars
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|e| e.iter().all(|&k| k == 0))
    }

    pub fn constant_part(&self) -> C {
        let n = self.vars.len();
        self.terms
            .get(&vec![0; n])
            .cloned()
            .unwrap_or_else(C::zero)
    }

    pub fn total_degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|e| e.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    pub fn degree_in(&self, var: usize) -> u32 {
        self.terms.keys().map(|e| e[var]).max().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &C)> {
        self.terms.iter()
    }

    fn check_ctx(&self, rhs: &Self) -> Result<()> {
        if self.vars != rhs.vars && **self.vars != **rhs.vars {
            return Err(EngineError::VariableMismatch(
                self.vars.join(","),
                rhs.vars.join(","),
            ));
        }
        Ok(())
    }

    fn insert(&mut self, exp: Vec<u32>, c: C) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&exp) {
            Some(existing) => {
                let sum = existing.clone() + c;
                if sum.is_zero() {
                    self.terms.remove(&exp);
                } else {
                    *existing = sum;
                }
            }
            None => {
                self.terms.insert(exp, c);
            }
        }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        self.check_ctx(rhs).expect("variable context mismatch");
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.insert(e.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> Self {
        Polynomial {
            vars: self.vars.clone(),
            terms: self
                .terms
                .iter()
                .map(|(e, c)| (e.clone(), -c.clone()))
                .collect(),
        }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.add(&rhs.neg())
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        self.check_ctx(rhs).expect("variable context mismatch");
        let mut out = Self::zero(self.vars.clone());
        for (ea, ca) in &self.terms {
            for (eb, cb) in &rhs.terms {
                let e: Vec<u32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.insert(e, ca.clone() * cb.clone());
            }
        }
        out
    }

    pub fn scale(&self, c: &C) -> Self {
        if c.is_zero() {
            return Self::zero(self.vars.clone());
        }
        let mut out = Self::zero(self.vars.clone());
        for (e, v) in &self.terms {
            out.insert(e.clone(), v.clone() * c.clone());
        }
        out
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::one(self.vars.clone());
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    /// Generic substitution: every variable is replaced by a polynomial over
    /// a new coefficient ring / variable context.
    pub fn substitute<D: Coeff>(
        &self,
        target: VarSet,
        map: impl Fn(usize) -> Polynomial<D>,
        lift: impl Fn(&C) -> D,
    ) -> Polynomial<D> {
        let images: Vec<Polynomial<D>> = (0..self.vars.len()).map(&map).collect();
        let mut out = Polynomial::<D>::zero(target.clone());
        for (e, c) in &self.terms {
            let mut term = Polynomial::<D>::constant(target.clone(), lift(c));
            for (i, &k) in e.iter().enumerate() {
                if k > 0 {
                    term = term.mul(&images[i].pow(k));
                }
            }
            out = out.add(&term);
        }
        out
    }

    /// Full evaluation at ring elements.
    pub fn eval(&self, point: &[C]) -> Result<C> {
        if point.len() != self.vars.len() {
            return Err(EngineError::DimensionMismatch {
                expected: self.vars.len(),
                got: point.len(),
            });
        }
        let mut acc = C::zero();
        for (e, c) in &self.terms {
            let mut t = c.clone();
            for (i, &k) in e.iter().enumerate() {
                for _ in 0..k {
                    t = t * point[i].clone();
                }
            }
            acc = acc + t;
        }
        Ok(acc)
    }
}

impl Poly {
    /// Exact partial derivative.
    pub fn partial(&self, var: usize) -> Result<Poly> {
        if var >= self.vars.len() {
            return Err(EngineError::UnknownVariable(format!("#{var}")));
        }
        let mut out = Poly::zero(self.vars.clone());
        for (e, c) in &self.terms {
            if e[var] == 0 {
                continue;
            }
            let mut e2 = e.clone();
            e2[var] -= 1;
            out.insert(e2, c * Rat::from_integer(e[var].into()));
        }
        Ok(out)
    }

    pub fn partial_by_name(&self, name: &str) -> Result<Poly> {
        let idx = self
            .vars
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| EngineError::UnknownVariable(name.to_string()))?;
        self.partial(idx)
    }

    /// Evaluation with jet-valued coordinates; truncation is automatic.
    pub fn eval_jet(&self, point: &[JetScalar]) -> Result<JetScalar> {
        if point.len() != self.vars.len() {
            return Err(EngineError::DimensionMismatch {
                expected: self.vars.len(),
                got: point.len(),
            });
        }
        let gens = point.iter().map(|j| j.gens()).max().unwrap_or(0);
        let mut acc = JetScalar::new(gens)?;
        for (e, c) in &self.terms {
            let mut t = JetScalar::constant(gens, c.clone())?;
            for (i, &k) in e.iter().enumerate() {
                for _ in 0..k {
                    t = t.checked_mul(&point[i])?;
                    if t.is_zero() {
                        break;
                    }
                }
            }
            acc = acc.checked_add(&t)?;
        }
        Ok(acc)
    }

    /// Substitution by rational-coefficient polynomials over the same or a
    /// different context.
    pub fn subst_rat(&self, target: VarSet, images: &[Poly]) -> Poly {
        self.substitute(target, |i| images[i].clone(), |c| c.clone())
    }

    /// Substitution by jet-coefficient polynomials (used by the flow
    /// operators: symbolic slots stay symbolic, flowed slots pick up jets).
    pub fn subst_jet(&self, target: VarSet, images: &[JetPoly]) -> JetPoly {
        self.substitute(
            target,
            |i| images[i].clone(),
            |c| JetScalar::constant(0, c.clone()).expect("constant jet"),
        )
    }

    pub fn eval_rat(&self, point: &[Rat]) -> Result<Rat> {
        self.eval(point)
    }
}

impl JetPoly {
    /// Coefficient-wise extraction of a jet monomial, yielding an ordinary
    /// polynomial. Coefficients living in a smaller generator universe
    /// embed canonically, so they contribute nothing.
    pub fn extract(&self, subset: &[usize]) -> Result<Poly> {
        let mut out = Poly::zero(self.vars.clone());
        for (e, c) in &self.terms {
            if subset.iter().any(|&i| i >= c.gens()) {
                continue;
            }
            let r = c.extract(subset)?;
            if !r.is_zero() {
                out.insert(e.clone(), r);
            }
        }
        Ok(out)
    }

    pub fn lift(p: &Poly, gens: usize) -> Result<JetPoly> {
        let mut out = JetPoly::zero(p.vars.clone());
        for (e, c) in &p.terms {
            out.insert(e.clone(), JetScalar::constant(gens, c.clone())?);
        }
        Ok(out)
    }
}

impl<C: Coeff> fmt::Debug for Polynomial<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in self.terms.iter().rev() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c:?}")?;
            for (i, &k) in e.iter().enumerate() {
                if k == 1 {
                    write!(f, "*{}", self.vars[i])?;
                } else if k > 1 {
                    write!(f, "*{}^{}", self.vars[i], k)?;
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in self.terms.iter().rev() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            let trivial_exp = e.iter().all(|&k| k == 0);
            if trivial_exp {
                write!(f, "{}", rat_to_string(c))?;
                continue;
            }
            let mut sep = "";
            if !c.is_one() {
                write!(f, "{}", rat_to_string(c))?;
                sep = "*";
            }
            for (i, &k) in e.iter().enumerate() {
                if k == 0 {
                    continue;
                }
                write!(f, "{sep}{}", self.vars[i])?;
                if k > 1 {
                    write!(f, "^{k}")?;
                }
                sep = "*";
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Parser for the minimal infix grammar: sums of terms, `*`-separated factors,
// `name^k` powers, rational literals `a/b`, unary minus.
// ---------------------------------------------------------------------------

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(String),
    Ident(String),
    Plus,
    Minus,
    Star,
    Caret,
    Slash,
    LParen,
    RParen,
    End,
}

impl<'a> Lexer<'a> {
    fn new(s: &'a str) -> Self {
        Lexer {
            src: s.as_bytes(),
            pos: 0,
        }
    }

    fn next_tok(&mut self) -> Result<(Tok, usize)> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        if self.pos >= self.src.len() {
            return Ok((Tok::End, start));
        }
        let c = self.src[self.pos];
        self.pos += 1;
        let t = match c {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'^' => Tok::Caret,
            b'/' => Tok::Slash,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'0'..=b'9' => {
                let mut s = String::new();
                s.push(c as char);
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    s.push(self.src[self.pos] as char);
                    self.pos += 1;
                }
                Tok::Num(s)
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let mut s = String::new();
                s.push(c as char);
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    s.push(self.src[self.pos] as char);
                    self.pos += 1;
                }
                Tok::Ident(s)
            }
            other => {
                return Err(EngineError::Parse {
                    pos: start,
                    msg: format!("unexpected character `{}`", other as char),
                })
            }
        };
        Ok((t, start))
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    look: (Tok, usize),
    vars: VarSet,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, vars: VarSet) -> Result<Self> {
        let mut lexer = Lexer::new(src);
        let look = lexer.next_tok()?;
        Ok(Parser { lexer, look, vars })
    }

    fn bump(&mut self) -> Result<(Tok, usize)> {
        let mut t = self.lexer.next_tok()?;
        std::mem::swap(&mut self.look, &mut t);
        Ok(t)
    }

    fn expr(&mut self) -> Result<Poly> {
        let mut acc = match self.look.0 {
            Tok::Minus => {
                self.bump()?;
                self.term()?.neg()
            }
            Tok::Plus => {
                self.bump()?;
                self.term()?
            }
            _ => self.term()?,
        };
        loop {
            match self.look.0 {
                Tok::Plus => {
                    self.bump()?;
                    let t = self.term()?;
                    acc = acc.add(&t);
                }
                Tok::Minus => {
                    self.bump()?;
                    let t = self.term()?;
                    acc = acc.sub(&t);
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Poly> {
        let mut acc = self.factor()?;
        while self.look.0 == Tok::Star {
            self.bump()?;
            let f = self.factor()?;
            acc = acc.mul(&f);
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Poly> {
        let (tok, pos) = self.bump()?;
        let base = match tok {
            Tok::Num(n) => {
                // optional denominator
                if self.look.0 == Tok::Slash {
                    self.bump()?;
                    let (d, dpos) = self.bump()?;
                    match d {
                        Tok::Num(d) => {
                            let r = parse_rat(&format!("{n}/{d}"))?;
                            Poly::constant(self.vars.clone(), r)
                        }
                        _ => {
                            return Err(EngineError::Parse {
                                pos: dpos,
                                msg: "expected denominator".into(),
                            })
                        }
                    }
                } else {
                    Poly::constant(self.vars.clone(), parse_rat(&n)?)
                }
            }
            Tok::Ident(name) => {
                let idx = self
                    .vars
                    .iter()
                    .position(|v| *v == name)
                    .ok_or(EngineError::UnknownVariable(name))?;
                Poly::var(self.vars.clone(), idx)?
            }
            Tok::LParen => {
                let inner = self.expr()?;
                let (t, p) = self.bump()?;
                if t != Tok::RParen {
                    return Err(EngineError::Parse {
                        pos: p,
                        msg: "expected `)`".into(),
                    });
                }
                inner
            }
            Tok::Minus => self.factor()?.neg(),
            other => {
                return Err(EngineError::Parse {
                    pos,
                    msg: format!("unexpected token {other:?}"),
                })
            }
        };
        if self.look.0 == Tok::Caret {
            self.bump()?;
            let (t, p) = self.bump()?;
            match t {
                Tok::Num(k) => {
                    let k: u32 = k.parse().map_err(|_| EngineError::Parse {
                        pos: p,
                        msg: "bad exponent".into(),
                    })?;
                    return Ok(base.pow(k));
                }
                _ => {
                    return Err(EngineError::Parse {
                        pos: p,
                        msg: "expected integer exponent".into(),
                    })
                }
            }
        }
        Ok(base)
    }
}

/// Parses the infix grammar against a declared variable context.
pub fn parse_poly(src: &str, vars: &VarSet) -> Result<Poly> {
    let mut p = Parser::new(src, vars.clone())?;
    let out = p.expr()?;
    if p.look.0 != Tok::End {
        return Err(EngineError::Parse {
            pos: p.look.1,
            msg: format!("trailing input near {:?}", p.look.0),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{rat, rat_int};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn ctx2() -> VarSet {
        vars(&["x", "y"])
    }

    #[test]
    fn parse_and_display_roundtrip() {
        let v = vars(&["x0", "x1"]);
        let p = parse_poly("x0^2*x1 + 3/2*x1", &v).unwrap();
        assert_eq!(p.to_string(), "x0^2*x1 + 3/2*x1");
        let q = parse_poly(&p.to_string(), &v).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn parse_rejects_unknown_variable() {
        let v = vars(&["x"]);
        assert!(matches!(
            parse_poly("x*z", &v),
            Err(EngineError::UnknownVariable(_))
        ));
    }

    #[test]
    fn partial_derivatives() {
        let v = ctx2();
        let p = parse_poly("x^2*y", &v).unwrap();
        assert_eq!(p.partial(0).unwrap(), parse_poly("2*x*y", &v).unwrap());
        let c = parse_poly("5", &v).unwrap();
        assert!(c.partial(0).unwrap().is_zero());
        let p = parse_poly("x^3 + x*y", &v).unwrap();
        assert_eq!(p.partial(1).unwrap(), parse_poly("x", &v).unwrap());
        assert!(p.partial_by_name("nope").is_err());
    }

    #[test]
    fn jet_eval_first_order() {
        // p = x^2 at a + c*e1 -> a^2 + 2ac e1
        let v = vars(&["x"]);
        let p = parse_poly("x^2", &v).unwrap();
        for (a, c) in [(2i64, 3i64), (-1, 5), (0, 7), (4, -2)] {
            let point = JetScalar::constant(1, rat_int(a)).unwrap()
                + JetScalar::generator(1, 0).unwrap().scale(&rat_int(c));
            let out = p.eval_jet(&[point]).unwrap();
            assert_eq!(out.body(), rat_int(a * a));
            assert_eq!(out.extract(&[0]).unwrap(), rat_int(2 * a * c));
        }
    }

    #[test]
    fn jet_eval_mixed() {
        // p = x*y at (e1, e2) -> e1 e2
        let v = ctx2();
        let p = parse_poly("x*y", &v).unwrap();
        let e1 = JetScalar::generator(2, 0).unwrap();
        let e2 = JetScalar::generator(2, 1).unwrap();
        let out = p.eval_jet(&[e1.clone(), e2.clone()]).unwrap();
        assert_eq!(out, e1 * e2);
    }

    #[test]
    fn jet_eval_cubic() {
        // p = x^3 + 1 at 1 + e1 -> 2 + 3 e1
        let v = vars(&["x"]);
        let p = parse_poly("x^3 + 1", &v).unwrap();
        let point = JetScalar::constant(1, rat_int(1)).unwrap() + JetScalar::generator(1, 0).unwrap();
        let out = p.eval_jet(&[point]).unwrap();
        assert_eq!(out.body(), rat_int(2));
        assert_eq!(out.extract(&[0]).unwrap(), rat_int(3));
    }

    fn random_poly(rng: &mut StdRng, v: &VarSet, deg: u32) -> Poly {
        let mut p = Poly::zero(v.clone());
        for _ in 0..8 {
            let mut term = Poly::constant(v.clone(), rat(rng.gen_range(-4..=4), rng.gen_range(1..=2)));
            let mut budget = deg;
            for i in 0..v.len() {
                let k = rng.gen_range(0..=budget);
                budget -= k;
                term = term.mul(&Poly::var(v.clone(), i).unwrap().pow(k));
            }
            p = p.add(&term);
        }
        p
    }

    #[test]
    fn jet_directional_derivative_matches_symbolic() {
        // extract(eval(p, x + e v), {e}) == sum_i dp/dx_i(x) * v_i
        let mut rng = StdRng::seed_from_u64(23);
        let v = vars(&["x", "y", "z"]);
        for _ in 0..40 {
            let p = random_poly(&mut rng, &v, 4);
            let base: Vec<Rat> = (0..3).map(|_| rat(rng.gen_range(-3..=3), rng.gen_range(1..=3))).collect();
            let dir: Vec<Rat> = (0..3).map(|_| rat(rng.gen_range(-3..=3), 1)).collect();
            let point: Vec<JetScalar> = (0..3)
                .map(|i| {
                    JetScalar::constant(1, base[i].clone()).unwrap()
                        + JetScalar::generator(1, 0).unwrap().scale(&dir[i])
                })
                .collect();
            let lhs = p.eval_jet(&point).unwrap().extract(&[0]).unwrap();
            let mut rhs = Rat::zero();
            for i in 0..3 {
                rhs += p.partial(i).unwrap().eval_rat(&base).unwrap() * &dir[i];
            }
            assert_eq!(lhs, rhs);
        }
    }

}
