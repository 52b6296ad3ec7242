//! Function-free real-arithmetic formulas, canonical polynomials and the exact
//! evaluation oracle.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::ast::{Cmp, Rat};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    Var(String),
    Const(Rat),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn var(s: &str) -> Expr {
        Expr::Var(s.to_string())
    }
    pub fn int(n: i64) -> Expr {
        Expr::Const(Rat::from_integer(BigInt::from(n)))
    }
    pub fn zero() -> Expr {
        Expr::int(0)
    }
    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::Add(Box::new(a), Box::new(b))
    }
    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::Sub(Box::new(a), Box::new(b))
    }
    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::Mul(Box::new(a), Box::new(b))
    }
    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::Div(Box::new(a), Box::new(b))
    }
    /// `(a1 - a0) / (b1 - b0)`, the secant shape produced by the eliminator.
    pub fn secant(a1: &str, a0: &str, b1: &str, b0: &str) -> Expr {
        Expr::div(Expr::sub(Expr::var(a1), Expr::var(a0)), Expr::sub(Expr::var(b1), Expr::var(b0)))
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.vars(&mut out);
        out
    }

    fn vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Const(_) => {}
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.vars(out);
                b.vars(out);
            }
        }
    }

    fn has_div(&self) -> bool {
        match self {
            Expr::Var(_) | Expr::Const(_) => false,
            Expr::Div(..) => true,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => a.has_div() || b.has_div(),
        }
    }

    pub fn eval(&self, m: &NumericModel) -> Result<Rat, EvalError> {
        Ok(match self {
            Expr::Var(v) => m.get(v).ok_or_else(|| EvalError::MissingVariable(v.clone()))?.clone(),
            Expr::Const(c) => c.clone(),
            Expr::Add(a, b) => a.eval(m)? + b.eval(m)?,
            Expr::Sub(a, b) => a.eval(m)? - b.eval(m)?,
            Expr::Mul(a, b) => a.eval(m)? * b.eval(m)?,
            Expr::Div(a, b) => {
                let d = b.eval(m)?;
                if d.is_zero() {
                    return Err(EvalError::DivisionByZero);
                }
                a.eval(m)? / d
            }
        })
    }

    /// Polynomial of a division-free expression.
    pub fn to_poly(&self) -> Option<Poly> {
        Some(match self {
            Expr::Var(v) => Poly::var(v),
            Expr::Const(c) => Poly::constant(c.clone()),
            Expr::Add(a, b) => a.to_poly()?.add(&b.to_poly()?),
            Expr::Sub(a, b) => a.to_poly()?.sub(&b.to_poly()?),
            Expr::Mul(a, b) => a.to_poly()?.mul(&b.to_poly()?),
            Expr::Div(..) => return None,
        })
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
        }
    }
}

/// Monomial: sorted (variable, exponent) pairs; empty for the constant monomial.
pub type Mono = Vec<(String, u32)>;

fn mono_mul(a: &Mono, b: &Mono) -> Mono {
    let mut m: BTreeMap<String, u32> = a.iter().cloned().collect();
    for (v, e) in b {
        *m.entry(v.clone()).or_insert(0) += e;
    }
    m.into_iter().collect()
}

/// Polynomial with rational coefficients in canonical sorted form.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Poly {
    pub terms: BTreeMap<Mono, Rat>,
}

impl Poly {
    pub fn zero() -> Poly {
        Poly::default()
    }
    pub fn constant(c: Rat) -> Poly {
        let mut p = Poly::zero();
        if !c.is_zero() {
            p.terms.insert(Vec::new(), c);
        }
        p
    }
    pub fn var(v: &str) -> Poly {
        let mut p = Poly::zero();
        p.terms.insert(vec![(v.to_string(), 1)], Rat::one());
        p
    }
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
    pub fn as_constant(&self) -> Option<Rat> {
        match self.terms.len() {
            0 => Some(Rat::zero()),
            1 => self.terms.get(&Vec::new()).cloned(),
            _ => None,
        }
    }
    pub fn add(&self, o: &Poly) -> Poly {
        let mut r = self.clone();
        for (m, c) in &o.terms {
            let e = r.terms.entry(m.clone()).or_insert_with(Rat::zero);
            *e += c;
            if e.is_zero() {
                r.terms.remove(m);
            }
        }
        r
    }
    pub fn scale(&self, k: &Rat) -> Poly {
        if k.is_zero() {
            return Poly::zero();
        }
        Poly { terms: self.terms.iter().map(|(m, c)| (m.clone(), c * k)).collect() }
    }
    pub fn neg(&self) -> Poly {
        self.scale(&-Rat::one())
    }
    pub fn sub(&self, o: &Poly) -> Poly {
        self.add(&o.neg())
    }
    pub fn mul(&self, o: &Poly) -> Poly {
        let mut r = Poly::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &o.terms {
                let t = Poly { terms: [(mono_mul(m1, m2), c1 * c2)].into_iter().collect() };
                r = r.add(&t);
            }
        }
        r
    }
    pub fn eval(&self, m: &NumericModel) -> Result<Rat, EvalError> {
        let mut acc = Rat::zero();
        for (mono, c) in &self.terms {
            let mut t = c.clone();
            for (v, e) in mono {
                let x = m.get(v).ok_or_else(|| EvalError::MissingVariable(v.clone()))?;
                for _ in 0..*e {
                    t *= x;
                }
            }
            acc += t;
        }
        Ok(acc)
    }
    pub fn vars(&self) -> BTreeSet<String> {
        self.terms.keys().flat_map(|m| m.iter().map(|(v, _)| v.clone())).collect()
    }
    /// Positive multiple with coprime integer coefficients.
    pub fn primitive_integer(&self) -> BTreeMap<Mono, BigInt> {
        let mut l = BigInt::one();
        for c in self.terms.values() {
            l = l.lcm(c.denom());
        }
        let ints: BTreeMap<Mono, BigInt> = self
            .terms
            .iter()
            .map(|(m, c)| (m.clone(), (c * Rat::from_integer(l.clone())).to_integer()))
            .collect();
        let mut g = BigInt::zero();
        for c in ints.values() {
            g = g.gcd(c);
        }
        if g.is_zero() || g.is_one() {
            return ints;
        }
        ints.into_iter().map(|(m, c)| (m, c / &g)).collect()
    }
}

/// `lhs ⋈ 0` with integer coefficients; `rel` is one of `= < > <= >=`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PolyAtom {
    pub lhs: BTreeMap<Mono, BigInt>,
    pub rel: Cmp,
}

impl PolyAtom {
    pub fn from_poly(p: &Poly, rel: Cmp) -> PolyAtom {
        debug_assert!(rel != Cmp::Ne);
        PolyAtom { lhs: p.primitive_integer(), rel }
    }
    pub fn poly(&self) -> Poly {
        Poly { terms: self.lhs.iter().map(|(m, c)| (m.clone(), Rat::from_integer(c.clone()))).collect() }
    }
    pub fn eval(&self, m: &NumericModel) -> Result<bool, EvalError> {
        let v = self.poly().eval(m)?;
        Ok(self.rel.holds(&v, &Rat::zero()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TarskiFormula {
    True,
    False,
    /// Raw comparison, possibly containing divisions.
    Cmp(Expr, Cmp, Expr),
    Poly(PolyAtom),
    And(Vec<TarskiFormula>),
    Or(Vec<TarskiFormula>),
    Not(Box<TarskiFormula>),
    Implies(Box<TarskiFormula>, Box<TarskiFormula>),
}

impl TarskiFormula {
    pub fn cmp(a: Expr, c: Cmp, b: Expr) -> Self {
        TarskiFormula::Cmp(a, c, b)
    }
    pub fn implies(a: TarskiFormula, b: TarskiFormula) -> Self {
        TarskiFormula::Implies(Box::new(a), Box::new(b))
    }
    pub fn not(a: TarskiFormula) -> Self {
        TarskiFormula::Not(Box::new(a))
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }
    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            TarskiFormula::True | TarskiFormula::False => {}
            TarskiFormula::Cmp(a, _, b) => {
                a.vars(out);
                b.vars(out);
            }
            TarskiFormula::Poly(p) => out.extend(p.poly().vars()),
            TarskiFormula::And(v) | TarskiFormula::Or(v) => v.iter().for_each(|f| f.collect_vars(out)),
            TarskiFormula::Not(a) => a.collect_vars(out),
            TarskiFormula::Implies(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn has_division(&self) -> bool {
        match self {
            TarskiFormula::True | TarskiFormula::False | TarskiFormula::Poly(_) => false,
            TarskiFormula::Cmp(a, _, b) => a.has_div() || b.has_div(),
            TarskiFormula::And(v) | TarskiFormula::Or(v) => v.iter().any(|f| f.has_division()),
            TarskiFormula::Not(a) => a.has_division(),
            TarskiFormula::Implies(a, b) => a.has_division() || b.has_division(),
        }
    }

    /// Top-level conjuncts (flattening nested conjunctions).
    pub fn conjuncts(&self) -> Vec<&TarskiFormula> {
        match self {
            TarskiFormula::And(v) => v.iter().flat_map(|f| f.conjuncts()).collect(),
            TarskiFormula::True => Vec::new(),
            f => vec![f],
        }
    }

    /// Visits every atom with the polarity-independent predicate `keep`;
    /// used by the model re-check of approximate models.
    pub fn atoms(&self) -> Vec<&TarskiFormula> {
        match self {
            TarskiFormula::Cmp(..) | TarskiFormula::Poly(_) => vec![self],
            TarskiFormula::And(v) | TarskiFormula::Or(v) => v.iter().flat_map(|f| f.atoms()).collect(),
            TarskiFormula::Not(a) => a.atoms(),
            TarskiFormula::Implies(a, b) => {
                let mut x = a.atoms();
                x.extend(b.atoms());
                x
            }
            _ => Vec::new(),
        }
    }
}

impl fmt::Display for TarskiFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TarskiFormula::True => write!(f, "true"),
            TarskiFormula::False => write!(f, "false"),
            TarskiFormula::Cmp(a, c, b) => write!(f, "{a} {} {b}", c.symbol()),
            TarskiFormula::Poly(p) => {
                let parts: Vec<String> = p
                    .lhs
                    .iter()
                    .map(|(m, c)| {
                        let mut s = c.to_string();
                        for (v, e) in m {
                            s.push('*');
                            s.push_str(v);
                            if *e > 1 {
                                s.push_str(&format!("^{e}"));
                            }
                        }
                        s
                    })
                    .collect();
                let lhs = if parts.is_empty() { "0".into() } else { parts.join(" + ") };
                write!(f, "{lhs} {} 0", p.rel.symbol())
            }
            TarskiFormula::And(v) | TarskiFormula::Or(v) => {
                let sep = if matches!(self, TarskiFormula::And(_)) { " & " } else { " | " };
                let parts: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
                write!(f, "({})", parts.join(sep))
            }
            TarskiFormula::Not(a) => write!(f, "!({a})"),
            TarskiFormula::Implies(a, b) => write!(f, "({a} -> {b})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("model has no value for variable `{0}`")]
    MissingVariable(String),
    #[error("division by zero")]
    DivisionByZero,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClearError {
    #[error("denominator `{0}` has unknown sign")]
    UnknownSignDenominator(String),
}

/// Assignment of exact rationals to variable names.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NumericModel {
    #[serde(with = "rat_map")]
    pub assignment: BTreeMap<String, Rat>,
    pub exact: bool,
}

impl NumericModel {
    pub fn exact(assignment: BTreeMap<String, Rat>) -> Self {
        NumericModel { assignment, exact: true }
    }
    pub fn get(&self, v: &str) -> Option<&Rat> {
        self.assignment.get(v)
    }
    pub fn set(&mut self, v: &str, q: Rat) {
        self.assignment.insert(v.to_string(), q);
    }
}

mod rat_map {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &BTreeMap<String, Rat>, s: S) -> Result<S::Ok, S::Error> {
        let strs: BTreeMap<&String, String> = m.iter().map(|(k, v)| (k, v.to_string())).collect();
        strs.serialize(s)
    }
    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, Rat>, D::Error> {
        let strs: BTreeMap<String, String> = BTreeMap::deserialize(d)?;
        strs.into_iter()
            .map(|(k, v)| {
                v.parse::<Rat>().map(|q| (k, q)).map_err(|e| serde::de::Error::custom(format!("{e:?}")))
            })
            .collect()
    }
}

pub fn eval_tarski(f: &TarskiFormula, m: &NumericModel) -> Result<bool, EvalError> {
    Ok(match f {
        TarskiFormula::True => true,
        TarskiFormula::False => false,
        TarskiFormula::Cmp(a, c, b) => c.holds(&a.eval(m)?, &b.eval(m)?),
        TarskiFormula::Poly(p) => p.eval(m)?,
        TarskiFormula::And(v) => {
            for x in v {
                if !eval_tarski(x, m)? {
                    return Ok(false);
                }
            }
            true
        }
        TarskiFormula::Or(v) => {
            for x in v {
                if eval_tarski(x, m)? {
                    return Ok(true);
                }
            }
            false
        }
        TarskiFormula::Not(a) => !eval_tarski(a, m)?,
        TarskiFormula::Implies(a, b) => !eval_tarski(a, m)? || eval_tarski(b, m)?,
    })
}

/// Evaluation for rationalized approximate models: under positive polarity a
/// non-strict atom must hold exactly and a strict one with at least `margin`
/// to spare; under negative polarity the same applies to the negated atom.
pub fn eval_tarski_margin(f: &TarskiFormula, m: &NumericModel, margin: &Rat) -> Result<bool, EvalError> {
    robust(f, m, margin, true)
}

fn robust_atom(diff: Rat, c: Cmp, margin: &Rat, positive: bool) -> bool {
    let c = if positive { c } else { c.negate() };
    match c {
        Cmp::Eq | Cmp::Le | Cmp::Ge => c.holds(&diff, &Rat::zero()),
        Cmp::Gt => diff >= *margin,
        Cmp::Lt => -diff >= *margin,
        Cmp::Ne => diff.abs() >= *margin,
    }
}

fn robust(f: &TarskiFormula, m: &NumericModel, margin: &Rat, positive: bool) -> Result<bool, EvalError> {
    // returns whether f (positive) or ¬f (negative) robustly holds
    Ok(match f {
        TarskiFormula::True => positive,
        TarskiFormula::False => !positive,
        TarskiFormula::Cmp(a, c, b) => robust_atom(a.eval(m)? - b.eval(m)?, *c, margin, positive),
        TarskiFormula::Poly(p) => robust_atom(p.poly().eval(m)?, p.rel, margin, positive),
        TarskiFormula::And(v) | TarskiFormula::Or(v) => {
            let conj = matches!(f, TarskiFormula::And(_)) == positive;
            let mut acc = conj;
            for x in v {
                let r = robust(x, m, margin, positive)?;
                if conj && !r {
                    acc = false;
                    break;
                }
                if !conj && r {
                    acc = true;
                    break;
                }
            }
            acc
        }
        TarskiFormula::Not(a) => robust(a, m, margin, !positive)?,
        TarskiFormula::Implies(a, b) => {
            if positive {
                robust(a, m, margin, false)? || robust(b, m, margin, true)?
            } else {
                robust(a, m, margin, true)? && robust(b, m, margin, false)?
            }
        }
    })
}

/// Quotient `num/den` with `den` a product of factors known to be positive.
#[derive(Clone, Debug)]
struct Frac {
    num: Poly,
    den: Poly,
}

struct Clearer<'a> {
    known_positive: &'a [Poly],
    product_encoding: bool,
    fresh: usize,
    defs: Vec<TarskiFormula>,
}

impl Clearer<'_> {
    fn frac(&mut self, e: &Expr) -> Result<Frac, ClearError> {
        let one = Poly::constant(Rat::one());
        Ok(match e {
            Expr::Var(v) => Frac { num: Poly::var(v), den: one },
            Expr::Const(c) => Frac { num: Poly::constant(c.clone()), den: one },
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                let (a, b) = (self.frac(a)?, self.frac(b)?);
                let l = a.num.mul(&b.den);
                let r = b.num.mul(&a.den);
                let num = if matches!(e, Expr::Add(..)) { l.add(&r) } else { l.sub(&r) };
                Frac { num, den: a.den.mul(&b.den) }
            }
            Expr::Mul(a, b) => {
                let (a, b) = (self.frac(a)?, self.frac(b)?);
                Frac { num: a.num.mul(&b.num), den: a.den.mul(&b.den) }
            }
            Expr::Div(a, b) => {
                let (a, b) = (self.frac(a)?, self.frac(b)?);
                if let Some(c) = b.num.as_constant() {
                    if c.is_zero() {
                        // x/0 has no value; encode as an unsatisfiable definition
                        self.defs.push(TarskiFormula::False);
                        return Ok(Frac { num: Poly::zero(), den: one });
                    }
                    let k = Rat::one() / c;
                    return Ok(Frac { num: a.num.mul(&b.den).scale(&k), den: a.den });
                }
                if self.is_known_positive(&b.num) {
                    Frac { num: a.num.mul(&b.den), den: a.den.mul(&b.num) }
                } else if self.is_known_positive(&b.num.neg()) {
                    Frac { num: a.num.mul(&b.den).neg(), den: a.den.mul(&b.num.neg()) }
                } else if self.product_encoding {
                    // s = a/b  <->  a = s·b ∧ b·b > 0
                    let s = format!("_q{}", self.fresh);
                    self.fresh += 1;
                    let sp = Poly::var(&s);
                    let lhs = sp.mul(&b.num).mul(&a.den).sub(&a.num.mul(&b.den));
                    self.defs.push(TarskiFormula::Poly(PolyAtom::from_poly(&lhs, Cmp::Eq)));
                    self.defs.push(TarskiFormula::Poly(PolyAtom::from_poly(&b.num.mul(&b.num), Cmp::Gt)));
                    Frac { num: sp, den: one }
                } else {
                    return Err(ClearError::UnknownSignDenominator(e.to_string()));
                }
            }
        })
    }

    fn is_known_positive(&self, p: &Poly) -> bool {
        if let Some(c) = p.as_constant() {
            return c.is_positive();
        }
        // equal up to a positive scalar
        let canon = p.primitive_integer();
        self.known_positive.iter().any(|k| {
            k.primitive_integer() == canon
                && k.terms.iter().next().zip(p.terms.iter().next()).is_some_and(|((_, a), (_, b))| {
                    a.is_positive() == b.is_positive()
                })
        })
    }

    fn formula(&mut self, f: &TarskiFormula) -> Result<TarskiFormula, ClearError> {
        Ok(match f {
            TarskiFormula::True | TarskiFormula::False | TarskiFormula::Poly(_) => f.clone(),
            TarskiFormula::Cmp(a, c, b) => {
                let d = self.frac(&Expr::sub(a.clone(), b.clone()))?;
                // d.den > 0, so the sign of the quotient is the sign of d.num
                let atom = |rel| TarskiFormula::Poly(PolyAtom::from_poly(&d.num, rel));
                match c {
                    Cmp::Ne => TarskiFormula::not(atom(Cmp::Eq)),
                    c => atom(*c),
                }
            }
            TarskiFormula::And(v) => {
                TarskiFormula::And(v.iter().map(|x| self.formula(x)).collect::<Result<_, _>>()?)
            }
            TarskiFormula::Or(v) => {
                TarskiFormula::Or(v.iter().map(|x| self.formula(x)).collect::<Result<_, _>>()?)
            }
            TarskiFormula::Not(a) => TarskiFormula::not(self.formula(a)?),
            TarskiFormula::Implies(a, b) => TarskiFormula::implies(self.formula(a)?, self.formula(b)?),
        })
    }
}

/// Converts every raw comparison into a [`PolyAtom`], multiplying through
/// denominators known to be positive. Other denominators use the product
/// encoding `a = s·b ∧ b·b > 0` when `product_encoding` is set.
pub fn clear_divisions(
    f: &TarskiFormula,
    known_positive: &[Expr],
    product_encoding: bool,
) -> Result<TarskiFormula, ClearError> {
    let kp: Vec<Poly> = known_positive.iter().filter_map(|e| e.to_poly()).collect();
    let mut c = Clearer { known_positive: &kp, product_encoding, fresh: 0, defs: Vec::new() };
    let body = c.formula(f)?;
    if c.defs.is_empty() {
        return Ok(body);
    }
    let mut all = vec![body];
    all.append(&mut c.defs);
    Ok(TarskiFormula::And(all))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::rat;

    fn model(pairs: &[(&str, Rat)]) -> NumericModel {
        NumericModel::exact(pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect())
    }

    #[test]
    fn secant_clears_by_multiplication() {
        let f = TarskiFormula::cmp(Expr::secant("y2", "y1", "v2", "v1"), Cmp::Gt, Expr::var("c"));
        let kp = [Expr::sub(Expr::var("v2"), Expr::var("v1"))];
        let g = clear_divisions(&f, &kp, false).unwrap();
        assert!(!g.has_division());
        // y2 - y1 - c v2 + c v1 > 0
        let expect = Poly::var("y2")
            .sub(&Poly::var("y1"))
            .sub(&Poly::var("c").mul(&Poly::var("v2")))
            .add(&Poly::var("c").mul(&Poly::var("v1")));
        assert_eq!(g, TarskiFormula::Poly(PolyAtom::from_poly(&expect, Cmp::Gt)));
    }

    #[test]
    fn unknown_denominator_uses_product_encoding() {
        let f = TarskiFormula::cmp(Expr::var("s"), Cmp::Eq, Expr::div(Expr::var("t1"), Expr::var("t2")));
        assert!(matches!(clear_divisions(&f, &[], false), Err(ClearError::UnknownSignDenominator(_))));
        let g = clear_divisions(&f, &[], true).unwrap();
        assert!(!g.has_division());
        let mut m = model(&[("s", rat(3, 1)), ("t1", rat(6, 1)), ("t2", rat(2, 1)), ("_q0", rat(3, 1))]);
        assert!(eval_tarski(&g, &m).unwrap());
        m.set("t2", rat(0, 1));
        assert!(!eval_tarski(&g, &m).unwrap());
    }

    #[test]
    fn division_free_is_identity_up_to_canonical_form() {
        let f = TarskiFormula::Poly(PolyAtom::from_poly(&Poly::var("x"), Cmp::Gt));
        assert_eq!(clear_divisions(&f, &[], false).unwrap(), f);
    }

    #[test]
    fn eval_simple() {
        let f = TarskiFormula::cmp(Expr::var("x"), Cmp::Gt, Expr::zero());
        assert!(eval_tarski(&f, &model(&[("x", rat(1, 1))])).unwrap());
        assert_eq!(
            eval_tarski(&f, &model(&[])),
            Err(EvalError::MissingVariable("x".into()))
        );
    }

    #[test]
    fn primitive_integer_is_positive_multiple() {
        let p = Poly::var("x").scale(&rat(2, 3)).add(&Poly::constant(rat(-4, 3)));
        let pi = p.primitive_integer();
        assert_eq!(pi.get(&vec![("x".to_string(), 1)]), Some(&BigInt::from(1)));
        assert_eq!(pi.get(&Vec::new()), Some(&BigInt::from(-2)));
    }
}
