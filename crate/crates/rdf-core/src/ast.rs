//! Abstract syntax of RDF⁺ formulas and the derived-expression expansion.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub type Rat = BigRational;

/// Numerical terms. `Num` and `Div` are surface sugar removed by [`expand_derived`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NumTerm {
    Var(String),
    Zero,
    One,
    Num(Rat),
    Add(Box<NumTerm>, Box<NumTerm>),
    Sub(Box<NumTerm>, Box<NumTerm>),
    Mul(Box<NumTerm>, Box<NumTerm>),
    Div(Box<NumTerm>, Box<NumTerm>),
    Apply(String, Box<NumTerm>),
    DApply(String, Box<NumTerm>),
}

impl NumTerm {
    pub fn var(name: &str) -> Self {
        NumTerm::Var(name.to_string())
    }
    pub fn add(a: NumTerm, b: NumTerm) -> Self {
        NumTerm::Add(Box::new(a), Box::new(b))
    }
    pub fn sub(a: NumTerm, b: NumTerm) -> Self {
        NumTerm::Sub(Box::new(a), Box::new(b))
    }
    pub fn mul(a: NumTerm, b: NumTerm) -> Self {
        NumTerm::Mul(Box::new(a), Box::new(b))
    }
    pub fn div(a: NumTerm, b: NumTerm) -> Self {
        NumTerm::Div(Box::new(a), Box::new(b))
    }
    pub fn apply(f: &str, t: NumTerm) -> Self {
        NumTerm::Apply(f.to_string(), Box::new(t))
    }
    pub fn dapply(f: &str, t: NumTerm) -> Self {
        NumTerm::DApply(f.to_string(), Box::new(t))
    }

    fn is_sugar_free(&self) -> bool {
        match self {
            NumTerm::Var(_) | NumTerm::Zero | NumTerm::One => true,
            NumTerm::Num(_) | NumTerm::Div(..) => false,
            NumTerm::Add(a, b) | NumTerm::Sub(a, b) | NumTerm::Mul(a, b) => {
                a.is_sugar_free() && b.is_sugar_free()
            }
            NumTerm::Apply(_, t) | NumTerm::DApply(_, t) => t.is_sugar_free(),
        }
    }

    fn visit_vars(&self, out: &mut dyn FnMut(&str)) {
        match self {
            NumTerm::Var(v) => out(v),
            NumTerm::Zero | NumTerm::One | NumTerm::Num(_) => {}
            NumTerm::Add(a, b) | NumTerm::Sub(a, b) | NumTerm::Mul(a, b) | NumTerm::Div(a, b) => {
                a.visit_vars(out);
                b.visit_vars(out);
            }
            NumTerm::Apply(_, t) | NumTerm::DApply(_, t) => t.visit_vars(out),
        }
    }

    fn domain_args(&self, out: &mut BTreeSet<String>) {
        match self {
            NumTerm::Var(_) | NumTerm::Zero | NumTerm::One | NumTerm::Num(_) => {}
            NumTerm::Add(a, b) | NumTerm::Sub(a, b) | NumTerm::Mul(a, b) | NumTerm::Div(a, b) => {
                a.domain_args(out);
                b.domain_args(out);
            }
            NumTerm::Apply(_, t) | NumTerm::DApply(_, t) => {
                if let NumTerm::Var(v) = t.as_ref() {
                    out.insert(v.clone());
                }
                t.domain_args(out);
            }
        }
    }

    fn subst(&self, old: &str, new: &str) -> NumTerm {
        match self {
            NumTerm::Var(v) if v == old => NumTerm::Var(new.to_string()),
            NumTerm::Var(_) | NumTerm::Zero | NumTerm::One | NumTerm::Num(_) => self.clone(),
            NumTerm::Add(a, b) => NumTerm::add(a.subst(old, new), b.subst(old, new)),
            NumTerm::Sub(a, b) => NumTerm::sub(a.subst(old, new), b.subst(old, new)),
            NumTerm::Mul(a, b) => NumTerm::mul(a.subst(old, new), b.subst(old, new)),
            NumTerm::Div(a, b) => NumTerm::div(a.subst(old, new), b.subst(old, new)),
            NumTerm::Apply(f, t) => NumTerm::apply(f, t.subst(old, new)),
            NumTerm::DApply(f, t) => NumTerm::dapply(f, t.subst(old, new)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExtEnd {
    Term(NumTerm),
    NegInf,
    PosInf,
}

impl ExtEnd {
    pub fn is_finite(&self) -> bool {
        matches!(self, ExtEnd::Term(_))
    }
    fn map_term(&self, f: &mut dyn FnMut(&NumTerm) -> NumTerm) -> ExtEnd {
        match self {
            ExtEnd::Term(t) => ExtEnd::Term(f(t)),
            other => other.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IntervalSpec {
    pub lo: ExtEnd,
    pub hi: ExtEnd,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl IntervalSpec {
    /// Builds a spec; closedness flags on infinite ends are cleared.
    pub fn new(lo: ExtEnd, hi: ExtEnd, lo_closed: bool, hi_closed: bool) -> Self {
        let lo_closed = lo_closed && lo.is_finite();
        let hi_closed = hi_closed && hi.is_finite();
        IntervalSpec { lo, hi, lo_closed, hi_closed }
    }
    pub fn closed(a: NumTerm, b: NumTerm) -> Self {
        Self::new(ExtEnd::Term(a), ExtEnd::Term(b), true, true)
    }
    pub fn open(a: NumTerm, b: NumTerm) -> Self {
        Self::new(ExtEnd::Term(a), ExtEnd::Term(b), false, false)
    }
    pub fn real_line() -> Self {
        Self::new(ExtEnd::NegInf, ExtEnd::PosInf, false, false)
    }
    pub fn is_well_formed(&self) -> bool {
        !matches!(self.lo, ExtEnd::PosInf)
            && !matches!(self.hi, ExtEnd::NegInf)
            && (self.lo.is_finite() || !self.lo_closed)
            && (self.hi.is_finite() || !self.hi_closed)
    }
    fn map_terms(&self, f: &mut dyn FnMut(&NumTerm) -> NumTerm) -> IntervalSpec {
        IntervalSpec {
            lo: self.lo.map_term(f),
            hi: self.hi.map_term(f),
            lo_closed: self.lo_closed,
            hi_closed: self.hi_closed,
        }
    }
    fn terms(&self) -> Vec<&NumTerm> {
        let mut v = Vec::new();
        if let ExtEnd::Term(t) = &self.lo {
            v.push(t);
        }
        if let ExtEnd::Term(t) = &self.hi {
            v.push(t);
        }
        v
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Cmp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Cmp {
    pub fn symbol(self) -> &'static str {
        match self {
            Cmp::Eq => "=",
            Cmp::Ne => "!=",
            Cmp::Lt => "<",
            Cmp::Le => "<=",
            Cmp::Gt => ">",
            Cmp::Ge => ">=",
        }
    }
    pub fn negate(self) -> Cmp {
        match self {
            Cmp::Eq => Cmp::Ne,
            Cmp::Ne => Cmp::Eq,
            Cmp::Lt => Cmp::Ge,
            Cmp::Le => Cmp::Gt,
            Cmp::Gt => Cmp::Le,
            Cmp::Ge => Cmp::Lt,
        }
    }
    /// Relation with arguments swapped: `a R b` iff `b R.flip() a`.
    pub fn flip(self) -> Cmp {
        match self {
            Cmp::Lt => Cmp::Gt,
            Cmp::Le => Cmp::Ge,
            Cmp::Gt => Cmp::Lt,
            Cmp::Ge => Cmp::Le,
            c => c,
        }
    }
    pub fn holds<T: PartialOrd>(self, a: &T, b: &T) -> bool {
        match self {
            Cmp::Eq => a == b,
            Cmp::Ne => a != b,
            Cmp::Lt => a < b,
            Cmp::Le => a <= b,
            Cmp::Gt => a > b,
            Cmp::Ge => a >= b,
        }
    }
}

/// Interval predicates on a single function variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PredKind {
    Up,
    StrictUp,
    Down,
    StrictDown,
    Convex,
    StrictConvex,
    Concave,
    StrictConcave,
    Constant,
    Linear,
    Affine,
}

impl PredKind {
    pub const ALL: [PredKind; 11] = [
        PredKind::Up,
        PredKind::StrictUp,
        PredKind::Down,
        PredKind::StrictDown,
        PredKind::Convex,
        PredKind::StrictConvex,
        PredKind::Concave,
        PredKind::StrictConcave,
        PredKind::Constant,
        PredKind::Linear,
        PredKind::Affine,
    ];
    pub fn name(self) -> &'static str {
        match self {
            PredKind::Up => "Up",
            PredKind::StrictUp => "StrictUp",
            PredKind::Down => "Down",
            PredKind::StrictDown => "StrictDown",
            PredKind::Convex => "Convex",
            PredKind::StrictConvex => "StrictConvex",
            PredKind::Concave => "Concave",
            PredKind::StrictConcave => "StrictConcave",
            PredKind::Constant => "Constant",
            PredKind::Linear => "Linear",
            PredKind::Affine => "Affine",
        }
    }
    pub fn from_name(s: &str) -> Option<PredKind> {
        PredKind::ALL.iter().copied().find(|k| k.name() == s)
    }
    /// Kinds that survive [`expand_derived`].
    pub fn is_primitive(self) -> bool {
        !matches!(
            self,
            PredKind::Up | PredKind::Down | PredKind::Constant | PredKind::Linear | PredKind::Affine
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Atom {
    /// `s ⋈ t`; only `=` and `>` are primitive.
    Num(NumTerm, Cmp, NumTerm),
    FunEq(String, String, IntervalSpec),
    FunGt(String, String, IntervalSpec),
    Pred(PredKind, String, IntervalSpec),
    /// Pointwise `Up(f,s)_A` (`up = true`) or `Down(f,s)_A`.
    PointMono { up: bool, f: String, at: NumTerm, ival: IntervalSpec },
    /// `(D[f] ⋈ t)_A`; `≠` is derived.
    Deriv(String, Cmp, NumTerm, IntervalSpec),
}

impl Atom {
    pub fn is_primitive(&self) -> bool {
        match self {
            Atom::Num(a, c, b) => {
                matches!(c, Cmp::Eq | Cmp::Gt) && a.is_sugar_free() && b.is_sugar_free()
            }
            Atom::FunEq(_, _, i) | Atom::FunGt(_, _, i) => {
                i.terms().iter().all(|t| t.is_sugar_free())
            }
            Atom::Pred(k, _, i) => k.is_primitive() && i.terms().iter().all(|t| t.is_sugar_free()),
            Atom::PointMono { .. } => false,
            Atom::Deriv(_, c, t, i) => {
                *c != Cmp::Ne && t.is_sugar_free() && i.terms().iter().all(|t| t.is_sugar_free())
            }
        }
    }

    fn terms(&self) -> Vec<&NumTerm> {
        match self {
            Atom::Num(a, _, b) => vec![a, b],
            Atom::FunEq(_, _, i) | Atom::FunGt(_, _, i) | Atom::Pred(_, _, i) => i.terms(),
            Atom::PointMono { at, ival, .. } => {
                let mut v = vec![at];
                v.extend(ival.terms());
                v
            }
            Atom::Deriv(_, _, t, i) => {
                let mut v = vec![t];
                v.extend(i.terms());
                v
            }
        }
    }

    fn map_terms(&self, f: &mut dyn FnMut(&NumTerm) -> NumTerm) -> Atom {
        match self {
            Atom::Num(a, c, b) => Atom::Num(f(a), *c, f(b)),
            Atom::FunEq(g, h, i) => Atom::FunEq(g.clone(), h.clone(), i.map_terms(f)),
            Atom::FunGt(g, h, i) => Atom::FunGt(g.clone(), h.clone(), i.map_terms(f)),
            Atom::Pred(k, g, i) => Atom::Pred(*k, g.clone(), i.map_terms(f)),
            Atom::PointMono { up, f: g, at, ival } => Atom::PointMono {
                up: *up,
                f: g.clone(),
                at: f(at),
                ival: ival.map_terms(f),
            },
            Atom::Deriv(g, c, t, i) => Atom::Deriv(g.clone(), *c, f(t), i.map_terms(f)),
        }
    }

    fn interval(&self) -> Option<&IntervalSpec> {
        match self {
            Atom::Num(..) => None,
            Atom::FunEq(_, _, i) | Atom::FunGt(_, _, i) | Atom::Pred(_, _, i) => Some(i),
            Atom::PointMono { ival, .. } => Some(ival),
            Atom::Deriv(_, _, _, i) => Some(i),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    Atom(Atom),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn atom(a: Atom) -> Self {
        Formula::Atom(a)
    }
    pub fn not(a: Formula) -> Self {
        Formula::Not(Box::new(a))
    }
    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }
    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }
    pub fn implies(a: Formula, b: Formula) -> Self {
        Formula::Implies(Box::new(a), Box::new(b))
    }
    pub fn iff(a: Formula, b: Formula) -> Self {
        Formula::Iff(Box::new(a), Box::new(b))
    }
    pub fn num(a: NumTerm, c: Cmp, b: NumTerm) -> Self {
        Formula::Atom(Atom::Num(a, c, b))
    }
    /// Left-nested conjunction; `None` for an empty list.
    pub fn and_all(items: Vec<Formula>) -> Option<Formula> {
        items.into_iter().reduce(Formula::and)
    }
    pub fn or_all(items: Vec<Formula>) -> Option<Formula> {
        items.into_iter().reduce(Formula::or)
    }

    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }
    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a Atom>) {
        match self {
            Formula::Atom(a) => out.push(a),
            Formula::Not(a) => a.collect_atoms(out),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
        }
    }

    fn map_atoms(&self, f: &mut dyn FnMut(&Atom) -> Formula) -> Formula {
        match self {
            Formula::Atom(a) => f(a),
            Formula::Not(a) => Formula::not(a.map_atoms(f)),
            Formula::And(a, b) => Formula::and(a.map_atoms(f), b.map_atoms(f)),
            Formula::Or(a, b) => Formula::or(a.map_atoms(f), b.map_atoms(f)),
            Formula::Implies(a, b) => Formula::implies(a.map_atoms(f), b.map_atoms(f)),
            Formula::Iff(a, b) => Formula::iff(a.map_atoms(f), b.map_atoms(f)),
        }
    }

    /// All numerical variable names occurring anywhere.
    pub fn num_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for a in self.atoms() {
            for t in a.terms() {
                t.visit_vars(&mut |v| {
                    out.insert(v.to_string());
                });
            }
        }
        out
    }

    /// All function variable names occurring anywhere.
    pub fn fun_vars(&self) -> BTreeSet<String> {
        fn term_funs(t: &NumTerm, out: &mut BTreeSet<String>) {
            match t {
                NumTerm::Apply(f, a) | NumTerm::DApply(f, a) => {
                    out.insert(f.clone());
                    term_funs(a, out);
                }
                NumTerm::Add(a, b) | NumTerm::Sub(a, b) | NumTerm::Mul(a, b) | NumTerm::Div(a, b) => {
                    term_funs(a, out);
                    term_funs(b, out);
                }
                _ => {}
            }
        }
        let mut out = BTreeSet::new();
        for a in self.atoms() {
            match a {
                Atom::FunEq(f, g, _) | Atom::FunGt(f, g, _) => {
                    out.insert(f.clone());
                    out.insert(g.clone());
                }
                Atom::Pred(_, f, _) | Atom::PointMono { f, .. } | Atom::Deriv(f, ..) => {
                    out.insert(f.clone());
                }
                Atom::Num(..) => {}
            }
            for t in a.terms() {
                term_funs(t, &mut out);
            }
        }
        out
    }
}

/// Numerical variables used as function arguments, as interval ends, or as
/// the point of a pointwise predicate.
pub fn collect_domain_vars(formula: &Formula) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for a in formula.atoms() {
        for t in a.terms() {
            t.domain_args(&mut out);
        }
        // a pointwise predicate constrains its point, not a domain interval
        if let Atom::PointMono { at, .. } = a {
            if let NumTerm::Var(v) = at {
                out.insert(v.clone());
            }
            continue;
        }
        if let Some(i) = a.interval() {
            for t in i.terms() {
                if let NumTerm::Var(v) = t {
                    out.insert(v.clone());
                }
            }
        }
    }
    out
}

pub fn substitute_var(formula: &Formula, old: &str, new: &str) -> Formula {
    formula.map_atoms(&mut |a| Formula::Atom(a.map_terms(&mut |t| t.subst(old, new))))
}

/// Prefix reserved for generated variable names.
pub const FRESH_PREFIX: &str = "_t";

/// Counter handing out `_t<N>` names.
#[derive(Clone, Debug, Default)]
pub struct Fresh {
    next: usize,
}

impl Fresh {
    pub fn starting_at(next: usize) -> Self {
        Fresh { next }
    }
    /// A generator whose names do not clash with any `_t<N>` in `names`.
    pub fn after<'a>(names: impl IntoIterator<Item = &'a String>) -> Self {
        let mut next = 0;
        for n in names {
            if let Some(rest) = n.strip_prefix(FRESH_PREFIX) {
                if let Ok(k) = rest.parse::<usize>() {
                    next = next.max(k + 1);
                }
            }
        }
        Fresh { next }
    }
    pub fn var(&mut self) -> String {
        let s = format!("{}{}", FRESH_PREFIX, self.next);
        self.next += 1;
        s
    }
    pub fn peek(&self) -> usize {
        self.next
    }
}

/// Integer sugar as a term built from 0 and 1 only.
pub fn int_term(n: &BigInt) -> NumTerm {
    if n.is_negative() {
        return NumTerm::sub(NumTerm::Zero, int_term(&-n));
    }
    if n.is_zero() {
        return NumTerm::Zero;
    }
    if n.is_one() {
        return NumTerm::One;
    }
    let two = BigInt::from(2);
    let (q, r) = n.div_rem(&two);
    let doubled = NumTerm::mul(NumTerm::add(NumTerm::One, NumTerm::One), int_term(&q));
    if r.is_zero() {
        doubled
    } else {
        NumTerm::add(doubled, NumTerm::One)
    }
}

struct Expander {
    fresh: Fresh,
    defs: Vec<Formula>,
}

impl Expander {
    /// Removes `Num`/`Div` sugar from a term; non-integer constants and
    /// divisions become fresh variables with top-level defining constraints.
    fn term(&mut self, t: &NumTerm) -> NumTerm {
        match t {
            NumTerm::Var(_) | NumTerm::Zero | NumTerm::One => t.clone(),
            NumTerm::Num(q) => {
                if q.is_integer() {
                    int_term(q.numer())
                } else {
                    let s = self.fresh.var();
                    let num = int_term(q.numer());
                    let den = int_term(q.denom());
                    self.defs.push(Formula::num(
                        num,
                        Cmp::Eq,
                        NumTerm::mul(NumTerm::Var(s.clone()), den),
                    ));
                    NumTerm::Var(s)
                }
            }
            NumTerm::Div(a, b) => {
                let a = self.term(a);
                let b = self.term(b);
                let s = self.fresh.var();
                let sv = NumTerm::Var(s.clone());
                self.defs.push(div_eq(&sv, &a, &b));
                sv
            }
            NumTerm::Add(a, b) => NumTerm::add(self.term(a), self.term(b)),
            NumTerm::Sub(a, b) => NumTerm::sub(self.term(a), self.term(b)),
            NumTerm::Mul(a, b) => NumTerm::mul(self.term(a), self.term(b)),
            NumTerm::Apply(f, a) => NumTerm::apply(f, self.term(a)),
            NumTerm::DApply(f, a) => NumTerm::dapply(f, self.term(a)),
        }
    }

    fn ival(&mut self, i: &IntervalSpec) -> IntervalSpec {
        i.map_terms(&mut |t| self.term(t))
    }

    fn atom(&mut self, a: &Atom) -> Formula {
        match a {
            Atom::Num(s, c, t) => self.num_atom(s, *c, t),
            Atom::FunEq(f, g, i) => Formula::Atom(Atom::FunEq(f.clone(), g.clone(), self.ival(i))),
            Atom::FunGt(f, g, i) => Formula::Atom(Atom::FunGt(f.clone(), g.clone(), self.ival(i))),
            Atom::Pred(k, f, i) => {
                let i = self.ival(i);
                self.pred(*k, f, &i)
            }
            Atom::PointMono { up, f, at, ival } => {
                let at = self.term(at);
                let ival = self.ival(ival);
                let rel = if *up { Cmp::Ge } else { Cmp::Le };
                let mut parts = vec![self.num_atom(&NumTerm::dapply(f, at.clone()), rel, &NumTerm::Zero)];
                if let ExtEnd::Term(e1) = &ival.lo {
                    parts.push(Formula::num(at.clone(), Cmp::Gt, e1.clone()));
                }
                if let ExtEnd::Term(e2) = &ival.hi {
                    parts.push(Formula::num(e2.clone(), Cmp::Gt, at.clone()));
                }
                Formula::and_all(parts).expect("nonempty")
            }
            Atom::Deriv(f, c, t, i) => {
                let t = self.term(t);
                let i = self.ival(i);
                if *c == Cmp::Ne {
                    Formula::or(
                        Formula::Atom(Atom::Deriv(f.clone(), Cmp::Lt, t.clone(), i.clone())),
                        Formula::Atom(Atom::Deriv(f.clone(), Cmp::Gt, t, i)),
                    )
                } else {
                    Formula::Atom(Atom::Deriv(f.clone(), *c, t, i))
                }
            }
        }
    }

    fn pred(&mut self, k: PredKind, f: &str, i: &IntervalSpec) -> Formula {
        let deriv = |c: Cmp| Formula::Atom(Atom::Deriv(f.to_string(), c, NumTerm::Zero, i.clone()));
        let prim = |k: PredKind| Formula::Atom(Atom::Pred(k, f.to_string(), i.clone()));
        match k {
            PredKind::Up | PredKind::Down => {
                let d = deriv(if k == PredKind::Up { Cmp::Ge } else { Cmp::Le });
                match (&i.lo, &i.hi) {
                    (ExtEnd::Term(a), ExtEnd::Term(b)) => {
                        Formula::or(d, Formula::num(a.clone(), Cmp::Eq, b.clone()))
                    }
                    _ => d,
                }
            }
            PredKind::Constant => deriv(Cmp::Eq),
            PredKind::Linear => Formula::and(prim(PredKind::Concave), prim(PredKind::Convex)),
            PredKind::Affine => Formula::or(
                deriv(Cmp::Eq),
                Formula::and(prim(PredKind::Concave), prim(PredKind::Convex)),
            ),
            _ => prim(k),
        }
    }

    fn num_atom(&mut self, s: &NumTerm, c: Cmp, t: &NumTerm) -> Formula {
        // top-level divisions get the dedicated encodings
        if let NumTerm::Div(t1, t2) = t {
            if !matches!(s, NumTerm::Div(..)) {
                let s = self.term(s);
                let t1 = self.term(t1);
                let t2 = self.term(t2);
                return div_cmp(&s, c, &t1, &t2);
            }
        }
        if let NumTerm::Div(..) = s {
            if !matches!(t, NumTerm::Div(..)) {
                return self.num_atom(t, c.flip(), s);
            }
        }
        let s = self.term(s);
        let t = self.term(t);
        prim_cmp(&s, c, &t)
    }
}

/// `a ⋈ b` in terms of `=` and `>` only.
fn prim_cmp(a: &NumTerm, c: Cmp, b: &NumTerm) -> Formula {
    let gt = |x: &NumTerm, y: &NumTerm| Formula::num(x.clone(), Cmp::Gt, y.clone());
    let eq = |x: &NumTerm, y: &NumTerm| Formula::num(x.clone(), Cmp::Eq, y.clone());
    match c {
        Cmp::Eq => eq(a, b),
        Cmp::Gt => gt(a, b),
        Cmp::Lt => gt(b, a),
        Cmp::Ne => Formula::or(gt(a, b), gt(b, a)),
        Cmp::Ge => Formula::or(gt(a, b), eq(a, b)),
        Cmp::Le => Formula::or(gt(b, a), eq(a, b)),
    }
}

/// `s = t1/t2` encoding.
fn div_eq(s: &NumTerm, t1: &NumTerm, t2: &NumTerm) -> Formula {
    Formula::and(
        Formula::num(t1.clone(), Cmp::Eq, NumTerm::mul(s.clone(), t2.clone())),
        Formula::num(NumTerm::mul(t2.clone(), t2.clone()), Cmp::Gt, NumTerm::Zero),
    )
}

/// `s ⋈ t1/t2` encodings.
fn div_cmp(s: &NumTerm, c: Cmp, t1: &NumTerm, t2: &NumTerm) -> Formula {
    let st2 = NumTerm::mul(s.clone(), t2.clone());
    let pos = prim_cmp(t2, Cmp::Gt, &NumTerm::Zero);
    let neg = prim_cmp(t2, Cmp::Lt, &NumTerm::Zero);
    // s > t1/t2  <->  (t1 < s·t2 ∧ t2>0) ∨ (t1 > s·t2 ∧ t2<0)
    let gt = |st2: &NumTerm| {
        Formula::or(
            Formula::and(prim_cmp(t1, Cmp::Lt, st2), pos.clone()),
            Formula::and(prim_cmp(t1, Cmp::Gt, st2), neg.clone()),
        )
    };
    let lt = |st2: &NumTerm| {
        Formula::or(
            Formula::and(prim_cmp(t1, Cmp::Gt, st2), pos.clone()),
            Formula::and(prim_cmp(t1, Cmp::Lt, st2), neg.clone()),
        )
    };
    match c {
        Cmp::Eq => div_eq(s, t1, t2),
        Cmp::Gt => gt(&st2),
        Cmp::Lt => lt(&st2),
        Cmp::Ne => Formula::or(gt(&st2), lt(&st2)),
        Cmp::Ge => Formula::or(gt(&st2), div_eq(s, t1, t2)),
        Cmp::Le => Formula::or(lt(&st2), div_eq(s, t1, t2)),
    }
}

/// Rewrites every derived relator into primitive atoms.
///
/// Rational constants and nested divisions are named by fresh variables whose
/// defining constraints are conjoined at the top level.
pub fn expand_derived(formula: &Formula) -> Formula {
    let mut ex = Expander { fresh: Fresh::after(formula.num_vars().iter()), defs: Vec::new() };
    let body = formula.map_atoms(&mut |a| {
        if a.is_primitive() {
            Formula::Atom(a.clone())
        } else {
            ex.atom(a)
        }
    });
    let mut parts = vec![body];
    parts.append(&mut ex.defs);
    Formula::and_all(parts).expect("nonempty")
}

/// Integer-valued rational shortcut used by tests and the corpus builder.
pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

/// Serde helpers writing rationals as `"p/q"` strings.
pub mod rat_str {
    use super::Rat;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(q: &Rat, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&q.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rat, D::Error> {
        let s = String::deserialize(d)?;
        s.parse::<Rat>().map_err(|e| serde::de::Error::custom(format!("bad rational {s:?}: {e:?}")))
    }

    pub mod vec {
        use super::Rat;
        use serde::{Deserialize, Deserializer, Serialize, Serializer};

        pub fn serialize<S: Serializer>(v: &[Rat], s: S) -> Result<S::Ok, S::Error> {
            v.iter().map(|q| q.to_string()).collect::<Vec<_>>().serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rat>, D::Error> {
            Vec::<String>::deserialize(d)?
                .iter()
                .map(|s| s.parse::<Rat>().map_err(|e| serde::de::Error::custom(format!("bad rational {s:?}: {e:?}"))))
                .collect()
        }
    }

    pub mod option {
        use super::Rat;
        use serde::{Deserialize, Deserializer, Serialize, Serializer};

        pub fn serialize<S: Serializer>(v: &Option<Rat>, s: S) -> Result<S::Ok, S::Error> {
            v.as_ref().map(|q| q.to_string()).serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rat>, D::Error> {
            Option::<String>::deserialize(d)?
                .map(|s| s.parse::<Rat>().map_err(|e| serde::de::Error::custom(format!("bad rational {s:?}: {e:?}"))))
                .transpose()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(s: &str) -> NumTerm {
        NumTerm::var(s)
    }

    #[test]
    fn ne_expands_to_two_strict() {
        let f = Formula::num(v("s"), Cmp::Ne, v("t"));
        let e = expand_derived(&f);
        assert_eq!(
            e,
            Formula::or(Formula::num(v("s"), Cmp::Gt, v("t")), Formula::num(v("t"), Cmp::Gt, v("s")))
        );
    }

    #[test]
    fn up_expands_with_endpoint_disjunct() {
        let i = IntervalSpec::closed(v("a"), v("b"));
        let f = Formula::Atom(Atom::Pred(PredKind::Up, "f".into(), i.clone()));
        let e = expand_derived(&f);
        assert_eq!(
            e,
            Formula::or(
                Formula::Atom(Atom::Deriv("f".into(), Cmp::Ge, NumTerm::Zero, i)),
                Formula::num(v("a"), Cmp::Eq, v("b"))
            )
        );
    }

    #[test]
    fn up_on_unbounded_drops_endpoint_disjunct() {
        let i = IntervalSpec::new(ExtEnd::Term(v("a")), ExtEnd::PosInf, true, false);
        let f = Formula::Atom(Atom::Pred(PredKind::Down, "f".into(), i.clone()));
        assert_eq!(
            expand_derived(&f),
            Formula::Atom(Atom::Deriv("f".into(), Cmp::Le, NumTerm::Zero, i))
        );
    }

    #[test]
    fn primitive_formula_is_unchanged() {
        let f = Formula::and(
            Formula::num(v("x"), Cmp::Gt, v("y")),
            Formula::Atom(Atom::Pred(PredKind::Convex, "f".into(), IntervalSpec::real_line())),
        );
        assert_eq!(expand_derived(&f), f);
    }

    #[test]
    fn pointwise_up_drops_infinite_conjuncts() {
        let i = IntervalSpec::new(ExtEnd::NegInf, ExtEnd::Term(v("b")), false, true);
        let f = Formula::Atom(Atom::PointMono { up: true, f: "f".into(), at: v("s"), ival: i });
        let e = expand_derived(&f);
        assert_eq!(e.atoms().len(), 3); // D[f](s)>0, D[f](s)=0, b>s
    }

    #[test]
    fn rational_constant_gets_definition() {
        let f = Formula::num(v("x"), Cmp::Gt, NumTerm::Num(rat(3, 2)));
        let e = expand_derived(&f);
        assert!(e.atoms().iter().all(|a| a.is_primitive()));
        assert!(e.num_vars().contains("_t0"));
    }

    #[test]
    fn integer_sugar_is_closed_term() {
        let t = int_term(&BigInt::from(5));
        assert!(t.is_sugar_free());
        let f = Formula::num(v("x"), Cmp::Eq, NumTerm::Num(rat(5, 1)));
        assert_eq!(expand_derived(&f), Formula::num(v("x"), Cmp::Eq, t));
    }

    #[test]
    fn domain_vars_of_convex_half_line() {
        let i = IntervalSpec::new(ExtEnd::Term(v("x")), ExtEnd::PosInf, true, false);
        let f = Formula::Atom(Atom::Pred(PredKind::Convex, "f".into(), i));
        assert_eq!(collect_domain_vars(&f).into_iter().collect::<Vec<_>>(), vec!["x".to_string()]);
    }

    #[test]
    fn domain_vars_of_applications() {
        let f = Formula::and(
            Formula::num(v("z"), Cmp::Eq, NumTerm::apply("f", v("x"))),
            Formula::num(v("w"), Cmp::Eq, NumTerm::dapply("g", v("u"))),
        );
        let d: Vec<_> = collect_domain_vars(&f).into_iter().collect();
        assert_eq!(d, vec!["u".to_string(), "x".to_string()]);
        assert!(collect_domain_vars(&Formula::num(v("x"), Cmp::Gt, v("y"))).is_empty());
    }

    #[test]
    fn substitution_renames_and_ignores_absent() {
        let f = Formula::num(NumTerm::apply("f", v("a")), Cmp::Gt, NumTerm::Zero);
        let g = substitute_var(&f, "a", "v1");
        assert_eq!(g, Formula::num(NumTerm::apply("f", v("v1")), Cmp::Gt, NumTerm::Zero));
        assert_eq!(substitute_var(&f, "zz", "q"), f);
    }
}
