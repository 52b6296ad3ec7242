//! Flat literals, disjunctive normal form and ordered form.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::ast::{int_term, Atom, Cmp, ExtEnd, Formula, Fresh, IntervalSpec, NumTerm, PredKind};

/// Operand of an arithmetic flat literal.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Opnd {
    Var(String),
    Zero,
    One,
}

impl Opnd {
    pub fn var(s: &str) -> Opnd {
        Opnd::Var(s.to_string())
    }
    pub fn as_var(&self) -> Option<&str> {
        match self {
            Opnd::Var(v) => Some(v),
            _ => None,
        }
    }
    fn rename(&mut self, old: &str, new: &str) {
        if let Opnd::Var(v) = self {
            if v == old {
                *v = new.to_string();
            }
        }
    }
}

impl fmt::Display for Opnd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Opnd::Var(v) => write!(f, "{v}"),
            Opnd::Zero => write!(f, "0"),
            Opnd::One => write!(f, "1"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum End {
    NegInf,
    PosInf,
    Var(String),
}

impl End {
    pub fn as_var(&self) -> Option<&str> {
        match self {
            End::Var(v) => Some(v),
            _ => None,
        }
    }
    pub fn is_finite(&self) -> bool {
        matches!(self, End::Var(_))
    }
}

impl fmt::Display for End {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            End::NegInf => write!(f, "-inf"),
            End::PosInf => write!(f, "+inf"),
            End::Var(v) => write!(f, "{v}"),
        }
    }
}

/// Interval with variable or infinite ends. Infinite ends are never closed.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ival {
    pub lo: End,
    pub hi: End,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Ival {
    pub fn new(lo: End, hi: End, lo_closed: bool, hi_closed: bool) -> Ival {
        let lc = lo_closed && lo.is_finite();
        let hc = hi_closed && hi.is_finite();
        Ival { lo, hi, lo_closed: lc, hi_closed: hc }
    }
    pub fn closed(a: &str, b: &str) -> Ival {
        Ival::new(End::Var(a.into()), End::Var(b.into()), true, true)
    }
    /// Every finite end is closed.
    pub fn is_closed(&self) -> bool {
        (self.lo_closed || !self.lo.is_finite()) && (self.hi_closed || !self.hi.is_finite())
    }
    pub fn closure(&self) -> Ival {
        Ival::new(self.lo.clone(), self.hi.clone(), true, true)
    }
    pub fn ends(&self) -> impl Iterator<Item = &str> {
        self.lo.as_var().into_iter().chain(self.hi.as_var())
    }
    fn rename(&mut self, old: &str, new: &str) {
        for e in [&mut self.lo, &mut self.hi] {
            if let End::Var(v) = e {
                if v == old {
                    *v = new.to_string();
                }
            }
        }
    }
}

impl fmt::Display for Ival {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let l = if self.lo_closed { '[' } else { '(' };
        let r = if self.hi_closed { ']' } else { ')' };
        write!(f, "{l}{}, {}{r}", self.lo, self.hi)
    }
}

/// Interval predicates of the flat form, attached to a subject function.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FnPred {
    Eq(String),
    Gt(String),
    StrictUp,
    StrictDown,
    Convex,
    StrictConvex,
    Concave,
    StrictConcave,
    Deriv(Cmp, Opnd),
}

impl FnPred {
    fn from_kind(k: PredKind) -> FnPred {
        match k {
            PredKind::StrictUp => FnPred::StrictUp,
            PredKind::StrictDown => FnPred::StrictDown,
            PredKind::Convex => FnPred::Convex,
            PredKind::StrictConvex => FnPred::StrictConvex,
            PredKind::Concave => FnPred::Concave,
            PredKind::StrictConcave => FnPred::StrictConcave,
            other => panic!("{} must be expanded before flattening", other.name()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FlatLit {
    /// `z = x + y`
    Sum { z: Opnd, x: Opnd, y: Opnd },
    /// `z = x · y`
    Prod { z: Opnd, x: Opnd, y: Opnd },
    Cmp { l: Opnd, rel: Cmp, r: Opnd },
    /// `z = f(x)`
    App { z: String, f: String, x: String },
    /// `z = D[f](x)`
    DApp { z: String, f: String, x: String },
    Pred { f: String, pred: FnPred, ival: Ival, pos: bool },
}

impl FlatLit {
    pub fn cmp(l: Opnd, rel: Cmp, r: Opnd) -> FlatLit {
        FlatLit::Cmp { l, rel, r }
    }
    pub fn vcmp(l: &str, rel: Cmp, r: &str) -> FlatLit {
        FlatLit::Cmp { l: Opnd::var(l), rel, r: Opnd::var(r) }
    }
    pub fn app(z: &str, f: &str, x: &str) -> FlatLit {
        FlatLit::App { z: z.into(), f: f.into(), x: x.into() }
    }
    pub fn dapp(z: &str, f: &str, x: &str) -> FlatLit {
        FlatLit::DApp { z: z.into(), f: f.into(), x: x.into() }
    }

    pub fn is_function_literal(&self) -> bool {
        matches!(self, FlatLit::App { .. } | FlatLit::DApp { .. } | FlatLit::Pred { .. })
    }

    pub fn functions(&self) -> Vec<&str> {
        match self {
            FlatLit::App { f, .. } | FlatLit::DApp { f, .. } => vec![f],
            FlatLit::Pred { f, pred: FnPred::Eq(g) | FnPred::Gt(g), .. } => vec![f, g],
            FlatLit::Pred { f, .. } => vec![f],
            _ => Vec::new(),
        }
    }

    pub fn domain_vars(&self) -> Vec<&str> {
        match self {
            FlatLit::App { x, .. } | FlatLit::DApp { x, .. } => vec![x],
            FlatLit::Pred { ival, .. } => ival.ends().collect(),
            _ => Vec::new(),
        }
    }

    pub fn num_vars(&self) -> Vec<&str> {
        match self {
            FlatLit::Sum { z, x, y } | FlatLit::Prod { z, x, y } => {
                [z, x, y].into_iter().filter_map(|o| o.as_var()).collect()
            }
            FlatLit::Cmp { l, r, .. } => [l, r].into_iter().filter_map(|o| o.as_var()).collect(),
            FlatLit::App { z, x, .. } | FlatLit::DApp { z, x, .. } => vec![z, x],
            FlatLit::Pred { pred, ival, .. } => {
                let mut v: Vec<&str> = ival.ends().collect();
                if let FnPred::Deriv(_, t) = pred {
                    v.extend(t.as_var());
                }
                v
            }
        }
    }

    pub fn rename(&mut self, old: &str, new: &str) {
        let rn = |s: &mut String| {
            if s == old {
                *s = new.to_string();
            }
        };
        match self {
            FlatLit::Sum { z, x, y } | FlatLit::Prod { z, x, y } => {
                z.rename(old, new);
                x.rename(old, new);
                y.rename(old, new);
            }
            FlatLit::Cmp { l, r, .. } => {
                l.rename(old, new);
                r.rename(old, new);
            }
            FlatLit::App { z, x, .. } | FlatLit::DApp { z, x, .. } => {
                rn(z);
                rn(x);
            }
            FlatLit::Pred { pred, ival, .. } => {
                ival.rename(old, new);
                if let FnPred::Deriv(_, t) = pred {
                    t.rename(old, new);
                }
            }
        }
    }
}

impl fmt::Display for FlatLit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FlatLit::Sum { z, x, y } => write!(f, "{z} = {x} + {y}"),
            FlatLit::Prod { z, x, y } => write!(f, "{z} = {x} * {y}"),
            FlatLit::Cmp { l, rel, r } => write!(f, "{l} {} {r}", rel.symbol()),
            FlatLit::App { z, f: g, x } => write!(f, "{z} = {g}({x})"),
            FlatLit::DApp { z, f: g, x } => write!(f, "{z} = D[{g}]({x})"),
            FlatLit::Pred { f: g, pred, ival, pos } => {
                let neg = if *pos { "" } else { "!" };
                match pred {
                    FnPred::Eq(h) => write!(f, "{neg}Eq({g}, {h}) on {ival}"),
                    FnPred::Gt(h) => write!(f, "{neg}Gt({g}, {h}) on {ival}"),
                    FnPred::Deriv(c, t) => write!(f, "{neg}(D[{g}] {} {t}) on {ival}", c.symbol()),
                    other => {
                        let name = match other {
                            FnPred::StrictUp => "StrictUp",
                            FnPred::StrictDown => "StrictDown",
                            FnPred::Convex => "Convex",
                            FnPred::StrictConvex => "StrictConvex",
                            FnPred::Concave => "Concave",
                            _ => "StrictConcave",
                        };
                        write!(f, "{neg}{name}({g}) on {ival}")
                    }
                }
            }
        }
    }
}

/// Literal of a DNF conjunct: arithmetic atoms are always positive.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Lit {
    Pos(Atom),
    Neg(Atom),
}

fn product(a: Vec<Vec<Lit>>, b: Vec<Vec<Lit>>) -> Vec<Vec<Lit>> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in &a {
        for y in &b {
            let mut c = x.clone();
            for l in y {
                if !c.contains(l) {
                    c.push(l.clone());
                }
            }
            out.push(c);
        }
    }
    out
}

fn num_lit(s: &NumTerm, c: Cmp, t: &NumTerm) -> Vec<Vec<Lit>> {
    let gt = |a: &NumTerm, b: &NumTerm| Lit::Pos(Atom::Num(a.clone(), Cmp::Gt, b.clone()));
    let eq = Lit::Pos(Atom::Num(s.clone(), Cmp::Eq, t.clone()));
    match c {
        Cmp::Eq => vec![vec![eq]],
        Cmp::Gt => vec![vec![gt(s, t)]],
        Cmp::Lt => vec![vec![gt(t, s)]],
        Cmp::Ge => vec![vec![gt(s, t)], vec![eq]],
        Cmp::Le => vec![vec![gt(t, s)], vec![eq]],
        Cmp::Ne => vec![vec![gt(s, t)], vec![gt(t, s)]],
    }
}

fn dnf(f: &Formula, pos: bool) -> Vec<Vec<Lit>> {
    match f {
        Formula::Atom(Atom::Num(s, c, t)) => num_lit(s, if pos { *c } else { c.negate() }, t),
        Formula::Atom(a) => vec![vec![if pos { Lit::Pos(a.clone()) } else { Lit::Neg(a.clone()) }]],
        Formula::Not(a) => dnf(a, !pos),
        Formula::And(a, b) if pos => product(dnf(a, true), dnf(b, true)),
        Formula::And(a, b) => [dnf(a, false), dnf(b, false)].concat(),
        Formula::Or(a, b) if pos => [dnf(a, true), dnf(b, true)].concat(),
        Formula::Or(a, b) => product(dnf(a, false), dnf(b, false)),
        Formula::Implies(a, b) if pos => [dnf(a, false), dnf(b, true)].concat(),
        Formula::Implies(a, b) => product(dnf(a, true), dnf(b, false)),
        Formula::Iff(a, b) if pos => {
            [product(dnf(a, true), dnf(b, true)), product(dnf(a, false), dnf(b, false))].concat()
        }
        Formula::Iff(a, b) => {
            [product(dnf(a, true), dnf(b, false)), product(dnf(a, false), dnf(b, true))].concat()
        }
    }
}

/// Disjunctive normal form. Negated arithmetic comparisons become positive
/// disjunctions (`¬(s>t)` gives `t>s ∨ s=t`); only function atoms stay negated.
pub fn to_dnf(formula: &Formula) -> Vec<Vec<Lit>> {
    let mut out: Vec<Vec<Lit>> = Vec::new();
    for c in dnf(formula, true) {
        if !out.contains(&c) {
            out.push(c);
        }
    }
    out
}

struct Flattener<'a> {
    fresh: &'a mut Fresh,
    out: Vec<FlatLit>,
    cache: HashMap<NumTerm, Opnd>,
}

impl Flattener<'_> {
    fn def(&mut self, t: &NumTerm, mk: impl FnOnce(Opnd) -> FlatLit) -> Opnd {
        if let Some(o) = self.cache.get(t) {
            return o.clone();
        }
        let z = Opnd::Var(self.fresh.var());
        self.out.push(mk(z.clone()));
        self.cache.insert(t.clone(), z.clone());
        z
    }

    fn term(&mut self, t: &NumTerm) -> Opnd {
        match t {
            NumTerm::Var(v) => Opnd::Var(v.clone()),
            NumTerm::Zero => Opnd::Zero,
            NumTerm::One => Opnd::One,
            NumTerm::Num(q) => {
                assert!(q.is_integer(), "rational constants must be expanded before flattening");
                let it = int_term(q.numer());
                self.term(&it)
            }
            NumTerm::Div(..) => panic!("divisions must be expanded before flattening"),
            NumTerm::Add(a, b) => {
                let (x, y) = (self.term(a), self.term(b));
                self.def(t, |z| FlatLit::Sum { z, x, y })
            }
            NumTerm::Sub(a, b) => {
                // z = a - b  as  a = z + b
                let (x, y) = (self.term(a), self.term(b));
                self.def(t, |z| FlatLit::Sum { z: x, x: z, y })
            }
            NumTerm::Mul(a, b) => {
                let (x, y) = (self.term(a), self.term(b));
                self.def(t, |z| FlatLit::Prod { z, x, y })
            }
            NumTerm::Apply(f, a) | NumTerm::DApply(f, a) => {
                let x = self.var(a);
                let d = matches!(t, NumTerm::DApply(..));
                self.def(t, |z| {
                    let z = z.as_var().unwrap().to_string();
                    if d {
                        FlatLit::DApp { z, f: f.clone(), x }
                    } else {
                        FlatLit::App { z, f: f.clone(), x }
                    }
                })
            }
        }
    }

    /// Names a term by a variable (constants get a defining equality).
    fn var(&mut self, t: &NumTerm) -> String {
        match self.term(t) {
            Opnd::Var(v) => v,
            c => {
                let key = NumTerm::add(t.clone(), NumTerm::Zero);
                match self.cache.get(&key) {
                    Some(Opnd::Var(v)) => v.clone(),
                    _ => {
                        let z = self.fresh.var();
                        self.out.push(FlatLit::Cmp { l: Opnd::Var(z.clone()), rel: Cmp::Eq, r: c });
                        self.cache.insert(key, Opnd::Var(z.clone()));
                        z
                    }
                }
            }
        }
    }

    fn end(&mut self, e: &ExtEnd) -> End {
        match e {
            ExtEnd::NegInf => End::NegInf,
            ExtEnd::PosInf => End::PosInf,
            ExtEnd::Term(t) => End::Var(self.var(t)),
        }
    }

    fn ival(&mut self, i: &IntervalSpec) -> Ival {
        let lo = self.end(&i.lo);
        let hi = self.end(&i.hi);
        Ival::new(lo, hi, i.lo_closed, i.hi_closed)
    }

    fn lit(&mut self, l: &Lit) {
        let (a, pos) = match l {
            Lit::Pos(a) => (a, true),
            Lit::Neg(a) => (a, false),
        };
        let lit = match a {
            Atom::Num(s, c, t) => {
                assert!(pos, "negated arithmetic atoms are rewritten by to_dnf");
                let (l, r) = (self.term(s), self.term(t));
                FlatLit::Cmp { l, rel: *c, r }
            }
            Atom::FunEq(f, g, i) => {
                FlatLit::Pred { f: f.clone(), pred: FnPred::Eq(g.clone()), ival: self.ival(i), pos }
            }
            Atom::FunGt(f, g, i) => {
                FlatLit::Pred { f: f.clone(), pred: FnPred::Gt(g.clone()), ival: self.ival(i), pos }
            }
            Atom::Pred(k, f, i) => {
                FlatLit::Pred { f: f.clone(), pred: FnPred::from_kind(*k), ival: self.ival(i), pos }
            }
            Atom::Deriv(f, c, t, i) => {
                assert!(*c != Cmp::Ne, "(D[f] != t) must be expanded before flattening");
                let t = self.term(t);
                FlatLit::Pred { f: f.clone(), pred: FnPred::Deriv(*c, t), ival: self.ival(i), pos }
            }
            Atom::PointMono { .. } => panic!("pointwise monotonicity must be expanded before flattening"),
        };
        if !self.out.contains(&lit) {
            self.out.push(lit);
        }
    }
}

/// Names every compound subterm by a fresh variable. Definitions precede
/// their uses and each fresh variable has exactly one defining literal.
pub fn flatten(conj: &[Lit], fresh: &mut Fresh) -> Vec<FlatLit> {
    let mut fl = Flattener { fresh, out: Vec::new(), cache: HashMap::new() };
    for l in conj {
        fl.lit(l);
    }
    fl.out
}

/// Domain variables of flat literals, in order of first occurrence.
pub fn flat_domain_vars(lits: &[FlatLit]) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for l in lits {
        for v in l.domain_vars() {
            if seen.insert(v.to_string()) {
                out.push(v.to_string());
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NormalError {
    #[error("{count} domain variables exceed the branch cap of {cap}")]
    BranchExplosion { count: usize, cap: usize },
}

/// Flat literals with a strict chain over all domain variables.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderedConjunction {
    pub literals: Vec<FlatLit>,
    pub chain: Vec<String>,
    /// Eliminated name to its representative in the chain.
    pub merged: BTreeMap<String, String>,
}

impl OrderedConjunction {
    /// Checked constructor: the chain must list every domain variable once.
    pub fn new(
        literals: Vec<FlatLit>,
        chain: Vec<String>,
        merged: BTreeMap<String, String>,
    ) -> Result<Self, String> {
        let set: BTreeSet<&String> = chain.iter().collect();
        if set.len() != chain.len() {
            return Err("chain repeats a variable".into());
        }
        for v in flat_domain_vars(&literals) {
            if !set.contains(&v) {
                return Err(format!("domain variable `{v}` missing from chain"));
            }
        }
        Ok(OrderedConjunction { literals, chain, merged })
    }

    /// The literals together with `v_i < v_{i+1}` for consecutive chain entries.
    pub fn with_chain_literals(&self) -> Vec<FlatLit> {
        let mut out = self.literals.clone();
        out.extend(chain_literals(&self.chain));
        out
    }
}

pub fn chain_literals(chain: &[String]) -> Vec<FlatLit> {
    chain.windows(2).map(|w| FlatLit::vcmp(&w[0], Cmp::Lt, &w[1])).collect()
}

fn const_value(o: &Opnd) -> Option<i32> {
    match o {
        Opnd::Zero => Some(0),
        Opnd::One => Some(1),
        Opnd::Var(_) => None,
    }
}

/// `false` when the literal is syntactically refuted by the block positions,
/// or is a false comparison of constants.
fn consistent(l: &FlatLit, pos: &HashMap<String, usize>) -> bool {
    if let FlatLit::Cmp { l, rel, r } = l {
        if let (Some(a), Some(b)) = (const_value(l), const_value(r)) {
            return rel.holds(&a, &b);
        }
        if let (Some(a), Some(b)) = (l.as_var(), r.as_var()) {
            if a == b {
                return rel.holds(&0, &0);
            }
            if let (Some(i), Some(j)) = (pos.get(a), pos.get(b)) {
                return rel.holds(i, j);
            }
        }
    }
    true
}

/// A weak order under construction: ordered blocks of equal variables.
#[derive(Clone)]
struct WeakOrder {
    blocks: Vec<Vec<String>>,
}

impl WeakOrder {
    fn positions(&self) -> HashMap<String, usize> {
        let mut m = HashMap::new();
        for (i, b) in self.blocks.iter().enumerate() {
            for v in b {
                m.insert(v.clone(), i);
            }
        }
        m
    }
}

/// Extends the weak order `base` with `new_vars` in every way consistent with
/// the comparison literals among placed variables. Blocks of `base` keep their
/// first element as representative.
fn extend_orders(base: WeakOrder, new_vars: &[String], lits: &[FlatLit]) -> Vec<WeakOrder> {
    // comparison literals indexed by the variables they mention
    let mut by_var: HashMap<&str, Vec<&FlatLit>> = HashMap::new();
    for l in lits {
        if let FlatLit::Cmp { l: a, r: b, .. } = l {
            for v in [a, b].into_iter().filter_map(|o| o.as_var()) {
                by_var.entry(v).or_default().push(l);
            }
        }
    }
    let mut current = vec![base];
    for x in new_vars {
        let mut next = Vec::new();
        for wo in &current {
            let n = wo.blocks.len();
            let mut candidates = Vec::with_capacity(2 * n + 1);
            for i in 0..n {
                let mut c = wo.clone();
                c.blocks[i].push(x.clone());
                candidates.push(c);
            }
            for i in 0..=n {
                let mut c = wo.clone();
                c.blocks.insert(i, vec![x.clone()]);
                candidates.push(c);
            }
            for c in candidates {
                let pos = c.positions();
                let ok = by_var.get(x.as_str()).is_none_or(|ls| ls.iter().all(|l| consistent(l, &pos)));
                if ok {
                    next.push(c);
                }
            }
        }
        current = next;
    }
    current
}

fn realize(
    wo: &WeakOrder,
    lits: &[FlatLit],
    mut merged: BTreeMap<String, String>,
) -> OrderedConjunction {
    let mut literals = lits.to_vec();
    let mut chain = Vec::with_capacity(wo.blocks.len());
    for b in &wo.blocks {
        let rep = &b[0];
        for other in &b[1..] {
            for l in literals.iter_mut() {
                l.rename(other, rep);
            }
            for v in merged.values_mut() {
                if v == other {
                    *v = rep.clone();
                }
            }
            merged.insert(other.clone(), rep.clone());
        }
        chain.push(rep.clone());
    }
    let mut dedup: Vec<FlatLit> = Vec::with_capacity(literals.len());
    for l in literals {
        // comparisons between chain variables are now implied by the chain
        if !dedup.contains(&l) {
            dedup.push(l);
        }
    }
    OrderedConjunction { literals: dedup, chain, merged }
}

/// One branch per weak order of the domain variables consistent with the
/// comparison literals between them; variables in one block are merged.
pub fn enumerate_orderings(flat: &[FlatLit], cap: usize) -> Result<Vec<OrderedConjunction>, NormalError> {
    let pos = HashMap::new();
    if flat.iter().any(|l| !consistent(l, &pos)) {
        return Ok(Vec::new());
    }
    let dvars = flat_domain_vars(flat);
    if dvars.len() > cap {
        return Err(NormalError::BranchExplosion { count: dvars.len(), cap });
    }
    let orders = extend_orders(WeakOrder { blocks: Vec::new() }, &dvars, flat);
    Ok(orders.iter().map(|wo| realize(wo, flat, BTreeMap::new())).collect())
}

/// Inserts `new_vars` into an existing strict chain in every consistent way
/// (between chain entries or merged with one of them).
pub fn insert_into_chain(
    oc: &OrderedConjunction,
    new_vars: &[String],
    cap: usize,
) -> Result<Vec<OrderedConjunction>, NormalError> {
    if new_vars.len() > cap {
        return Err(NormalError::BranchExplosion { count: new_vars.len(), cap });
    }
    let base = WeakOrder { blocks: oc.chain.iter().map(|v| vec![v.clone()]).collect() };
    let orders = extend_orders(base, new_vars, &oc.literals);
    Ok(orders.iter().map(|wo| realize(wo, &oc.literals, oc.merged.clone())).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::expand_derived;
    use crate::parser::parse_formula;

    fn flat_of(src: &str) -> Vec<FlatLit> {
        let f = expand_derived(&parse_formula(src).unwrap());
        let d = to_dnf(&f);
        assert_eq!(d.len(), 1);
        let mut fresh = Fresh::after(f.num_vars().iter());
        flatten(&d[0], &mut fresh)
    }

    #[test]
    fn two_domain_vars_give_three_orders() {
        let fl = flat_of("f(a) = g(b)");
        let br = enumerate_orderings(&fl, 8).unwrap();
        assert_eq!(br.len(), 3);
        let chains: Vec<Vec<String>> = br.iter().map(|b| b.chain.clone()).collect();
        assert!(chains.contains(&vec!["a".into(), "b".into()]));
        assert!(chains.contains(&vec!["b".into(), "a".into()]));
        assert!(chains.contains(&vec!["a".into()]));
    }

    #[test]
    fn three_domain_vars_give_thirteen_orders() {
        let fl = flat_of("f(a) = f(b) & f(c) > 0");
        assert_eq!(enumerate_orderings(&fl, 8).unwrap().len(), 13);
    }

    #[test]
    fn one_domain_var_one_branch() {
        let fl = flat_of("f(a) > 0");
        assert_eq!(enumerate_orderings(&fl, 8).unwrap().len(), 1);
    }

    #[test]
    fn ordering_prunes_on_chain_literals() {
        let fl = flat_of("f(a) = g(b) & a < b");
        let br = enumerate_orderings(&fl, 8).unwrap();
        assert_eq!(br.len(), 1);
        assert_eq!(br[0].chain, vec!["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn cap_is_enforced() {
        let fl = flat_of("f(a) = f(b) & f(c) > 0");
        assert_eq!(
            enumerate_orderings(&fl, 2),
            Err(NormalError::BranchExplosion { count: 3, cap: 2 })
        );
    }

    #[test]
    fn merging_substitutes_representative() {
        let fl = flat_of("f(a) = g(b)");
        let br = enumerate_orderings(&fl, 8).unwrap();
        let m = br.iter().find(|b| b.chain.len() == 1).unwrap();
        assert_eq!(m.merged.get("b"), Some(&"a".to_string()));
        assert!(m.literals.iter().all(|l| !l.num_vars().contains(&"b")));
    }

    #[test]
    fn flatten_shapes() {
        let fl = flat_of("f(x + y) > 0");
        assert_eq!(
            fl,
            vec![
                FlatLit::Sum { z: Opnd::var("_t0"), x: Opnd::var("x"), y: Opnd::var("y") },
                FlatLit::app("_t1", "f", "_t0"),
                FlatLit::cmp(Opnd::var("_t1"), Cmp::Gt, Opnd::Zero),
            ]
        );
        let fl = flat_of("D[f](a) = f(b)");
        assert_eq!(
            fl,
            vec![
                FlatLit::dapp("_t0", "f", "a"),
                FlatLit::app("_t1", "f", "b"),
                FlatLit::vcmp("_t0", Cmp::Eq, "_t1"),
            ]
        );
    }

    #[test]
    fn flat_input_is_fixpoint() {
        let fl = flat_of("x > y & z = f(x)");
        assert_eq!(fl, vec![FlatLit::vcmp("x", Cmp::Gt, "y"), FlatLit::app("_t0", "f", "x"), FlatLit::vcmp("z", Cmp::Eq, "_t0")]);
    }

    #[test]
    fn dnf_distributes() {
        let f = parse_formula("(x > y | y > z) & z > w").unwrap();
        let d = to_dnf(&f);
        assert_eq!(d.len(), 2);
        assert!(d.iter().all(|c| c.len() == 2));
        let f = parse_formula("!(StrictUp(f) on [a,b] & Convex(f) on [a,b])").unwrap();
        let d = to_dnf(&f);
        assert_eq!(d.len(), 2);
        assert!(d.iter().all(|c| matches!(c[..], [Lit::Neg(_)])));
    }

    #[test]
    fn negated_comparison_is_positive_disjunction() {
        let d = to_dnf(&parse_formula("!(x > y)").unwrap());
        assert_eq!(d.len(), 2);
        assert!(d.iter().flatten().all(|l| matches!(l, Lit::Pos(_))));
    }

    #[test]
    fn constant_contradiction_prunes_everything() {
        let fl = vec![FlatLit::cmp(Opnd::Zero, Cmp::Gt, Opnd::One)];
        assert!(enumerate_orderings(&fl, 8).unwrap().is_empty());
    }
}
