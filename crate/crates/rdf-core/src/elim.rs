//! The four elimination steps on ordered branches and the overall pipeline.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use crate::ast::{expand_derived, Cmp, Formula, Fresh};
use crate::normal::{
    enumerate_orderings, flatten, insert_into_chain, to_dnf, End, FlatLit, FnPred, Ival, NormalError, Opnd,
    OrderedConjunction,
};
use crate::tarski::{Expr, TarskiFormula};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TraceEntry {
    pub rule: String,
    pub literal: String,
}

/// Names of the variables introduced by steps 3 and 4.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VarTable {
    pub chain: Vec<String>,
    pub functions: Vec<String>,
}

impl VarTable {
    pub fn r(&self) -> usize {
        self.chain.len()
    }
    /// `y[f,j]`, value of `f` at `v_j` (1-based).
    pub fn y(&self, f: &str, j: usize) -> String {
        format!("_y_{f}_{j}")
    }
    /// `t[f,j]`, slope of `f` at `v_j` (1-based).
    pub fn t(&self, f: &str, j: usize) -> String {
        format!("_s_{f}_{j}")
    }
    pub fn gamma0(&self, f: &str) -> String {
        format!("_g0_{f}")
    }
    pub fn gammar(&self, f: &str) -> String {
        format!("_gr_{f}")
    }
    pub fn k0(&self, f: &str) -> String {
        format!("_k0_{f}")
    }
    pub fn kr(&self, f: &str) -> String {
        format!("_kr_{f}")
    }
    pub fn ind(&self, e: &End) -> usize {
        match e {
            End::NegInf => 1,
            End::PosInf => self.r(),
            End::Var(v) => self.chain.iter().position(|c| c == v).expect("end is a domain variable") + 1,
        }
    }
    pub fn v(&self, j: usize) -> &str {
        &self.chain[j - 1]
    }
}

#[derive(Clone, Debug)]
pub struct Branch {
    pub lits: Vec<FlatLit>,
    pub chain: Vec<String>,
    pub merged: BTreeMap<String, String>,
    pub table: Option<VarTable>,
    pub trace: Vec<TraceEntry>,
    pub fresh: Fresh,
}

impl Branch {
    pub fn from_ordered(oc: OrderedConjunction, fresh: Fresh) -> Branch {
        Branch { lits: oc.literals, chain: oc.chain, merged: oc.merged, table: None, trace: Vec::new(), fresh }
    }

    fn to_ordered(&self) -> OrderedConjunction {
        OrderedConjunction { literals: self.lits.clone(), chain: self.chain.clone(), merged: self.merged.clone() }
    }

    fn note(&mut self, rule: &str, lit: &FlatLit) {
        self.trace.push(TraceEntry { rule: rule.into(), literal: lit.to_string() });
    }

    fn push(&mut self, rule: &str, lit: FlatLit) {
        self.note(rule, &lit);
        if !self.lits.contains(&lit) {
            self.lits.push(lit);
        }
    }

    fn position(&self, v: &str) -> usize {
        self.chain.iter().position(|c| c == v).expect("domain variable in chain")
    }

    /// Function variables, sorted.
    pub fn functions(&self) -> Vec<String> {
        let s: BTreeSet<String> = self.lits.iter().flat_map(|l| l.functions()).map(String::from).collect();
        s.into_iter().collect()
    }

    /// The literals together with the chain comparisons.
    pub fn literals_with_chain(&self) -> Vec<FlatLit> {
        let mut out = self.lits.clone();
        out.extend(crate::normal::chain_literals(&self.chain));
        out
    }

    fn is_empty(&self, ival: &Ival) -> bool {
        match (&ival.lo, &ival.hi) {
            (End::Var(a), End::Var(b)) => {
                let (pa, pb) = (self.position(a), self.position(b));
                pa > pb || (pa == pb && !(ival.lo_closed && ival.hi_closed))
            }
            _ => false,
        }
    }
}

fn is_endpoint_kind(pred: &FnPred) -> bool {
    matches!(pred, FnPred::Gt(_) | FnPred::Deriv(Cmp::Gt | Cmp::Lt, _))
}

/// Touch literals at `w`: `f(w) = g(w)` or `D[f](w) = t`.
fn touch(b: &mut Branch, rule: &str, f: &str, pred: &FnPred, w: &str) {
    let z = b.fresh.var();
    match pred {
        FnPred::Gt(g) => {
            b.push(rule, FlatLit::app(&z, f, w));
            b.push(rule, FlatLit::app(&z, g, w));
        }
        FnPred::Deriv(_, t) => {
            b.push(rule, FlatLit::dapp(&z, f, w));
            b.push(rule, FlatLit::cmp(Opnd::var(&z), Cmp::Eq, t.clone()));
        }
        _ => unreachable!(),
    }
}

/// Rules 1a-1d for one positive endpoint-sensitive literal on a non-empty,
/// non-closed interval.
fn split_endpoint_literal(mut b: Branch, f: &str, pred: &FnPred, ival: &Ival) -> Vec<Branch> {
    let deriv = matches!(pred, FnPred::Deriv(..));
    let (r_unb, r_open, r_mid) = if deriv { ("1c", "1d1", "1d3") } else { ("1a", "1b1", "1b3") };
    let mk = |ival: Ival| FlatLit::Pred { f: f.into(), pred: pred.clone(), ival, pos: true };
    let mut ival = ival.clone();
    match (&ival.lo, &ival.hi) {
        (End::NegInf, End::Var(w2)) if !ival.hi_closed => {
            let w2 = w2.clone();
            let p = b.position(&w2);
            let w1 = if p > 0 {
                b.chain[p - 1].clone()
            } else {
                let w = b.fresh.var();
                b.chain.insert(0, w.clone());
                b.trace.push(TraceEntry { rule: r_unb.into(), literal: format!("{w} < {w2}") });
                w
            };
            b.push(r_unb, mk(Ival::new(End::NegInf, End::Var(w1.clone()), false, true)));
            ival = Ival::new(End::Var(w1), End::Var(w2), true, false);
        }
        (End::Var(w1), End::PosInf) if !ival.lo_closed => {
            let w1 = w1.clone();
            let p = b.position(&w1);
            let w2 = if p + 1 < b.chain.len() {
                b.chain[p + 1].clone()
            } else {
                let w = b.fresh.var();
                b.chain.insert(p + 1, w.clone());
                b.trace.push(TraceEntry { rule: r_unb.into(), literal: format!("{w1} < {w}") });
                w
            };
            b.push(r_unb, mk(Ival::new(End::Var(w2.clone()), End::PosInf, true, false)));
            ival = Ival::new(End::Var(w1), End::Var(w2), false, true);
        }
        (End::Var(_), End::Var(_)) => {}
        // both ends infinite, or the finite end closed
        _ => {
            b.lits.push(mk(ival));
            return vec![b];
        }
    }
    let (w1, w2) = (ival.lo.as_var().unwrap().to_string(), ival.hi.as_var().unwrap().to_string());
    // each open end is either closed or kept open with a touch literal
    let lo_opts: &[bool] = if ival.lo_closed { &[false] } else { &[false, true] };
    let hi_opts: &[bool] = if ival.hi_closed { &[false] } else { &[false, true] };
    let mut out = Vec::new();
    for &t_lo in lo_opts {
        for &t_hi in hi_opts {
            let mut nb = b.clone();
            let alt = Ival::new(End::Var(w1.clone()), End::Var(w2.clone()), !t_lo, !t_hi);
            nb.push(r_open, mk(alt));
            if t_lo {
                touch(&mut nb, r_open, f, pred, &w1);
            }
            if t_hi {
                touch(&mut nb, r_open, f, pred, &w2);
            }
            if t_lo && t_hi && nb.position(&w2) == nb.position(&w1) + 1 {
                let w = nb.fresh.var();
                let z = nb.fresh.var();
                let p = nb.position(&w1);
                nb.chain.insert(p + 1, w.clone());
                nb.trace.push(TraceEntry { rule: r_mid.into(), literal: format!("{w1} < {w} < {w2}") });
                nb.push(r_mid, FlatLit::app(&z, f, &w));
            }
            out.push(nb);
        }
    }
    out
}

/// Step 1: endpoint case splits, removal of literals on empty intervals and
/// closing of the remaining open intervals.
pub fn step1_endpoints(branch: Branch) -> Vec<Branch> {
    let mut base = branch;
    let lits = std::mem::take(&mut base.lits);
    let mut alts = vec![base];
    for lit in lits {
        let FlatLit::Pred { f, pred, ival, pos } = &lit else {
            for b in alts.iter_mut() {
                b.lits.push(lit.clone());
            }
            continue;
        };
        let mut next = Vec::new();
        for mut b in alts {
            if b.is_empty(ival) {
                b.note("empty", &lit);
                if *pos {
                    next.push(b);
                }
                // a negated literal on an empty interval is false: the branch dies
                continue;
            }
            if *pos && is_endpoint_kind(pred) && !ival.is_closed() {
                next.extend(split_endpoint_literal(b, f, pred, ival));
            } else if !ival.is_closed() && !is_endpoint_kind(pred) {
                let closed = FlatLit::Pred { f: f.clone(), pred: pred.clone(), ival: ival.closure(), pos: *pos };
                b.note("close", &closed);
                b.lits.push(closed);
                next.push(b);
            } else {
                b.lits.push(lit.clone());
                next.push(b);
            }
        }
        alts = next;
    }
    alts
}

/// Step 2: negated function literals become existential witnesses; the new
/// domain variables are inserted into the chain in every consistent way.
pub fn step2_negatives(branch: Branch, cap: usize) -> Result<Vec<Branch>, NormalError> {
    let mut b = branch;
    let lits = std::mem::take(&mut b.lits);
    let mut new_vars: Vec<String> = Vec::new();
    for lit in lits {
        let FlatLit::Pred { f, pred, ival, pos: false } = &lit else {
            b.lits.push(lit);
            continue;
        };
        let n = match pred {
            FnPred::StrictUp | FnPred::StrictDown => 2,
            FnPred::Convex | FnPred::StrictConvex | FnPred::Concave | FnPred::StrictConcave => 3,
            _ => 1,
        };
        let xs: Vec<String> = (0..n).map(|_| b.fresh.var()).collect();
        let rule = match pred {
            FnPred::Eq(_) => "2a",
            FnPred::Gt(_) => "2b",
            FnPred::Deriv(..) => "2c",
            FnPred::StrictUp | FnPred::StrictDown => "2d",
            _ => "2e",
        };
        b.note(rule, &lit);
        // z1 ≼ x_1 < ... < x_n ≼ z2, strict at open ends
        if let End::Var(z1) = &ival.lo {
            let rel = if ival.lo_closed { Cmp::Ge } else { Cmp::Gt };
            b.push(rule, FlatLit::vcmp(&xs[0], rel, z1));
        }
        if let End::Var(z2) = &ival.hi {
            let rel = if ival.hi_closed { Cmp::Le } else { Cmp::Lt };
            b.push(rule, FlatLit::vcmp(&xs[n - 1], rel, z2));
        }
        for w in xs.windows(2) {
            b.push(rule, FlatLit::vcmp(&w[0], Cmp::Lt, &w[1]));
        }
        let ys: Vec<String> = (0..n.max(2)).map(|_| b.fresh.var()).collect();
        match pred {
            FnPred::Eq(g) | FnPred::Gt(g) => {
                b.push(rule, FlatLit::app(&ys[0], f, &xs[0]));
                b.push(rule, FlatLit::app(&ys[1], g, &xs[0]));
                let rel = if matches!(pred, FnPred::Eq(_)) { Cmp::Ne } else { Cmp::Le };
                b.push(rule, FlatLit::vcmp(&ys[0], rel, &ys[1]));
            }
            FnPred::Deriv(c, t) => {
                b.push(rule, FlatLit::dapp(&ys[0], f, &xs[0]));
                b.push(rule, FlatLit::cmp(Opnd::var(&ys[0]), c.negate(), t.clone()));
            }
            FnPred::StrictUp | FnPred::StrictDown => {
                b.push(rule, FlatLit::app(&ys[0], f, &xs[0]));
                b.push(rule, FlatLit::app(&ys[1], f, &xs[1]));
                let rel = if matches!(pred, FnPred::StrictUp) { Cmp::Ge } else { Cmp::Le };
                b.push(rule, FlatLit::vcmp(&ys[0], rel, &ys[1]));
            }
            _ => {
                for i in 0..3 {
                    b.push(rule, FlatLit::app(&ys[i], f, &xs[i]));
                }
                let rel = match pred {
                    FnPred::Convex => Cmp::Gt,
                    FnPred::StrictConvex => Cmp::Ge,
                    FnPred::Concave => Cmp::Lt,
                    _ => Cmp::Le,
                };
                // (y2-y1)(x3-x1) rel (x2-x1)(y3-y1), flattened
                let d: Vec<String> = (0..6).map(|_| b.fresh.var()).collect();
                let v = |s: &str| Opnd::var(s);
                b.push(rule, FlatLit::Sum { z: v(&ys[1]), x: v(&d[0]), y: v(&ys[0]) });
                b.push(rule, FlatLit::Sum { z: v(&xs[2]), x: v(&d[1]), y: v(&xs[0]) });
                b.push(rule, FlatLit::Sum { z: v(&xs[1]), x: v(&d[2]), y: v(&xs[0]) });
                b.push(rule, FlatLit::Sum { z: v(&ys[2]), x: v(&d[3]), y: v(&ys[0]) });
                b.push(rule, FlatLit::Prod { z: v(&d[4]), x: v(&d[0]), y: v(&d[1]) });
                b.push(rule, FlatLit::Prod { z: v(&d[5]), x: v(&d[2]), y: v(&d[3]) });
                b.push(rule, FlatLit::vcmp(&d[4], rel, &d[5]));
            }
        }
        new_vars.extend(xs);
    }
    if new_vars.is_empty() {
        return Ok(vec![b]);
    }
    let ocs = insert_into_chain(&b.to_ordered(), &new_vars, cap)?;
    Ok(ocs
        .into_iter()
        .map(|oc| {
            let mut nb = b.clone();
            nb.lits = oc.literals;
            nb.chain = oc.chain;
            nb.merged = oc.merged;
            nb
        })
        .collect())
}

/// Step 3: names the value and slope of every function at every chain entry.
pub fn step3_evaluate(branch: Branch) -> Branch {
    let mut b = branch;
    let funs = b.functions();
    if !funs.is_empty() && b.chain.is_empty() {
        let v = b.fresh.var();
        b.trace.push(TraceEntry { rule: "3".into(), literal: format!("domain variable {v}") });
        b.chain.push(v);
    }
    let table = VarTable { chain: b.chain.clone(), functions: funs.clone() };
    let existing: Vec<FlatLit> = b.lits.clone();
    for f in &funs {
        for j in 1..=table.r() {
            let v = table.v(j).to_string();
            b.push("3", FlatLit::app(&table.y(f, j), f, &v));
            b.push("3", FlatLit::dapp(&table.t(f, j), f, &v));
        }
    }
    for l in &existing {
        match l {
            FlatLit::App { z, f, x } => {
                let j = table.ind(&End::Var(x.clone()));
                b.push("3", FlatLit::vcmp(z, Cmp::Eq, &table.y(f, j)));
            }
            FlatLit::DApp { z, f, x } => {
                let j = table.ind(&End::Var(x.clone()));
                b.push("3", FlatLit::vcmp(z, Cmp::Eq, &table.t(f, j)));
            }
            _ => {}
        }
    }
    b.table = Some(table);
    b
}

/// Bound `γ^f_side rel e` recorded while eliminating unbounded literals.
#[derive(Clone, Debug, PartialEq)]
pub struct GammaBound {
    pub f: String,
    /// `false` for the left tail (index 0), `true` for the right tail (index r).
    pub right: bool,
    pub rel: Cmp,
    pub rhs: Expr,
}

/// Output of step 4.
#[derive(Clone, Debug)]
pub struct Elimination {
    pub formula: TarskiFormula,
    /// Chain differences `v_{j+1} - v_j`, positive in every model.
    pub known_positive: Vec<Expr>,
    pub gamma_bounds: Vec<GammaBound>,
    /// `(f, g, right)` for every `k^f ≥ k^g` after closure.
    pub k_edges: Vec<(String, String, bool)>,
    pub trace: Vec<TraceEntry>,
}

fn opnd_expr(o: &Opnd) -> Expr {
    match o {
        Opnd::Var(v) => Expr::var(v),
        Opnd::Zero => Expr::int(0),
        Opnd::One => Expr::int(1),
    }
}

struct Eliminator<'a> {
    tab: &'a VarTable,
    out: Vec<TarskiFormula>,
    trace: Vec<TraceEntry>,
    gammas: Vec<GammaBound>,
    k_edges: BTreeSet<(String, String, bool)>,
}

impl Eliminator<'_> {
    fn emit(&mut self, rule: &str, f: TarskiFormula) {
        self.trace.push(TraceEntry { rule: rule.into(), literal: f.to_string() });
        if !self.out.contains(&f) {
            self.out.push(f);
        }
    }
    fn cmp(&mut self, rule: &str, a: Expr, c: Cmp, b: Expr) {
        self.emit(rule, TarskiFormula::cmp(a, c, b));
    }
    fn y(&self, f: &str, j: usize) -> Expr {
        Expr::var(&self.tab.y(f, j))
    }
    fn t(&self, f: &str, j: usize) -> Expr {
        Expr::var(&self.tab.t(f, j))
    }
    fn secant(&self, f: &str, j: usize) -> Expr {
        Expr::secant(&self.tab.y(f, j + 1), &self.tab.y(f, j), self.tab.v(j + 1), self.tab.v(j))
    }
    fn gamma(&mut self, rule: &str, f: &str, right: bool, rel: Cmp, rhs: Expr) {
        let g = if right { self.tab.gammar(f) } else { self.tab.gamma0(f) };
        self.cmp(rule, Expr::var(&g), rel, rhs.clone());
        self.gammas.push(GammaBound { f: f.into(), right, rel, rhs });
    }
    /// `(secant_j = y) → (t_j = y ∧ t_{j+1} = y)`
    fn guard(&mut self, rule: &str, f: &str, j: usize, y: &Expr) {
        let s = TarskiFormula::cmp(self.secant(f, j), Cmp::Eq, y.clone());
        let c = TarskiFormula::And(vec![
            TarskiFormula::cmp(self.t(f, j), Cmp::Eq, y.clone()),
            TarskiFormula::cmp(self.t(f, j + 1), Cmp::Eq, y.clone()),
        ]);
        self.emit(rule, TarskiFormula::implies(s, c));
    }

    fn literal(&mut self, f: &str, pred: &FnPred, ival: &Ival) {
        let tab = self.tab;
        let (i1, i2) = (tab.ind(&ival.lo), tab.ind(&ival.hi));
        let (lo_inf, hi_inf) = (!ival.lo.is_finite(), !ival.hi.is_finite());
        match pred {
            FnPred::Eq(g) => {
                for i in i1..=i2 {
                    self.cmp("4a", self.y(f, i), Cmp::Eq, self.y(g, i));
                    self.cmp("4a", self.t(f, i), Cmp::Eq, self.t(g, i));
                }
                for (inf, right) in [(lo_inf, false), (hi_inf, true)] {
                    if inf {
                        let (gf, gg) = if right { (tab.gammar(f), tab.gammar(g)) } else { (tab.gamma0(f), tab.gamma0(g)) };
                        self.gamma("4a", f, right, Cmp::Eq, Expr::var(&gg));
                        self.gammas.push(GammaBound { f: g.clone(), right, rel: Cmp::Eq, rhs: Expr::var(&gf) });
                    }
                }
            }
            FnPred::Gt(g) => {
                if !lo_inf && !hi_inf {
                    let from = if ival.lo_closed { i1 } else { i1 + 1 };
                    let to = if ival.hi_closed { i2 as isize } else { i2 as isize - 1 };
                    for i in from as isize..=to {
                        self.cmp("4b1", self.y(f, i as usize), Cmp::Gt, self.y(g, i as usize));
                    }
                    if i1 < i2 {
                        if !ival.lo_closed {
                            self.cmp("4b1", self.t(f, i1), Cmp::Ge, self.t(g, i1));
                        }
                        if !ival.hi_closed {
                            self.cmp("4b1", self.t(f, i2), Cmp::Le, self.t(g, i2));
                        }
                    }
                } else {
                    for i in i1..=i2 {
                        self.cmp("4b2", self.y(f, i), Cmp::Gt, self.y(g, i));
                    }
                    for (inf, right) in [(lo_inf, false), (hi_inf, true)] {
                        if inf {
                            let (kf, kg) = if right { (tab.kr(f), tab.kr(g)) } else { (tab.k0(f), tab.k0(g)) };
                            self.cmp("4b2", Expr::var(&kf), Cmp::Ge, Expr::var(&kg));
                            self.k_edges.insert((f.into(), g.clone(), right));
                        }
                    }
                }
            }
            FnPred::Deriv(c, y) => {
                let y = opnd_expr(y);
                let closed = ival.is_closed();
                let rule = if closed { "4c" } else { "4d" };
                let from = if closed || ival.lo_closed { i1 } else { i1 + 1 };
                let to = if closed || ival.hi_closed { i2 as isize } else { i2 as isize - 1 };
                for i in from as isize..=to {
                    self.cmp(rule, self.t(f, i as usize), *c, y.clone());
                }
                for j in i1..i2 {
                    self.cmp(rule, self.secant(f, j), *c, y.clone());
                    if matches!(c, Cmp::Le | Cmp::Ge) {
                        self.guard(rule, f, j, &y);
                    }
                }
                if closed {
                    if lo_inf {
                        self.gamma(rule, f, false, *c, y.clone());
                    }
                    if hi_inf {
                        self.gamma(rule, f, true, *c, y.clone());
                    }
                }
            }
            FnPred::StrictUp | FnPred::StrictDown => {
                let up = matches!(pred, FnPred::StrictUp);
                let (weak, strict) = if up { (Cmp::Ge, Cmp::Gt) } else { (Cmp::Le, Cmp::Lt) };
                for i in i1..=i2 {
                    self.cmp("4e", self.t(f, i), weak, Expr::zero());
                }
                for j in i1..i2 {
                    self.cmp("4e", self.y(f, j + 1), strict, self.y(f, j));
                }
                if lo_inf {
                    self.gamma("4e", f, false, strict, Expr::zero());
                }
                if hi_inf {
                    self.gamma("4e", f, true, strict, Expr::zero());
                }
            }
            FnPred::Convex | FnPred::Concave => {
                let rel = if matches!(pred, FnPred::Convex) { Cmp::Le } else { Cmp::Ge };
                for i in i1..i2 {
                    let s = self.secant(f, i);
                    self.cmp("4f", self.t(f, i), rel, s.clone());
                    self.cmp("4f", s.clone(), rel, self.t(f, i + 1));
                    let hyp = TarskiFormula::Or(vec![
                        TarskiFormula::cmp(s.clone(), Cmp::Eq, self.t(f, i)),
                        TarskiFormula::cmp(s, Cmp::Eq, self.t(f, i + 1)),
                    ]);
                    let concl = TarskiFormula::cmp(self.t(f, i), Cmp::Eq, self.t(f, i + 1));
                    self.emit("4f", TarskiFormula::implies(hyp, concl));
                }
                if lo_inf {
                    self.gamma("4f", f, false, rel, self.t(f, 1));
                }
                if hi_inf {
                    self.gamma("4f", f, true, rel.flip(), self.t(f, tab.r()));
                }
            }
            FnPred::StrictConvex | FnPred::StrictConcave => {
                let rel = if matches!(pred, FnPred::StrictConvex) { Cmp::Lt } else { Cmp::Gt };
                for i in i1..i2 {
                    let s = self.secant(f, i);
                    self.cmp("4g", self.t(f, i), rel, s.clone());
                    self.cmp("4g", s, rel, self.t(f, i + 1));
                }
                if lo_inf {
                    self.gamma("4g", f, false, rel, self.t(f, 1));
                }
                if hi_inf {
                    self.gamma("4g", f, true, rel.flip(), self.t(f, tab.r()));
                }
            }
        }
    }

    /// Rule 4h: box constraints, transitive closure and limit compatibility.
    fn k_rules(&mut self) {
        if self.k_edges.is_empty() {
            return;
        }
        let tab = self.tab;
        let kname = |f: &str, right: bool| if right { tab.kr(f) } else { tab.k0(f) };
        let vars: BTreeSet<(String, bool)> = self
            .k_edges
            .iter()
            .flat_map(|(f, g, r)| [(f.clone(), *r), (g.clone(), *r)])
            .collect();
        for (f, right) in &vars {
            let k = Expr::var(&kname(f, *right));
            self.cmp("4h", Expr::int(-1), Cmp::Le, k.clone());
            self.cmp("4h", k, Cmp::Le, Expr::int(1));
        }
        loop {
            let edges: Vec<_> = self.k_edges.iter().cloned().collect();
            let mut added = false;
            for (f, g, r) in &edges {
                for (g2, h, r2) in &edges {
                    if g == g2 && r == r2 && !self.k_edges.contains(&(f.clone(), h.clone(), *r)) {
                        let i = if *r { tab.r() } else { 1 };
                        self.cmp("4h", Expr::var(&kname(f, *r)), Cmp::Ge, Expr::var(&kname(h, *r)));
                        self.cmp("4h", self.y(f, i), Cmp::Gt, self.y(h, i));
                        self.k_edges.insert((f.clone(), h.clone(), *r));
                        added = true;
                    }
                }
            }
            if !added {
                break;
            }
        }
        let lower = |c: Cmp| matches!(c, Cmp::Ge | Cmp::Gt | Cmp::Eq);
        let upper = |c: Cmp| matches!(c, Cmp::Le | Cmp::Lt | Cmp::Eq);
        let edges: Vec<_> = self.k_edges.iter().cloned().collect();
        for (f, g, right) in edges {
            let gf: Vec<GammaBound> =
                self.gammas.iter().filter(|b| b.f == f && b.right == right).cloned().collect();
            let gg: Vec<GammaBound> =
                self.gammas.iter().filter(|b| b.f == g && b.right == right).cloned().collect();
            for bf in &gf {
                for bg in &gg {
                    if !right && lower(bf.rel) && upper(bg.rel) {
                        self.cmp("4h", bf.rhs.clone(), Cmp::Le, bg.rhs.clone());
                    }
                    if right && upper(bf.rel) && lower(bg.rel) {
                        self.cmp("4h", bf.rhs.clone(), Cmp::Ge, bg.rhs.clone());
                    }
                }
            }
        }
    }
}

/// The arithmetic literals of a branch as Tarski atoms.
pub fn flat_to_tarski(l: &FlatLit) -> Option<TarskiFormula> {
    Some(match l {
        FlatLit::Sum { z, x, y } => {
            TarskiFormula::cmp(opnd_expr(z), Cmp::Eq, Expr::add(opnd_expr(x), opnd_expr(y)))
        }
        FlatLit::Prod { z, x, y } => {
            TarskiFormula::cmp(opnd_expr(z), Cmp::Eq, Expr::mul(opnd_expr(x), opnd_expr(y)))
        }
        FlatLit::Cmp { l, rel, r } => TarskiFormula::cmp(opnd_expr(l), *rel, opnd_expr(r)),
        _ => return None,
    })
}

/// Step 4 with its bookkeeping.
pub fn eliminate(branch: &Branch) -> Elimination {
    let owned;
    let tab = match &branch.table {
        Some(t) => t,
        None => {
            owned = VarTable { chain: branch.chain.clone(), functions: branch.functions() };
            &owned
        }
    };
    let mut el =
        Eliminator { tab, out: Vec::new(), trace: Vec::new(), gammas: Vec::new(), k_edges: BTreeSet::new() };
    for w in branch.chain.windows(2) {
        el.out.push(TarskiFormula::cmp(Expr::var(&w[0]), Cmp::Lt, Expr::var(&w[1])));
    }
    for l in &branch.lits {
        if let Some(t) = flat_to_tarski(l) {
            if !el.out.contains(&t) {
                el.out.push(t);
            }
        }
    }
    for l in &branch.lits {
        if let FlatLit::Pred { f, pred, ival, pos } = l {
            assert!(*pos, "step 2 removes negated function literals");
            el.literal(f, pred, ival);
        }
    }
    el.k_rules();
    let known_positive =
        branch.chain.windows(2).map(|w| Expr::sub(Expr::var(&w[1]), Expr::var(&w[0]))).collect();
    let formula = match el.out.len() {
        0 => TarskiFormula::True,
        _ => TarskiFormula::And(el.out),
    };
    Elimination {
        formula,
        known_positive,
        gamma_bounds: el.gammas,
        k_edges: el.k_edges.into_iter().collect(),
        trace: el.trace,
    }
}

/// Step 4: the function-free formula of a branch.
pub fn step4_eliminate(branch: &Branch) -> TarskiFormula {
    eliminate(branch).formula
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Mode {
    Satisfiability,
    Validity,
}

#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub branch_cap: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig { branch_cap: 8 }
    }
}

/// A branch after step 4, with the step-3 branch kept for witness building.
#[derive(Clone, Debug)]
pub struct Terminal {
    pub index: usize,
    pub branch: Branch,
    pub elimination: Elimination,
}

impl Terminal {
    pub fn phi4(&self) -> &TarskiFormula {
        &self.elimination.formula
    }
    pub fn trace(&self) -> Vec<TraceEntry> {
        let mut t = self.branch.trace.clone();
        t.extend(self.elimination.trace.iter().cloned());
        t
    }
}

/// Branches of a formula before step 1, one per DNF conjunct and ordering.
pub fn ordered_branches(formula: &Formula, mode: Mode, cfg: &PipelineConfig) -> Result<Vec<Branch>, NormalError> {
    let f = match mode {
        Mode::Satisfiability => formula.clone(),
        Mode::Validity => Formula::not(formula.clone()),
    };
    let e = expand_derived(&f);
    let mut fresh = Fresh::after(e.num_vars().iter());
    let mut out = Vec::new();
    for conj in to_dnf(&e) {
        let flat = flatten(&conj, &mut fresh);
        for oc in enumerate_orderings(&flat, cfg.branch_cap)? {
            out.push(Branch::from_ordered(oc, fresh.clone()));
        }
    }
    Ok(out)
}

/// Runs steps 1-4 on every ordered branch.
pub fn pipeline(formula: &Formula, mode: Mode, cfg: &PipelineConfig) -> Result<Vec<Terminal>, NormalError> {
    let mut out = Vec::new();
    for b in ordered_branches(formula, mode, cfg)? {
        for b1 in step1_endpoints(b) {
            for b2 in step2_negatives(b1, cfg.branch_cap)? {
                let b3 = step3_evaluate(b2);
                let elimination = eliminate(&b3);
                out.push(Terminal { index: out.len(), branch: b3, elimination });
            }
        }
    }
    Ok(out)
}

/// Index of every chain variable (and merged alias) in a step-3 branch.
pub fn chain_index(b: &Branch) -> HashMap<String, usize> {
    let mut m: HashMap<String, usize> = b.chain.iter().enumerate().map(|(i, v)| (v.clone(), i + 1)).collect();
    for (k, v) in &b.merged {
        if let Some(i) = m.get(v).copied() {
            m.insert(k.clone(), i);
        }
    }
    m
}
