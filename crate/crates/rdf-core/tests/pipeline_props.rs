use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};
use proptest::prelude::*;

use rdf_core::ast::*;
use rdf_core::check::cleared;
use rdf_core::elim::*;
use rdf_core::normal::*;
use rdf_core::smt::{emit_smtlib, is_balanced};
use rdf_core::tarski::{eval_tarski, NumericModel};

// ---------- arithmetic formulas with interpreted functions ----------

/// `f(x) = x² - 1`, `g(x) = 1 - x`.
fn apply(f: &str, x: &Rat) -> Rat {
    match f {
        "f" => x * x - Rat::one(),
        _ => Rat::one() - x,
    }
}

fn dapply(f: &str, x: &Rat) -> Rat {
    match f {
        "f" => x * rat(2, 1),
        _ => rat(-1, 1),
    }
}

fn eval_term(t: &NumTerm, m: &BTreeMap<String, Rat>) -> Rat {
    match t {
        NumTerm::Var(v) => m[v].clone(),
        NumTerm::Zero => Rat::zero(),
        NumTerm::One => Rat::one(),
        NumTerm::Num(q) => q.clone(),
        NumTerm::Add(a, b) => eval_term(a, m) + eval_term(b, m),
        NumTerm::Sub(a, b) => eval_term(a, m) - eval_term(b, m),
        NumTerm::Mul(a, b) => eval_term(a, m) * eval_term(b, m),
        NumTerm::Div(..) => unreachable!("not generated"),
        NumTerm::Apply(f, a) => apply(f, &eval_term(a, m)),
        NumTerm::DApply(f, a) => dapply(f, &eval_term(a, m)),
    }
}

fn eval_conj(conj: &[Lit], m: &BTreeMap<String, Rat>) -> bool {
    conj.iter().all(|l| match l {
        Lit::Pos(Atom::Num(s, c, t)) => c.holds(&eval_term(s, m), &eval_term(t, m)),
        other => panic!("unexpected literal {other:?}"),
    })
}

fn opnd(o: &Opnd, m: &BTreeMap<String, Rat>) -> Option<Rat> {
    match o {
        Opnd::Var(v) => m.get(v).cloned(),
        Opnd::Zero => Some(Rat::zero()),
        Opnd::One => Some(Rat::one()),
    }
}

/// Evaluates flat literals, solving each defining literal for its single
/// unknown. `None` when some literal is false.
fn run_flat(lits: &[FlatLit], m: &mut BTreeMap<String, Rat>) -> Option<()> {
    let mut done = vec![false; lits.len()];
    loop {
        let mut progress = false;
        for (k, l) in lits.iter().enumerate() {
            if done[k] {
                continue;
            }
            let set = |m: &mut BTreeMap<String, Rat>, o: &Opnd, q: Rat| {
                m.insert(o.as_var().unwrap().to_string(), q);
            };
            let ok = match l {
                FlatLit::Sum { z, x, y } => match (opnd(z, m), opnd(x, m), opnd(y, m)) {
                    (Some(z), Some(x), Some(y)) => Some(z == x + y),
                    (None, Some(x), Some(y)) => {
                        set(m, z, x + y);
                        Some(true)
                    }
                    (Some(z), None, Some(y)) => {
                        set(m, x, z - y);
                        Some(true)
                    }
                    (Some(z), Some(x), None) => {
                        set(m, y, z - x);
                        Some(true)
                    }
                    _ => None,
                },
                FlatLit::Prod { z, x, y } => match (opnd(z, m), opnd(x, m), opnd(y, m)) {
                    (Some(z), Some(x), Some(y)) => Some(z == x * y),
                    (None, Some(x), Some(y)) => {
                        set(m, z, x * y);
                        Some(true)
                    }
                    _ => None,
                },
                FlatLit::Cmp { l: a, rel, r: b } => match (opnd(a, m), opnd(b, m)) {
                    (Some(x), Some(y)) => Some(rel.holds(&x, &y)),
                    (None, Some(y)) if *rel == Cmp::Eq => {
                        set(m, a, y);
                        Some(true)
                    }
                    (Some(x), None) if *rel == Cmp::Eq => {
                        set(m, b, x);
                        Some(true)
                    }
                    _ => None,
                },
                FlatLit::App { z, f, x } | FlatLit::DApp { z, f, x } => {
                    let d = matches!(l, FlatLit::DApp { .. });
                    match m.get(x).cloned() {
                        Some(xv) => {
                            let v = if d { dapply(f, &xv) } else { apply(f, &xv) };
                            match m.get(z) {
                                Some(zv) => Some(*zv == v),
                                None => {
                                    m.insert(z.clone(), v);
                                    Some(true)
                                }
                            }
                        }
                        None => None,
                    }
                }
                FlatLit::Pred { .. } => panic!("not generated"),
            };
            if let Some(ok) = ok {
                if !ok {
                    return None;
                }
                done[k] = true;
                progress = true;
            }
        }
        if done.iter().all(|d| *d) {
            return Some(());
        }
        assert!(progress, "underdetermined literals {lits:?}");
    }
}

fn small_var() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["a", "b", "c"]).prop_map(String::from)
}

fn fun() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["f", "g"]).prop_map(String::from)
}

fn arith_term() -> impl Strategy<Value = NumTerm> {
    let leaf = prop_oneof![3 => small_var().prop_map(NumTerm::Var), 1 => Just(NumTerm::Zero), 1 => Just(NumTerm::One)];
    leaf.prop_recursive(2, 6, 2, |inner| {
        prop_oneof![
            1 => (inner.clone(), inner.clone()).prop_map(|(a, b)| NumTerm::add(a, b)),
            1 => (inner.clone(), inner.clone()).prop_map(|(a, b)| NumTerm::sub(a, b)),
            1 => (inner.clone(), inner.clone()).prop_map(|(a, b)| NumTerm::mul(a, b)),
            2 => (fun(), inner.clone()).prop_map(|(f, a)| NumTerm::apply(&f, a)),
            1 => (fun(), inner).prop_map(|(f, a)| NumTerm::dapply(&f, a)),
        ]
    })
}

fn cmp() -> impl Strategy<Value = Cmp> {
    prop::sample::select(vec![Cmp::Eq, Cmp::Ne, Cmp::Lt, Cmp::Le, Cmp::Gt, Cmp::Ge])
}

fn arith_formula() -> impl Strategy<Value = Formula> {
    prop::collection::vec((arith_term(), cmp(), arith_term()), 1..4)
        .prop_map(|v| Formula::and_all(v.into_iter().map(|(a, c, b)| Formula::num(a, c, b)).collect()).unwrap())
}

fn model() -> impl Strategy<Value = BTreeMap<String, Rat>> {
    (-1..=1i64, -1..=1i64, -1..=1i64).prop_map(|(a, b, c)| {
        [("a", a), ("b", b), ("c", c)].into_iter().map(|(k, v)| (k.to_string(), rat(v, 1))).collect()
    })
}

/// Whether `l` can introduce `v`: `v` occurs once, in a solvable slot.
fn defines(l: &FlatLit, v: &str) -> bool {
    let once = l.num_vars().iter().filter(|x| **x == v).count() == 1;
    once && match l {
        FlatLit::Sum { z, x, .. } => z.as_var() == Some(v) || x.as_var() == Some(v),
        FlatLit::Prod { z, .. } => z.as_var() == Some(v),
        FlatLit::App { z, .. } | FlatLit::DApp { z, .. } => z == v,
        FlatLit::Cmp { l, rel: Cmp::Eq, r } => l.as_var() == Some(v) && r.as_var().is_none(),
        _ => false,
    }
}

/// The model with every merged representative taking the value of an
/// original variable merged into it.
fn seeded(m: &BTreeMap<String, Rat>, oc: &OrderedConjunction) -> BTreeMap<String, Rat> {
    let mut bm = m.clone();
    for (k, rep) in &oc.merged {
        if let Some(v) = m.get(k) {
            bm.entry(rep.clone()).or_insert_with(|| v.clone());
        }
    }
    bm
}

// ---------- function-literal conjunctions ----------

fn end_var() -> impl Strategy<Value = NumTerm> {
    small_var().prop_map(NumTerm::Var)
}

fn interval() -> impl Strategy<Value = IntervalSpec> {
    let lo = prop_oneof![1 => Just(ExtEnd::NegInf), 3 => end_var().prop_map(ExtEnd::Term)];
    let hi = prop_oneof![1 => Just(ExtEnd::PosInf), 3 => end_var().prop_map(ExtEnd::Term)];
    (lo, hi, any::<bool>(), any::<bool>()).prop_map(|(lo, hi, lc, hc)| IntervalSpec::new(lo, hi, lc, hc))
}

fn fn_atom() -> impl Strategy<Value = Atom> {
    let bound = prop_oneof![Just(NumTerm::Zero), Just(NumTerm::One), end_var()];
    prop_oneof![
        2 => (prop::sample::select(PredKind::ALL.to_vec()), fun(), interval()).prop_map(|(k, f, i)| Atom::Pred(k, f, i)),
        1 => (interval()).prop_map(|i| Atom::FunGt("f".into(), "g".into(), i)),
        1 => (interval()).prop_map(|i| Atom::FunEq("f".into(), "g".into(), i)),
        2 => (fun(), cmp(), bound, interval()).prop_map(|(f, c, t, i)| Atom::Deriv(f, c, t, i)),
        1 => (fun(), small_var(), cmp()).prop_map(|(f, x, c)| Atom::Num(NumTerm::apply(&f, NumTerm::var(&x)), c, NumTerm::One)),
        1 => (small_var(), small_var()).prop_map(|(x, y)| Atom::Num(NumTerm::var(&x), Cmp::Lt, NumTerm::var(&y))),
    ]
}

/// Up to three function atoms, at most one of them negated.
fn fn_formula() -> impl Strategy<Value = Formula> {
    (prop::collection::vec(fn_atom(), 1..4), any::<prop::sample::Index>(), any::<bool>()).prop_map(|(atoms, k, neg)| {
        let n = atoms.len();
        let k = k.index(n);
        let parts = atoms
            .into_iter()
            .enumerate()
            .map(|(i, a)| if neg && i == k { Formula::not(Formula::Atom(a)) } else { Formula::Atom(a) })
            .collect();
        Formula::and_all(parts).unwrap()
    })
}

fn endpoint_kind(p: &FnPred) -> bool {
    matches!(p, FnPred::Gt(_) | FnPred::Deriv(Cmp::Gt | Cmp::Lt, _))
}

/// Number of step-4 atoms a literal emits under each rule, from the chain
/// positions of its ends.
fn expected_rule_counts(lit: &FlatLit, tab: &VarTable, out: &mut BTreeMap<&'static str, usize>) {
    let FlatLit::Pred { pred, ival, .. } = lit else { return };
    let (i1, i2) = (tab.ind(&ival.lo), tab.ind(&ival.hi));
    let n = i2 - i1;
    let infs = usize::from(!ival.lo.is_finite()) + usize::from(!ival.hi.is_finite());
    let open_ends = usize::from(ival.lo.is_finite() && !ival.lo_closed) + usize::from(ival.hi.is_finite() && !ival.hi_closed);
    let (rule, count) = match pred {
        FnPred::Eq(_) => ("4a", 2 * (n + 1) + infs),
        FnPred::Gt(_) if infs == 0 => ("4b1", (n + 1 - open_ends) + if n > 0 { open_ends } else { 0 }),
        FnPred::Gt(_) => ("4b2", n + 1 + infs),
        FnPred::Deriv(c, _) => {
            let guards = if matches!(c, Cmp::Le | Cmp::Ge) { n } else { 0 };
            if open_ends == 0 {
                ("4c", n + 1 + n + guards + infs)
            } else {
                ("4d", n + 1 - open_ends + n + guards)
            }
        }
        FnPred::StrictUp | FnPred::StrictDown => ("4e", 2 * n + 1 + infs),
        FnPred::Convex | FnPred::Concave => ("4f", 3 * n + infs),
        FnPred::StrictConvex | FnPred::StrictConcave => ("4g", 2 * n + infs),
    };
    if count > 0 {
        *out.entry(rule).or_default() += count;
    }
}

fn chain_assignment(b: &Branch, vars: &BTreeSet<String>, seed: u64) -> NumericModel {
    // deterministic pseudo-random values; chain strictly increasing
    let mut s = seed | 1;
    let mut next = || {
        s ^= s << 13;
        s ^= s >> 7;
        s ^= s << 17;
        s
    };
    let mut m = BTreeMap::new();
    let mut x = rat((next() % 7) as i64 - 3, 1);
    for v in &b.chain {
        m.insert(v.clone(), x.clone());
        x += rat((next() % 8) as i64 + 1, 4);
    }
    for v in vars {
        m.entry(v.clone()).or_insert_with(|| rat((next() % 41) as i64 - 20, (next() % 4) as i64 + 1));
    }
    NumericModel::exact(m)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn flatten_defines_each_fresh_variable_once(f in arith_formula()) {
        let e = expand_derived(&f);
        let original = e.num_vars();
        let mut fresh = Fresh::after(original.iter());
        for conj in to_dnf(&e) {
            let flat = flatten(&conj, &mut fresh);
            // the first occurrence of a fresh variable is its definition, and
            // every other variable there is already known
            let mut known = original.clone();
            for l in &flat {
                let new: Vec<String> = l.num_vars().iter().filter(|v| !known.contains(**v)).map(|v| v.to_string()).collect();
                prop_assert!(new.len() <= 1, "{} introduces {:?}", l, new);
                if let Some(v) = new.first() {
                    prop_assert!(defines(l, v), "{} does not define {}", l, v);
                    known.insert(v.clone());
                }
            }
        }
    }

    #[test]
    fn flattening_and_orderings_preserve_truth(f in arith_formula(), m in model()) {
        let e = expand_derived(&f);
        let mut fresh = Fresh::after(e.num_vars().iter());
        let mut any_conj = false;
        let mut any_branch = false;
        for conj in to_dnf(&e) {
            let truth = eval_conj(&conj, &m);
            any_conj |= truth;
            let flat = flatten(&conj, &mut fresh);
            let mut fm = m.clone();
            prop_assert_eq!(run_flat(&flat, &mut fm).is_some(), truth);
            let orders = enumerate_orderings(&flat, 8).unwrap();
            for oc in &orders {
                prop_assert!(OrderedConjunction::new(oc.literals.clone(), oc.chain.clone(), oc.merged.clone()).is_ok());
                for (k, rep) in &oc.merged {
                    prop_assert!(!oc.chain.contains(k) && oc.chain.contains(rep));
                    prop_assert!(oc.literals.iter().all(|l| !l.num_vars().contains(&k.as_str())));
                }
                let mut bm = seeded(&m, oc);
                if run_flat(&oc.with_chain_literals(), &mut bm).is_some() {
                    any_branch = true;
                    // the merged names take their representative's value
                    let mut m2 = bm.clone();
                    for (k, rep) in &oc.merged {
                        m2.insert(k.clone(), bm[rep].clone());
                    }
                    let orig: BTreeMap<String, Rat> = m.keys().map(|k| (k.clone(), m2[k].clone())).collect();
                    prop_assert!(eval_conj(&conj, &orig), "branch true but conjunct false");
                }
            }
            if truth {
                let mut hit = false;
                for oc in &orders {
                    let mut bm = seeded(&m, oc);
                    hit |= run_flat(&oc.with_chain_literals(), &mut bm).is_some();
                }
                prop_assert!(hit, "conjunct true but no ordering holds");
            }
        }
        prop_assert!(!any_conj || any_branch);
    }

    #[test]
    fn elimination_steps_keep_their_invariants(f in fn_formula()) {
        let cfg = PipelineConfig::default();
        for b0 in ordered_branches(&f, Mode::Satisfiability, &cfg).unwrap() {
            for b1 in step1_endpoints(b0) {
                let pos: BTreeMap<&str, usize> = b1.chain.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();
                for l in &b1.lits {
                    let FlatLit::Pred { pred, ival, pos: true, .. } = l else { continue };
                    if !endpoint_kind(pred) {
                        prop_assert!(ival.is_closed(), "{}", l);
                        continue;
                    }
                    if !ival.lo.is_finite() || !ival.hi.is_finite() {
                        prop_assert!(ival.is_closed(), "open finite end next to infinity: {}", l);
                    }
                    if let (End::Var(a), End::Var(b)) = (&ival.lo, &ival.hi) {
                        if !ival.lo_closed && !ival.hi_closed {
                            prop_assert!(pos[b.as_str()] >= pos[a.as_str()] + 2, "no midpoint in {}", l);
                        }
                    }
                }
                for b2 in step2_negatives(b1, cfg.branch_cap).unwrap() {
                    let negated = b2.lits.iter().filter(|l| matches!(l, FlatLit::Pred { pos: false, .. })).count();
                    prop_assert_eq!(negated, 0);
                    let b3 = step3_evaluate(b2);
                    let tab = b3.table.clone().unwrap();
                    for g in &tab.functions {
                        for j in 1..=tab.r() {
                            let (y, t) = (tab.y(g, j), tab.t(g, j));
                            let ny = b3.lits.iter().filter(|l| matches!(l, FlatLit::App { z, .. } if *z == y)).count();
                            let nt = b3.lits.iter().filter(|l| matches!(l, FlatLit::DApp { z, .. } if *z == t)).count();
                            prop_assert_eq!((ny, nt), (1, 1), "{} {}", g, j);
                        }
                    }
                    for l in &b3.lits {
                        for x in l.domain_vars() {
                            prop_assert!(b3.chain.iter().any(|c| c == x), "{} outside chain", x);
                        }
                    }
                    let el = eliminate(&b3);
                    let funs: BTreeSet<String> = tab.functions.iter().cloned().collect();
                    let fv = el.formula.free_vars();
                    prop_assert!(fv.is_disjoint(&funs));
                    let mut allowed: BTreeSet<String> = b3.lits.iter()
                        .filter(|l| !matches!(l, FlatLit::Pred { .. }))
                        .flat_map(|l| l.num_vars()).map(String::from).collect();
                    allowed.extend(b3.chain.iter().cloned());
                    for l in &b3.lits {
                        if let FlatLit::Pred { pred: FnPred::Deriv(_, Opnd::Var(v)), .. } = l {
                            allowed.insert(v.clone());
                        }
                    }
                    for g in &tab.functions {
                        allowed.extend([tab.gamma0(g), tab.gammar(g), tab.k0(g), tab.kr(g)]);
                    }
                    prop_assert!(fv.is_subset(&allowed), "{:?}", fv.difference(&allowed).collect::<Vec<_>>());
                    let mut want = BTreeMap::new();
                    for l in &b3.lits {
                        expected_rule_counts(l, &tab, &mut want);
                    }
                    let mut got: BTreeMap<&'static str, usize> = BTreeMap::new();
                    for e in &el.trace {
                        for r in ["4a", "4b1", "4b2", "4c", "4d", "4e", "4f", "4g"] {
                            if e.rule == r {
                                *got.entry(r).or_default() += 1;
                            }
                        }
                    }
                    prop_assert_eq!(got, want, "{}", f);
                }
            }
        }
    }

    #[test]
    fn clearing_divisions_preserves_truth(f in fn_formula(), seed in any::<u64>()) {
        let terminals = pipeline(&f, Mode::Satisfiability, &PipelineConfig::default()).unwrap();
        for (k, t) in terminals.iter().enumerate() {
            let c = cleared(t).unwrap();
            prop_assert!(!c.has_division());
            prop_assert!(is_balanced(&emit_smtlib(&c)));
            let vars = t.phi4().free_vars();
            prop_assert!(c.free_vars().is_subset(&vars));
            for s in 0..8u64 {
                let m = chain_assignment(&t.branch, &vars, seed.wrapping_add(s * 7919 + k as u64));
                prop_assert_eq!(eval_tarski(t.phi4(), &m).unwrap(), eval_tarski(&c, &m).unwrap());
            }
        }
    }
}
