use proptest::prelude::*;

use rdf_core::ast::*;
use rdf_core::parser::{parse_formula, render_formula};

fn var() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["x", "y", "a", "b", "c"]).prop_map(String::from)
}

fn fun() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["f", "g", "h"]).prop_map(String::from)
}

/// Numerals the printer writes back as themselves: integers from 2 up and
/// terminating decimals.
fn numeral() -> impl Strategy<Value = Rat> {
    prop_oneof![
        (2..60i64).prop_map(|n| rat(n, 1)),
        (1..400i64).prop_filter("non-integer", |k| k % 8 != 0).prop_map(|k| rat(k, 8)),
        (1..100i64).prop_filter("non-integer", |k| k % 10 != 0).prop_map(|k| rat(k, 10)),
    ]
}

fn term() -> impl Strategy<Value = NumTerm> {
    let leaf = prop_oneof![
        3 => var().prop_map(NumTerm::Var),
        1 => Just(NumTerm::Zero),
        1 => Just(NumTerm::One),
        1 => numeral().prop_map(NumTerm::Num),
    ];
    leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| NumTerm::add(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| NumTerm::sub(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| NumTerm::mul(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| NumTerm::div(a, b)),
            (fun(), inner.clone()).prop_map(|(f, a)| NumTerm::apply(&f, a)),
            (fun(), inner).prop_map(|(f, a)| NumTerm::dapply(&f, a)),
        ]
    })
}

/// Interval ends are usually variables, as in real formulas.
fn end_term() -> impl Strategy<Value = NumTerm> {
    prop_oneof![4 => var().prop_map(NumTerm::Var), 1 => term()]
}

fn interval() -> impl Strategy<Value = IntervalSpec> {
    let lo = prop_oneof![1 => Just(ExtEnd::NegInf), 4 => end_term().prop_map(ExtEnd::Term)];
    let hi = prop_oneof![1 => Just(ExtEnd::PosInf), 4 => end_term().prop_map(ExtEnd::Term)];
    (lo, hi, any::<bool>(), any::<bool>()).prop_map(|(lo, hi, lc, hc)| IntervalSpec::new(lo, hi, lc, hc))
}

fn cmp() -> impl Strategy<Value = Cmp> {
    prop::sample::select(vec![Cmp::Eq, Cmp::Ne, Cmp::Lt, Cmp::Le, Cmp::Gt, Cmp::Ge])
}

fn atom() -> impl Strategy<Value = Atom> {
    prop_oneof![
        3 => (term(), cmp(), term()).prop_map(|(a, c, b)| Atom::Num(a, c, b)),
        1 => (fun(), fun(), interval()).prop_map(|(f, g, i)| Atom::FunEq(f, g, i)),
        1 => (fun(), fun(), interval()).prop_map(|(f, g, i)| Atom::FunGt(f, g, i)),
        2 => (prop::sample::select(PredKind::ALL.to_vec()), fun(), interval()).prop_map(|(k, f, i)| Atom::Pred(k, f, i)),
        1 => (any::<bool>(), fun(), term(), interval())
            .prop_map(|(up, f, at, ival)| Atom::PointMono { up, f, at, ival }),
        2 => (fun(), cmp(), term(), interval()).prop_map(|(f, c, t, i)| Atom::Deriv(f, c, t, i)),
    ]
}

fn formula() -> impl Strategy<Value = Formula> {
    atom().prop_map(Formula::Atom).prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Formula::not),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::and(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::or(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::implies(a, b)),
            (inner.clone(), inner).prop_map(|(a, b)| Formula::iff(a, b)),
        ]
    })
}

const ALPHABET: &[&str] = &[
    "x", "f", "(", ")", "[", "]", ",", " ", "&", "|", "!", "->", "<->", "=", ">", "<=", "D[f]", "on", "+inf", "-inf",
    "Gt", "StrictUp", "1", "2.5", "*", "/", "-", "+", "#", "$", "Eq(f,g)",
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn render_then_parse_is_identity(f in formula()) {
        let text = render_formula(&f);
        let back = parse_formula(&text);
        prop_assert_eq!(back.as_ref(), Ok(&f), "{}", text);
    }

    #[test]
    fn expansion_is_idempotent(f in formula()) {
        let e = expand_derived(&f);
        prop_assert_eq!(expand_derived(&e), e);
    }

    #[test]
    fn every_atom_expands_to_primitive_atoms(a in atom()) {
        let e = expand_derived(&Formula::Atom(a.clone()));
        let atoms = e.atoms();
        prop_assert!(!atoms.is_empty());
        for b in atoms {
            prop_assert!(b.is_primitive(), "{} gives non-primitive {:?}", render_formula(&Formula::Atom(a.clone())), b);
        }
    }

    #[test]
    fn expansion_keeps_domain_variables(f in formula()) {
        let before = collect_domain_vars(&f);
        let after = collect_domain_vars(&expand_derived(&f));
        prop_assert!(before.is_subset(&after), "{:?} vs {:?}", before, after);
    }

    #[test]
    fn error_spans_lie_inside_input(parts in prop::collection::vec(prop::sample::select(ALPHABET.to_vec()), 0..20)) {
        let text = parts.concat();
        if let Err(e) = parse_formula(&text) {
            let s = e.span();
            prop_assert!(s.start <= s.end && s.end <= text.len(), "{:?} in {:?}", s, text);
        }
    }

    #[test]
    fn truncated_formulas_report_spans_inside_input(f in formula(), cut in any::<prop::sample::Index>()) {
        let text = render_formula(&f);
        let mut k = cut.index(text.len());
        while !text.is_char_boundary(k) {
            k -= 1;
        }
        let part = &text[..k];
        if let Err(e) = parse_formula(part) {
            let s = e.span();
            prop_assert!(s.start <= s.end && s.end <= part.len(), "{:?} in {:?}", s, part);
        }
    }
}
