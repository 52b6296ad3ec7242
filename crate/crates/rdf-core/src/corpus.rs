//! Built-in corpus of valid formulas from elementary real analysis.

use crate::ast::Formula;
use crate::parser::{parse_formula, ParseError};

pub struct Entry {
    pub name: &'static str,
    pub source: &'static str,
}

impl Entry {
    pub fn formula(&self) -> Result<Formula, ParseError> {
        parse_formula(self.source)
    }
}

macro_rules! corpus {
    ($($name:literal),* $(,)?) => {
        &[$(Entry { name: $name, source: include_str!(concat!("../corpus/", $name, ".rdf")) }),*]
    };
}

pub const CORPUS: &[Entry] = corpus![
    "scop168",
    "scop177",
    "two_one",
    "constant_slope",
    "rolle",
    "lagrange",
    "diverging",
    "tangent_convex",
    "linear_agree",
    "single_crossing",
    "interior_max",
    "convex_min",
];

pub fn entry(name: &str) -> Option<&'static Entry> {
    CORPUS.iter().find(|e| e.name == name)
}

/// `premise -> conclusion` with the conclusion negated.
pub fn negate_conclusion(f: &Formula) -> Option<Formula> {
    match f {
        Formula::Implies(p, c) => Some(Formula::implies((**p).clone(), Formula::not((**c).clone()))),
        _ => None,
    }
}

/// The `scop177` entry with its `Linear` premise weakened to `Concave`.
pub fn scop177_concave() -> Formula {
    let src = entry("scop177").expect("entry").source.replace("Linear(g)", "Concave(g)");
    parse_formula(&src).expect("corpus entry parses")
}

/// Satisfiable formulas exercising witness construction: monotonicity,
/// convexity, `f > g` on open, closed and unbounded intervals, derivative
/// bounds and a negated literal.
pub const SAT_SUITE: &[&str] = &[
    "StrictUp(f) on [a,b] & f(a) = 0 & f(b) = 1 & a < b",
    "StrictConvex(f) on [a,b] & a < b & D[f](a) = -1 & D[f](b) = 2",
    "Convex(f) on (-inf,+inf) & f(0) = 1",
    "Gt(f,g) on (a,b) & f(a) = g(a) & f(b) = g(b) & a < b",
    "Gt(f,g) on [a,b] & a < b & D[f](a) < D[g](a)",
    "Gt(f,g) on [a,+inf) & D[f](a) < 0 & D[g](a) > 0",
    "Gt(f,g) on (-inf,+inf) & StrictUp(g) on (-inf,+inf)",
    "(D[f] > 1) on (-inf,+inf) & f(0) = 0",
    "(D[f] >= 0) on [a,b] & (D[f] <= 1) on [a,b] & f(a) = 0 & f(b) = 1 & a < b",
    "StrictDown(f) on [a,+inf) & StrictConcave(f) on [a,+inf)",
    "StrictConvex(f) on (-inf,+inf) & Gt(f,g) on (-inf,+inf)",
    "Gt(f,g) on (-inf,a] & Gt(g,f) on [b,+inf) & a < b",
    "(D[f] < 0) on (a,b) & f(a) = f(b) + 1 & a < b",
    "Eq(f,g) on [a,b] & Gt(f,h) on [a,b] & a < b",
    "Concave(f) on [a,b] & f(a) = 0 & f(b) = 0 & f(c) = 1 & a < c & c < b",
    "StrictUp(f) on (-inf,+inf) & StrictDown(g) on (-inf,+inf) & f(x) = g(x)",
    "Gt(f,g) on (a,+inf) & f(a) = g(a) & D[f](a) = D[g](a)",
    "StrictConvex(f) on [a,b] & StrictConcave(g) on [a,b] & Gt(g,f) on (a,b) & f(a) = g(a) & f(b) = g(b) & a < b",
    "!(D[f] >= 0) on [a,b] & StrictConvex(f) on [a,b] & a < b",
    "Gt(f,g) on (-inf,+inf) & Gt(g,h) on (-inf,+inf)",
];
